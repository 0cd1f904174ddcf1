//! Completely monotone generator network.
//!
//! Every hidden unit multiplies a convex combination of the previous layer's
//! outputs by a negative exponential `exp(-b t)`; the output unit is a plain
//! convex combination of the last hidden layer. Products and convex
//! combinations of negative-exponential mixtures are again such mixtures, so
//! the network is a Laplace transform of a positive discrete variable and
//! hence completely monotone with `phi(0) = 1` and `phi(inf) = 0`.
//!
//! Mixing weights are stored raw and mapped row-wise through softmax; rates
//! are stored raw and mapped through `exp`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::{expand_upper, newton_bracketed, RootOptions};

/// Value, first and second derivative of a scalar function at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub const ONE: Jet = Jet {
        value: 1.0,
        d1: 0.0,
        d2: 0.0,
    };
    pub const ZERO: Jet = Jet {
        value: 0.0,
        d1: 0.0,
        d2: 0.0,
    };

    #[inline]
    fn axpy(&mut self, a: f64, other: &Jet) {
        self.value += a * other.value;
        self.d1 += a * other.d1;
        self.d2 += a * other.d2;
    }

    #[inline]
    fn dot(&self, other: &Jet) -> f64 {
        self.value * other.value + self.d1 * other.d1 + self.d2 * other.d2
    }
}

/// Raw-parameter document: `{depth, widths, phi_A, phi_B, output_phi_A}`.
/// `phi_A[l]` is the layer's `H_l x H_{l-1}` matrix flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    pub depth: usize,
    pub widths: Vec<usize>,
    #[serde(rename = "phi_A")]
    pub phi_a: Vec<Vec<f64>>,
    #[serde(rename = "phi_B")]
    pub phi_b: Vec<Vec<f64>>,
    #[serde(rename = "output_phi_A")]
    pub output_phi_a: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeneratorParams", into = "GeneratorParams")]
pub struct GeneratorNetwork {
    widths: Vec<usize>,
    phi_a: Vec<Vec<f64>>,
    phi_b: Vec<Vec<f64>>,
    output_phi_a: Vec<f64>,
    // effective parameters, recomputed on every update
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    out_a: Vec<f64>,
}

impl TryFrom<GeneratorParams> for GeneratorNetwork {
    type Error = Error;

    fn try_from(p: GeneratorParams) -> Result<Self> {
        if p.depth != p.widths.len() {
            return Err(Error::Config(format!(
                "depth {} does not match {} widths",
                p.depth,
                p.widths.len()
            )));
        }
        Self::from_raw(p.widths, p.phi_a, p.phi_b, p.output_phi_a)
    }
}

impl From<GeneratorNetwork> for GeneratorParams {
    fn from(g: GeneratorNetwork) -> Self {
        GeneratorParams {
            depth: g.widths.len(),
            widths: g.widths,
            phi_a: g.phi_a,
            phi_b: g.phi_b,
            output_phi_a: g.output_phi_a,
        }
    }
}

fn softmax_into(raw: &[f64], out: &mut Vec<f64>) {
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.clear();
    out.extend(raw.iter().map(|&r| (r - max).exp()));
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
}

/// Chains a gradient w.r.t. softmax outputs back to the raw logits, in place.
fn softmax_backward(probs: &[f64], grad: &mut [f64]) {
    let inner: f64 = probs.iter().zip(grad.iter()).map(|(p, g)| p * g).sum();
    for (g, p) in grad.iter_mut().zip(probs) {
        *g = p * (*g - inner);
    }
}

impl GeneratorNetwork {
    /// Builds a network from raw parameters, validating shapes.
    pub fn from_raw(
        widths: Vec<usize>,
        phi_a: Vec<Vec<f64>>,
        phi_b: Vec<Vec<f64>>,
        output_phi_a: Vec<f64>,
    ) -> Result<Self> {
        if widths.is_empty() || widths.contains(&0) {
            return Err(Error::Config(
                "generator needs at least one hidden layer of nonzero width".into(),
            ));
        }
        if phi_a.len() != widths.len() || phi_b.len() != widths.len() {
            return Err(Error::Config(
                "one phi_A and phi_B entry per layer required".into(),
            ));
        }
        let mut prev = 1;
        for (l, &h) in widths.iter().enumerate() {
            if phi_a[l].len() != h * prev {
                return Err(Error::Dimension {
                    expected: h * prev,
                    got: phi_a[l].len(),
                });
            }
            if phi_b[l].len() != h {
                return Err(Error::Dimension {
                    expected: h,
                    got: phi_b[l].len(),
                });
            }
            prev = h;
        }
        if output_phi_a.len() != prev {
            return Err(Error::Dimension {
                expected: prev,
                got: output_phi_a.len(),
            });
        }
        let mut g = GeneratorNetwork {
            widths,
            phi_a,
            phi_b,
            output_phi_a,
            a: Vec::new(),
            b: Vec::new(),
            out_a: Vec::new(),
        };
        g.refresh()?;
        Ok(g)
    }

    /// Random initialization: raw mixing logits uniform on [0, 1], raw log
    /// rates uniform on (0, 2).
    pub fn random<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        let mut prev = 1;
        let mut phi_a = Vec::with_capacity(widths.len());
        let mut phi_b = Vec::with_capacity(widths.len());
        for &h in widths {
            phi_a.push((0..h * prev).map(|_| rng.random::<f64>()).collect());
            phi_b.push((0..h).map(|_| 2.0 * rng.random::<f64>()).collect());
            prev = h;
        }
        let output = (0..prev).map(|_| rng.random::<f64>()).collect();
        Self::from_raw(widths.to_vec(), phi_a, phi_b, output)
    }

    /// Single hidden unit with rate `rate`: `phi(t) = exp(-rate t)`.
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::from_raw(vec![1], vec![vec![0.0]], vec![vec![rate.ln()]], vec![0.0])
    }

    fn refresh(&mut self) -> Result<()> {
        let mut prev = 1;
        self.a.resize(self.widths.len(), Vec::new());
        self.b.resize(self.widths.len(), Vec::new());
        let mut row = Vec::new();
        for (l, &h) in self.widths.iter().enumerate() {
            let a = &mut self.a[l];
            a.clear();
            for i in 0..h {
                softmax_into(&self.phi_a[l][i * prev..(i + 1) * prev], &mut row);
                let sum: f64 = row.iter().sum();
                if sum.is_nan()
                    || (sum - 1.0).abs() > 1e-12
                    || row.iter().any(|v| v.is_nan() || *v < 0.0)
                {
                    return Err(Error::domain(format!(
                        "mixing row {i} of layer {l} is not a probability vector"
                    )));
                }
                a.extend_from_slice(&row);
            }
            let b = &mut self.b[l];
            b.clear();
            for &raw in &self.phi_b[l] {
                let rate = raw.exp();
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(Error::domain(format!(
                        "rate exp({raw}) in layer {l} is not strictly positive and finite"
                    )));
                }
                b.push(rate);
            }
            prev = h;
        }
        softmax_into(&self.output_phi_a, &mut row);
        if !(row.iter().sum::<f64>() - 1.0).abs().le(&1e-12) {
            return Err(Error::domain("output weights are not a probability vector"));
        }
        self.out_a = row;
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Effective row-stochastic mixing matrix of hidden layer `l`, row-major.
    pub fn mixing(&self, l: usize) -> &[f64] {
        &self.a[l]
    }

    /// Effective positive rates of hidden layer `l`.
    pub fn rates(&self, l: usize) -> &[f64] {
        &self.b[l]
    }

    pub fn output_weights(&self) -> &[f64] {
        &self.out_a
    }

    pub fn num_params(&self) -> usize {
        let mut prev = 1;
        let mut n = 0;
        for &h in &self.widths {
            n += h * prev + h;
            prev = h;
        }
        n + prev
    }

    /// Raw parameters flattened as `[phi_A[0], phi_B[0], ..., output_phi_A]`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in 0..self.widths.len() {
            out.extend_from_slice(&self.phi_a[l]);
            out.extend_from_slice(&self.phi_b[l]);
        }
        out.extend_from_slice(&self.output_phi_a);
        out
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_params() {
            return Err(Error::Dimension {
                expected: self.num_params(),
                got: p.len(),
            });
        }
        let mut k = 0;
        for l in 0..self.widths.len() {
            let na = self.phi_a[l].len();
            self.phi_a[l].copy_from_slice(&p[k..k + na]);
            k += na;
            let nb = self.phi_b[l].len();
            self.phi_b[l].copy_from_slice(&p[k..k + nb]);
            k += nb;
        }
        self.output_phi_a.copy_from_slice(&p[k..]);
        self.refresh()
    }

    /// Forward pass keeping every layer's output jets (layer 0 is the constant input).
    fn forward(&self, t: f64) -> Vec<Vec<Jet>> {
        let mut layers = Vec::with_capacity(self.widths.len() + 1);
        layers.push(vec![Jet::ONE]);
        let mut prev = 1;
        for (l, &h) in self.widths.iter().enumerate() {
            let input = &layers[l];
            let mut out = Vec::with_capacity(h);
            for i in 0..h {
                let mut g = Jet::ZERO;
                for (a, x) in self.a[l][i * prev..(i + 1) * prev].iter().zip(input) {
                    g.axpy(*a, x);
                }
                let rate = self.b[l][i];
                let e = (-rate * t).exp();
                out.push(Jet {
                    value: e * g.value,
                    d1: e * (g.d1 - rate * g.value),
                    d2: e * (g.d2 - 2.0 * rate * g.d1 + rate * rate * g.value),
                });
            }
            layers.push(out);
            prev = h;
        }
        layers
    }

    /// `phi`, `phi'` and `phi''` at `t >= 0`. `t = inf` gives all zeros.
    pub fn jet(&self, t: f64) -> Jet {
        if t == f64::INFINITY {
            return Jet::ZERO;
        }
        let layers = self.forward(t);
        let mut out = Jet::ZERO;
        for (w, x) in self.out_a.iter().zip(layers.last().unwrap()) {
            out.axpy(*w, x);
        }
        if t == 0.0 {
            // every unit is a convex combination of ones; drop the rounding
            out.value = 1.0;
        }
        out
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.jet(t).value)
    }

    pub fn deriv(&self, t: f64, order: u32) -> Result<f64> {
        check_time(t)?;
        let j = self.jet(t);
        match order {
            1 => Ok(j.d1),
            2 => Ok(j.d2),
            _ => Err(Error::domain(format!(
                "unsupported derivative order {order}"
            ))),
        }
    }

    /// Solves `phi(t) = u` for `u` in (0, 1].
    pub fn inverse(&self, u: f64) -> Result<f64> {
        check_unit_open_closed(u)?;
        if u == 1.0 {
            return Ok(0.0);
        }
        let slope0 = -self.jet(0.0).d1;
        let guess = -u.ln() / slope0;
        let hi = expand_upper(guess.max(1.0), |t| self.jet(t).value >= u)?;
        newton_bracketed(
            |t| {
                let j = self.jet(t);
                (j.value - u, j.d1)
            },
            0.0,
            hi,
            guess,
            RootOptions::default(),
        )
    }

    /// Adds `d(w_value * phi(t) + w_slope * phi'(t)) / d(raw params)` into `out`.
    pub fn accumulate_param_grad(&self, t: f64, w_value: f64, w_slope: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.num_params());
        if t == f64::INFINITY {
            return;
        }
        let layers = self.forward(t);
        let depth = self.widths.len();

        // offsets of each layer's block in the flat vector
        let mut offsets = Vec::with_capacity(depth);
        let mut k = 0;
        let mut prev = 1;
        for &h in &self.widths {
            offsets.push(k);
            k += h * prev + h;
            prev = h;
        }
        let out_off = k;

        let seed = Jet {
            value: w_value,
            d1: w_slope,
            d2: 0.0,
        };
        let last = &layers[depth];
        let mut grad_out: Vec<f64> = last.iter().map(|x| seed.dot(x)).collect();
        softmax_backward(&self.out_a, &mut grad_out);
        out[out_off..out_off + grad_out.len()]
            .iter_mut()
            .zip(&grad_out)
            .for_each(|(o, g)| *o += g);

        let mut adj: Vec<Jet> = self
            .out_a
            .iter()
            .map(|&a| Jet {
                value: a * seed.value,
                d1: a * seed.d1,
                d2: a * seed.d2,
            })
            .collect();

        for l in (0..depth).rev() {
            let h = self.widths[l];
            let prev = if l == 0 { 1 } else { self.widths[l - 1] };
            let input = &layers[l];
            let output = &layers[l + 1];
            let mut adj_in = vec![Jet::ZERO; prev];
            let off = offsets[l];
            let mut row_grad = vec![0.0; prev];
            for i in 0..h {
                let f = adj[i];
                let rate = self.b[l][i];
                let e = (-rate * t).exp();
                let row = &self.a[l][i * prev..(i + 1) * prev];
                let mut g = Jet::ZERO;
                for (a, x) in row.iter().zip(input) {
                    g.axpy(*a, x);
                }
                let ga = Jet {
                    value: e * (f.value - rate * f.d1 + rate * rate * f.d2),
                    d1: e * (f.d1 - 2.0 * rate * f.d2),
                    d2: e * f.d2,
                };
                let y = &output[i];
                let d_rate = -t * f.dot(y)
                    + e * (-g.value * f.d1 + (2.0 * rate * g.value - 2.0 * g.d1) * f.d2);
                // d/d(phi_B) = rate * d/d(rate)
                out[off + h * prev + i] += rate * d_rate;

                for (j, x) in input.iter().enumerate() {
                    row_grad[j] = ga.dot(x);
                    adj_in[j].axpy(row[j], &ga);
                }
                softmax_backward(row, &mut row_grad);
                out[off + i * prev..off + (i + 1) * prev]
                    .iter_mut()
                    .zip(&row_grad)
                    .for_each(|(o, g)| *o += g);
            }
            adj = adj_in;
        }
    }

    /// `d phi(t) / d(raw params)`.
    pub fn param_grads(&self, t: f64) -> Result<Vec<f64>> {
        check_time(t)?;
        let mut out = vec![0.0; self.num_params()];
        self.accumulate_param_grad(t, 1.0, 0.0, &mut out);
        Ok(out)
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "generator argument must be >= 0, got {t}"
        )))
    }
}

pub(crate) fn check_unit_open_closed(u: f64) -> Result<()> {
    if u > 0.0 && u <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("expected u in (0, 1], got {u}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_net(seed: u64, widths: &[usize]) -> GeneratorNetwork {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GeneratorNetwork::random(widths, &mut rng).unwrap()
    }

    /// Independent oracle: multiply the recursion out into `sum a_k exp(-b_k t)`.
    fn expand(g: &GeneratorNetwork) -> Vec<(f64, f64)> {
        let mut units: Vec<Vec<(f64, f64)>> = vec![vec![(1.0, 0.0)]];
        let mut prev = 1;
        for l in 0..g.depth() {
            let h = g.widths()[l];
            let mut next = Vec::new();
            for i in 0..h {
                let mut terms = Vec::new();
                for j in 0..prev {
                    let a = g.mixing(l)[i * prev + j];
                    for &(w, r) in &units[j] {
                        terms.push((a * w, r + g.rates(l)[i]));
                    }
                }
                next.push(terms);
            }
            units = next;
            prev = h;
        }
        let mut flat = Vec::new();
        for (j, terms) in units.iter().enumerate() {
            for &(w, r) in terms {
                flat.push((g.output_weights()[j] * w, r));
            }
        }
        flat
    }

    fn mixture(flat: &[(f64, f64)], t: f64, k: i32) -> f64 {
        flat.iter()
            .map(|(w, r)| w * (-r).powi(k) * (-r * t).exp())
            .sum()
    }

    #[test]
    fn phi_at_zero_is_exactly_one() {
        for s in 0..10 {
            assert_eq!(random_net(s, &[10, 10]).eval(0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn degenerate_network_is_exponential() {
        let g = GeneratorNetwork::exponential(1.0).unwrap();
        assert!((g.eval(1.0).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(g.deriv(0.0, 1).unwrap(), -1.0);
        assert!((g.inverse((-3f64).exp()).unwrap() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn infinity_maps_to_zero() {
        let g = random_net(3, &[10, 10]);
        assert_eq!(g.eval(f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn negative_argument_is_domain_error() {
        let g = random_net(3, &[4]);
        assert!(matches!(g.eval(-0.1), Err(Error::Domain(_))));
        assert!(matches!(g.eval(f64::NEG_INFINITY), Err(Error::Domain(_))));
        assert!(matches!(g.eval(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(g.deriv(1.0, 3), Err(Error::Domain(_))));
        assert!(matches!(g.inverse(0.0), Err(Error::Domain(_))));
        assert!(matches!(g.inverse(1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn recursion_matches_flat_expansion() {
        let g = random_net(11, &[10, 10]);
        let flat = expand(&g);
        assert_eq!(flat.len(), 100);
        let want = mixture(&flat, 2.0, 0);
        assert!((g.eval(2.0).unwrap() - want).abs() < 1e-12);
        for &t in &[0.0, 0.3, 1.0, 7.5] {
            let j = g.jet(t);
            assert!((j.value - mixture(&flat, t, 0)).abs() < 1e-12);
            assert!((j.d1 - mixture(&flat, t, 1)).abs() < 1e-11);
            assert!((j.d2 - mixture(&flat, t, 2)).abs() < 1e-10);
        }
    }

    #[test]
    fn first_derivative_matches_central_difference() {
        let g = random_net(5, &[10, 10]);
        let h = 1e-6;
        for &t in &[0.1, 1.0, 5.0] {
            let fd = (g.eval(t + h).unwrap() - g.eval(t - h).unwrap()) / (2.0 * h);
            let d = g.deriv(t, 1).unwrap();
            assert!(((d - fd) / fd).abs() <= 1e-5, "t={t} d={d} fd={fd}");
        }
    }

    #[test]
    fn derivative_signs_on_grid() {
        let g = random_net(8, &[10, 10]);
        for i in 0..100 {
            let t = i as f64 * 0.2;
            assert!(g.deriv(t, 1).unwrap() <= 0.0);
            assert!(g.deriv(t, 2).unwrap() >= 0.0);
        }
    }

    #[test]
    fn inverse_round_trip() {
        let g = random_net(21, &[10, 10]);
        for &u in &[0.01, 0.1, 0.5, 0.9, 0.999] {
            let t = g.inverse(u).unwrap();
            assert!((g.eval(t).unwrap() - u).abs() < 1e-10);
        }
        assert_eq!(g.inverse(1.0).unwrap(), 0.0);
    }

    #[test]
    fn param_grads_match_finite_differences() {
        let g = random_net(2, &[10, 10]);
        let grads = g.param_grads(1.0).unwrap();
        let base = g.params();
        let h = 1e-6;
        for k in 0..base.len() {
            let mut p = base.clone();
            p[k] += h;
            let mut gp = g.clone();
            gp.set_params(&p).unwrap();
            p[k] -= 2.0 * h;
            let mut gm = g.clone();
            gm.set_params(&p).unwrap();
            let fd = (gp.eval(1.0).unwrap() - gm.eval(1.0).unwrap()) / (2.0 * h);
            let err = (grads[k] - fd).abs();
            assert!(
                err <= 1e-4 * fd.abs().max(grads[k].abs()) || err < 1e-10,
                "param {k}: analytic {} fd {fd}",
                grads[k]
            );
        }
    }

    #[test]
    fn slope_param_grads_match_finite_differences() {
        let g = random_net(9, &[3, 4]);
        let mut grads = vec![0.0; g.num_params()];
        g.accumulate_param_grad(0.7, 0.0, 1.0, &mut grads);
        let base = g.params();
        let h = 1e-6;
        for k in 0..base.len() {
            let mut p = base.clone();
            p[k] += h;
            let mut gp = g.clone();
            gp.set_params(&p).unwrap();
            p[k] -= 2.0 * h;
            let mut gm = g.clone();
            gm.set_params(&p).unwrap();
            let fd = (gp.deriv(0.7, 1).unwrap() - gm.deriv(0.7, 1).unwrap()) / (2.0 * h);
            let err = (grads[k] - fd).abs();
            assert!(err <= 1e-4 * fd.abs().max(grads[k].abs()) || err < 1e-10);
        }
    }

    #[test]
    fn degenerate_rate_gradient_closed_form() {
        let raw: f64 = 0.3;
        let g = GeneratorNetwork::exponential(raw.exp()).unwrap();
        let t = 2.0;
        let grads = g.param_grads(t).unwrap();
        // layout: phi_A (1), phi_B (1), output (1)
        let want = -t * raw.exp() * (-raw.exp() * t).exp();
        assert!((grads[1] - want).abs() < 1e-15);
        assert!(grads[1] < 0.0);
        assert_eq!(grads[0], 0.0);
        assert_eq!(grads[2], 0.0);
    }

    #[test]
    fn saturated_softmax_row_has_bounded_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut g = GeneratorNetwork::random(&[3, 3], &mut rng).unwrap();
        let mut p = g.params();
        // first row of layer 2's mixing matrix: one-hot at index 1
        let row_start = 3 + 3;
        p[row_start] = -40.0;
        p[row_start + 1] = 40.0;
        p[row_start + 2] = -40.0;
        g.set_params(&p).unwrap();
        assert!(g.mixing(1)[0] > 0.0);
        let grads = g.param_grads(1.3).unwrap();
        assert!(grads.iter().all(|v| v.is_finite() && v.abs() < 10.0));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let g = random_net(17, &[10, 10]);
        let s = serde_json::to_string(&g).unwrap();
        let back: GeneratorNetwork = serde_json::from_str(&s).unwrap();
        assert_eq!(g.params(), back.params());
        assert!(s.contains("\"phi_A\""));
        assert!(s.contains("\"output_phi_A\""));
    }

    #[test]
    fn json_shape_errors_are_rejected() {
        let bad = r#"{"depth":1,"widths":[2],"phi_A":[[0.1]],"phi_B":[[0.0,0.0]],"output_phi_A":[0.0,0.0]}"#;
        assert!(serde_json::from_str::<GeneratorNetwork>(bad).is_err());
        let bad_depth =
            r#"{"depth":2,"widths":[1],"phi_A":[[0.1]],"phi_B":[[0.0]],"output_phi_A":[0.0]}"#;
        assert!(serde_json::from_str::<GeneratorNetwork>(bad_depth).is_err());
    }

    #[test]
    fn derivative_near_zero_has_finite_negative_limit() {
        let g = random_net(31, &[10, 10]);
        let d10 = g.deriv(1e-10, 1).unwrap();
        let d8 = g.deriv(1e-8, 1).unwrap();
        assert!(d10 < -1e-10);
        assert!((d10 - d8).abs() < 1e-6 * d8.abs());
    }
}
