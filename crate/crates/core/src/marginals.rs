//! Parametric conditional survival marginals `S(t|x)`, `f(t|x)`.
//!
//! Two families are provided:
//!
//! * Weibull proportional hazards: `S(t|x) = exp(-(t/rho)^nu * exp(psi(x)))`.
//! * Log-normal: `log T = mu - psi(x) + sigma Z`, `Z ~ N(0, 1)`, so a higher
//!   risk score shortens survival as in the proportional-hazards family.
//!
//! Trainable parameters are `[ln nu, ln rho, risk...]` and
//! `[mu, ln sigma, risk...]` respectively.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Survival probabilities are floored here before logs are taken.
pub const SURVIVAL_FLOOR: f64 = 1e-300;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Covariate risk score `psi(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RiskFunction {
    /// `psi(x) = beta . x`
    Linear {
        beta: Vec<f64>,
    },
    Mlp(Mlp),
    /// `psi(x) = amplitude * sin(frequency * x_0 + phase)`; fixed, no trainable parameters.
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
}

/// Fully connected tanh network with a scalar linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mlp {
    /// `[input, hidden..., 1]`
    pub sizes: Vec<usize>,
    /// One row-major `out x in` matrix per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-limit..limit))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Mlp {
            sizes,
            weights,
            biases,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sizes.len() < 2 || *self.sizes.last().unwrap() != 1 {
            return Err(Error::Config("MLP sizes must be [input, ..., 1]".into()));
        }
        let layers = self.sizes.len() - 1;
        if self.weights.len() != layers || self.biases.len() != layers {
            return Err(Error::Config(
                "MLP needs one weight matrix and bias per layer".into(),
            ));
        }
        for (l, w) in self.sizes.windows(2).enumerate() {
            if self.weights[l].len() != w[0] * w[1] {
                return Err(Error::Dimension {
                    expected: w[0] * w[1],
                    got: self.weights[l].len(),
                });
            }
            if self.biases[l].len() != w[1] {
                return Err(Error::Dimension {
                    expected: w[1],
                    got: self.biases[l].len(),
                });
            }
        }
        Ok(())
    }

    fn num_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Returns `psi(x)`; when `grad` is given, writes `d psi / d params` into it.
    fn forward(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let layers = self.weights.len();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let input = &acts[l];
            let mut out = Vec::with_capacity(n_out);
            for o in 0..n_out {
                let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                let z: f64 =
                    row.iter().zip(input).map(|(w, v)| w * v).sum::<f64>() + self.biases[l][o];
                out.push(if l + 1 < layers { z.tanh() } else { z });
            }
            acts.push(out);
        }
        let psi = acts[layers][0];
        let Some(grad) = grad else {
            return psi;
        };

        // parameter layout: for each layer, weights then biases
        let mut offsets = Vec::with_capacity(layers);
        let mut k = 0;
        for l in 0..layers {
            offsets.push(k);
            k += self.weights[l].len() + self.biases[l].len();
        }
        let mut delta = vec![1.0];
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let input = &acts[l];
            let off = offsets[l];
            for o in 0..n_out {
                for i in 0..n_in {
                    grad[off + o * n_in + i] = delta[o] * input[i];
                }
                grad[off + n_in * n_out + o] = delta[o];
            }
            if l > 0 {
                let mut next = vec![0.0; n_in];
                for (i, nx) in next.iter_mut().enumerate() {
                    let s: f64 = (0..n_out)
                        .map(|o| self.weights[l][o * n_in + i] * delta[o])
                        .sum();
                    *nx = s * (1.0 - input[i] * input[i]);
                }
                delta = next;
            }
        }
        psi
    }
}

impl RiskFunction {
    pub fn linear(beta: Vec<f64>) -> Self {
        RiskFunction::Linear { beta }
    }

    pub fn zero(dim: usize) -> Self {
        RiskFunction::Linear {
            beta: vec![0.0; dim],
        }
    }

    pub fn mlp<R: Rng + ?Sized>(input: usize, hidden: &[usize], rng: &mut R) -> Self {
        RiskFunction::Mlp(Mlp::new(input, hidden, rng))
    }

    /// Expected covariate dimension, `None` when any dimension is accepted.
    pub fn input_dim(&self) -> Option<usize> {
        match self {
            RiskFunction::Linear { beta } => Some(beta.len()),
            RiskFunction::Mlp(m) => Some(m.sizes[0]),
            RiskFunction::Sinusoid { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RiskFunction::Mlp(m) => m.validate(),
            _ => Ok(()),
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        match self.input_dim() {
            Some(d) if d != x.len() => Err(Error::Dimension {
                expected: d,
                got: x.len(),
            }),
            None if x.is_empty() => Err(Error::Dimension {
                expected: 1,
                got: 0,
            }),
            _ => Ok(()),
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            RiskFunction::Linear { beta } => beta.len(),
            RiskFunction::Mlp(m) => m.num_params(),
            RiskFunction::Sinusoid { .. } => 0,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            RiskFunction::Linear { beta } => beta.clone(),
            RiskFunction::Mlp(m) => {
                let mut out = Vec::with_capacity(m.num_params());
                for (w, b) in m.weights.iter().zip(&m.biases) {
                    out.extend_from_slice(w);
                    out.extend_from_slice(b);
                }
                out
            }
            RiskFunction::Sinusoid { .. } => Vec::new(),
        }
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_params() {
            return Err(Error::Dimension {
                expected: self.num_params(),
                got: p.len(),
            });
        }
        match self {
            RiskFunction::Linear { beta } => beta.copy_from_slice(p),
            RiskFunction::Mlp(m) => {
                let mut k = 0;
                for (w, b) in m.weights.iter_mut().zip(m.biases.iter_mut()) {
                    let (nw, nb) = (w.len(), b.len());
                    w.copy_from_slice(&p[k..k + nw]);
                    k += nw;
                    b.copy_from_slice(&p[k..k + nb]);
                    k += nb;
                }
            }
            RiskFunction::Sinusoid { .. } => {}
        }
        Ok(())
    }

    /// `psi(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.eval_unchecked(x, None))
    }

    /// `psi(x)` and `d psi / d params`.
    pub fn eval_with_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_input(x)?;
        let mut g = vec![0.0; self.num_params()];
        let psi = self.eval_unchecked(x, Some(&mut g));
        Ok((psi, g))
    }

    fn eval_unchecked(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        match self {
            RiskFunction::Linear { beta } => {
                if let Some(g) = grad {
                    g.copy_from_slice(x);
                }
                beta.iter().zip(x).map(|(b, v)| b * v).sum()
            }
            RiskFunction::Mlp(m) => m.forward(x, grad),
            RiskFunction::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * x[0] + phase).sin(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarginalFamily {
    WeibullCoxPh { shape: f64, scale: f64 },
    LogNormal { location: f64, sigma: f64 },
}

impl MarginalFamily {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            MarginalFamily::WeibullCoxPh { shape, scale } => {
                shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()
            }
            MarginalFamily::LogNormal { location, sigma } => {
                sigma > 0.0 && sigma.is_finite() && location.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "invalid marginal parameters {self:?}"
            )))
        }
    }
}

/// Log survival and log density at one point, with their parameter gradients.
#[derive(Debug, Clone)]
pub struct MarginalEval {
    pub log_survival: f64,
    pub log_density: f64,
    pub d_log_survival: Vec<f64>,
    pub d_log_density: Vec<f64>,
}

/// `dS/dp` and `df/dp` for every parameter.
#[derive(Debug, Clone)]
pub struct MarginalGrads {
    pub survival: Vec<f64>,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMarginal", into = "RawMarginal")]
pub struct SurvivalMarginal {
    family: MarginalFamily,
    risk: RiskFunction,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarginal {
    distribution: MarginalFamily,
    risk: RiskFunction,
}

impl TryFrom<RawMarginal> for SurvivalMarginal {
    type Error = Error;
    fn try_from(r: RawMarginal) -> Result<Self> {
        SurvivalMarginal::new(r.distribution, r.risk)
    }
}

impl From<SurvivalMarginal> for RawMarginal {
    fn from(m: SurvivalMarginal) -> Self {
        RawMarginal {
            distribution: m.family,
            risk: m.risk,
        }
    }
}

/// `ln P(Z > z)` for standard normal `Z`, accurate far into the upper tail.
fn ln_normal_sf(z: f64) -> f64 {
    let q = 0.5 * erfc(z / std::f64::consts::SQRT_2);
    if q > 1e-300 {
        q.ln()
    } else {
        // asymptotic expansion of the Mills ratio
        let z2 = z * z;
        -0.5 * z2 - z.ln() - LN_SQRT_2PI + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    }
}

impl SurvivalMarginal {
    pub fn new(family: MarginalFamily, risk: RiskFunction) -> Result<Self> {
        family.validate()?;
        risk.validate()?;
        Ok(Self { family, risk })
    }

    pub fn weibull(shape: f64, scale: f64, risk: RiskFunction) -> Result<Self> {
        Self::new(MarginalFamily::WeibullCoxPh { shape, scale }, risk)
    }

    pub fn log_normal(location: f64, sigma: f64, risk: RiskFunction) -> Result<Self> {
        Self::new(MarginalFamily::LogNormal { location, sigma }, risk)
    }

    pub fn family(&self) -> &MarginalFamily {
        &self.family
    }

    pub fn risk(&self) -> &RiskFunction {
        &self.risk
    }

    pub fn num_params(&self) -> usize {
        2 + self.risk.num_params()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = match self.family {
            MarginalFamily::WeibullCoxPh { shape, scale } => vec![shape.ln(), scale.ln()],
            MarginalFamily::LogNormal { location, sigma } => vec![location, sigma.ln()],
        };
        p.extend(self.risk.params());
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_params() {
            return Err(Error::Dimension {
                expected: self.num_params(),
                got: p.len(),
            });
        }
        let family = match self.family {
            MarginalFamily::WeibullCoxPh { .. } => MarginalFamily::WeibullCoxPh {
                shape: p[0].exp(),
                scale: p[1].exp(),
            },
            MarginalFamily::LogNormal { .. } => MarginalFamily::LogNormal {
                location: p[0],
                sigma: p[1].exp(),
            },
        };
        family.validate()?;
        self.risk.set_params(&p[2..])?;
        self.family = family;
        Ok(())
    }

    fn check(&self, t: f64, x: &[f64]) -> Result<()> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::domain(format!("time must be >= 0, got {t}")));
        }
        self.risk.check_input(x)
    }

    pub fn log_survival(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.check(t, x)?;
        let psi = self.risk.eval_unchecked(x, None);
        Ok(self.log_survival_psi(t, psi))
    }

    fn log_survival_psi(&self, t: f64, psi: f64) -> f64 {
        match self.family {
            MarginalFamily::WeibullCoxPh { shape, scale } => {
                if t == 0.0 {
                    return 0.0;
                }
                -(shape * (t / scale).ln() + psi).exp()
            }
            MarginalFamily::LogNormal { location, sigma } => {
                if t == 0.0 {
                    return 0.0;
                }
                ln_normal_sf((t.ln() - location + psi) / sigma)
            }
        }
    }

    fn log_density_psi(&self, t: f64, psi: f64) -> f64 {
        match self.family {
            MarginalFamily::WeibullCoxPh { shape, scale } => {
                if t == 0.0 {
                    return if shape == 1.0 {
                        psi - scale.ln()
                    } else if shape < 1.0 {
                        f64::INFINITY
                    } else {
                        f64::NEG_INFINITY
                    };
                }
                let log_h = shape * (t / scale).ln() + psi;
                shape.ln() - t.ln() + log_h - log_h.exp()
            }
            MarginalFamily::LogNormal { location, sigma } => {
                if t == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let z = (t.ln() - location + psi) / sigma;
                -0.5 * z * z - LN_SQRT_2PI - sigma.ln() - t.ln()
            }
        }
    }

    /// `S(t|x)`.
    pub fn survival(&self, t: f64, x: &[f64]) -> Result<f64> {
        Ok(self.log_survival(t, x)?.exp())
    }

    pub fn log_density(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.check(t, x)?;
        let psi = self.risk.eval_unchecked(x, None);
        Ok(self.log_density_psi(t, psi))
    }

    /// `f(t|x) = -dS/dt`.
    pub fn density(&self, t: f64, x: &[f64]) -> Result<f64> {
        Ok(self.log_density(t, x)?.exp())
    }

    /// `t` with `S(t|x) = u`.
    pub fn inverse_transform_sample(&self, u: f64, x: &[f64]) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain(format!(
                "quantile level must be in (0, 1), got {u}"
            )));
        }
        self.risk.check_input(x)?;
        let psi = self.risk.eval_unchecked(x, None);
        Ok(match self.family {
            MarginalFamily::WeibullCoxPh { shape, scale } => {
                (-u.ln() / psi.exp()).powf(1.0 / shape) * scale
            }
            MarginalFamily::LogNormal { location, sigma } => {
                let n = Normal::standard();
                let z = -n.inverse_cdf(u);
                (location - psi + sigma * z).exp()
            }
        })
    }

    /// Log survival and log density with their gradients w.r.t. the raw parameters.
    pub fn evaluate(&self, t: f64, x: &[f64]) -> Result<MarginalEval> {
        self.check(t, x)?;
        let n = self.num_params();
        let mut d_ls = vec![0.0; n];
        let mut d_lf = vec![0.0; n];
        let mut risk_grad = vec![0.0; self.risk.num_params()];
        let psi = self.risk.eval_unchecked(x, Some(&mut risk_grad));
        let ls = self.log_survival_psi(t, psi);
        let lf = self.log_density_psi(t, psi);
        // d/dpsi of each, then chain through the risk parameters
        let (dls_dpsi, dlf_dpsi) = match self.family {
            MarginalFamily::WeibullCoxPh { shape, scale } => {
                if t > 0.0 {
                    let lt = (t / scale).ln();
                    let cum = (shape * lt + psi).exp();
                    d_ls[0] = -cum * shape * lt;
                    d_ls[1] = cum * shape;
                    d_lf[0] = 1.0 + shape * lt - cum * shape * lt;
                    d_lf[1] = -shape + cum * shape;
                    (-cum, 1.0 - cum)
                } else {
                    (0.0, 0.0)
                }
            }
            MarginalFamily::LogNormal { location, sigma } => {
                if t > 0.0 {
                    let z = (t.ln() - location + psi) / sigma;
                    let ln_pdf = -0.5 * z * z - LN_SQRT_2PI;
                    let mills = (ln_pdf - ln_normal_sf(z)).exp();
                    // d ln S / dz = -mills, d ln f / dz = -z
                    d_ls[0] = mills / sigma;
                    d_ls[1] = mills * z;
                    d_lf[0] = z / sigma;
                    d_lf[1] = z * z - 1.0;
                    (-mills / sigma, -z / sigma)
                } else {
                    (0.0, 0.0)
                }
            }
        };
        for (k, g) in risk_grad.iter().enumerate() {
            d_ls[2 + k] = dls_dpsi * g;
            d_lf[2 + k] = dlf_dpsi * g;
        }
        Ok(MarginalEval {
            log_survival: ls,
            log_density: lf,
            d_log_survival: d_ls,
            d_log_density: d_lf,
        })
    }

    /// `dS/dp` and `df/dp` for every raw parameter.
    pub fn param_grads(&self, t: f64, x: &[f64]) -> Result<MarginalGrads> {
        let e = self.evaluate(t, x)?;
        let s = e.log_survival.exp();
        let f = e.log_density.exp();
        Ok(MarginalGrads {
            survival: e.d_log_survival.iter().map(|g| g * s).collect(),
            density: e.d_log_density.iter().map(|g| g * f).collect(),
        })
    }
}
