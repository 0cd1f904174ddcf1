//! Bivariate Archimedean copulas `C(u, v) = phi(phi^{-1}(u) + phi^{-1}(v))`.

use std::io::Write;

use rand::distr::Open01;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{ClosedFormGenerator, Family};
use crate::generator::{check_unit_open_closed, GeneratorNetwork, Jet};
use crate::roots::{expand_upper, newton_bracketed, RootOptions};

/// Inputs within this distance of 0 or 1 are treated as the boundary.
const BOUNDARY_EPS: f64 = 1e-15;

/// Source of the generator: a learned network or a textbook family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CopulaGenerator {
    Network(GeneratorNetwork),
    ClosedForm(ClosedFormGenerator),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArchimedeanCopula {
    generator: CopulaGenerator,
}

impl From<GeneratorNetwork> for ArchimedeanCopula {
    fn from(g: GeneratorNetwork) -> Self {
        Self {
            generator: CopulaGenerator::Network(g),
        }
    }
}

impl From<ClosedFormGenerator> for ArchimedeanCopula {
    fn from(g: ClosedFormGenerator) -> Self {
        Self {
            generator: CopulaGenerator::ClosedForm(g),
        }
    }
}

impl ArchimedeanCopula {
    pub fn independence() -> Self {
        ClosedFormGenerator::independence().into()
    }

    pub fn closed_form(family: Family, theta: f64) -> Result<Self> {
        Ok(ClosedFormGenerator::new(family, theta)?.into())
    }

    pub fn from_tau(family: Family, tau: f64) -> Result<Self> {
        if family == Family::Independence && tau == 0.0 {
            return Ok(Self::independence());
        }
        Ok(ClosedFormGenerator::from_tau(family, tau)?.into())
    }

    pub fn generator(&self) -> &CopulaGenerator {
        &self.generator
    }

    /// The closed-form family, if this is not a learned copula.
    pub fn family(&self) -> Option<Family> {
        match &self.generator {
            CopulaGenerator::ClosedForm(g) => Some(g.family()),
            CopulaGenerator::Network(_) => None,
        }
    }

    /// Analytic Kendall's tau for closed forms.
    pub fn analytic_tau(&self) -> Option<f64> {
        match &self.generator {
            CopulaGenerator::ClosedForm(g) => Some(g.kendall_tau()),
            CopulaGenerator::Network(_) => None,
        }
    }

    #[inline]
    pub fn jet(&self, t: f64) -> Jet {
        match &self.generator {
            CopulaGenerator::Network(g) => g.jet(t),
            CopulaGenerator::ClosedForm(g) => g.jet(t),
        }
    }

    /// `phi^{-1}(u)` for `u` in (0, 1].
    pub fn inverse(&self, u: f64) -> Result<f64> {
        check_unit_open_closed(u)?;
        match &self.generator {
            CopulaGenerator::Network(g) => g.inverse(u),
            CopulaGenerator::ClosedForm(g) => Ok(g.inverse(u)),
        }
    }

    pub fn num_params(&self) -> usize {
        match &self.generator {
            CopulaGenerator::Network(g) => g.num_params(),
            CopulaGenerator::ClosedForm(g) => g.num_params(),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match &self.generator {
            CopulaGenerator::Network(g) => g.params(),
            CopulaGenerator::ClosedForm(g) => g.params(),
        }
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        match &mut self.generator {
            CopulaGenerator::Network(g) => g.set_params(p),
            CopulaGenerator::ClosedForm(g) => g.set_params(p),
        }
    }

    /// Projects raw parameters back onto the generator's domain.
    pub fn clamp_params(&self, p: &mut [f64]) {
        if let CopulaGenerator::ClosedForm(g) = &self.generator {
            g.clamp_params(p);
        }
    }

    /// Adds `d(w_value * phi(t) + w_slope * phi'(t)) / d(params)` into `out`.
    pub fn accumulate_param_grad(&self, t: f64, w_value: f64, w_slope: f64, out: &mut [f64]) {
        match &self.generator {
            CopulaGenerator::Network(g) => g.accumulate_param_grad(t, w_value, w_slope, out),
            CopulaGenerator::ClosedForm(g) => {
                if g.num_params() == 1 {
                    let (dv, ds) = g.theta_grad(t);
                    out[0] += w_value * dv + w_slope * ds;
                }
            }
        }
    }

    pub fn cdf(&self, u: f64, v: f64) -> Result<f64> {
        check_unit_closed(u)?;
        check_unit_closed(v)?;
        let u = snap(u);
        let v = snap(v);
        if u == 0.0 || v == 0.0 {
            return Ok(0.0);
        }
        if u == 1.0 {
            return Ok(v);
        }
        if v == 1.0 {
            return Ok(u);
        }
        let s = self.inverse(u)? + self.inverse(v)?;
        Ok(self.jet(s).value.clamp(0.0, u.min(v)))
    }

    /// `dC/du` (`which = 1`) or `dC/dv` (`which = 2`).
    pub fn partial(&self, u: f64, v: f64, which: u8) -> Result<f64> {
        let (own, other) = match which {
            1 => (u, v),
            2 => (v, u),
            _ => {
                return Err(Error::domain(format!(
                    "partial index must be 1 or 2, got {which}"
                )))
            }
        };
        check_unit_open_closed(own)?;
        check_unit_open_closed(other)?;
        if other == 1.0 {
            return Ok(1.0);
        }
        let a = self.inverse(own)?;
        let b = self.inverse(other)?;
        let num = self.jet(a + b).d1;
        let den = self.jet(a).d1;
        if den == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        Ok((num / den).clamp(0.0, 1.0))
    }

    /// Copula density `phi''(a+b) / (phi'(a) phi'(b))`.
    pub fn density(&self, u: f64, v: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0) {
            return Err(Error::domain(format!(
                "density needs (u, v) strictly inside the unit square, got ({u}, {v})"
            )));
        }
        let a = self.inverse(u)?;
        let b = self.inverse(v)?;
        let num = self.jet(a + b).d2;
        Ok((num / (self.jet(a).d1 * self.jet(b).d1)).max(0.0))
    }

    /// Solves `dC/du(u, v) = w` for `v`.
    pub fn sample_conditional(&self, u: f64, w: f64) -> Result<f64> {
        check_unit_open(u)?;
        check_unit_open(w)?;
        if let CopulaGenerator::ClosedForm(g) = &self.generator {
            if let Some(v) = g.conditional_quantile(u, w) {
                return Ok(v.clamp(f64::MIN_POSITIVE, 1.0));
            }
        }
        self.sample_conditional_numeric(u, w)
    }

    /// Root-finding route for the conditional quantile, valid for any generator.
    ///
    /// Works in `b = phi^{-1}(v)`: `phi'(a + b) / phi'(a)` falls from 1 at
    /// `b = 0` to 0 as `b -> inf`.
    pub fn sample_conditional_numeric(&self, u: f64, w: f64) -> Result<f64> {
        check_unit_open(u)?;
        check_unit_open(w)?;
        let a = self.inverse(u)?;
        let slope_a = self.jet(a).d1;
        let ratio = |b: f64| {
            let j = self.jet(a + b);
            (j.d1 / slope_a - w, j.d2 / slope_a)
        };
        let hi = expand_upper(1.0, |b| ratio(b).0 > 0.0)?;
        let b = newton_bracketed(
            ratio,
            0.0,
            hi,
            0.5 * hi,
            RootOptions {
                tol: 1e-12,
                max_iter: 300,
            },
        )?;
        Ok(self.jet(b).value.clamp(f64::MIN_POSITIVE, 1.0))
    }

    /// Draws `n` pairs by the conditional-distribution method. Pair `i` uses
    /// its own ChaCha stream, so the output does not depend on thread count.
    pub fn sample_joint(&self, n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
        if n == 0 {
            return Err(Error::domain("sample size must be at least 1"));
        }
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = pair_rng(seed, i as u64);
                self.sample_pair(&mut rng)
            })
            .collect()
    }

    /// One `(u, v)` draw using the caller's RNG.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64)> {
        let u: f64 = rng.sample(Open01);
        let w: f64 = rng.sample(Open01);
        Ok((u, self.sample_conditional(u, w)?))
    }

    /// Writes the CDF grid, log-density grid and a sample scatter as CSV.
    pub fn export_plot_data<W1: Write, W2: Write, W3: Write>(
        &self,
        resolution: usize,
        samples: usize,
        seed: u64,
        cdf_out: W1,
        logpdf_out: W2,
        scatter_out: W3,
    ) -> Result<()> {
        if resolution < 2 {
            return Err(Error::domain("plot resolution must be at least 2"));
        }
        let mut cdf = csv::Writer::from_writer(cdf_out);
        cdf.write_record(["u", "v", "C"])?;
        let step = 1.0 / (resolution - 1) as f64;
        for i in 0..resolution {
            for j in 0..resolution {
                let u = (i as f64 * step).min(1.0);
                let v = (j as f64 * step).min(1.0);
                let c = self.cdf(u, v)?;
                cdf.write_record([u.to_string(), v.to_string(), c.to_string()])?;
            }
        }
        cdf.flush()?;

        // interior cell centres
        let mut pdf = csv::Writer::from_writer(logpdf_out);
        pdf.write_record(["u", "v", "log_c"])?;
        let h = 1.0 / resolution as f64;
        for i in 0..resolution {
            for j in 0..resolution {
                let u = (i as f64 + 0.5) * h;
                let v = (j as f64 + 0.5) * h;
                let c = self.density(u, v)?;
                pdf.write_record([u.to_string(), v.to_string(), c.ln().to_string()])?;
            }
        }
        pdf.flush()?;

        let mut sc = csv::Writer::from_writer(scatter_out);
        sc.write_record(["u", "v"])?;
        for (u, v) in self.sample_joint(samples, seed)? {
            sc.write_record([u.to_string(), v.to_string()])?;
        }
        sc.flush()?;
        Ok(())
    }
}

/// Counter-based substream: one ChaCha stream per index.
pub(crate) fn pair_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn snap(x: f64) -> f64 {
    if x < BOUNDARY_EPS {
        0.0
    } else if x > 1.0 - BOUNDARY_EPS {
        1.0
    } else {
        x
    }
}

fn check_unit_closed(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "expected a value in [0, 1], got {x}"
        )))
    }
}

fn check_unit_open(x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "expected a value in (0, 1), got {x}"
        )))
    }
}
