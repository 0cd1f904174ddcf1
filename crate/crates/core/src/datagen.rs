//! Synthetic and semi-synthetic right-censored data with a known copula
//! between event and censoring times.

use std::f64::consts::PI;
use std::io::Write;

use rand::distr::{Open01, StandardUniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{pair_rng, ArchimedeanCopula};
use crate::data::{write_records, OutcomeTable, SurvivalDataset, SurvivalRecord};
use crate::error::{Error, Result};
use crate::marginals::{MarginalFamily, RiskFunction, SurvivalMarginal};
use crate::training::{AdamW, TrainConfig};

/// Largest double below 1; keeps sampled quantiles inside (0, 1).
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    /// Covariates are i.i.d. Uniform[0, 1] of this dimension.
    pub dim: usize,
    pub event: SurvivalMarginal,
    pub censor: SurvivalMarginal,
    pub copula: ArchimedeanCopula,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    LinearRisk,
    NonlinearRisk,
}

impl std::str::FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear-risk" => Ok(Builtin::LinearRisk),
            "nonlinear-risk" => Ok(Builtin::NonlinearRisk),
            _ => Err(Error::Config(format!(
                "unknown dataset '{s}' (expected linear-risk or nonlinear-risk)"
            ))),
        }
    }
}

impl SyntheticSpec {
    /// Built-in Weibull-CoxPH settings.
    ///
    /// Linear-Risk: `x ~ U[0,1]^10`, `psi = beta . x` with `beta ~ U[0,1]^10`
    /// drawn from `seed`, `(nu_T, rho_T, nu_U, rho_U) = (4, 14, 3, 16)`.
    /// Nonlinear-Risk: `x ~ U[0,1]`, `psi_T = 2 sin(pi x)`,
    /// `psi_U = 2 sin(pi x + 0.5)`, `(4, 17, 3, 16)`.
    pub fn builtin(which: Builtin, n: usize, copula: ArchimedeanCopula, seed: u64) -> Result<Self> {
        let (dim, event, censor) = match which {
            Builtin::LinearRisk => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(u64::MAX);
                let mut beta = || {
                    (0..10)
                        .map(|_| rng.sample(StandardUniform))
                        .collect::<Vec<f64>>()
                };
                let bt = beta();
                let bu = beta();
                (
                    10,
                    SurvivalMarginal::weibull(4.0, 14.0, RiskFunction::linear(bt))?,
                    SurvivalMarginal::weibull(3.0, 16.0, RiskFunction::linear(bu))?,
                )
            }
            Builtin::NonlinearRisk => {
                let sine = |phase| RiskFunction::Sinusoid {
                    amplitude: 2.0,
                    frequency: PI,
                    phase,
                };
                (
                    1,
                    SurvivalMarginal::weibull(4.0, 17.0, sine(0.0))?,
                    SurvivalMarginal::weibull(3.0, 16.0, sine(0.5))?,
                )
            }
        };
        let spec = Self {
            n,
            dim,
            event,
            censor,
            copula,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        for m in [&self.event, &self.censor] {
            if let Some(d) = m.risk().input_dim() {
                if d != self.dim {
                    return Err(Error::Dimension {
                        expected: self.dim,
                        got: d,
                    });
                }
            }
        }
        if self.dim == 0 {
            return Err(Error::Config(
                "covariate dimension must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Latent times and the generating model, kept for evaluation.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub latent_t: Vec<f64>,
    pub latent_u: Vec<f64>,
    pub event: SurvivalMarginal,
    pub censor: SurvivalMarginal,
    pub copula: ArchimedeanCopula,
}

impl GroundTruth {
    /// True conditional event survival.
    pub fn survival(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.event.survival(t, x)
    }

    /// Dataset CSV with `latent_T` and `latent_U` appended.
    pub fn write_csv<W: Write>(&self, dataset: &SurvivalDataset, out: W) -> Result<()> {
        write_records(
            dataset.records(),
            dataset.dim(),
            Some((&self.latent_t, &self.latent_u)),
            out,
        )
    }
}

/// Draws `x ~ U[0,1]^d`, `(u1, u2)` from the copula and inverts each
/// marginal survival. Ties `T = U` count as censored.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(SurvivalDataset, GroundTruth)> {
    spec.validate()?;
    let rows: Vec<(SurvivalRecord, f64, f64)> = (0..spec.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = pair_rng(spec.seed, i as u64);
            let x: Vec<f64> = (0..spec.dim).map(|_| rng.sample(StandardUniform)).collect();
            let (u1, u2) = spec.copula.sample_pair(&mut rng)?;
            let t = spec.event.inverse_transform_sample(u1.min(BELOW_ONE), &x)?;
            let u = spec
                .censor
                .inverse_transform_sample(u2.min(BELOW_ONE), &x)?;
            Ok((SurvivalRecord::new(x, t.min(u), t < u), t, u))
        })
        .collect::<Result<_>>()?;
    let mut records = Vec::with_capacity(rows.len());
    let mut latent_t = Vec::with_capacity(rows.len());
    let mut latent_u = Vec::with_capacity(rows.len());
    for (r, t, u) in rows {
        records.push(r);
        latent_t.push(t);
        latent_u.push(u);
    }
    let truth = GroundTruth {
        latent_t,
        latent_u,
        event: spec.event.clone(),
        censor: spec.censor.clone(),
        copula: spec.copula.clone(),
    };
    Ok((SurvivalDataset::new(records)?, truth))
}

/// Result of inducing censoring on real outcomes.
#[derive(Debug, Clone)]
pub struct SemiSynthetic {
    pub dataset: SurvivalDataset,
    pub event: SurvivalMarginal,
    pub censor: SurvivalMarginal,
    /// Event quantiles `S_T(Y_i | x_i)`.
    pub u: Vec<f64>,
    /// Censoring quantiles drawn conditionally on `u`.
    pub v: Vec<f64>,
    pub censor_times: Vec<f64>,
}

/// Full-batch AdamW fit of a Weibull-CoxPH linear model treating every
/// outcome as an observed event.
pub fn fit_weibull_events(
    x: &[Vec<f64>],
    y: &[f64],
    steps: usize,
    lr: f64,
) -> Result<SurvivalMarginal> {
    if x.len() != y.len() || y.is_empty() {
        return Err(Error::Dimension {
            expected: y.len(),
            got: x.len(),
        });
    }
    if let Some(bad) = y.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::domain(format!(
            "outcomes must be positive, got {bad}"
        )));
    }
    let d = x[0].len();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut m = SurvivalMarginal::weibull(1.0, mean, RiskFunction::zero(d))?;
    let mut p = m.params();
    let mut opt = AdamW::new(p.len());
    let cfg = TrainConfig::default();
    let n = y.len() as f64;
    let k = p.len();
    for _ in 0..steps {
        let mut g = vec![0.0; k];
        for (xi, &yi) in x.iter().zip(y) {
            let e = m.evaluate(yi, xi)?;
            for (o, d) in g.iter_mut().zip(&e.d_log_density) {
                *o -= d / n;
            }
        }
        opt.update(
            &mut p,
            &g,
            &[(0..k, lr, 0.0)],
            cfg.beta1,
            cfg.beta2,
            cfg.eps,
        )?;
        m.set_params(&p)?;
    }
    Ok(m)
}

/// Induces copula-dependent censoring on observed outcomes: fits a
/// Weibull-CoxPH event model, derives the censoring model with shape
/// `nu_T / 0.8`, draws `v_i` from `C(. | u_i)` and sets `U_i = S_U^-1(v_i)`.
pub fn induce_semisynthetic(
    table: &OutcomeTable,
    copula: &ArchimedeanCopula,
    seed: u64,
) -> Result<SemiSynthetic> {
    let event = fit_weibull_events(&table.x, &table.y, 1500, 0.05)?;
    let censor = match event.family() {
        MarginalFamily::WeibullCoxPh { shape, scale } => {
            SurvivalMarginal::weibull(shape / 0.8, *scale, event.risk().clone())?
        }
        MarginalFamily::LogNormal { .. } => unreachable!("event model is Weibull"),
    };
    let rows: Vec<(SurvivalRecord, f64, f64, f64)> = (0..table.y.len())
        .into_par_iter()
        .map(|i| {
            let (x, y) = (&table.x[i], table.y[i]);
            let u = event.survival(y, x)?.clamp(f64::MIN_POSITIVE, BELOW_ONE);
            let mut rng = pair_rng(seed, i as u64);
            let w: f64 = rng.sample(Open01);
            let v = copula.sample_conditional(u, w)?.min(BELOW_ONE);
            let c = censor.inverse_transform_sample(v, x)?;
            Ok((SurvivalRecord::new(x.clone(), y.min(c), y < c), u, v, c))
        })
        .collect::<Result<_>>()?;
    let mut records = Vec::with_capacity(rows.len());
    let (mut us, mut vs, mut cs) = (Vec::new(), Vec::new(), Vec::new());
    for (r, u, v, c) in rows {
        records.push(r);
        us.push(u);
        vs.push(v);
        cs.push(c);
    }
    Ok(SemiSynthetic {
        dataset: SurvivalDataset::new(records)?,
        event,
        censor,
        u: us,
        v: vs,
        censor_times: cs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::Family;
    use crate::metrics::empirical_kendall_tau;

    fn constant_psi(copula: ArchimedeanCopula, n: usize) -> SyntheticSpec {
        SyntheticSpec {
            n,
            dim: 1,
            event: SurvivalMarginal::weibull(4.0, 14.0, RiskFunction::linear(vec![0.0])).unwrap(),
            censor: SurvivalMarginal::weibull(3.0, 16.0, RiskFunction::linear(vec![0.0])).unwrap(),
            copula,
            seed: 21,
        }
    }

    fn latent_tau(truth: &GroundTruth) -> f64 {
        let p: Vec<_> = truth
            .latent_t
            .iter()
            .copied()
            .zip(truth.latent_u.iter().copied())
            .collect();
        empirical_kendall_tau(&p).unwrap()
    }

    #[test]
    fn independence_latents_are_uncorrelated() {
        let (_, truth) =
            generate_synthetic(&constant_psi(ArchimedeanCopula::independence(), 10_000)).unwrap();
        assert!(latent_tau(&truth).abs() < 0.03);
    }

    #[test]
    fn clayton_latents_keep_tau() {
        let c = ArchimedeanCopula::from_tau(Family::Clayton, 0.5).unwrap();
        let (_, truth) = generate_synthetic(&constant_psi(c, 10_000)).unwrap();
        assert!((latent_tau(&truth) - 0.5).abs() < 0.03);
    }

    #[test]
    fn observed_time_consistency() {
        let c = ArchimedeanCopula::from_tau(Family::Frank, 0.4).unwrap();
        let spec = SyntheticSpec::builtin(Builtin::LinearRisk, 2000, c, 3).unwrap();
        let (d, truth) = generate_synthetic(&spec).unwrap();
        for (i, r) in d.records().iter().enumerate() {
            let (t, u) = (truth.latent_t[i], truth.latent_u[i]);
            assert_eq!(r.time, t.min(u));
            assert_eq!(r.event, t < u);
            assert_eq!(
                truth.survival(1.3, &r.x).unwrap(),
                spec.event.survival(1.3, &r.x).unwrap()
            );
        }
        let rate = d.censoring_rate();
        assert!(rate > 0.2 && rate < 0.8, "censoring rate {rate}");
    }

    #[test]
    fn builtin_risks() {
        let spec = SyntheticSpec::builtin(
            Builtin::NonlinearRisk,
            10,
            ArchimedeanCopula::independence(),
            0,
        )
        .unwrap();
        assert!((spec.event.risk().eval(&[0.5]).unwrap() - 2.0).abs() < 1e-15);
        let lin = SyntheticSpec::builtin(
            Builtin::LinearRisk,
            10,
            ArchimedeanCopula::independence(),
            4,
        )
        .unwrap();
        for m in [&lin.event, &lin.censor] {
            let beta = m.risk().params();
            assert_eq!(beta.len(), 10);
            assert!(beta.iter().all(|b| (0.0..1.0).contains(b)));
            assert_eq!(m.risk().eval(&[0.0; 10]).unwrap(), 0.0);
            assert!(m.risk().eval(&[1.0; 10]).unwrap() <= 10.0);
        }
        assert!("quadratic".parse::<Builtin>().is_err());
    }

    #[test]
    fn same_seed_same_data() {
        let c = ArchimedeanCopula::from_tau(Family::Gumbel, 0.3).unwrap();
        let spec = SyntheticSpec::builtin(Builtin::LinearRisk, 500, c, 8).unwrap();
        let (a, _) = generate_synthetic(&spec).unwrap();
        let (b, _) = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        let other = SyntheticSpec { seed: 9, ..spec };
        assert_ne!(a, generate_synthetic(&other).unwrap().0);
    }

    #[test]
    fn spec_json_round_trip() {
        let c = ArchimedeanCopula::from_tau(Family::Clayton, 0.5).unwrap();
        let spec = SyntheticSpec::builtin(Builtin::NonlinearRisk, 50, c, 1).unwrap();
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<SyntheticSpec>(&s).unwrap(), spec);
    }

    fn outcome_table(n: usize) -> OutcomeTable {
        let truth =
            SurvivalMarginal::weibull(1.8, 5.0, RiskFunction::linear(vec![0.7, -0.4])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let xi = vec![rng.random::<f64>(), rng.random::<f64>()];
            y.push(
                truth
                    .inverse_transform_sample(rng.sample(Open01), &xi)
                    .unwrap(),
            );
            x.push(xi);
        }
        OutcomeTable {
            covariate_names: vec!["a".into(), "b".into()],
            x,
            y,
        }
    }

    #[test]
    fn semisynthetic_quantiles_follow_copula() {
        let table = outcome_table(10_000);
        let c = ArchimedeanCopula::from_tau(Family::Clayton, 0.5).unwrap();
        let s = induce_semisynthetic(&table, &c, 2).unwrap();
        let pairs: Vec<_> = s.u.iter().copied().zip(s.v.iter().copied()).collect();
        assert!((empirical_kendall_tau(&pairs).unwrap() - 0.5).abs() < 0.03);
        for i in (0..table.y.len()).step_by(97) {
            let x = &table.x[i];
            assert!((s.censor.survival(s.censor_times[i], x).unwrap() - s.v[i]).abs() < 1e-9);
            let r = &s.dataset.records()[i];
            assert_eq!(r.time, table.y[i].min(s.censor_times[i]));
        }
        match (s.event.family(), s.censor.family()) {
            (
                MarginalFamily::WeibullCoxPh { shape: a, .. },
                MarginalFamily::WeibullCoxPh { shape: b, .. },
            ) => assert!((b - a / 0.8).abs() < 1e-12),
            _ => unreachable!(),
        }
    }

    #[test]
    fn weibull_fit_recovers_parameters() {
        let table = outcome_table(4000);
        let m = fit_weibull_events(&table.x, &table.y, 1500, 0.05).unwrap();
        match m.family() {
            MarginalFamily::WeibullCoxPh { shape, scale } => {
                assert!((shape - 1.8).abs() < 0.15, "shape {shape}");
                assert!((scale - 5.0).abs() < 0.6, "scale {scale}");
            }
            _ => unreachable!(),
        }
        assert!(fit_weibull_events(&table.x, &[1.0, -1.0], 10, 0.1).is_err());
    }

    #[test]
    fn semisynthetic_independence() {
        let table = outcome_table(5000);
        let s = induce_semisynthetic(&table, &ArchimedeanCopula::independence(), 5).unwrap();
        let pairs: Vec<_> = s.u.iter().copied().zip(s.v.iter().copied()).collect();
        assert!(empirical_kendall_tau(&pairs).unwrap().abs() < 0.03);
        let rate = s.dataset.censoring_rate();
        assert!(rate > 0.0 && rate < 1.0);
    }
}
