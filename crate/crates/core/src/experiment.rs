//! Dependency sweep: for each copula family and tau, generate data, fit the
//! copula model and the independence baseline, and score both.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::ArchimedeanCopula;
use crate::datagen::{generate_synthetic, Builtin, SyntheticSpec};
use crate::error::{Error, Result};
use crate::family::Family;
use crate::metrics::{empirical_kendall_tau, survival_l1, DEFAULT_L1_GRID};
use crate::training::{fit, FitResult, ModelSpec, TrainConfig};

/// Copula of the given family at Kendall `tau`; `tau = 0` is independence.
pub fn copula_at_tau(family: Family, tau: f64) -> Result<ArchimedeanCopula> {
    if tau == 0.0 || family == Family::Independence {
        if tau != 0.0 {
            return Err(Error::Config("independence copula has tau = 0".into()));
        }
        return Ok(ArchimedeanCopula::independence());
    }
    ArchimedeanCopula::from_tau(family, tau)
}

/// Empirical Kendall tau of `n` pairs drawn from the copula.
pub fn sampled_tau(copula: &ArchimedeanCopula, n: usize, seed: u64) -> Result<f64> {
    empirical_kendall_tau(&copula.sample_joint(n, seed)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub dataset: Builtin,
    pub families: Vec<Family>,
    pub taus: Vec<f64>,
    pub repeats: usize,
    pub n: usize,
    pub seed: u64,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub l1_grid: usize,
    /// Cells evaluated concurrently; 0 means the rayon default.
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            dataset: Builtin::LinearRisk,
            families: vec![Family::Frank, Family::Clayton, Family::Gumbel],
            taus: vec![0.0, 0.2, 0.4, 0.6, 0.8],
            repeats: 3,
            n: 5000,
            seed: 0,
            model: ModelSpec::default(),
            train: TrainConfig::default(),
            l1_grid: DEFAULT_L1_GRID,
            workers: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() || self.taus.is_empty() || self.repeats == 0 {
            return Err(Error::Config(
                "sweep needs families, taus and repeats".into(),
            ));
        }
        for &f in &self.families {
            for &t in &self.taus {
                copula_at_tau(f, t).map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub family: Family,
    pub tau: f64,
    pub repeat: usize,
    pub seed: u64,
    pub censoring_rate: f64,
    pub dep_l1: f64,
    pub indep_l1: f64,
    pub dep_tau: f64,
    pub dep_epochs: usize,
    pub indep_epochs: usize,
}

/// Output of one cell with the fitted models.
pub struct Cell {
    pub result: CellResult,
    pub dep: FitResult,
    pub indep: FitResult,
}

pub fn run_cell(config: &SweepConfig, family: Family, tau: f64, repeat: usize) -> Result<Cell> {
    let seed = config
        .seed
        .wrapping_add(repeat as u64)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((tau * 1000.0).round() as u64);
    let copula = copula_at_tau(family, tau)?;
    let spec = SyntheticSpec::builtin(config.dataset, config.n, copula, seed)?;
    let (data, truth) = generate_synthetic(&spec)?;
    let train = TrainConfig {
        seed,
        ..config.train.clone()
    };
    let dep = fit(&data, config.model.build(&data, seed)?, &train)?;
    let indep = fit(
        &data,
        config.model.independence().build(&data, seed)?,
        &train,
    )?;
    let test = data.subset(&dep.split.test)?;
    let dep_l1 = survival_l1(&truth.event, &dep.model.event, &test, config.l1_grid)?;
    let indep_l1 = survival_l1(&truth.event, &indep.model.event, &test, config.l1_grid)?;
    let dep_tau = sampled_tau(&dep.model.copula, 20_000, seed)?;
    Ok(Cell {
        result: CellResult {
            family,
            tau,
            repeat,
            seed,
            censoring_rate: data.censoring_rate(),
            dep_l1,
            indep_l1,
            dep_tau,
            dep_epochs: dep.history.len(),
            indep_epochs: indep.history.len(),
        },
        dep,
        indep,
    })
}

/// Runs every (family, tau, repeat) cell; results come back in declaration order.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<CellResult>> {
    config.validate()?;
    let cells: Vec<(Family, f64, usize)> = config
        .families
        .iter()
        .flat_map(|&f| {
            config
                .taus
                .iter()
                .flat_map(move |&t| (0..config.repeats).map(move |r| (f, t, r)))
        })
        .collect();
    let work = || -> Result<Vec<CellResult>> {
        cells
            .par_iter()
            .map(|&(f, t, r)| Ok(run_cell(config, f, t, r)?.result))
            .collect()
    };
    if config.workers == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub family: Family,
    pub tau: f64,
    pub model: String,
    pub mean_l1: f64,
    pub std_l1: f64,
    pub repeats: usize,
}

/// Mean and sample standard deviation of Survival-l1 per (family, tau, model).
pub fn summarize(results: &[CellResult]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Family, f64)> = Vec::new();
    for r in results {
        if !keys.iter().any(|k| k.0 == r.family && k.1 == r.tau) {
            keys.push((r.family, r.tau));
        }
    }
    let mut out = Vec::new();
    for (family, tau) in keys {
        let group: Vec<&CellResult> = results
            .iter()
            .filter(|r| r.family == family && r.tau == tau)
            .collect();
        for (model, pick) in [("dep", true), ("indep", false)] {
            let vals: Vec<f64> = group
                .iter()
                .map(|r| if pick { r.dep_l1 } else { r.indep_l1 })
                .collect();
            let (mean, std) = mean_std(&vals);
            out.push(SummaryRow {
                family,
                tau,
                model: model.into(),
                mean_l1: mean,
                std_l1: std,
                repeats: vals.len(),
            });
        }
    }
    out
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn write_runs_csv<W: Write>(results: &[CellResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::CopulaSpec;

    #[test]
    fn tau_zero_is_independence() {
        for f in Family::ALL {
            assert_eq!(
                copula_at_tau(f, 0.0).unwrap(),
                ArchimedeanCopula::independence()
            );
        }
        assert!(copula_at_tau(Family::Independence, 0.3).is_err());
        assert!(copula_at_tau(Family::Clayton, 1.5).is_err());
    }

    #[test]
    fn summary_statistics() {
        let mk = |tau, rep, d, i| CellResult {
            family: Family::Clayton,
            tau,
            repeat: rep,
            seed: 0,
            censoring_rate: 0.5,
            dep_l1: d,
            indep_l1: i,
            dep_tau: 0.0,
            dep_epochs: 1,
            indep_epochs: 1,
        };
        let rows = summarize(&[
            mk(0.0, 0, 1.0, 2.0),
            mk(0.0, 1, 3.0, 2.0),
            mk(0.5, 0, 1.0, 1.0),
        ]);
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].mean_l1, 2.0);
        assert!((rows[0].std_l1 - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(rows[1].std_l1, 0.0);
        assert_eq!(rows[2].repeats, 1);
    }

    #[test]
    fn tiny_sweep_shape_and_determinism() {
        let cfg = SweepConfig {
            families: vec![Family::Clayton],
            taus: vec![0.0, 0.5],
            repeats: 2,
            n: 300,
            model: ModelSpec {
                copula: CopulaSpec::Learned { widths: vec![3, 3] },
                ..Default::default()
            },
            train: TrainConfig {
                learning_rate: 0.02,
                max_epochs: 3,
                batch_size: 64,
                ..Default::default()
            },
            l1_grid: 64,
            ..Default::default()
        };
        let a = run_sweep(&cfg).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!((a[0].tau, a[0].repeat), (0.0, 0));
        assert_eq!((a[3].tau, a[3].repeat), (0.5, 1));
        assert!(a.iter().all(|r| r.dep_l1 >= 0.0 && r.indep_l1 >= 0.0));
        assert_eq!(a, run_sweep(&cfg).unwrap());
        let rows = summarize(&a);
        assert_eq!(rows.len(), 4);
        let mut buf = Vec::new();
        write_summary_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("family,tau,model,mean_l1,std_l1,repeats"));
    }
}
