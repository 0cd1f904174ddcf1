//! Evaluation metrics: Survival-l1 against a known truth, calibration bins,
//! and an O(n log n) Kendall tau.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::marginals::SurvivalMarginal;

/// Default number of grid points for the Survival-l1 integral.
pub const DEFAULT_L1_GRID: usize = 512;

/// Survival level defining the per-record integration horizon.
pub const HORIZON_SURVIVAL: f64 = 1e-3;

/// Anything that yields a conditional survival curve.
pub trait SurvivalCurve: Sync {
    fn survival_at(&self, t: f64, x: &[f64]) -> Result<f64>;
}

impl SurvivalCurve for SurvivalMarginal {
    fn survival_at(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.survival(t, x)
    }
}

/// Adapts a closure into a [`SurvivalCurve`].
pub struct FnCurve<F>(pub F);

impl<F> SurvivalCurve for FnCurve<F>
where
    F: Fn(f64, &[f64]) -> f64 + Sync,
{
    fn survival_at(&self, t: f64, x: &[f64]) -> Result<f64> {
        Ok((self.0)(t, x))
    }
}

/// Mean over records of `(1 / t_max) int_0^t_max |S - S_hat| dt`.
///
/// `t_max` for each record is the time where the true survival falls to
/// 0.001. The integral uses the trapezoid rule on `grid` equispaced points.
pub fn survival_l1(
    truth: &SurvivalMarginal,
    model: &dyn SurvivalCurve,
    dataset: &SurvivalDataset,
    grid: usize,
) -> Result<f64> {
    if grid < 2 {
        return Err(Error::domain("Survival-l1 grid needs at least 2 points"));
    }
    let per_record: Vec<f64> = dataset
        .records()
        .par_iter()
        .map(|r| {
            let t_max = truth.inverse_transform_sample(HORIZON_SURVIVAL, &r.x)?;
            let h = t_max / (grid - 1) as f64;
            let mut acc = 0.0;
            for k in 0..grid {
                let t = k as f64 * h;
                let d = (truth.survival(t, &r.x)? - model.survival_at(t, &r.x)?).abs();
                let w = if k == 0 || k == grid - 1 { 0.5 } else { 1.0 };
                acc += w * d;
            }
            Ok(acc * h / t_max)
        })
        .collect::<Result<_>>()?;
    Ok(per_record.iter().sum::<f64>() / per_record.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub mean_predicted: f64,
    pub observed_rate: f64,
    pub count: usize,
    pub events: usize,
}

/// Equal-count bins of predicted event probability `1 - S_hat(t_i | x_i)`.
///
/// Records with identical predictions never straddle a bin edge, so heavy
/// ties can produce fewer than `bins` bins.
pub fn calibration_curve(
    model: &dyn SurvivalCurve,
    dataset: &SurvivalDataset,
    bins: usize,
) -> Result<Vec<CalibrationBin>> {
    let n = dataset.len();
    if bins == 0 || n < bins {
        return Err(Error::domain(format!(
            "calibration needs at least as many records ({n}) as bins ({bins})"
        )));
    }
    let mut scored: Vec<(f64, bool)> = dataset
        .records()
        .iter()
        .map(|r| Ok((1.0 - model.survival_at(r.time, &r.x)?, r.event)))
        .collect::<Result<_>>()?;
    if scored.iter().any(|(p, _)| p.is_nan()) {
        return Err(Error::domain("model produced NaN survival"));
    }
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));

    let mut out = Vec::with_capacity(bins);
    let mut start = 0;
    for b in 1..=bins {
        let mut end = (b * n) / bins;
        if end <= start {
            continue;
        }
        while end < n && scored[end].0 == scored[end - 1].0 {
            end += 1;
        }
        let slice = &scored[start..end];
        let events = slice.iter().filter(|(_, e)| *e).count();
        out.push(CalibrationBin {
            mean_predicted: slice.iter().map(|(p, _)| p).sum::<f64>() / slice.len() as f64,
            observed_rate: events as f64 / slice.len() as f64,
            count: slice.len(),
            events,
        });
        start = end;
        if start == n {
            break;
        }
    }
    Ok(out)
}

pub fn write_calibration_csv<W: Write>(bins: &[CalibrationBin], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin", "mean_predicted", "observed_rate", "count"])?;
    for (i, b) in bins.iter().enumerate() {
        w.write_record([
            i.to_string(),
            b.mean_predicted.to_string(),
            b.observed_rate.to_string(),
            b.count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Kendall's tau-a by Knight's merge-sort algorithm. Tied pairs count as
/// neither concordant nor discordant.
pub fn empirical_kendall_tau(pairs: &[(f64, f64)]) -> Result<f64> {
    let n = pairs.len();
    if n < 2 {
        return Err(Error::domain("Kendall tau needs at least two pairs"));
    }
    if pairs.iter().any(|(x, y)| x.is_nan() || y.is_nan()) {
        return Err(Error::domain("Kendall tau input contains NaN"));
    }
    let mut p = pairs.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let ties = |groups: &mut dyn Iterator<Item = usize>| -> u64 {
        groups.map(|g| (g as u64) * (g as u64 - 1) / 2).sum()
    };
    let tied_x = ties(&mut run_lengths(&p, |a, b| a.0 == b.0));
    let tied_xy = ties(&mut run_lengths(&p, |a, b| a.0 == b.0 && a.1 == b.1));

    let mut ys: Vec<f64> = p.iter().map(|q| q.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);

    let tied_y = {
        let mut groups = Vec::new();
        let mut run = 1;
        for i in 1..n {
            if ys[i] == ys[i - 1] {
                run += 1;
            } else {
                groups.push(run);
                run = 1;
            }
        }
        groups.push(run);
        ties(&mut groups.into_iter())
    };

    let total = (n as u64) * (n as u64 - 1) / 2;
    let numer =
        total as i128 - tied_x as i128 - tied_y as i128 + tied_xy as i128 - 2 * swaps as i128;
    Ok(numer as f64 / total as f64)
}

fn run_lengths<'a>(
    p: &'a [(f64, f64)],
    same: impl Fn(&(f64, f64), &(f64, f64)) -> bool + 'a,
) -> impl Iterator<Item = usize> + 'a {
    let mut i = 0;
    std::iter::from_fn(move || {
        if i >= p.len() {
            return None;
        }
        let start = i;
        i += 1;
        while i < p.len() && same(&p[i], &p[i - 1]) {
            i += 1;
        }
        Some(i - start)
    })
}

/// Sorts `v` ascending, returning the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Summary written by the evaluate command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub survival_l1: Option<f64>,
    pub calibration: Vec<CalibrationBin>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub copula_tau: Option<f64>,
    pub test_loglik: f64,
    pub records: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}
