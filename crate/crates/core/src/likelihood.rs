//! Right-censored log-likelihoods under a copula between event and censoring
//! times, and the independence baseline.
//!
//! With `a = phi^-1(S_T)`, `b = phi^-1(S_U)` the copula partial is
//! `dC/du1 = phi'(a + b) / phi'(a)`, so an event record contributes
//! `ln f_T + ln(-phi'(a+b)) - ln(-phi'(a))` and a censored record the
//! mirror image with `f_U` and `phi'(b)`.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::ArchimedeanCopula;
use crate::data::SurvivalRecord;
use crate::error::{Error, Result};
use crate::marginals::{SurvivalMarginal, SURVIVAL_FLOOR};

/// Records per reduction chunk; chunk sums are folded in order.
const CHUNK: usize = 64;

/// Fraction of clamped records above which a batch warns.
const CLAMP_WARN_FRACTION: f64 = 0.01;

fn log_floor() -> f64 {
    SURVIVAL_FLOOR.ln()
}

/// Copula plus event and censoring marginals. The flat parameter vector is
/// laid out as `[copula | event | censor]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurvivalModel {
    pub copula: ArchimedeanCopula,
    pub event: SurvivalMarginal,
    pub censor: SurvivalMarginal,
}

impl SurvivalModel {
    pub fn new(
        copula: ArchimedeanCopula,
        event: SurvivalMarginal,
        censor: SurvivalMarginal,
    ) -> Self {
        Self {
            copula,
            event,
            censor,
        }
    }

    pub fn num_params(&self) -> usize {
        self.copula.num_params() + self.event.num_params() + self.censor.num_params()
    }

    /// Index range boundaries: copula `[0, c)`, event `[c, e)`, censor `[e, n)`.
    pub fn layout(&self) -> (usize, usize, usize) {
        let c = self.copula.num_params();
        let e = c + self.event.num_params();
        (c, e, e + self.censor.num_params())
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.copula.params();
        p.extend(self.event.params());
        p.extend(self.censor.params());
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        let (c, e, n) = self.layout();
        if p.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: p.len(),
            });
        }
        self.copula.set_params(&p[..c])?;
        self.event.set_params(&p[c..e])?;
        self.censor.set_params(&p[e..])
    }

    /// Log-likelihood of one record under the dependent model.
    pub fn loglik(&self, record: &SurvivalRecord) -> Result<f64> {
        loglik_dep(&self.copula, &self.event, &self.censor, record)
    }
}

struct Term {
    value: f64,
    clamped: bool,
}

fn non_finite(index: usize, what: &str) -> Error {
    Error::NonFinite {
        index,
        what: what.into(),
    }
}

/// `ln f + ln dC/du` for one record, optionally accumulating the parameter
/// gradient into `grad` (layout as [`SurvivalModel::params`]).
fn record_term(
    copula: &ArchimedeanCopula,
    event: &SurvivalMarginal,
    censor: &SurvivalMarginal,
    r: &SurvivalRecord,
    index: usize,
    grad: Option<&mut [f64]>,
) -> Result<Term> {
    let (te, ce) = if grad.is_some() {
        (
            event.evaluate(r.time, &r.x)?,
            censor.evaluate(r.time, &r.x)?,
        )
    } else {
        let lite = |m: &SurvivalMarginal, need_f: bool| -> Result<_> {
            Ok(crate::marginals::MarginalEval {
                log_survival: m.log_survival(r.time, &r.x)?,
                log_density: if need_f {
                    m.log_density(r.time, &r.x)?
                } else {
                    0.0
                },
                d_log_survival: Vec::new(),
                d_log_density: Vec::new(),
            })
        };
        (lite(event, r.event)?, lite(censor, !r.event)?)
    };

    let floor = log_floor();
    let log_f = if r.event {
        te.log_density
    } else {
        ce.log_density
    };
    // the copula partial is at most 1, so the term cannot rise above ln f
    if log_f < floor {
        return Ok(Term {
            value: floor,
            clamped: true,
        });
    }
    let (floored_t, floored_u) = (te.log_survival < floor, ce.log_survival < floor);
    let u1 = te.log_survival.max(floor).exp();
    let u2 = ce.log_survival.max(floor).exp();
    let a = copula.inverse(u1)?;
    let b = copula.inverse(u2)?;
    let s = a + b;
    let js = copula.jet(s);
    let ja = copula.jet(a);
    let jb = copula.jet(b);
    let focus = if r.event { &ja } else { &jb };
    let value = log_f + (-js.d1).ln() - (-focus.d1).ln();

    if value.is_nan() && !(a.is_finite() && b.is_finite()) {
        return Ok(Term {
            value: floor,
            clamped: true,
        });
    }
    if value.is_nan() {
        return Err(non_finite(index, "log-likelihood term"));
    }
    if value < floor {
        return Ok(Term {
            value: floor,
            clamped: true,
        });
    }
    if !value.is_finite() {
        return Err(non_finite(index, "log-likelihood term"));
    }

    if let Some(g) = grad {
        let nc = copula.num_params();
        let ne = event.num_params();
        let rs = js.d2 / js.d1;
        let ra = if ja.d1.is_finite() {
            ja.d2 / ja.d1
        } else {
            0.0
        };
        let rb = if jb.d1.is_finite() {
            jb.d2 / jb.d1
        } else {
            0.0
        };
        let (dl_da, dl_db) = if r.event {
            (rs - ra, rs)
        } else {
            (rs, rs - rb)
        };
        // dl/du = (dl/da) / phi'(a); phi'(a) = -inf at a = 0 gives zero
        let dl_du1 = dl_da / ja.d1;
        let dl_du2 = dl_db / jb.d1;

        let (ge, gc) = g[nc..].split_at_mut(ne);
        if r.event {
            for (o, d) in ge.iter_mut().zip(&te.d_log_density) {
                *o += d;
            }
        } else {
            for (o, d) in gc.iter_mut().zip(&ce.d_log_density) {
                *o += d;
            }
        }
        if !floored_t {
            let k = dl_du1 * u1;
            for (o, d) in ge.iter_mut().zip(&te.d_log_survival) {
                *o += k * d;
            }
        }
        if !floored_u {
            let k = dl_du2 * u2;
            for (o, d) in gc.iter_mut().zip(&ce.d_log_survival) {
                *o += k * d;
            }
        }

        if nc > 0 {
            // d a / d p = -(d phi / d p)(a) / phi'(a), same for b
            let gcop = &mut g[..nc];
            copula.accumulate_param_grad(s, 0.0, 1.0 / js.d1, gcop);
            let slope_a = if r.event { -1.0 / ja.d1 } else { 0.0 };
            let slope_b = if r.event { 0.0 } else { -1.0 / jb.d1 };
            copula.accumulate_param_grad(a, -dl_du1, slope_a, gcop);
            copula.accumulate_param_grad(b, -dl_du2, slope_b, gcop);
        }
    }
    Ok(Term {
        value,
        clamped: false,
    })
}

/// Log-likelihood of one record under the copula model.
pub fn loglik_dep(
    copula: &ArchimedeanCopula,
    event: &SurvivalMarginal,
    censor: &SurvivalMarginal,
    record: &SurvivalRecord,
) -> Result<f64> {
    Ok(record_term(copula, event, censor, record, 0, None)?.value)
}

/// Independence log-likelihood. `full` adds the censoring-marginal factor
/// (`S_U` for events, `f_U` for censorings); otherwise only `f_T^d S_T^(1-d)`.
pub fn loglik_indep(
    event: &SurvivalMarginal,
    censor: &SurvivalMarginal,
    record: &SurvivalRecord,
    full: bool,
) -> Result<f64> {
    let (t, x) = (record.time, &record.x[..]);
    let floor = log_floor();
    let mut v = if record.event {
        event.log_density(t, x)?
    } else {
        event.log_survival(t, x)?.max(floor)
    };
    if full {
        v += if record.event {
            censor.log_survival(t, x)?.max(floor)
        } else {
            censor.log_density(t, x)?
        };
    }
    if v.is_nan() {
        return Err(non_finite(0, "independence log-likelihood"));
    }
    Ok(v.max(floor))
}

/// Mean log-likelihood and gradient over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoglik {
    pub mean: f64,
    pub grad: Vec<f64>,
    pub clamped: usize,
}

fn reduce_batch(
    model: &SurvivalModel,
    batch: &[&SurvivalRecord],
    with_grad: bool,
) -> Result<BatchLoglik> {
    if batch.is_empty() {
        return Err(Error::domain("empty batch"));
    }
    let n = if with_grad { model.num_params() } else { 0 };
    let partials: Vec<(f64, Vec<f64>, usize)> = batch
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut sum = 0.0;
            let mut g = vec![0.0; n];
            let mut clamped = 0;
            for (k, r) in chunk.iter().enumerate() {
                let term = record_term(
                    &model.copula,
                    &model.event,
                    &model.censor,
                    r,
                    ci * CHUNK + k,
                    with_grad.then_some(&mut g[..]),
                )?;
                sum += term.value;
                clamped += usize::from(term.clamped);
            }
            Ok((sum, g, clamped))
        })
        .collect::<Result<_>>()?;

    let mut total = 0.0;
    let mut grad = vec![0.0; n];
    let mut clamped = 0;
    for (s, g, c) in partials {
        total += s;
        clamped += c;
        for (o, v) in grad.iter_mut().zip(g) {
            *o += v;
        }
    }
    let m = batch.len() as f64;
    for v in grad.iter_mut() {
        *v /= m;
    }
    if let Some(i) = grad.iter().position(|v| !v.is_finite()) {
        return Err(non_finite(i, "gradient component"));
    }
    if clamped as f64 > CLAMP_WARN_FRACTION * m {
        warn!(
            "{clamped} of {} log-likelihood terms clamped at ln(1e-300)",
            batch.len()
        );
    }
    Ok(BatchLoglik {
        mean: total / m,
        grad,
        clamped,
    })
}

/// Mean log-likelihood of the batch and its gradient in the layout of
/// [`SurvivalModel::params`].
pub fn loglik_grad(model: &SurvivalModel, batch: &[&SurvivalRecord]) -> Result<BatchLoglik> {
    reduce_batch(model, batch, true)
}

/// Mean log-likelihood of the batch without the gradient.
pub fn mean_loglik(model: &SurvivalModel, batch: &[&SurvivalRecord]) -> Result<f64> {
    Ok(reduce_batch(model, batch, false)?.mean)
}
