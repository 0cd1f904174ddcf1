//! Maximum-likelihood fitting with AdamW, mini-batches and early stopping.

use std::ops::Range;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::copula::ArchimedeanCopula;
use crate::data::{SurvivalDataset, SurvivalRecord};
use crate::error::{Error, Result};
use crate::family::Family;
use crate::generator::GeneratorNetwork;
use crate::likelihood::{loglik_grad, mean_loglik, SurvivalModel};
use crate::marginals::{RiskFunction, SurvivalMarginal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_ll: f64,
    pub val_ll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Learning rate for the copula group; falls back to `learning_rate`.
    pub copula_learning_rate: Option<f64>,
    pub weight_decay: f64,
    pub generator_weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            copula_learning_rate: None,
            weight_decay: 0.0,
            generator_weight_decay: 0.0,
            batch_size: 512,
            max_epochs: 1000,
            patience: 10,
            train_fraction: 0.5,
            val_fraction: 0.3,
            test_fraction: 0.2,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let fr = [self.train_fraction, self.val_fraction, self.test_fraction];
        if fr.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return bad("split fractions must be positive");
        }
        if fr.iter().sum::<f64>() > 1.0 + 1e-12 {
            return bad("split fractions must sum to at most 1");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be positive");
        }
        let lrs = [
            self.learning_rate,
            self.copula_learning_rate.unwrap_or(self.learning_rate),
        ];
        if lrs.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return bad("learning rates must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.generator_weight_decay >= 0.0) {
            return bad("weight decay must be nonnegative");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.eps > 0.0)
        {
            return bad("need 0 <= beta < 1 and eps > 0");
        }
        Ok(())
    }
}

/// AdamW moments. Decoupled weight decay multiplies the raw parameters by
/// `1 - lr * wd` before the Adam update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamW {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamW {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    /// One update over parameter groups `(range, lr, weight_decay)`.
    pub fn update(
        &mut self,
        params: &mut [f64],
        grad: &[f64],
        groups: &[(Range<usize>, f64, f64)],
        beta1: f64,
        beta2: f64,
        eps: f64,
    ) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::Dimension {
                expected: self.m.len(),
                got: params.len().min(grad.len()),
            });
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                index: i,
                what: "gradient component".into(),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (range, lr, wd) in groups {
            for i in range.clone() {
                params[i] *= 1.0 - lr * wd;
                self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
                self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
                let mh = self.m[i] / c1;
                let vh = self.v[i] / c2;
                params[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded permutation of `0..n` cut into train/validation/test.
pub fn split_indices(n: usize, config: &TrainConfig) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    let count = |f: f64| ((n as f64) * f).round() as usize;
    let n_train = count(config.train_fraction).min(n);
    let n_val = count(config.val_fraction).min(n - n_train);
    let n_test = count(config.test_fraction).min(n - n_train - n_val);
    Split {
        train: idx[..n_train].to_vec(),
        val: idx[n_train..n_train + n_val].to_vec(),
        test: idx[n_train + n_val..n_train + n_val + n_test].to_vec(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalKind {
    WeibullCoxPh,
    LogNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RiskSpec {
    Linear,
    Mlp { hidden: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CopulaSpec {
    /// Monotone generator network with the given hidden widths.
    Learned {
        widths: Vec<usize>,
    },
    /// Closed-form family; `theta` defaults to the value giving tau = 0.2.
    ClosedForm {
        family: Family,
        #[serde(default)]
        theta: Option<f64>,
    },
    Independence,
}

/// Architecture of a model to be fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub copula: CopulaSpec,
    pub marginal: MarginalKind,
    pub risk: RiskSpec,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            copula: CopulaSpec::Learned {
                widths: vec![10, 10],
            },
            marginal: MarginalKind::WeibullCoxPh,
            risk: RiskSpec::Linear,
        }
    }
}

impl ModelSpec {
    pub fn independence(&self) -> Self {
        Self {
            copula: CopulaSpec::Independence,
            ..self.clone()
        }
    }

    /// Initial model: marginals centred on the observed times, zero linear
    /// risk, randomly initialised networks.
    pub fn build(&self, dataset: &SurvivalDataset, seed: u64) -> Result<SurvivalModel> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let copula = match &self.copula {
            CopulaSpec::Learned { widths } => {
                ArchimedeanCopula::from(GeneratorNetwork::random(widths, &mut rng)?)
            }
            CopulaSpec::ClosedForm { family, theta } => {
                let th = match theta {
                    Some(t) => *t,
                    None => family.theta_from_tau(0.2)?,
                };
                ArchimedeanCopula::closed_form(*family, th)?
            }
            CopulaSpec::Independence => ArchimedeanCopula::independence(),
        };
        let d = dataset.dim();
        let positive: Vec<f64> = dataset
            .records()
            .iter()
            .map(|r| r.time)
            .filter(|t| *t > 0.0)
            .collect();
        if positive.is_empty() {
            return Err(Error::domain("dataset has no positive times"));
        }
        let mean = positive.iter().sum::<f64>() / positive.len() as f64;
        let mean_log = positive.iter().map(|t| t.ln()).sum::<f64>() / positive.len() as f64;
        let marginal = |rng: &mut ChaCha8Rng| -> Result<SurvivalMarginal> {
            let risk = match &self.risk {
                RiskSpec::Linear => RiskFunction::zero(d),
                RiskSpec::Mlp { hidden } => RiskFunction::mlp(d, hidden, rng),
            };
            match self.marginal {
                MarginalKind::WeibullCoxPh => SurvivalMarginal::weibull(1.0, mean, risk),
                MarginalKind::LogNormal => SurvivalMarginal::log_normal(mean_log, 1.0, risk),
            }
        };
        let event = marginal(&mut rng)?;
        let censor = marginal(&mut rng)?;
        Ok(SurvivalModel::new(copula, event, censor))
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Best-validation snapshot.
    pub model: SurvivalModel,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_ll: f64,
    pub split: Split,
    pub optimizer: AdamW,
    pub stopped_early: bool,
}

fn diverged(epoch: usize, reason: impl Into<String>, history: &[EpochStats]) -> Error {
    Error::Diverged {
        epoch,
        reason: reason.into(),
        history: history.to_vec(),
    }
}

/// Fits `model` to the training split of `dataset`, stopping on the
/// validation log-likelihood. Deterministic given `config.seed`.
pub fn fit(
    dataset: &SurvivalDataset,
    model: SurvivalModel,
    config: &TrainConfig,
) -> Result<FitResult> {
    config.validate()?;
    if dataset.events() == 0 || dataset.censored() == 0 {
        return Err(Error::domain(
            "training needs both events and censored records",
        ));
    }
    if model
        .event
        .risk()
        .input_dim()
        .is_some_and(|d| d != dataset.dim())
    {
        return Err(Error::Dimension {
            expected: dataset.dim(),
            got: model.event.risk().input_dim().unwrap_or(0),
        });
    }
    let split = split_indices(dataset.len(), config);
    if split.train.is_empty() || split.val.is_empty() {
        return Err(Error::Config(
            "train and validation splits must be nonempty".into(),
        ));
    }
    let recs = dataset.records();
    let val: Vec<&SurvivalRecord> = split.val.iter().map(|&i| &recs[i]).collect();

    let mut model = model;
    let (nc, _, n) = model.layout();
    let groups = [
        (nc..n, config.learning_rate, config.weight_decay),
        (
            0..nc,
            config.copula_learning_rate.unwrap_or(config.learning_rate),
            config.generator_weight_decay,
        ),
    ];
    let mut opt = AdamW::new(n);
    let mut params = model.params();
    let mut history = Vec::new();
    let mut best = (f64::NEG_INFINITY, 0, model.clone());
    let mut order = split.train.clone();
    let mut stale = 0;
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);

        let mut ll_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&SurvivalRecord> = chunk.iter().map(|&i| &recs[i]).collect();
            let g = loglik_grad(&model, &batch)
                .map_err(|e| diverged(epoch, e.to_string(), &history))?;
            ll_sum += g.mean * batch.len() as f64;
            let neg: Vec<f64> = g.grad.iter().map(|v| -v).collect();
            opt.update(
                &mut params,
                &neg,
                &groups,
                config.beta1,
                config.beta2,
                config.eps,
            )
            .map_err(|e| diverged(epoch, e.to_string(), &history))?;
            model.copula.clamp_params(&mut params[..nc]);
            model
                .set_params(&params)
                .map_err(|e| diverged(epoch, e.to_string(), &history))?;
        }
        let train_ll = ll_sum / order.len() as f64;
        let val_ll = match mean_loglik(&model, &val) {
            Ok(v) if v.is_finite() => v,
            Ok(v) => {
                return Err(diverged(
                    epoch,
                    format!("validation log-likelihood {v}"),
                    &history,
                ))
            }
            Err(e) => return Err(diverged(epoch, e.to_string(), &history)),
        };
        history.push(EpochStats {
            epoch,
            train_ll,
            val_ll,
        });
        debug!("epoch {epoch}: train {train_ll:.6} val {val_ll:.6}");

        if val_ll > best.0 {
            best = (val_ll, epoch, model.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                stopped_early = true;
                break;
            }
        }
    }
    info!(
        "fit finished after {} epochs, best epoch {} (val {:.6})",
        history.len(),
        best.1,
        best.0
    );
    Ok(FitResult {
        model: best.2,
        history,
        best_epoch: best.1,
        best_val_ll: best.0,
        split,
        optimizer: opt,
        stopped_early,
    })
}

/// Everything needed to restore or inspect a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub model: SurvivalModel,
    pub optimizer: AdamW,
    pub config: TrainConfig,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
}

impl Checkpoint {
    pub fn from_fit(fit: &FitResult, config: &TrainConfig) -> Self {
        Self {
            model: fit.model.clone(),
            optimizer: fit.optimizer.clone(),
            config: config.clone(),
            history: fit.history.clone(),
            best_epoch: fit.best_epoch,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        let n = c.model.num_params();
        if c.optimizer.m.len() != n || c.optimizer.v.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: c.optimizer.m.len(),
            });
        }
        c.config.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Header is written even when the history is empty.
pub fn write_history_csv<W: std::io::Write>(history: &[EpochStats], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(["epoch", "train_ll", "val_ll"])?;
    for h in history {
        w.serialize(h)?;
    }
    w.flush()?;
    Ok(())
}
