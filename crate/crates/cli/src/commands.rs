use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use log::info;
use serde::Serialize;

use depcens::copula::ArchimedeanCopula;
use depcens::data::{OutcomeTable, SurvivalDataset, SurvivalRecord};
use depcens::datagen::{generate_synthetic, induce_semisynthetic, Builtin, SyntheticSpec};
use depcens::experiment::{
    copula_at_tau, run_sweep, sampled_tau, summarize, write_runs_csv, write_summary_csv,
};
use depcens::family::Family;
use depcens::likelihood::mean_loglik;
use depcens::metrics::{calibration_curve, survival_l1, write_calibration_csv, EvalReport};
use depcens::training::{
    fit, write_history_csv, Checkpoint, CopulaSpec, MarginalKind, RiskSpec, Split,
};

use crate::config::{load, Provenance};
use crate::{
    input_err, io_err, CliError, CliResult, EvaluateConfig, ExportConfig, GenerateConfig,
    SweepCmdConfig, TrainCmdConfig, TruthModel, OUTPUT_ROOT_ENV,
};

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic or semi-synthetic dataset.
    Generate(GenerateArgs),
    /// Fit a copula survival model to a dataset.
    Train(TrainArgs),
    /// Score a trained model: calibration, log-likelihood, Survival-l1.
    Evaluate(EvaluateArgs),
    /// Dependency sweep over copula families and Kendall tau.
    Sweep(SweepArgs),
    /// Write CDF, log-density and scatter data for a trained copula.
    ExportCopula(ExportArgs),
}

pub fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a),
        Command::ExportCopula(a) => export(a),
    }
}

fn out_dir(configured: Option<PathBuf>, command: &str) -> CliResult<PathBuf> {
    let dir = configured.unwrap_or_else(|| {
        std::env::var_os(OUTPUT_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("depcens-out"))
            .join(command)
    });
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    Ok(dir)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn write_with<F>(path: &Path, f: F) -> CliResult<()>
where
    F: FnOnce(&mut BufWriter<File>) -> depcens::Result<()>,
{
    let mut w = create(path)?;
    f(&mut w).map_err(|e| match e {
        depcens::Error::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => CliError::Core(other),
    })?;
    w.flush().map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Core(e.into()))?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

fn write_provenance<T: Serialize>(dir: &Path, command: &str, config: &T) -> CliResult<()> {
    let p = Provenance {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: serde_json::to_value(config).map_err(|e| CliError::Core(e.into()))?,
    };
    write_json(&dir.join("provenance.json"), &p)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        source: e.into(),
    })
}

fn read_dataset(path: &Path) -> CliResult<SurvivalDataset> {
    let f = File::open(path).map_err(io_err(path))?;
    SurvivalDataset::read_csv(BufReader::new(f)).map_err(input_err(path))
}

fn read_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Checkpoint::from_json(&text).map_err(input_err(path))
}

fn require(p: Option<PathBuf>, what: &str) -> CliResult<PathBuf> {
    p.ok_or_else(|| CliError::Config(format!("missing {what}")))
}

fn config_err(e: depcens::Error) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in dataset: linear-risk or nonlinear-risk.
    #[arg(long)]
    spec: Option<Builtin>,
    /// Outcome CSV (header, last column the outcome) for semi-synthetic censoring.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    copula: Option<Family>,
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn resolve_copula(
    family: Family,
    tau: Option<f64>,
    theta: Option<f64>,
) -> CliResult<ArchimedeanCopula> {
    match (tau, theta) {
        (Some(_), Some(_)) => Err(CliError::Config(
            "give either tau or theta, not both".into(),
        )),
        (_, Some(th)) => ArchimedeanCopula::closed_form(family, th).map_err(config_err),
        (t, None) => copula_at_tau(family, t.unwrap_or(0.0)).map_err(config_err),
    }
}

fn generate(a: GenerateArgs) -> CliResult<()> {
    let mut cfg: GenerateConfig = load(a.config.as_deref())?;
    if a.spec.is_some() {
        cfg.spec = a.spec;
        cfg.custom = None;
    }
    cfg.input = a.input.or(cfg.input);
    cfg.copula = a.copula.unwrap_or(cfg.copula);
    if a.tau.is_some() || a.theta.is_some() {
        cfg.tau = a.tau;
        cfg.theta = a.theta;
    }
    cfg.n = a.n.unwrap_or(cfg.n);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.out = a.out.or(cfg.out);

    let copula = resolve_copula(cfg.copula, cfg.tau, cfg.theta)?;
    let dir = out_dir(cfg.out.clone(), "generate")?;

    if let Some(input) = cfg.input.clone() {
        let f = File::open(&input).map_err(io_err(&input))?;
        let table = OutcomeTable::read_csv(BufReader::new(f)).map_err(input_err(&input))?;
        let semi = induce_semisynthetic(&table, &copula, cfg.seed)?;
        write_with(&dir.join("dataset.csv"), |w| semi.dataset.write_csv(w))?;
        let truth = TruthModel {
            event: semi.event,
            censor: semi.censor,
            copula,
        };
        write_json(&dir.join("truth.json"), &truth)?;
        info!(
            "semi-synthetic dataset: {} records, censoring rate {:.3}",
            semi.dataset.len(),
            semi.dataset.censoring_rate()
        );
    } else {
        let spec = match (&cfg.custom, cfg.spec) {
            (Some(custom), _) => SyntheticSpec {
                copula: copula.clone(),
                n: cfg.n,
                seed: cfg.seed,
                ..custom.clone()
            },
            (None, Some(b)) => {
                SyntheticSpec::builtin(b, cfg.n, copula.clone(), cfg.seed).map_err(config_err)?
            }
            (None, None) => {
                return Err(CliError::Config(
                    "need --spec, a custom spec, or --input".into(),
                ))
            }
        };
        spec.validate().map_err(config_err)?;
        let (data, truth) = generate_synthetic(&spec)?;
        write_with(&dir.join("dataset.csv"), |w| data.write_csv(w))?;
        write_with(&dir.join("ground_truth.csv"), |w| truth.write_csv(&data, w))?;
        write_json(
            &dir.join("truth.json"),
            &TruthModel {
                event: truth.event,
                censor: truth.censor,
                copula: truth.copula,
            },
        )?;
        info!(
            "synthetic dataset: {} records, censoring rate {:.3}",
            data.len(),
            data.censoring_rate()
        );
    }
    write_provenance(&dir, "generate", &cfg)
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV (x_0..x_{d-1}, time, event).
    #[arg(long)]
    data: Option<PathBuf>,
    /// learned, independence, clayton, frank or gumbel.
    #[arg(long)]
    copula: Option<String>,
    /// Hidden widths of the generator network, e.g. 10,10.
    #[arg(long, value_delimiter = ',')]
    widths: Option<Vec<usize>>,
    /// weibull or lognormal.
    #[arg(long)]
    marginal: Option<String>,
    /// linear or mlp.
    #[arg(long)]
    risk: Option<String>,
    /// Hidden widths of the MLP risk function.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    copula_lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn apply_train_flags(cfg: &mut TrainCmdConfig, a: &TrainArgs) -> CliResult<()> {
    if let Some(c) = &a.copula {
        cfg.model.copula = match c.as_str() {
            "learned" => CopulaSpec::Learned {
                widths: match &cfg.model.copula {
                    CopulaSpec::Learned { widths } => widths.clone(),
                    _ => vec![10, 10],
                },
            },
            "independence" => CopulaSpec::Independence,
            other => CopulaSpec::ClosedForm {
                family: other.parse().map_err(config_err)?,
                theta: None,
            },
        };
    }
    if let Some(w) = &a.widths {
        match &mut cfg.model.copula {
            CopulaSpec::Learned { widths } => *widths = w.clone(),
            _ => {
                return Err(CliError::Config(
                    "--widths applies to the learned copula".into(),
                ))
            }
        }
    }
    if let Some(m) = &a.marginal {
        cfg.model.marginal = match m.as_str() {
            "weibull" => MarginalKind::WeibullCoxPh,
            "lognormal" => MarginalKind::LogNormal,
            other => return Err(CliError::Config(format!("unknown marginal '{other}'"))),
        };
    }
    if let Some(r) = &a.risk {
        cfg.model.risk = match r.as_str() {
            "linear" => RiskSpec::Linear,
            "mlp" => RiskSpec::Mlp {
                hidden: a.hidden.clone().unwrap_or_else(|| vec![16]),
            },
            other => return Err(CliError::Config(format!("unknown risk '{other}'"))),
        };
    } else if let (Some(h), RiskSpec::Mlp { hidden }) = (&a.hidden, &mut cfg.model.risk) {
        *hidden = h.clone();
    }
    let t = &mut cfg.train;
    t.learning_rate = a.lr.unwrap_or(t.learning_rate);
    t.copula_learning_rate = a.copula_lr.or(t.copula_learning_rate);
    t.weight_decay = a.weight_decay.unwrap_or(t.weight_decay);
    t.batch_size = a.batch_size.unwrap_or(t.batch_size);
    t.max_epochs = a.epochs.unwrap_or(t.max_epochs);
    t.patience = a.patience.unwrap_or(t.patience);
    t.seed = a.seed.unwrap_or(t.seed);
    Ok(())
}

fn train(a: TrainArgs) -> CliResult<()> {
    let mut cfg: TrainCmdConfig = load(a.config.as_deref())?;
    apply_train_flags(&mut cfg, &a)?;
    cfg.data = a.data.clone().or(cfg.data);
    cfg.out = a.out.clone().or(cfg.out);
    cfg.train.validate().map_err(config_err)?;

    let data_path = require(cfg.data.clone(), "--data")?;
    let data = read_dataset(&data_path)?;
    let dir = out_dir(cfg.out.clone(), "train")?;
    write_provenance(&dir, "train", &cfg)?;

    let init = cfg.init_seed.unwrap_or(cfg.train.seed);
    let model = cfg.model.build(&data, init).map_err(config_err)?;
    match fit(&data, model, &cfg.train) {
        Ok(r) => {
            write_with(&dir.join("history.csv"), |w| {
                write_history_csv(&r.history, w)
            })?;
            write_json(&dir.join("split.json"), &r.split)?;
            let ck = Checkpoint::from_fit(&r, &cfg.train);
            let text = ck.to_json()?;
            let path = dir.join("checkpoint.json");
            std::fs::write(&path, text + "\n").map_err(io_err(&path))?;
            info!(
                "trained {} epochs, best epoch {} with validation log-likelihood {:.6}",
                r.history.len(),
                r.best_epoch,
                r.best_val_ll
            );
            Ok(())
        }
        Err(depcens::Error::Diverged {
            epoch,
            reason,
            history,
        }) => {
            write_with(&dir.join("history.csv"), |w| write_history_csv(&history, w))?;
            Err(CliError::Core(depcens::Error::Diverged {
                epoch,
                reason,
                history,
            }))
        }
        Err(
            e @ (depcens::Error::Domain(_)
            | depcens::Error::Config(_)
            | depcens::Error::Dimension { .. }),
        ) => Err(config_err(e)),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// truth.json from `generate`; enables Survival-l1.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// split.json from `train`; restricts scoring to the test records.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    let mut cfg: EvaluateConfig = load(a.config.as_deref())?;
    cfg.checkpoint = a.checkpoint.or(cfg.checkpoint);
    cfg.data = a.data.or(cfg.data);
    cfg.truth = a.truth.or(cfg.truth);
    cfg.split = a.split.or(cfg.split);
    cfg.bins = a.bins.unwrap_or(cfg.bins);
    cfg.grid = a.grid.unwrap_or(cfg.grid);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.out = a.out.or(cfg.out);
    if cfg.bins == 0 || cfg.grid < 2 || cfg.tau_samples < 2 {
        return Err(CliError::Config(
            "need bins >= 1, grid >= 2 and tau_samples >= 2".into(),
        ));
    }

    let ck = read_checkpoint(&require(cfg.checkpoint.clone(), "--checkpoint")?)?;
    let data_path = require(cfg.data.clone(), "--data")?;
    let mut data = read_dataset(&data_path)?;
    if let Some(sp) = &cfg.split {
        let split: Split = read_json(sp)?;
        if split.test.iter().any(|&i| i >= data.len()) || split.test.is_empty() {
            return Err(CliError::Config(format!(
                "{}: test indices do not fit the dataset",
                sp.display()
            )));
        }
        data = data.subset(&split.test)?;
    }
    let truth: Option<TruthModel> = cfg.truth.as_deref().map(read_json).transpose()?;
    let dir = out_dir(cfg.out.clone(), "evaluate")?;

    let model = &ck.model;
    let recs: Vec<&SurvivalRecord> = data.records().iter().collect();
    let test_loglik = mean_loglik(model, &recs)?;
    let calibration = calibration_curve(&model.event, &data, cfg.bins).map_err(config_err)?;
    let mut notes = Vec::new();
    let survival_l1 = match &truth {
        Some(t) => Some(survival_l1(&t.event, &model.event, &data, cfg.grid)?),
        None => {
            notes.push("no ground truth supplied; survival_l1 omitted".to_string());
            None
        }
    };
    let copula_tau = Some(sampled_tau(&model.copula, cfg.tau_samples, cfg.seed)?);
    let report = EvalReport {
        survival_l1,
        calibration: calibration.clone(),
        copula_tau,
        test_loglik,
        records: data.len(),
        notes,
    };
    write_json(&dir.join("report.json"), &report)?;
    write_with(&dir.join("calibration.csv"), |w| {
        write_calibration_csv(&calibration, w)
    })?;
    write_provenance(&dir, "evaluate", &cfg)
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated copula families.
    #[arg(long, value_delimiter = ',')]
    families: Option<Vec<Family>>,
    /// Comma-separated Kendall tau grid.
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    spec: Option<Builtin>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    copula_lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Cells run concurrently; 0 uses all cores.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn sweep(a: SweepArgs) -> CliResult<()> {
    let mut cfg: SweepCmdConfig = load(a.config.as_deref())?;
    let s = &mut cfg.sweep;
    s.families = a.families.unwrap_or(std::mem::take(&mut s.families));
    s.taus = a.taus.unwrap_or(std::mem::take(&mut s.taus));
    s.repeats = a.repeats.unwrap_or(s.repeats);
    s.n = a.n.unwrap_or(s.n);
    s.dataset = a.spec.unwrap_or(s.dataset);
    s.train.learning_rate = a.lr.unwrap_or(s.train.learning_rate);
    s.train.copula_learning_rate = a.copula_lr.or(s.train.copula_learning_rate);
    s.train.max_epochs = a.epochs.unwrap_or(s.train.max_epochs);
    s.train.patience = a.patience.unwrap_or(s.train.patience);
    s.seed = a.seed.unwrap_or(s.seed);
    s.workers = a.workers.unwrap_or(s.workers);
    cfg.out = a.out.or(cfg.out);
    cfg.sweep.validate().map_err(config_err)?;

    let dir = out_dir(cfg.out.clone(), "sweep")?;
    write_provenance(&dir, "sweep", &cfg)?;
    let results = run_sweep(&cfg.sweep)?;
    write_with(&dir.join("sweep_runs.csv"), |w| write_runs_csv(&results, w))?;
    write_with(&dir.join("sweep_summary.csv"), |w| {
        write_summary_csv(&summarize(&results), w)
    })
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// truth.json from `generate`; also exports the generating copula.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn export(a: ExportArgs) -> CliResult<()> {
    let mut cfg: ExportConfig = load(a.config.as_deref())?;
    cfg.checkpoint = a.checkpoint.or(cfg.checkpoint);
    cfg.truth = a.truth.or(cfg.truth);
    cfg.resolution = a.resolution.unwrap_or(cfg.resolution);
    cfg.samples = a.samples.unwrap_or(cfg.samples);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.out = a.out.or(cfg.out);
    if cfg.resolution < 2 || cfg.samples == 0 {
        return Err(CliError::Config(
            "need resolution >= 2 and samples >= 1".into(),
        ));
    }
    let ck = read_checkpoint(&require(cfg.checkpoint.clone(), "--checkpoint")?)?;
    let truth: Option<TruthModel> = cfg.truth.as_deref().map(read_json).transpose()?;
    let dir = out_dir(cfg.out.clone(), "export-copula")?;

    let mut copulas = vec![("learned", ck.model.copula)];
    if let Some(t) = truth {
        copulas.push(("truth", t.copula));
    }
    for (name, c) in copulas {
        let paths = ["cdf", "logpdf", "scatter"].map(|k| dir.join(format!("{name}_{k}.csv")));
        let mut ws = [create(&paths[0])?, create(&paths[1])?, create(&paths[2])?];
        let [w0, w1, w2] = &mut ws;
        c.export_plot_data(
            cfg.resolution,
            cfg.samples,
            cfg.seed,
            &mut *w0,
            &mut *w1,
            &mut *w2,
        )
        .map_err(|e| match e {
            depcens::Error::Io(source) => CliError::Io {
                path: dir.clone(),
                source,
            },
            other => CliError::Core(other),
        })?;
        for (w, p) in ws.iter_mut().zip(&paths) {
            w.flush().map_err(io_err(p))?;
        }
    }
    write_provenance(&dir, "export-copula", &cfg)
}
