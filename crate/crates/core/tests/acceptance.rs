//! Acceptance criteria. Each test prints one PASS/FAIL line to stderr
//! (bypassing the harness capture) and then asserts.

use std::io::Write;
use std::time::Instant;

use depcens::copula::ArchimedeanCopula;
use depcens::data::SurvivalRecord;
use depcens::datagen::{generate_synthetic, Builtin, SyntheticSpec};
use depcens::experiment::{copula_at_tau, run_sweep, sampled_tau, summarize, SweepConfig};
use depcens::family::Family;
use depcens::generator::GeneratorNetwork;
use depcens::likelihood::{loglik_dep, loglik_grad, loglik_indep, mean_loglik, SurvivalModel};
use depcens::marginals::{RiskFunction, SurvivalMarginal};
use depcens::metrics::{calibration_curve, empirical_kendall_tau, survival_l1, DEFAULT_L1_GRID};
use depcens::training::{fit, ModelSpec, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, pass: bool, detail: &str, started: Instant) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr(),
        "{verdict} criterion {id} ({name}): {detail} [{:.1}s]",
        started.elapsed().as_secs_f64()
    );
}

fn random_net(seed: u64, widths: &[usize]) -> GeneratorNetwork {
    GeneratorNetwork::random(widths, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Expands a network into `sum_k w_k exp(-r_k t)` by enumerating paths.
fn flatten(g: &GeneratorNetwork, widths: &[usize]) -> Vec<(f64, f64)> {
    // terms[i] = mixture representing hidden unit i of the current layer
    let mut terms: Vec<Vec<(f64, f64)>> = vec![vec![(1.0, 0.0)]];
    let mut prev = 1;
    for (l, &w) in widths.iter().enumerate() {
        let a = g.mixing(l);
        let b = g.rates(l);
        let mut next = Vec::with_capacity(w);
        for i in 0..w {
            let mut unit = Vec::new();
            for j in 0..prev {
                for &(c, r) in &terms[j] {
                    unit.push((a[i * prev + j] * c, r + b[i]));
                }
            }
            next.push(unit);
        }
        terms = next;
        prev = w;
    }
    let mut flat = Vec::new();
    for (i, unit) in terms.iter().enumerate() {
        for &(c, r) in unit {
            flat.push((g.output_weights()[i] * c, r));
        }
    }
    flat
}

fn mixture_deriv(flat: &[(f64, f64)], t: f64, k: i32) -> f64 {
    flat.iter()
        .map(|(w, r)| w * (-r).powi(k) * (-r * t).exp())
        .sum()
}

#[test]
fn criterion_1_generator_validity() {
    let start = Instant::now();
    let widths = [10, 10];
    let grid: Vec<f64> = (0..50).map(|k| 0.1 * k as f64).collect();
    let mut failures = Vec::new();
    let (mut worst_inv, mut worst_flat) = (0.0f64, 0.0f64);
    for s in 0..50 {
        let g = random_net(1000 + s, &widths);
        if g.eval(0.0).unwrap() != 1.0 {
            failures.push(format!("net {s}: phi(0) != 1"));
        }
        for k in 1..40 {
            let u = k as f64 / 40.0;
            let t = g.inverse(u).unwrap();
            worst_inv = worst_inv.max((g.eval(t).unwrap() - u).abs());
        }
        let flat = flatten(&g, &widths);
        for &t in &grid {
            let j = g.jet(t);
            for (k, v) in [(0, j.value), (1, j.d1), (2, j.d2)] {
                worst_flat = worst_flat.max((v - mixture_deriv(&flat, t, k)).abs());
            }
            // signs: value and even orders positive, odd orders negative
            let h = 1e-3;
            let up = g.jet(t + h);
            let mid = g.jet(t + 2.0 * h);
            let d3 = (up.d2 - j.d2) / h;
            let d4 = (mid.d2 - 2.0 * up.d2 + j.d2) / (h * h);
            let signs = [j.value > 0.0, j.d1 < 0.0, j.d2 > 0.0, d3 < 0.0, d4 > 0.0];
            for k in 0..=4 {
                let exact = (-1f64).powi(k as i32) * mixture_deriv(&flat, t, k as i32) >= 0.0;
                if !signs[k] || !exact {
                    failures.push(format!("net {s}: order {k} sign at t={t}"));
                }
            }
        }
    }
    if worst_inv > 1e-10 {
        failures.push(format!("inversion error {worst_inv:e}"));
    }
    if worst_flat > 1e-12 {
        failures.push(format!("flat-mixture error {worst_flat:e}"));
    }
    let runtime_ok = start.elapsed().as_secs_f64() < 60.0;
    if !runtime_ok {
        failures.push("runtime over 1 min".into());
    }
    let pass = failures.is_empty();
    report(
        1,
        "generator validity",
        pass,
        &format!("50 networks; max inversion err {worst_inv:.2e}; max flat-mixture err {worst_flat:.2e}; {} issues", failures.len()),
        start,
    );
    assert!(pass, "{failures:?}");
}

fn random_records(n: usize, d: usize, seed: u64) -> Vec<SurvivalRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x = (0..d).map(|_| rng.random::<f64>()).collect();
            SurvivalRecord::new(x, rng.random_range(0.05..3.0), rng.random_bool(0.5))
        })
        .collect()
}

#[test]
fn criterion_2_gradient_oracle() {
    let start = Instant::now();
    let h = 1e-6;
    let records = random_records(10, 3, 42);
    let batch: Vec<&SurvivalRecord> = records.iter().collect();
    let copulas: Vec<(&str, ArchimedeanCopula)> = vec![
        (
            "clayton",
            ArchimedeanCopula::closed_form(Family::Clayton, 2.0).unwrap(),
        ),
        (
            "frank",
            ArchimedeanCopula::closed_form(Family::Frank, 4.0).unwrap(),
        ),
        (
            "gumbel",
            ArchimedeanCopula::closed_form(Family::Gumbel, 1.6).unwrap(),
        ),
        ("learned", random_net(7, &[10, 10]).into()),
    ];
    let beta = |s: f64| RiskFunction::linear(vec![0.3 * s, -0.2, 0.5 * s]);
    let marginals: Vec<(&str, SurvivalMarginal, SurvivalMarginal)> = vec![
        (
            "weibull",
            SurvivalMarginal::weibull(1.6, 1.4, beta(1.0)).unwrap(),
            SurvivalMarginal::weibull(1.1, 2.0, beta(-1.0)).unwrap(),
        ),
        (
            "lognormal",
            SurvivalMarginal::log_normal(0.2, 0.7, beta(1.0)).unwrap(),
            SurvivalMarginal::log_normal(0.6, 1.1, beta(-1.0)).unwrap(),
        ),
    ];
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let mut checked = 0;
    for (cn, c) in &copulas {
        for (mn, ev, ce) in &marginals {
            let model = SurvivalModel::new(c.clone(), ev.clone(), ce.clone());
            let g = loglik_grad(&model, &batch).unwrap();
            let p0 = model.params();
            for i in 0..p0.len() {
                let at = |d: f64| {
                    let mut m = model.clone();
                    let mut p = p0.clone();
                    p[i] += d;
                    m.set_params(&p).unwrap();
                    mean_loglik(&m, &batch).unwrap()
                };
                let fd = (at(h) - at(-h)) / (2.0 * h);
                let abs = (g.grad[i] - fd).abs();
                let rel = abs / fd.abs().max(f64::MIN_POSITIVE);
                checked += 1;
                if fd.abs() > 1e-6 {
                    worst = worst.max(rel);
                }
                // near-zero components are judged on absolute error
                if rel > 1e-4 && abs > 1e-8 {
                    failures.push(format!("{cn}/{mn} param {i}: {} vs {fd}", g.grad[i]));
                }
            }
        }
    }
    let runtime_ok = start.elapsed().as_secs_f64() < 120.0;
    let pass = failures.is_empty() && runtime_ok;
    report(
        2,
        "gradient oracle",
        pass,
        &format!(
            "{checked} components over 8 model combinations; worst relative error {worst:.2e}"
        ),
        start,
    );
    assert!(pass, "{failures:?}");
}

#[test]
fn criterion_3_c2_identifiability() {
    let start = Instant::now();
    let mut copulas: Vec<(String, ArchimedeanCopula)> = (0..20)
        .map(|s| {
            (
                format!("network {s}"),
                random_net(500 + s, &[10, 10]).into(),
            )
        })
        .collect();
    copulas.push(("independence".into(), ArchimedeanCopula::independence()));
    copulas.push((
        "clayton".into(),
        ArchimedeanCopula::closed_form(Family::Clayton, 2.0).unwrap(),
    ));
    copulas.push((
        "frank".into(),
        ArchimedeanCopula::closed_form(Family::Frank, 5.0).unwrap(),
    ));
    copulas.push((
        "gumbel".into(),
        ArchimedeanCopula::closed_form(Family::Gumbel, 2.0).unwrap(),
    ));
    let eps = [1e-3, 1e-5, 1e-7];
    let mut failures = Vec::new();
    for (name, c) in &copulas {
        for which in [1u8, 2] {
            let vals: Vec<f64> = eps
                .iter()
                .map(|e| c.partial(1.0 - e, 1.0 - e, which).unwrap())
                .collect();
            let monotone = vals.windows(2).all(|w| w[1] >= w[0]);
            if vals[2] < 1.0 - 1e-3 || !monotone {
                failures.push(format!("{name} partial {which}: {vals:?}"));
            }
        }
    }
    let pass = failures.is_empty();
    report(
        3,
        "C2 identifiability",
        pass,
        &format!(
            "{} of {} copulas satisfy C2 at eps=1e-7; failing: {:?}",
            copulas.len() - failures.len() / 2,
            copulas.len(),
            failures
        ),
        start,
    );
    assert!(pass, "{failures:?}");
}

#[test]
fn criterion_4_sampler_tau() {
    let start = Instant::now();
    let n = 100_000;
    let mut lines = Vec::new();
    let mut pass = true;
    for fam in [Family::Clayton, Family::Frank, Family::Gumbel] {
        for tau in [0.25, 0.5, 0.75] {
            let c = ArchimedeanCopula::from_tau(fam, tau).unwrap();
            let est = empirical_kendall_tau(&c.sample_joint(n, 31).unwrap()).unwrap();
            let ok = (est - tau).abs() <= 0.02;
            pass &= ok;
            lines.push(format!("{fam} {tau}: {est:.4}"));
        }
    }
    let ind = empirical_kendall_tau(
        &ArchimedeanCopula::independence()
            .sample_joint(n, 31)
            .unwrap(),
    )
    .unwrap();
    pass &= ind.abs() <= 0.01;
    lines.push(format!("independence: {ind:.4}"));
    pass &= start.elapsed().as_secs_f64() < 300.0;
    report(4, "sampler tau", pass, &lines.join(", "), start);
    assert!(pass);
}

#[test]
fn criterion_5_likelihood_equivalence() {
    let start = Instant::now();
    let ev =
        SurvivalMarginal::weibull(1.3, 1.7, RiskFunction::linear(vec![0.4, -0.6, 0.2])).unwrap();
    let ce =
        SurvivalMarginal::log_normal(0.4, 0.9, RiskFunction::linear(vec![-0.3, 0.1, 0.5])).unwrap();
    let c = ArchimedeanCopula::independence();
    let mut worst = 0.0f64;
    for r in random_records(1000, 3, 5) {
        let dep = loglik_dep(&c, &ev, &ce, &r).unwrap();
        let ind = loglik_indep(&ev, &ce, &r, true).unwrap();
        worst = worst.max((dep - ind).abs());
    }
    let pass = worst <= 1e-10;
    report(
        5,
        "likelihood equivalence",
        pass,
        &format!("1000 records, max |dep - indep| = {worst:.2e}"),
        start,
    );
    assert!(pass);
}

/// Hyperparameters shared by the training criteria.
fn acceptance_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: 5e-3,
        copula_learning_rate: Some(2e-2),
        patience: 50,
        max_epochs: 3000,
        seed,
        ..Default::default()
    }
}

#[test]
fn criterion_6_copula_recovery() {
    let start = Instant::now();
    let seed = 1;
    let cases = [
        (Family::Clayton, 0.5, 0.1),
        (Family::Frank, 0.5, 0.1),
        (Family::Gumbel, 0.5, 0.1),
        (Family::Independence, 0.0, 0.05),
    ];
    let mut lines = Vec::new();
    let mut pass = true;
    for (fam, tau, tol) in cases {
        let t0 = Instant::now();
        let copula = copula_at_tau(fam, tau).unwrap();
        let spec = SyntheticSpec::builtin(Builtin::LinearRisk, 5000, copula, seed).unwrap();
        let (data, _) = generate_synthetic(&spec).unwrap();
        let model = ModelSpec::default().build(&data, seed).unwrap();
        let r = fit(&data, model, &acceptance_train_config(seed)).unwrap();
        let est = sampled_tau(&r.model.copula, 50_000, seed).unwrap();
        let ok = (est - tau).abs() <= tol && t0.elapsed().as_secs_f64() < 1200.0;
        pass &= ok;
        lines.push(format!(
            "{fam} tau={tau}: learned {est:.4} (tol {tol}, {} epochs) {}",
            r.history.len(),
            if ok { "ok" } else { "MISS" }
        ));
    }
    report(6, "copula recovery", pass, &lines.join("; "), start);
    assert!(pass, "{lines:?}");
}

#[test]
fn criterion_7_dependency_trend() {
    let start = Instant::now();
    let cfg = SweepConfig {
        dataset: Builtin::LinearRisk,
        families: vec![Family::Clayton],
        taus: vec![0.0, 0.4, 0.8],
        repeats: 3,
        n: 5000,
        seed: 0,
        train: acceptance_train_config(0),
        ..Default::default()
    };
    let results = run_sweep(&cfg).unwrap();
    let rows = summarize(&results);
    let mean = |tau: f64, model: &str| {
        rows.iter()
            .find(|r| r.tau == tau && r.model == model)
            .map(|r| r.mean_l1)
            .unwrap()
    };
    let gap = |tau| mean(tau, "indep") - mean(tau, "dep");
    let pass = mean(0.8, "dep") <= mean(0.8, "indep") && gap(0.8) > gap(0.0);
    let detail = [0.0, 0.4, 0.8]
        .iter()
        .map(|&t| {
            format!(
                "tau={t}: dep {:.4} indep {:.4}",
                mean(t, "dep"),
                mean(t, "indep")
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    report(7, "dependency trend", pass, &detail, start);
    assert!(pass, "{rows:?}");
}

#[test]
fn criterion_8_metric_sanity() {
    let start = Instant::now();
    let copula = ArchimedeanCopula::from_tau(Family::Clayton, 0.5).unwrap();
    let spec = SyntheticSpec::builtin(Builtin::LinearRisk, 2000, copula, 3).unwrap();
    let (data, truth) = generate_synthetic(&spec).unwrap();

    let self_l1 = survival_l1(&truth.event, &truth.event, &data, DEFAULT_L1_GRID).unwrap();

    let mut perturbed = truth.event.clone();
    let mut p = perturbed.params();
    p[0] += 0.1;
    p[1] -= 0.05;
    perturbed.set_params(&p).unwrap();
    let coarse = survival_l1(&truth.event, &perturbed, &data, 512).unwrap();
    let fine = survival_l1(&truth.event, &perturbed, &data, 1024).unwrap();
    let refinement = (coarse - fine).abs() / fine;

    let bins = calibration_curve(&truth.event, &data, 10).unwrap();
    let events = data.events();
    let weighted: f64 = bins
        .iter()
        .map(|b| b.observed_rate * b.count as f64)
        .sum::<f64>()
        / data.len() as f64;
    let overall = events as f64 / data.len() as f64;
    let calib_exact = bins.iter().map(|b| b.events).sum::<usize>() == events
        && bins.iter().map(|b| b.count).sum::<usize>() == data.len()
        && weighted == overall;

    let pass = self_l1 < 1e-12 && refinement < 1e-3 && calib_exact;
    report(
        8,
        "metric sanity",
        pass,
        &format!(
            "oracle l1 {self_l1:.1e}; grid 512 vs 1024 relative change {refinement:.2e}; calibration weighted rate {weighted} vs overall {overall}"
        ),
        start,
    );
    assert!(pass);
}

#[test]
fn trained_model_beats_baseline_likelihood() {
    // the dependent model nests the independence model
    let copula = ArchimedeanCopula::from_tau(Family::Clayton, 0.5).unwrap();
    let spec = SyntheticSpec::builtin(Builtin::LinearRisk, 3000, copula, 11).unwrap();
    let (data, _) = generate_synthetic(&spec).unwrap();
    let cfg = acceptance_train_config(11);
    let spec = ModelSpec {
        copula: depcens::training::CopulaSpec::ClosedForm {
            family: Family::Clayton,
            theta: None,
        },
        ..Default::default()
    };
    let dep = fit(&data, spec.build(&data, 11).unwrap(), &cfg).unwrap();
    let ind = fit(&data, spec.independence().build(&data, 11).unwrap(), &cfg).unwrap();
    let train: Vec<&SurvivalRecord> = dep
        .split
        .train
        .iter()
        .map(|&i| &data.records()[i])
        .collect();
    let dep_ll = mean_loglik(&dep.model, &train).unwrap();
    let ind_ll = mean_loglik(&ind.model, &train).unwrap();
    assert!(dep_ll >= ind_ll, "{dep_ll} < {ind_ll}");
}
