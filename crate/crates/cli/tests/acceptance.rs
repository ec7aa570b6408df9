//! Acceptance suite: ten end-to-end criteria, each printed as one
//! pass/fail line with its measured values, pinned thresholds and runtime.
//! Runs without the libtest harness so the lines are always visible; exits
//! non-zero when any criterion fails.
//!
//! `cargo test -p progress-cli --test acceptance [-- <filter>]` runs the
//! criteria whose label contains `<filter>`.

use progress_core::dataio::{build_sequences, integrate, parse_dataset, WINDOW_LEN};
use progress_core::evalstats::{
    c_index, p_adjust, permutation_test, wilcoxon_signed_rank, AdjustMethod,
};
use progress_core::mixedfx::{reml_fit, RemlOptions, Series};
use progress_core::numcore::rng_from_seed;
use progress_core::pipeline::{
    evaluate, fit_trajectories, harmonize_records, loco_report, predict, train_survival,
    train_trajectory, MetricsReport, RunConfig,
};
use progress_core::survnet::{breslow_fit, SurvData, SurvNetConfig, SurvNetModel};
use progress_core::synthcohort::{generate, write_cohort, HazardLink};
use progress_core::trajnet::{TrajNetConfig, TrajNetModel};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::collections::HashMap;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

/// Outcome of one criterion: pass flag and a human-readable measurement.
struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

struct Criterion {
    id: u32,
    label: &'static str,
    limit_secs: f64,
    run: fn() -> Outcome,
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

// ---------------------------------------------------------------- 1

const GRAD_SEEDS: u64 = 5;
const GRAD_PARAMS_CHECKED: usize = 1000;
const GRAD_STEP: f64 = 1e-6;
const GRAD_TOL: f64 = 1e-4;
/// Gradient magnitude below which the error is measured on an absolute scale.
const GRAD_SCALE_FLOOR: f64 = 1e-3;

fn relative_error(fd: f64, analytic: f64) -> f64 {
    (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(GRAD_SCALE_FLOOR)
}

/// Central-difference check of `objective` at a random subset of parameters.
fn max_gradient_error(
    params: &[f64],
    grad: &[f64],
    seed: u64,
    mut objective_at: impl FnMut(&[f64]) -> f64,
) -> f64 {
    let mut rng = rng_from_seed(seed ^ 0xA5A5);
    let n = params.len();
    let picked = sample(&mut rng, n, GRAD_PARAMS_CHECKED.min(n));
    let mut worst = 0.0f64;
    let mut p = params.to_vec();
    for k in picked {
        p[k] = params[k] + GRAD_STEP;
        let up = objective_at(&p);
        p[k] = params[k] - GRAD_STEP;
        let down = objective_at(&p);
        p[k] = params[k];
        worst = worst.max(relative_error((up - down) / (2.0 * GRAD_STEP), grad[k]));
    }
    worst
}

fn gradient_correctness() -> Outcome {
    let dim = 8;
    let mut traj_worst = 0.0f64;
    let mut surv_worst = 0.0f64;
    for seed in 0..GRAD_SEEDS {
        let mut rng = rng_from_seed(seed);
        // trajectory network: attention + encoder + mean/log-variance heads,
        // NLL + L2 + calibration penalty, dropout masks fixed by seed
        let cfg = TrajNetConfig {
            seed,
            ..TrajNetConfig::default()
        };
        let mut traj = TrajNetModel::new(dim, cfg).unwrap();
        let x: Vec<Vec<f64>> = (0..16)
            .map(|_| (0..dim).map(|_| standard_normal(&mut rng)).collect())
            .collect();
        let t: Vec<[f64; 3]> = (0..16)
            .map(|_| [0; 3].map(|_| standard_normal(&mut rng)))
            .collect();
        let (_, grad) = traj.objective(&x, &t, Some(seed + 100)).unwrap();
        let base = traj.params();
        traj_worst = traj_worst.max(max_gradient_error(&base, &grad, seed, |p| {
            traj.set_params(p).unwrap();
            traj.objective(&x, &t, Some(seed + 100)).unwrap().0
        }));

        // survival network: Cox partial likelihood + ranking loss + L2
        let cfg = SurvNetConfig {
            seed,
            ..SurvNetConfig::default()
        };
        let mut surv = SurvNetModel::new(dim, cfg).unwrap();
        let n = 30;
        let data = SurvData {
            x: (0..n)
                .map(|_| (0..dim).map(|_| standard_normal(&mut rng)).collect())
                .collect(),
            times: (0..n).map(|_| rng.random_range(0.1..8.0)).collect(),
            events: (0..n).map(|_| rng.random_bool(0.6)).collect(),
        };
        let (_, grad) = surv.objective(&data, Some(seed + 200)).unwrap();
        let base = surv.net.params();
        surv_worst = surv_worst.max(max_gradient_error(&base, &grad, seed, |p| {
            surv.net.set_params(p).unwrap();
            surv.objective(&data, Some(seed + 200)).unwrap().0
        }));
    }
    let worst = traj_worst.max(surv_worst);
    Outcome::new(
        worst < GRAD_TOL,
        format!(
            "max rel err trajectory {traj_worst:.2e}, survival {surv_worst:.2e} over {GRAD_SEEDS} seeds (< {GRAD_TOL:.0e})"
        ),
    )
}

// ---------------------------------------------------------------- 2

/// Nelson–Aalen cumulative hazard at each distinct event time.
fn nelson_aalen(times: &[f64], events: &[bool]) -> (Vec<f64>, Vec<f64>) {
    let mut event_times: Vec<f64> = times
        .iter()
        .zip(events)
        .filter(|(_, e)| **e)
        .map(|(t, _)| *t)
        .collect();
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();
    let mut h = 0.0;
    let mut cumulative = Vec::new();
    for &t in &event_times {
        let d = times
            .iter()
            .zip(events)
            .filter(|(s, e)| **e && **s == t)
            .count() as f64;
        let at_risk = times.iter().filter(|s| **s >= t).count() as f64;
        h += d / at_risk;
        cumulative.push(h);
    }
    (event_times, cumulative)
}

fn breslow_reduction() -> Outcome {
    let mut rng = rng_from_seed(2);
    let mut worst = 0.0f64;
    let mut shape_ok = true;
    for _ in 0..100 {
        let n = rng.random_range(2..=50);
        // one-decimal times force ties
        let times: Vec<f64> = (0..n)
            .map(|_| (rng.random_range(0.1..5.0f64) * 10.0).round() / 10.0)
            .collect();
        let mut events: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
        events[0] = true;
        let hazard = breslow_fit(&vec![0.0; n], &times, &events).unwrap();
        let (t_ref, h_ref) = nelson_aalen(&times, &events);
        if hazard.times != t_ref || hazard.cumulative.len() != h_ref.len() {
            shape_ok = false;
            continue;
        }
        for (a, b) in hazard.cumulative.iter().zip(&h_ref) {
            worst = worst.max((a - b).abs());
        }
    }
    Outcome::new(
        shape_ok && worst <= 1e-10,
        format!("100 datasets, max |H0 - NA| = {worst:.1e} (<= 1e-10), event times identical: {shape_ok}"),
    )
}

// ---------------------------------------------------------------- 3

/// Harrell's C by enumerating all ordered pairs.
fn brute_force_c(scores: &[f64], times: &[f64], events: &[bool]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            let comparable = i != j
                && events[i]
                && (times[i] < times[j] || (times[i] == times[j] && !events[j]));
            if comparable {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

fn c_index_oracle() -> Outcome {
    let mut rng = rng_from_seed(3);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.random_range(2..=30);
        let scores: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..6) as f64 * 0.5)
            .collect();
        let times: Vec<f64> = (0..n).map(|_| rng.random_range(1..8) as f64).collect();
        let events: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
        if c_index(&scores, &times, &events).ok() != brute_force_c(&scores, &times, &events) {
            mismatches += 1;
        }
    }
    Outcome::new(
        mismatches == 0,
        format!("{mismatches}/200 instances differ from pair enumeration (exact match)"),
    )
}

// ---------------------------------------------------------------- 4

/// Exact sign-flip permutation p-value by enumerating all 2^n patterns.
fn enumerate_sign_flips(diffs: &[f64]) -> f64 {
    let n = diffs.len();
    let observed = (diffs.iter().sum::<f64>() / n as f64).abs();
    let total = 1usize << n;
    let hits = (0..total)
        .filter(|mask| {
            let s: f64 = (0..n)
                .map(|i| {
                    if mask >> i & 1 == 1 {
                        -diffs[i]
                    } else {
                        diffs[i]
                    }
                })
                .sum();
            (s / n as f64).abs() >= observed - 1e-12
        })
        .count();
    hits as f64 / total as f64
}

fn statistical_tests() -> Outcome {
    let raw = [0.0001, 0.287, 0.059];
    let holm = p_adjust(&raw, AdjustMethod::Holm)[2];
    let bh = p_adjust(&raw, AdjustMethod::Bh)[2];
    let holm_ok = (holm - 0.118).abs() <= 0.001;
    let bh_ok = (bh - 0.088).abs() <= 0.001;

    let a: Vec<f64> = (1..=10).map(|i| 10.0 + i as f64).collect();
    let b: Vec<f64> = (1..=10).map(|i| 10.0 - 0.3 * i as f64).collect();
    let wil = wilcoxon_signed_rank(&a, &b).unwrap().p_value;
    let wil_ok = (wil - 2.0 / 1024.0).abs() < 1e-12;

    let mut perm_ok = true;
    let mut perm_values = Vec::new();
    for diffs in [
        [1.0; 5],
        [1.0, 1.0, 1.0, 1.0, -1.0],
        [1.0, -1.0, 1.0, -1.0, 1.0],
    ] {
        let zeros = [0.0; 5];
        let p = permutation_test(&diffs, &zeros, 10_000, 0).unwrap();
        perm_ok &= (p - enumerate_sign_flips(&diffs)).abs() < 1e-12;
        perm_values.push(p);
    }
    perm_ok &= (perm_values[0] - 2.0 / 32.0).abs() < 1e-12;
    Outcome::new(
        holm_ok && bh_ok && wil_ok && perm_ok,
        format!(
            "Holm {holm:.4} (0.118±0.001), BH {bh:.4} (0.088±0.001), Wilcoxon n=10 p={wil:.6} (2/1024), \
             permutation {perm_values:?} = enumeration: {perm_ok}"
        ),
    )
}

// ---------------------------------------------------------------- 5

fn mixed_model_recovery() -> Outcome {
    let fixed = [1.0, 0.4, 0.03];
    let variances: [f64; 3] = [1.0, 0.25, 0.01];
    let sigma = 0.5;
    let mut recovered = 0;
    let mut worst_rel = Vec::new();
    for seed in 0..5u64 {
        let mut rng = rng_from_seed(500 + seed);
        let data: Vec<Series> = (0..500)
            .map(|_| {
                let u: Vec<f64> = variances
                    .iter()
                    .map(|v| v.sqrt() * standard_normal(&mut rng))
                    .collect();
                let times: Vec<f64> = (0..6)
                    .map(|k| {
                        if k == 0 {
                            0.0
                        } else {
                            k as f64 + rng.random_range(-0.2..0.2)
                        }
                    })
                    .collect();
                let values = times
                    .iter()
                    .map(|t| {
                        (fixed[0] + u[0])
                            + (fixed[1] + u[1]) * t
                            + (fixed[2] + u[2]) * t * t
                            + sigma * standard_normal(&mut rng)
                    })
                    .collect();
                Series::new(times, values)
            })
            .collect();
        let m = reml_fit(&data, RemlOptions::default()).unwrap();
        let fixed_ok = (0..3).all(|k| (m.fixed[k] - fixed[k]).abs() < 3.0 * m.fixed_se[k]);
        let rel = (0..3)
            .map(|k| ((m.sigma_u[k][k] - variances[k]) / variances[k]).abs())
            .fold(0.0f64, f64::max);
        worst_rel.push(format!("{rel:.3}"));
        if fixed_ok && rel < 0.25 {
            recovered += 1;
        }
    }
    Outcome::new(
        recovered >= 4,
        format!(
            "{recovered}/5 seeds recover fixed effects (3 SE) and variances (25%); max rel var err per seed [{}]",
            worst_rel.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- 6, 7

/// Full in-process pipeline on a generated cohort, evaluated on the test split.
fn run_pipeline(cfg: &RunConfig) -> MetricsReport {
    let cohort = generate(&cfg.generator).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = write_cohort(dir.path(), &cohort).unwrap();
    let parsed = parse_dataset(&files.csf, &files.visits, &files.demographics).unwrap();
    let integ = integrate(&parsed, cfg.cohort_filter);
    let (_, rows) = harmonize_records(&integ.records, cfg).unwrap();
    let fit = fit_trajectories(&integ.records, &rows, cfg).unwrap();
    let (traj, _) = train_trajectory(&rows, &fit.rows, cfg).unwrap();
    let surv = train_survival(&rows, cfg).unwrap();
    let preds = predict(&rows, &surv.deep, &surv.linear, &traj, cfg).unwrap();
    evaluate(
        cfg.seed,
        &rows,
        &integ.exclusions,
        &fit,
        &preds,
        &cfg.horizons,
        Some(&cohort.truth),
    )
    .unwrap()
}

/// The default (n = 2000, nonlinear link) cohort, shared by criteria 6 and 7.
fn default_report() -> &'static MetricsReport {
    static REPORT: OnceLock<MetricsReport> = OnceLock::new();
    REPORT.get_or_init(|| run_pipeline(&RunConfig::default().resolve()))
}

fn calibration() -> Outcome {
    let report = default_report();
    let params = &report.trajectory.parameters;
    let picp_ok = params.len() == 3 && params.iter().all(|p| (0.90..=0.99).contains(&p.picp));
    let r2 = params.first().map_or(f64::NAN, |p| p.r2);
    let picps: Vec<String> = params
        .iter()
        .map(|p| format!("{} {:.3}", p.parameter, p.picp))
        .collect();
    Outcome::new(
        picp_ok && r2 > 0.25,
        format!(
            "PICP [{}] in [0.90, 0.99]; intercept R2 {r2:.3} (> 0.25); n_test {}",
            picps.join(", "),
            report.trajectory.n_test
        ),
    )
}

fn discrimination() -> Outcome {
    let report = default_report();
    let c = |name: &str| {
        report
            .survival
            .models
            .iter()
            .find(|m| m.model == name)
            .and_then(|m| m.c_index)
            .unwrap_or(f64::NAN)
    };
    let (deep, linear) = (c("deep_survival"), c("linear_cox"));
    let Some(t) = &report.survival.tertiles else {
        return Outcome::new(false, "no tertile stratification");
    };
    let [low, _, high] = t.event_rates;
    // an event-free low tertile makes the ratio unbounded
    let ratio = if low > 0.0 {
        high / low
    } else if high > 0.0 {
        f64::INFINITY
    } else {
        f64::NAN
    };
    let pass = deep >= linear + 0.05 && deep >= 0.75 && ratio >= 4.0 && t.logrank_p < 1e-4;
    Outcome::new(
        pass,
        format!(
            "C deep {deep:.3} vs linear {linear:.3} (gap {:.3} >= 0.05, deep >= 0.75); \
             high/low event rate {ratio:.2} (>= 4); log-rank p {:.2e} (< 1e-4)",
            deep - linear,
            t.logrank_p
        ),
    )
}

// ---------------------------------------------------------------- 8

fn loco_stability() -> Outcome {
    let mut cfg = RunConfig::default();
    cfg.generator.n_centers = 8;
    let cfg = cfg.resolve();
    let cohort = generate(&cfg.generator).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = write_cohort(dir.path(), &cohort).unwrap();
    let parsed = parse_dataset(&files.csf, &files.visits, &files.demographics).unwrap();
    let integ = integrate(&parsed, cfg.cohort_filter);
    let (_, rows) = harmonize_records(&integ.records, &cfg).unwrap();
    let fit = fit_trajectories(&integ.records, &rows, &cfg).unwrap();
    let report = loco_report(&rows, &fit.rows, &cfg).unwrap();
    let values: Vec<f64> = report
        .centers
        .iter()
        .map(|c| c.c_index.unwrap_or(f64::NAN))
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let pass = values.len() == 8 && sd < 0.10 && values.iter().all(|v| *v > 0.65);
    let per_center: Vec<String> = values.iter().map(|v| format!("{v:.3}")).collect();
    Outcome::new(
        pass,
        format!(
            "{} centers held out, C-index [{}], SD {sd:.3} (< 0.10), min {min:.3} (> 0.65)",
            values.len(),
            per_center.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- 9

fn site_mean_variance(values: &[(String, f64)]) -> f64 {
    let mut acc: HashMap<&str, (f64, f64)> = HashMap::new();
    for (site, v) in values {
        let e = acc.entry(site.as_str()).or_default();
        e.0 += v;
        e.1 += 1.0;
    }
    let means: Vec<f64> = acc.values().map(|(s, n)| s / n).collect();
    let m = means.iter().sum::<f64>() / means.len() as f64;
    means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() as f64 - 1.0)
}

fn pipeline_conservation() -> Outcome {
    let mut cohorts: Vec<(String, RunConfig, bool)> = Vec::new();
    for seed in 0..3u64 {
        cohorts.push((
            format!("default seed {seed}"),
            RunConfig {
                seed,
                ..RunConfig::default()
            },
            true,
        ));
    }
    let mut eight = RunConfig {
        seed: 3,
        ..RunConfig::default()
    };
    eight.generator.n_centers = 8;
    cohorts.push(("8 centers".into(), eight, true));
    let mut linear = RunConfig {
        seed: 4,
        ..RunConfig::default()
    };
    linear.generator.hazard_link = HazardLink::Linear;
    cohorts.push(("linear link".into(), linear, true));
    for (k, n) in [60usize, 150, 300].into_iter().enumerate() {
        let mut small = RunConfig {
            seed: 10 + k as u64,
            ..RunConfig::default()
        };
        small.generator.n_subjects = n;
        small.generator.missing_rate = [0.2; 3];
        small.generator.misaligned_rate = 0.2;
        small.generator.missing_education_rate = 0.1;
        cohorts.push((format!("n={n} heavy missingness"), small, false));
    }

    let mut failures = Vec::new();
    let mut min_reduction = f64::INFINITY;
    let mut windows_checked = 0usize;
    for (name, cfg, check_reduction) in cohorts {
        let cfg = cfg.resolve();
        let cohort = generate(&cfg.generator).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_cohort(dir.path(), &cohort).unwrap();
        let parsed = parse_dataset(&files.csf, &files.visits, &files.demographics).unwrap();
        let integ = integrate(&parsed, cfg.cohort_filter);

        let mut seen: HashMap<&str, usize> = HashMap::new();
        for id in integ
            .records
            .iter()
            .map(|r| &r.subject_id)
            .chain(integ.exclusions.iter().map(|e| &e.subject_id))
        {
            *seen.entry(id.as_str()).or_default() += 1;
        }
        let once = cohort
            .truth
            .iter()
            .all(|t| seen.get(t.subject_id.as_str()) == Some(&1));
        if !once || seen.len() != cohort.truth.len() {
            failures.push(format!("{name}: subjects not partitioned"));
        }

        for r in &integ.records {
            let windows = build_sequences(r, WINDOW_LEN);
            let expected = (r.visits.len() + 1).saturating_sub(WINDOW_LEN);
            let contiguous = windows
                .iter()
                .enumerate()
                .all(|(k, w)| w.start == k && w.states.len() == WINDOW_LEN);
            if windows.len() != expected || !contiguous {
                failures.push(format!(
                    "{name}: {} has {} windows for {} visits",
                    r.subject_id,
                    windows.len(),
                    r.visits.len()
                ));
            }
            windows_checked += windows.len();
        }

        if check_reduction {
            let (_, rows) = harmonize_records(&integ.records, &cfg).unwrap();
            for k in 0..3 {
                let observed: Vec<_> = rows.iter().filter(|r| !r.imputed[k]).collect();
                let before: Vec<(String, f64)> = observed
                    .iter()
                    .map(|r| (r.center.clone(), r.assay_scaled[k].unwrap().ln()))
                    .collect();
                let after: Vec<(String, f64)> = observed
                    .iter()
                    .map(|r| (r.center.clone(), r.harmonized[k].ln()))
                    .collect();
                let reduction =
                    100.0 * (1.0 - site_mean_variance(&after) / site_mean_variance(&before));
                min_reduction = min_reduction.min(reduction);
                if reduction < 90.0 {
                    failures.push(format!("{name}: marker {k} reduction {reduction:.1}%"));
                }
            }
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "8 cohorts partitioned exactly once, {windows_checked} windows = V-L+1 (L={WINDOW_LEN}); \
             min between-site variance reduction {min_reduction:.1}% (>= 90%){}",
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join("; ")) }
        ),
    )
}

// ---------------------------------------------------------------- 10

const CHAIN: [&str; 8] = [
    "generate",
    "integrate",
    "harmonize",
    "fit-trajectories",
    "train-traj",
    "train-surv",
    "predict",
    "evaluate",
];

fn run_cli_chain(dir: &std::path::Path) -> Result<Vec<u8>, String> {
    let exe = env!("CARGO_BIN_EXE_progress");
    for step in CHAIN {
        let mut cmd = Command::new(exe);
        cmd.arg(step)
            .arg("--run-dir")
            .arg(dir)
            .env("RUST_LOG", "warn");
        if step == "generate" {
            cmd.args(["--seed", "11"]);
        }
        let out = cmd.output().map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!(
                "{step} failed: {}",
                String::from_utf8_lossy(&out.stderr)
            ));
        }
    }
    std::fs::read(dir.join("metrics.json")).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    match (run_cli_chain(a.path()), run_cli_chain(b.path())) {
        (Ok(x), Ok(y)) => Outcome::new(
            x == y && !x.is_empty(),
            format!(
                "two CLI runs (seed 11, n=2000): metrics.json {} bytes, identical: {}",
                x.len(),
                x == y
            ),
        ),
        (Err(e), _) | (_, Err(e)) => Outcome::new(false, e),
    }
}

// ----------------------------------------------------------------

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            label: "gradient correctness",
            limit_secs: 30.0,
            run: gradient_correctness,
        },
        Criterion {
            id: 2,
            label: "Breslow reduction",
            limit_secs: 5.0,
            run: breslow_reduction,
        },
        Criterion {
            id: 3,
            label: "C-index oracle equivalence",
            limit_secs: 5.0,
            run: c_index_oracle,
        },
        Criterion {
            id: 4,
            label: "statistical-test fidelity",
            limit_secs: 10.0,
            run: statistical_tests,
        },
        Criterion {
            id: 5,
            label: "mixed-model recovery",
            limit_secs: 120.0,
            run: mixed_model_recovery,
        },
        Criterion {
            id: 6,
            label: "trajectory calibration",
            limit_secs: 600.0,
            run: calibration,
        },
        Criterion {
            id: 7,
            label: "survival discrimination",
            limit_secs: 600.0,
            run: discrimination,
        },
        Criterion {
            id: 8,
            label: "LOCO stability",
            limit_secs: 900.0,
            run: loco_stability,
        },
        Criterion {
            id: 9,
            label: "pipeline conservation",
            limit_secs: 60.0,
            run: pipeline_conservation,
        },
        Criterion {
            id: 10,
            label: "determinism",
            limit_secs: 600.0,
            run: determinism,
        },
    ];
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        for c in &criteria {
            println!("criterion {:02} {}: test", c.id, c.label);
        }
        return;
    }
    let filter = args.iter().find(|a| !a.starts_with('-'));
    let mut failed = 0;
    let mut ran = 0;
    for c in &criteria {
        let name = format!("criterion {:02} {}", c.id, c.label);
        if filter.is_some_and(|f| !name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = (c.run)();
        let secs = start.elapsed().as_secs_f64();
        let pass = outcome.pass && secs < c.limit_secs;
        if !pass {
            failed += 1;
        }
        println!(
            "{} {name}: {} [{secs:.1}s, limit {:.0}s]",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            c.limit_secs
        );
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
