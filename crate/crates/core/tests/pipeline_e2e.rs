use progress_core::dataio::{integrate, parse_dataset};
use progress_core::pipeline::{
    assign_splits, evaluate, fit_trajectories, harmonize_records, predict, train_survival,
    train_trajectory, PredictionRow, RunConfig, Split,
};
use progress_core::synthcohort::{generate, write_cohort};

fn small_config() -> RunConfig {
    let mut cfg = RunConfig {
        seed: 21,
        jobs: 1,
        ..RunConfig::default()
    };
    cfg.generator.n_subjects = 400;
    cfg.trajectory.max_epochs = 40;
    cfg.survival.max_epochs = 40;
    cfg.resolve()
}

fn run(cfg: &RunConfig) -> (Vec<PredictionRow>, String) {
    let cohort = generate(&cfg.generator).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = write_cohort(dir.path(), &cohort).unwrap();
    let parsed = parse_dataset(&files.csf, &files.visits, &files.demographics).unwrap();
    let integ = integrate(&parsed, cfg.cohort_filter);
    let (_, rows) = harmonize_records(&integ.records, cfg).unwrap();

    // every split keeps roughly the overall event rate
    let rate = |split: Option<Split>| {
        let sel: Vec<bool> = rows
            .iter()
            .filter(|r| split.is_none_or(|s| r.split == s))
            .map(|r| r.event)
            .collect();
        sel.iter().filter(|e| **e).count() as f64 / sel.len() as f64
    };
    for split in [Split::Train, Split::Val, Split::Test] {
        assert!((rate(Some(split)) - rate(None)).abs() < 0.03, "{split:?}");
    }

    let fit = fit_trajectories(&integ.records, &rows, cfg).unwrap();
    let (traj, _) = train_trajectory(&rows, &fit.rows, cfg).unwrap();
    let surv = train_survival(&rows, cfg).unwrap();
    let preds = predict(&rows, &surv.deep, &surv.linear, &traj, cfg).unwrap();
    assert_eq!(preds.len(), rows.len());
    for p in &preds {
        assert!(p.risk.is_finite() && p.linear_risk.is_finite());
        assert!(p.event_probability.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        assert!(p.event_probability.iter().all(|q| (0.0..=1.0).contains(q)));
        for k in 0..3 {
            let t = &p.trajectory;
            assert!(t.lo[k] <= t.means[k] && t.means[k] <= t.hi[k]);
        }
    }
    let report = evaluate(
        cfg.seed,
        &rows,
        &integ.exclusions,
        &fit,
        &preds,
        &cfg.horizons,
        Some(&cohort.truth),
    )
    .unwrap();
    (preds, serde_json::to_string(&report).unwrap())
}

#[test]
fn small_pipeline_is_deterministic_and_well_formed() {
    let cfg = small_config();
    let (a, report_a) = run(&cfg);
    let (b, report_b) = run(&cfg);
    assert_eq!(a, b);
    assert_eq!(report_a, report_b);
}

#[test]
fn split_sizes_follow_the_requested_fractions() {
    let events: Vec<bool> = (0..1000).map(|i| i % 3 == 0).collect();
    let splits = assign_splits(&events, [0.722, 0.128, 0.150], 5);
    let count = |s: Split| splits.iter().filter(|x| **x == s).count();
    assert!((count(Split::Train) as i64 - 722).abs() <= 2);
    assert!((count(Split::Val) as i64 - 128).abs() <= 2);
    assert_eq!(
        count(Split::Train) + count(Split::Val) + count(Split::Test),
        1000
    );
    assert_eq!(splits, assign_splits(&events, [0.722, 0.128, 0.150], 5));
    assert_ne!(splits, assign_splits(&events, [0.722, 0.128, 0.150], 6));
}
