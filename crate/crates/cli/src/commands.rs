use crate::args::{Cli, Command};
use crate::tables;
use progress_core::dataio::{
    build_sequences, integrate, parse_dataset, read_exclusions, read_records, write_exclusions,
    write_records, ParticipantRecord, WINDOW_LEN,
};
use progress_core::mixedfx::MixedModel;
use progress_core::pipeline::{
    cv_compare, evaluate, fairness_report, fit_trajectories, harmonize_records, loco_report,
    predict, read_json, read_jsonl, train_survival, train_trajectory, write_json, write_jsonl,
    LinearCoxModel, PredictionRow, RunConfig, RunDir, SubjectRow, TrajectoryFit, TrajectoryRow,
};
use progress_core::survnet::{SurvNetCheckpoint, SurvNetModel};
use progress_core::synthcohort::{generate, read_truth, write_cohort, CohortFiles, HazardLink};
use progress_core::trajnet::{TrajNetCheckpoint, TrajNetModel};
use progress_core::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Contents of `config.json`: the command that produced the run directory's
/// latest outputs and the full configuration it ran with.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunRecord {
    subcommand: String,
    run_dir: PathBuf,
    /// Directory of the source CSVs.
    data_dir: PathBuf,
    config: RunConfig,
}

/// Mixed-model fit and the reliability threshold derived from it.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MixedModelFile {
    model: MixedModel,
    reliability_threshold: f64,
}

/// Base configuration: an explicit `--config` file, else the run directory's
/// `config.json`, else defaults. Accepts either a bare configuration object or
/// a previous run's `config.json`.
fn load_base(cli: &Cli, run: &RunDir) -> Result<(RunConfig, Option<PathBuf>)> {
    let path = match &cli.global.config {
        Some(p) => p.clone(),
        None if run.config().exists() => run.config(),
        None => return Ok((RunConfig::default(), None)),
    };
    let value: serde_json::Value =
        read_json(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| Error::Config(format!("{}: {e}", path.display()));
    match value.get("config") {
        Some(inner) => {
            let cfg = serde_json::from_value(inner.clone()).map_err(bad)?;
            let data = value
                .get("data_dir")
                .and_then(|d| d.as_str())
                .map(PathBuf::from);
            Ok((cfg, data))
        }
        None => Ok((serde_json::from_value(value).map_err(bad)?, None)),
    }
}

fn effective_config(cli: &Cli, run: &RunDir) -> Result<(RunConfig, PathBuf)> {
    let (mut cfg, data) = load_base(cli, run)?;
    let g = &cli.global;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(j) = g.jobs {
        cfg.jobs = j;
    }
    if let Some(f) = g.cohort_filter {
        cfg.cohort_filter = f;
    }
    if let Some(w) = g.width {
        cfg.set_width(w);
    }
    if let Some(h) = &g.horizons {
        cfg.horizons = h.clone();
    }
    if let Some(m) = g.min_center_n {
        cfg.min_center_n = m;
    }
    if let Some(f) = g.folds {
        cfg.folds = f;
    }
    if let Some(r) = g.repeats {
        cfg.repeats = r;
    }
    let mut data = data.unwrap_or_else(|| run.data_dir());
    match &cli.command {
        Command::Generate { n, centers, link } => {
            if let Some(n) = n {
                cfg.generator.n_subjects = *n;
            }
            if let Some(c) = centers {
                cfg.generator.n_centers = *c;
            }
            if let Some(l) = link {
                cfg.generator.hazard_link = if l == "linear" {
                    HazardLink::Linear
                } else {
                    HazardLink::Nonlinear
                };
            }
            data = run.data_dir();
        }
        Command::Integrate { data: Some(d) } => data = d.clone(),
        _ => {}
    }
    let cfg = cfg.resolve();
    cfg.validate()?;
    Ok((cfg, data))
}

fn init_threads(jobs: usize) {
    // Ignored when a pool already exists (repeated in-process invocations).
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global();
}

pub fn execute(cli: &Cli) -> Result<()> {
    let run = RunDir::new(&cli.global.run_dir);
    let (cfg, data_dir) = effective_config(cli, &run)?;
    init_threads(cfg.jobs);
    run.create()?;
    let record = RunRecord {
        subcommand: cli.command.name().to_string(),
        run_dir: run.root.clone(),
        data_dir: data_dir.clone(),
        config: cfg.clone(),
    };
    write_json(&run.config(), &record)?;
    log::info!("{} in {}", cli.command.name(), run.root.display());
    let stage = Stage {
        run: &run,
        cfg: &cfg,
    };
    match &cli.command {
        Command::Generate { .. } => stage.generate(),
        Command::Integrate { .. } => stage.integrate(&data_dir),
        Command::Harmonize => stage.harmonize(),
        Command::FitTrajectories => stage.fit_trajectories(),
        Command::TrainTraj => stage.train_traj(),
        Command::TrainSurv => stage.train_surv(),
        Command::Predict => stage.predict(),
        Command::Evaluate { truth } => {
            let truth = truth.clone().or_else(|| {
                let default = CohortFiles::in_dir(&data_dir).ground_truth;
                default.exists().then_some(default)
            });
            stage.evaluate(truth.as_deref())
        }
        Command::CvCompare => stage.cv_compare(),
        Command::Loco => stage.loco(),
        Command::Fairness => stage.fairness(),
    }
}

struct Stage<'a> {
    run: &'a RunDir,
    cfg: &'a RunConfig,
}

impl Stage<'_> {
    fn records(&self) -> Result<Vec<ParticipantRecord>> {
        Ok(read_records(&self.run.integrated())?)
    }

    fn subjects(&self) -> Result<Vec<SubjectRow>> {
        let rows: Vec<SubjectRow> = read_jsonl(&self.run.features())?;
        if rows.is_empty() {
            return Err(Error::Input(format!(
                "{} holds no subjects",
                self.run.features().display()
            )));
        }
        Ok(rows)
    }

    fn trajectory_rows(&self, subjects: &[SubjectRow]) -> Result<Vec<TrajectoryRow>> {
        let rows: Vec<TrajectoryRow> = read_jsonl(&self.run.trajectories())?;
        let aligned = rows.len() == subjects.len()
            && rows
                .iter()
                .zip(subjects)
                .all(|(t, s)| t.subject_id == s.subject_id);
        if !aligned {
            return Err(Error::Input(
                "trajectories.jsonl does not match features.jsonl; re-run fit-trajectories".into(),
            ));
        }
        Ok(rows)
    }

    fn survival_models(&self) -> Result<(SurvNetModel, LinearCoxModel)> {
        let ck: SurvNetCheckpoint = read_json(&self.run.model("survnet"))?;
        Ok((
            SurvNetModel::from_checkpoint(&ck)?,
            read_json(&self.run.model("linear_cox"))?,
        ))
    }

    fn generate(&self) -> Result<()> {
        let cohort = generate(&self.cfg.generator).map_err(Error::Config)?;
        let files = write_cohort(&self.run.data_dir(), &cohort)?;
        log::info!(
            "generated {} subjects, {} visits, {} CSF rows into {}",
            cohort.truth.len(),
            cohort.visits.len(),
            cohort.csf.len(),
            files.csf.parent().unwrap_or(Path::new(".")).display()
        );
        Ok(())
    }

    fn integrate(&self, data_dir: &Path) -> Result<()> {
        let files = CohortFiles::in_dir(data_dir);
        let parsed = parse_dataset(&files.csf, &files.visits, &files.demographics)?;
        let result = integrate(&parsed, self.cfg.cohort_filter);
        write_records(&self.run.integrated(), &result.records)?;
        write_exclusions(&self.run.exclusions(), &result.exclusions)?;
        tables::rejects(&self.run.rejects(), &parsed.rejects)?;
        let windows: Vec<_> = result
            .records
            .iter()
            .flat_map(|r| build_sequences(r, WINDOW_LEN))
            .collect();
        write_jsonl(&self.run.root.join("sequences.jsonl"), &windows)?;
        if result.records.is_empty() {
            log::warn!("no subject passed integration");
        }
        log::info!(
            "integrated {} subjects ({} excluded, {} rejected rows, {} sequence windows)",
            result.records.len(),
            result.exclusions.len(),
            parsed.rejects.len(),
            windows.len()
        );
        Ok(())
    }

    fn harmonize(&self) -> Result<()> {
        let records = self.records()?;
        let (harmonizer, rows) = harmonize_records(&records, self.cfg)?;
        write_jsonl(&self.run.features(), &rows)?;
        write_json(&self.run.model("harmonizer"), &harmonizer)?;
        tables::features(
            &self.run.table("features"),
            &harmonizer.feature_names,
            &rows,
        )?;
        log::info!("harmonized {} subjects", rows.len());
        Ok(())
    }

    fn fit_trajectories(&self) -> Result<()> {
        let records = self.records()?;
        let rows = self.subjects()?;
        let fit = fit_trajectories(&records, &rows, self.cfg)?;
        write_jsonl(&self.run.trajectories(), &fit.rows)?;
        write_json(
            &self.run.model("mixed_model"),
            &MixedModelFile {
                model: fit.model.clone(),
                reliability_threshold: fit.tau_var,
            },
        )?;
        tables::trajectories(&self.run.table("trajectories"), &fit.rows)?;
        log::info!(
            "mixed model fitted; {} of {} subjects reliable",
            fit.rows.iter().filter(|r| r.reliable).count(),
            fit.rows.len()
        );
        Ok(())
    }

    fn train_traj(&self) -> Result<()> {
        let rows = self.subjects()?;
        let traj = self.trajectory_rows(&rows)?;
        let (model, history) = train_trajectory(&rows, &traj, self.cfg)?;
        write_json(&self.run.model("trajnet"), &model.to_checkpoint())?;
        tables::history(
            &self.run.table("trajnet_history"),
            history.iter().map(|h| (h.epoch, h.train_loss, h.val_loss)),
        )?;
        log::info!("trajectory network trained for {} epochs", history.len());
        Ok(())
    }

    fn train_surv(&self) -> Result<()> {
        let rows = self.subjects()?;
        let models = train_survival(&rows, self.cfg)?;
        write_json(&self.run.model("survnet"), &models.deep.to_checkpoint())?;
        write_json(&self.run.model("linear_cox"), &models.linear)?;
        tables::history(
            &self.run.table("survnet_history"),
            models
                .history
                .iter()
                .map(|h| (h.epoch, h.train_loss, h.val_loss)),
        )?;
        if let Some(hazard) = &models.deep.hazard {
            tables::baseline_hazard(&self.run.table("baseline_hazard"), hazard)?;
        }
        log::info!(
            "survival network trained for {} epochs",
            models.history.len()
        );
        Ok(())
    }

    fn predict(&self) -> Result<()> {
        let rows = self.subjects()?;
        let (deep, linear) = self.survival_models()?;
        let ck: TrajNetCheckpoint = read_json(&self.run.model("trajnet"))?;
        let traj = TrajNetModel::from_checkpoint(&ck)?;
        let preds = predict(&rows, &deep, &linear, &traj, self.cfg)?;
        write_jsonl(&self.run.predictions(), &preds)?;
        tables::risk_scores(&self.run.table("risk_scores"), &self.cfg.horizons, &preds)?;
        tables::trajectory_predictions(&self.run.table("trajectory_predictions"), &preds)?;
        log::info!("scored {} subjects", preds.len());
        Ok(())
    }

    fn evaluate(&self, truth: Option<&Path>) -> Result<()> {
        let rows = self.subjects()?;
        let exclusions = read_exclusions(&self.run.exclusions())?;
        let mixed: MixedModelFile = read_json(&self.run.model("mixed_model"))?;
        let fit = TrajectoryFit {
            model: mixed.model,
            tau_var: mixed.reliability_threshold,
            rows: self.trajectory_rows(&rows)?,
        };
        let preds: Vec<PredictionRow> = read_jsonl(&self.run.predictions())?;
        let truth = truth.map(read_truth).transpose()?;
        let report = evaluate(
            self.cfg.seed,
            &rows,
            &exclusions,
            &fit,
            &preds,
            &self.cfg.horizons,
            truth.as_deref(),
        )?;
        write_json(&self.run.metrics(), &report)?;
        tables::trajectory_metrics(&self.run.table("trajectory_metrics"), &report)?;
        tables::survival_metrics(&self.run.table("survival_metrics"), &report)?;
        tables::tertiles(&self.run.table("tertiles"), &report)?;
        tables::comparison(&self.run.table("comparison"), &report)?;
        log::info!("metrics written to {}", self.run.metrics().display());
        Ok(())
    }

    fn cv_compare(&self) -> Result<()> {
        let rows = self.subjects()?;
        let traj = self.trajectory_rows(&rows)?;
        let report = cv_compare(&rows, &traj, self.cfg)?;
        write_json(&self.run.cv_compare(), &report)?;
        tables::cv_folds(&self.run.table("cv_folds"), &report)?;
        tables::cv_tests(&self.run.table("cv_tests"), &report)?;
        Ok(())
    }

    fn loco(&self) -> Result<()> {
        let rows = self.subjects()?;
        let traj = self.trajectory_rows(&rows)?;
        let report = loco_report(&rows, &traj, self.cfg)?;
        write_json(&self.run.loco(), &report)?;
        tables::loco(&self.run.table("loco"), &report)?;
        Ok(())
    }

    fn fairness(&self) -> Result<()> {
        let rows = self.subjects()?;
        let traj = self.trajectory_rows(&rows)?;
        let report = fairness_report(&rows, &traj, self.cfg)?;
        write_json(&self.run.fairness(), &report)?;
        tables::fairness(&self.run.table("fairness"), &report.report)?;
        Ok(())
    }
}
