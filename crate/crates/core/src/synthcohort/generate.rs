use super::{GeneratorConfig, HazardLink};
use crate::dataio::{Diagnosis, CSF_COLUMNS, DAYS_PER_YEAR, DEMOGRAPHIC_COLUMNS, VISIT_COLUMNS};
use crate::harmonize::{AssayMethod, Biomarker, HarmonizationFactors};
use crate::numcore::{derive_seed, rng_from_seed, Rng};
use chrono::{Datelike, NaiveDate};
use nalgebra::{Matrix3, Vector3};
use rand::Rng as _;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Amyloid cutoff (pg/mL) at which the nonlinear link switches regime.
const AMYLOID_CUTOFF: f64 = 500.0;
/// Weight of each main effect under the linear link.
const LINEAR_WEIGHT: f64 = 0.8;
/// Main-effect weight under the nonlinear link.
const MAIN_EFFECT_WEIGHT: f64 = 0.25;
/// Weight of the t-tau/p-tau term whose sign follows amyloid status.
const INTERACTION_WEIGHT: f64 = 2.5;
/// Cap on visits for a subject who can neither convert nor be censored.
const MAX_VISITS: u32 = 5000;

/// Everything known about one generated subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectTruth {
    pub subject_id: String,
    pub center: String,
    pub baseline_diagnosis: Diagnosis,
    pub female: bool,
    pub age: f64,
    pub education: f64,
    /// True `[Aβ42, p-tau, t-tau]` before site shift and assay scaling.
    pub biomarkers: [f64; 3],
    pub site_shift: [f64; 3],
    pub assay: AssayMethod,
    pub log_risk: f64,
    /// True intercept, slope and acceleration.
    pub coefficients: [f64; 3],
    /// Conversion time before censoring (may exceed follow-up; infinite
    /// when the hazard is zero).
    #[serde(with = "crate::synthcohort::nonfinite")]
    pub event_time: f64,
    #[serde(with = "crate::synthcohort::nonfinite")]
    pub censor_time: f64,
    /// Visit time of diagnosed conversion, or last visit when censored.
    pub observed_time: f64,
    pub event: bool,
    pub n_visits: usize,
}

/// A generated cohort as CSV rows (in the ingestion schemas) plus truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub csf: Vec<Vec<String>>,
    pub visits: Vec<Vec<String>>,
    pub demographics: Vec<Vec<String>>,
    pub truth: Vec<SubjectTruth>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohortFiles {
    pub csf: PathBuf,
    pub visits: PathBuf,
    pub demographics: PathBuf,
    pub ground_truth: PathBuf,
}

impl CohortFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            csf: dir.join("csf.csv"),
            visits: dir.join("visits.csv"),
            demographics: dir.join("demographics.csv"),
            ground_truth: dir.join("ground_truth.jsonl"),
        }
    }
}

struct Baseline {
    stage: Diagnosis,
    female: bool,
    age: f64,
    education: f64,
    center: usize,
    biomarkers: [f64; 3],
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn draw_baseline(rng: &mut Rng, cfg: &GeneratorConfig) -> Baseline {
    let stage = if rng.random::<f64>() < cfg.mci_fraction {
        Diagnosis::Mci
    } else {
        Diagnosis::Normal
    };
    let p_amyloid = if stage == Diagnosis::Mci { 0.6 } else { 0.3 };
    let amyloid = rng.random::<f64>() < p_amyloid;
    let abeta = (if amyloid { 380f64 } else { 750f64 }).ln() + 0.25 * normal(rng);
    let ptau = 45f64.ln() + 0.45 * f64::from(u8::from(amyloid)) + 0.3 * normal(rng);
    let ttau = (6.0f64).ln() + ptau + 0.2 * normal(rng);
    Baseline {
        stage,
        female: rng.random::<f64>() < 0.542,
        age: (71.4 + 8.9 * normal(rng)).clamp(50.0, 95.0),
        education: (15.2 + 3.1 * normal(rng)).clamp(6.0, 20.0).round(),
        center: rng.random_range(0..cfg.n_centers),
        biomarkers: [abeta.exp(), ptau.exp(), ttau.exp()],
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    (m, if sd > 0.0 { sd } else { 1.0 })
}

/// True log-risk from standardized log p-tau, log(1/Aβ42) and log(t-tau/p-tau).
fn log_risk(link: HazardLink, z: [f64; 3], abeta: f64) -> f64 {
    match link {
        HazardLink::Linear => LINEAR_WEIGHT * (z[0] + z[1]),
        HazardLink::Nonlinear => {
            let amyloid_sign = if abeta < AMYLOID_CUTOFF { 1.0 } else { -1.0 };
            MAIN_EFFECT_WEIGHT * (z[0] + z[1]) + INTERACTION_WEIGHT * amyloid_sign * z[2]
        }
    }
}

fn fmt_value(v: f64) -> String {
    format!("{v:.2}")
}

fn missing_token(rng: &mut Rng) -> String {
    ["", "-4", "NA"][rng.random_range(0..3)].to_string()
}

fn add_days(date: NaiveDate, days: i64) -> NaiveDate {
    date + chrono::Duration::days(days)
}

struct SubjectRows {
    csf: Vec<Vec<String>>,
    visits: Vec<Vec<String>>,
    demographics: Vec<String>,
    truth: SubjectTruth,
}

fn sample_assay(rng: &mut Rng, mix: &[f64; 3]) -> AssayMethod {
    let u = rng.random::<f64>();
    if u < mix[0] {
        AssayMethod::Elisa
    } else if u < mix[0] + mix[1] {
        AssayMethod::Luminex
    } else {
        AssayMethod::Other
    }
}

#[allow(clippy::too_many_arguments)]
fn build_subject(
    index: usize,
    base: &Baseline,
    z: [f64; 3],
    cfg: &GeneratorConfig,
    shifts: &[[f64; 3]],
    chol: &Matrix3<f64>,
    factors: &HarmonizationFactors,
    rng: &mut Rng,
) -> SubjectRows {
    let id = format!("NACC{:06}", index + 1);
    let center = format!("C{:02}", base.center + 1);
    let risk = log_risk(cfg.hazard_link, z, base.biomarkers[0]);
    let u = chol * Vector3::new(normal(rng), normal(rng), normal(rng));
    let coef: [f64; 3] =
        std::array::from_fn(|k| cfg.fixed_effects[k] + cfg.risk_loadings[k] * risk + u[k]);

    let rate = cfg.baseline_hazard * risk.exp();
    let event_time = if rate > 0.0 {
        Exp::new(rate).expect("positive rate").sample(rng)
    } else {
        f64::INFINITY
    };
    let censor_draw = if cfg.censoring_rate > 0.0 {
        Exp::new(cfg.censoring_rate)
            .expect("positive rate")
            .sample(rng)
    } else {
        f64::INFINITY
    };
    let censor_time = censor_draw.min(cfg.max_follow_up);

    let start = NaiveDate::from_ymd_opt(2005, 1, 1).expect("valid");
    let baseline_date = add_days(start, rng.random_range(0..4017));
    let noise_sd = cfg.residual_variance.sqrt();
    let gap =
        Normal::new(cfg.visit_interval_mean, cfg.visit_interval_sd).expect("valid visit interval");
    let mut visits = Vec::new();
    let mut t = 0.0;
    let mut event = false;
    let mut observed_time = 0.0;
    let unbounded = !event_time.is_finite() && !censor_time.is_finite();
    for number in 1.. {
        let converted = t >= event_time;
        let mut y = coef[0] + coef[1] * t + coef[2] * t * t + noise_sd * normal(rng);
        if cfg.round_cdrsb {
            y = (y * 2.0).round() / 2.0;
        }
        let y = y.clamp(0.0, 18.0);
        let mmse = (28.5 - 1.2 * y + normal(rng)).round().clamp(0.0, 30.0);
        let dx = if converted {
            Diagnosis::Dementia
        } else {
            base.stage
        };
        let date = add_days(baseline_date, (t * DAYS_PER_YEAR).round() as i64);
        visits.push(vec![
            id.clone(),
            number.to_string(),
            date.month().to_string(),
            date.day().to_string(),
            date.year().to_string(),
            format!("{mmse}"),
            if cfg.round_cdrsb {
                format!("{y:.1}")
            } else {
                format!("{y}")
            },
            dx.as_str().to_string(),
        ]);
        observed_time = t;
        if converted {
            event = true;
            break;
        }
        let next = t + gap.sample(rng).max(0.25);
        if next > censor_time || (unbounded && number >= MAX_VISITS) {
            break;
        }
        t = next;
    }

    let assay = sample_assay(rng, &cfg.assay_mix);
    let shift = shifts[base.center];
    let mut csf = Vec::new();
    let misaligned = rng.random::<f64>() < cfg.misaligned_rate;
    let offset = if misaligned {
        -rng.random_range(120..=200)
    } else {
        rng.random_range(-60..=60)
    };
    let mut draws = vec![(add_days(baseline_date, offset), 0.0)];
    if rng.random::<f64>() < cfg.repeat_csf_rate {
        draws.push((add_days(draws[0].0, rng.random_range(300..=420)), 0.05));
    }
    for (date, jitter) in draws {
        let mut row = vec![id.clone()];
        let mut methods = Vec::new();
        for (k, b) in Biomarker::ALL.into_iter().enumerate() {
            let h = factors
                .get(b, assay)
                .expect("default factors cover all pairs");
            let value = base.biomarkers[k] * (shift[k] + jitter * normal(rng)).exp() / h;
            row.push(if rng.random::<f64>() < cfg.missing_rate[k] {
                missing_token(rng)
            } else {
                fmt_value(value)
            });
            methods.push(assay.code().to_string());
        }
        row.extend(methods);
        row.extend([
            date.month().to_string(),
            date.day().to_string(),
            date.year().to_string(),
        ]);
        csf.push(row);
    }

    let decimal = crate::dataio::decimal_year(baseline_date);
    let birth_year = (decimal - base.age).floor() as i32;
    let education = if rng.random::<f64>() < cfg.missing_education_rate {
        "99".to_string()
    } else {
        format!("{}", base.education)
    };
    let demographics = vec![
        id.clone(),
        if base.female { "2" } else { "1" }.to_string(),
        birth_year.to_string(),
        education,
        center.clone(),
    ];
    SubjectRows {
        csf,
        demographics,
        truth: SubjectTruth {
            subject_id: id,
            center,
            baseline_diagnosis: base.stage,
            female: base.female,
            age: base.age,
            education: base.education,
            biomarkers: base.biomarkers,
            site_shift: shift,
            assay,
            log_risk: risk,
            coefficients: coef,
            event_time,
            censor_time,
            observed_time,
            event,
            n_visits: visits.len(),
        },
        visits,
    }
}

/// Generates a cohort; a pure function of the configuration (including seed).
pub fn generate(cfg: &GeneratorConfig) -> Result<Cohort, String> {
    cfg.validate()?;
    let cov = Matrix3::from_fn(|i, j| cfg.random_effect_cov[i][j]);
    let chol = if cov.iter().all(|v| *v == 0.0) {
        Matrix3::zeros()
    } else {
        cov.cholesky()
            .ok_or("random-effect covariance must be positive definite (or zero)")?
            .l()
    };
    let mut site_rng = rng_from_seed(derive_seed(cfg.seed, 0));
    let shifts: Vec<[f64; 3]> = (0..cfg.n_centers)
        .map(|_| std::array::from_fn(|k| cfg.site_shift_sd[k] * normal(&mut site_rng)))
        .collect();
    let base_root = derive_seed(cfg.seed, 1);
    let bases: Vec<Baseline> = (0..cfg.n_subjects)
        .into_par_iter()
        .map(|i| draw_baseline(&mut rng_from_seed(derive_seed(base_root, i as u64)), cfg))
        .collect();
    let log_ptau: Vec<f64> = bases.iter().map(|b| b.biomarkers[1].ln()).collect();
    let log_inv_abeta: Vec<f64> = bases.iter().map(|b| -b.biomarkers[0].ln()).collect();
    let (mp, sp) = mean_sd(&log_ptau);
    let (ma, sa) = mean_sd(&log_inv_abeta);
    let log_neuro: Vec<f64> = bases
        .iter()
        .map(|b| (b.biomarkers[2] / b.biomarkers[1]).ln())
        .collect();
    let (mn, sn) = mean_sd(&log_neuro);
    let factors = HarmonizationFactors::default();
    let rest_root = derive_seed(cfg.seed, 2);
    let subjects: Vec<SubjectRows> = bases
        .par_iter()
        .enumerate()
        .map(|(i, b)| {
            let z = [
                (log_ptau[i] - mp) / sp,
                (log_inv_abeta[i] - ma) / sa,
                (log_neuro[i] - mn) / sn,
            ];
            let mut rng = rng_from_seed(derive_seed(rest_root, i as u64));
            build_subject(i, b, z, cfg, &shifts, &chol, &factors, &mut rng)
        })
        .collect();
    let mut cohort = Cohort {
        csf: Vec::new(),
        visits: Vec::new(),
        demographics: Vec::new(),
        truth: Vec::with_capacity(subjects.len()),
    };
    for s in subjects {
        cohort.csf.extend(s.csf);
        cohort.visits.extend(s.visits);
        cohort.demographics.push(s.demographics);
        cohort.truth.push(s.truth);
    }
    Ok(cohort)
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> crate::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| crate::Error::io(path, e))
}

/// Writes the three CSV files and `ground_truth.jsonl` into `dir`.
pub fn write_cohort(dir: &Path, cohort: &Cohort) -> crate::Result<CohortFiles> {
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    let files = CohortFiles::in_dir(dir);
    write_csv(&files.csf, &CSF_COLUMNS, &cohort.csf)?;
    write_csv(&files.visits, &VISIT_COLUMNS, &cohort.visits)?;
    write_csv(
        &files.demographics,
        &DEMOGRAPHIC_COLUMNS,
        &cohort.demographics,
    )?;
    let path = &files.ground_truth;
    let mut w = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| crate::Error::io(path, e))?,
    );
    for t in &cohort.truth {
        writeln!(w, "{}", serde_json::to_string(t)?).map_err(|e| crate::Error::io(path, e))?;
    }
    w.flush().map_err(|e| crate::Error::io(path, e))?;
    Ok(files)
}

/// Reads `ground_truth.jsonl`.
pub fn read_truth(path: &Path) -> crate::Result<Vec<SubjectTruth>> {
    let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Into::into))
        .collect()
}
