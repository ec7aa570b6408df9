use super::{
    align_csf_to_visit, days_between, decimal_year, select_csf_measurement, DataError,
    Demographics, Diagnosis, ParsedDataset, RawCsfRow, VisitRow, DAYS_PER_YEAR, MAX_ALIGN_GAP_DAYS,
};
use crate::harmonize::AssayMethod;
use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

/// Which baseline diagnoses enter the cohort.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CohortFilter {
    /// Baseline MCI only.
    #[default]
    MciOnly,
    /// Any baseline diagnosis except dementia.
    All,
}

impl std::str::FromStr for CohortFilter {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mci-only" => Ok(Self::MciOnly),
            "all" => Ok(Self::All),
            other => Err(format!(
                "unknown cohort filter {other:?} (expected all or mci-only)"
            )),
        }
    }
}

/// Why a subject did not enter the integrated cohort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExclusionReason {
    #[serde(rename = "no demographics")]
    NoDemographics,
    #[serde(rename = "incomplete demographics")]
    IncompleteDemographics,
    #[serde(rename = "insufficient visits")]
    InsufficientVisits,
    #[serde(rename = "baseline diagnosis")]
    BaselineDiagnosis,
    #[serde(rename = "missing baseline clinical")]
    MissingBaselineClinical,
    #[serde(rename = "missing biomarkers")]
    MissingBiomarkers,
    #[serde(rename = "alignment")]
    Alignment,
}

impl ExclusionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::NoDemographics => "no demographics",
            Self::IncompleteDemographics => "incomplete demographics",
            Self::InsufficientVisits => "insufficient visits",
            Self::BaselineDiagnosis => "baseline diagnosis",
            Self::MissingBaselineClinical => "missing baseline clinical",
            Self::MissingBiomarkers => "missing biomarkers",
            Self::Alignment => "alignment",
        }
    }
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    #[serde(rename = "NACCID")]
    pub subject_id: String,
    pub reason: ExclusionReason,
}

/// The CSF draw used for a subject and the visit it was aligned to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsfMeasurement {
    pub values: [Option<f64>; 3],
    pub methods: [Option<AssayMethod>; 3],
    pub date: NaiveDate,
    pub aligned_visit: u32,
    pub gap_days: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitPoint {
    pub visit_number: u32,
    /// Years from baseline.
    pub t: f64,
    pub cdrsb: f64,
    pub mmse: Option<f64>,
    pub diagnosis: Option<Diagnosis>,
}

/// One integrated subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub subject_id: String,
    pub center: String,
    pub baseline_date: NaiveDate,
    /// Age in years at baseline.
    pub age: f64,
    pub female: bool,
    pub education: f64,
    pub baseline_mmse: f64,
    pub baseline_cdrsb: f64,
    pub baseline_diagnosis: Diagnosis,
    pub csf: CsfMeasurement,
    /// Visits with a CDR-SB score, `t` strictly increasing from 0.
    pub visits: Vec<VisitPoint>,
    /// Years to the first dementia diagnosis (event) or last follow-up.
    pub event_time: f64,
    pub event: bool,
    /// Last observed minus baseline MMSE.
    pub mmse_change: Option<f64>,
    pub cdrsb_change: f64,
    /// CDR-SB ever rose above its baseline value.
    pub cdrsb_worsened: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Integration {
    pub records: Vec<ParticipantRecord>,
    pub exclusions: Vec<Exclusion>,
}

struct SubjectRows<'a> {
    demographics: Option<&'a Demographics>,
    visits: Vec<&'a VisitRow>,
    csf: Vec<&'a RawCsfRow>,
}

fn years(from: NaiveDate, to: NaiveDate) -> f64 {
    days_between(from, to) as f64 / DAYS_PER_YEAR
}

fn integrate_subject(
    id: &str,
    rows: &SubjectRows,
    filter: CohortFilter,
) -> Result<ParticipantRecord, ExclusionReason> {
    let demo = rows.demographics.ok_or(ExclusionReason::NoDemographics)?;
    let (Some(female), Some(birth_year), Some(education), Some(center)) = (
        demo.female,
        demo.birth_year,
        demo.education,
        demo.center.clone(),
    ) else {
        return Err(ExclusionReason::IncompleteDemographics);
    };

    // One visit per calendar date, in date order.
    let mut dated: Vec<&VisitRow> = rows.visits.clone();
    dated.sort_by(|a, b| {
        a.date
            .cmp(&b.date)
            .then(a.visit_number.cmp(&b.visit_number))
    });
    dated.dedup_by(|b, a| a.date == b.date);
    let scored: Vec<&VisitRow> = dated
        .iter()
        .copied()
        .filter(|v| v.cdrsb.is_some())
        .collect();
    if scored.len() < 2 {
        return Err(ExclusionReason::InsufficientVisits);
    }
    let baseline = scored[0];
    let baseline_dx = baseline
        .diagnosis
        .ok_or(ExclusionReason::BaselineDiagnosis)?;
    let admitted = match filter {
        CohortFilter::MciOnly => baseline_dx == Diagnosis::Mci,
        CohortFilter::All => baseline_dx != Diagnosis::Dementia,
    };
    if !admitted {
        return Err(ExclusionReason::BaselineDiagnosis);
    }
    let baseline_mmse = baseline
        .mmse
        .ok_or(ExclusionReason::MissingBaselineClinical)?;

    let candidates: Vec<&RawCsfRow> = rows
        .csf
        .iter()
        .copied()
        .filter(|r| r.has_biomarker())
        .collect();
    let csf = select_csf_measurement(&candidates, baseline.date)
        .ok_or(ExclusionReason::MissingBiomarkers)?;
    let visit_rows: Vec<VisitRow> = dated.iter().map(|v| (*v).clone()).collect();
    let aligned = align_csf_to_visit(csf, &visit_rows, MAX_ALIGN_GAP_DAYS)
        .ok_or(ExclusionReason::Alignment)?;

    let follow_up: Vec<&VisitRow> = dated
        .iter()
        .copied()
        .filter(|v| v.date >= baseline.date)
        .collect();
    let conversion = follow_up
        .iter()
        .find(|v| v.date > baseline.date && v.diagnosis == Some(Diagnosis::Dementia));
    let (event_time, event) = match conversion {
        Some(v) => (years(baseline.date, v.date), true),
        None => (
            years(
                baseline.date,
                follow_up.last().expect("baseline present").date,
            ),
            false,
        ),
    };
    let visits: Vec<VisitPoint> = scored
        .iter()
        .map(|v| VisitPoint {
            visit_number: v.visit_number,
            t: years(baseline.date, v.date),
            cdrsb: v.cdrsb.expect("filtered"),
            mmse: v.mmse,
            diagnosis: v.diagnosis,
        })
        .collect();
    let baseline_cdrsb = visits[0].cdrsb;
    let last_mmse = follow_up.iter().rev().find_map(|v| v.mmse);
    Ok(ParticipantRecord {
        subject_id: id.to_string(),
        center,
        baseline_date: baseline.date,
        age: decimal_year(baseline.date) - (birth_year as f64 + 0.5),
        female,
        education,
        baseline_mmse,
        baseline_cdrsb,
        baseline_diagnosis: baseline_dx,
        csf: CsfMeasurement {
            values: csf.values,
            methods: csf.methods,
            date: csf.date(),
            aligned_visit: aligned.visit_number,
            gap_days: days_between(csf.date(), aligned.date),
        },
        cdrsb_change: visits.last().expect("≥2 visits").cdrsb - baseline_cdrsb,
        cdrsb_worsened: visits.iter().any(|v| v.cdrsb > baseline_cdrsb),
        mmse_change: last_mmse.map(|m| m - baseline_mmse),
        visits,
        event_time,
        event,
    })
}

/// Applies the inclusion criteria to every subject seen in any input file
/// (including subjects whose rows were all rejected). Each subject lands in
/// exactly one of `records` or `exclusions`, both ordered by subject id.
pub fn integrate(data: &ParsedDataset, filter: CohortFilter) -> Integration {
    let mut ids: BTreeSet<&str> = BTreeSet::new();
    ids.extend(data.csf.iter().map(|r| r.subject_id.as_str()));
    ids.extend(data.visits.iter().map(|r| r.subject_id.as_str()));
    ids.extend(data.demographics.iter().map(|r| r.subject_id.as_str()));
    ids.extend(
        data.rejects
            .iter()
            .filter(|r| !r.subject_id.is_empty())
            .map(|r| r.subject_id.as_str()),
    );
    let mut grouped: BTreeMap<&str, SubjectRows> = ids
        .iter()
        .map(|id| {
            (
                *id,
                SubjectRows {
                    demographics: None,
                    visits: Vec::new(),
                    csf: Vec::new(),
                },
            )
        })
        .collect();
    for d in &data.demographics {
        let entry = grouped
            .get_mut(d.subject_id.as_str())
            .expect("id collected");
        entry.demographics.get_or_insert(d);
    }
    for v in &data.visits {
        grouped
            .get_mut(v.subject_id.as_str())
            .expect("id collected")
            .visits
            .push(v);
    }
    for c in &data.csf {
        grouped
            .get_mut(c.subject_id.as_str())
            .expect("id collected")
            .csf
            .push(c);
    }
    let subjects: Vec<(&str, SubjectRows)> = grouped.into_iter().collect();
    let outcomes: Vec<Result<ParticipantRecord, Exclusion>> = subjects
        .par_iter()
        .map(|(id, rows)| {
            integrate_subject(id, rows, filter).map_err(|reason| Exclusion {
                subject_id: id.to_string(),
                reason,
            })
        })
        .collect();
    let mut out = Integration::default();
    for o in outcomes {
        match o {
            Ok(r) => out.records.push(r),
            Err(e) => out.exclusions.push(e),
        }
    }
    out
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One JSON object per line.
pub fn write_records(path: &Path, records: &[ParticipantRecord]) -> Result<(), DataError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err(path))?);
    for (i, r) in records.iter().enumerate() {
        let line = serde_json::to_string(r).map_err(|source| DataError::Json {
            line: i + 1,
            source,
        })?;
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_records(path: &Path) -> Result<Vec<ParticipantRecord>, DataError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| DataError::Json {
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(out)
}

pub fn write_exclusions(path: &Path, exclusions: &[Exclusion]) -> Result<(), DataError> {
    let csv_err = |source| DataError::Csv {
        file: path.display().to_string(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["NACCID", "reason"]).map_err(csv_err)?;
    for e in exclusions {
        w.write_record([e.subject_id.as_str(), e.reason.as_str()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_exclusions(path: &Path) -> Result<Vec<Exclusion>, DataError> {
    let csv_err = |source| DataError::Csv {
        file: path.display().to_string(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize()
        .collect::<Result<Vec<Exclusion>, _>>()
        .map_err(csv_err)
}
