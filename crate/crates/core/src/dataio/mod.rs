//! Ingestion of NACC-style CSV extracts: parsing with a rejects report, CSF
//! to visit temporal alignment, cohort integration with exclusion reasons,
//! and sliding visit windows.

mod align;
mod integrate;
mod parse;

pub use align::{
    align_csf_to_visit, build_sequences, select_csf_measurement, SequenceWindow,
    MAX_ALIGN_GAP_DAYS, WINDOW_LEN,
};
pub use integrate::{
    integrate, read_exclusions, read_records, write_exclusions, write_records, CohortFilter,
    CsfMeasurement, Exclusion, ExclusionReason, Integration, ParticipantRecord, VisitPoint,
};
pub use parse::{
    parse_csf, parse_dataset, parse_demographics, parse_visits, ParsedDataset, Reject, CSF_COLUMNS,
    DEMOGRAPHIC_COLUMNS, VISIT_COLUMNS,
};

use crate::harmonize::AssayMethod;
use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Days per year used for every time conversion.
pub const DAYS_PER_YEAR: f64 = 365.25;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{file}: missing required column {column}")]
    MissingColumn { file: String, column: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: CSV error: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
    #[error("JSON error on line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Clinical diagnosis at a visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Diagnosis {
    Normal,
    Mci,
    Dementia,
}

impl Diagnosis {
    /// Accepts the three-level text enum (`normal`, `mci`, `dementia`) or the
    /// numeric NACCUDSD codes 1 (normal), 2 (impaired, not MCI), 3 (MCI) and
    /// 4 (dementia); code 2 is grouped with MCI.
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "nc" | "1" => Some(Self::Normal),
            "mci" | "2" | "3" => Some(Self::Mci),
            "dementia" | "4" => Some(Self::Dementia),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Normal => "normal",
            Self::Mci => "mci",
            Self::Dementia => "dementia",
        }
    }
}

/// One CSF draw as recorded in the CSF file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCsfRow {
    pub subject_id: String,
    /// Raw `[Aβ42, p-tau, t-tau]` in pg/mL; `None` when missing.
    pub values: [Option<f64>; 3],
    pub methods: [Option<AssayMethod>; 3],
    pub month: u32,
    /// Day of month; `None` when not recorded (mid-month is assumed).
    pub day: Option<u32>,
    pub year: i32,
}

/// Day assumed when the day of month is missing.
pub const MISSING_DAY: u32 = 15;

impl RawCsfRow {
    pub fn date(&self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, self.day.unwrap_or(MISSING_DAY))
            .expect("validated at parse time")
    }

    pub fn has_biomarker(&self) -> bool {
        self.values.iter().any(Option::is_some)
    }
}

/// One clinical visit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitRow {
    pub subject_id: String,
    pub visit_number: u32,
    pub date: NaiveDate,
    pub mmse: Option<f64>,
    pub cdrsb: Option<f64>,
    pub diagnosis: Option<Diagnosis>,
}

/// One subject's demographics row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub subject_id: String,
    pub female: Option<bool>,
    pub birth_year: Option<i32>,
    pub education: Option<f64>,
    pub center: Option<String>,
}

/// Calendar date as a decimal year.
pub fn decimal_year(date: NaiveDate) -> f64 {
    let year = date.year();
    let start = NaiveDate::from_ymd_opt(year, 1, 1).expect("valid");
    let next = NaiveDate::from_ymd_opt(year + 1, 1, 1).expect("valid");
    let len = (next - start).num_days() as f64;
    year as f64 + (date - start).num_days() as f64 / len
}

/// Signed day difference `b − a`.
pub fn days_between(a: NaiveDate, b: NaiveDate) -> i64 {
    (b - a).num_days()
}
