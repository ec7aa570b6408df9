use super::{DataError, Demographics, Diagnosis, RawCsfRow, VisitRow};
use crate::harmonize::AssayMethod;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

pub const CSF_COLUMNS: [&str; 10] = [
    "NACCID", "CSFABETA", "CSFPTAU", "CSFTTAU", "CSFABMD", "CSFPTMD", "CSFTTMD", "CSFLPMO",
    "CSFLPDY", "CSFLPYR",
];
pub const VISIT_COLUMNS: [&str; 8] = [
    "NACCID", "NACCVNUM", "VISITMO", "VISITDAY", "VISITYR", "NACCMMSE", "CDRSUM", "NACCUDSD",
];
pub const DEMOGRAPHIC_COLUMNS: [&str; 5] = ["NACCID", "SEX", "BIRTHYR", "EDUC", "NACCADC"];

const YEAR_RANGE: std::ops::RangeInclusive<i32> = 1980..=2100;

/// A malformed input row, kept for the rejects report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    pub file: String,
    /// 1-based data line (header excluded).
    pub line: usize,
    pub subject_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParsedDataset {
    pub csf: Vec<RawCsfRow>,
    pub visits: Vec<VisitRow>,
    pub demographics: Vec<Demographics>,
    pub rejects: Vec<Reject>,
}

/// Cell-level parse outcome: `Err` carries the rejection reason.
type Cell<T> = Result<Option<T>, String>;

fn is_missing(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") || t == "."
}

/// Numeric cell; empty, `NA` and negative sentinel codes (e.g. −4) are missing.
fn number(s: &str, column: &str) -> Cell<f64> {
    if is_missing(s) {
        return Ok(None);
    }
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("invalid number in {column}"))?;
    if !v.is_finite() {
        return Err(format!("invalid number in {column}"));
    }
    Ok((v >= 0.0).then_some(v))
}

/// Number restricted to a valid range; out-of-range codes (e.g. 88, 99) are missing.
fn bounded(s: &str, column: &str, lo: f64, hi: f64) -> Cell<f64> {
    Ok(number(s, column)?.filter(|v| (lo..=hi).contains(v)))
}

fn integer(s: &str, column: &str) -> Cell<i64> {
    match number(s, column)? {
        None => Ok(None),
        Some(v) if v.fract() == 0.0 => Ok(Some(v as i64)),
        Some(_) => Err(format!("invalid integer in {column}")),
    }
}

fn method(s: &str, column: &str) -> Cell<AssayMethod> {
    match integer(s, column)? {
        None => Ok(None),
        Some(code) => AssayMethod::from_code(code)
            .map(Some)
            .ok_or_else(|| format!("unknown assay method code {code} in {column}")),
    }
}

/// Validates date parts; returns the day as given (possibly missing).
fn date_parts(
    month: Option<i64>,
    day: Option<i64>,
    year: Option<i64>,
) -> Result<(u32, Option<u32>, i32), String> {
    const INVALID: &str = "invalid date";
    let (Some(m), Some(y)) = (month, year) else {
        return Err(INVALID.into());
    };
    if !(1..=12).contains(&m) || !YEAR_RANGE.contains(&(y as i32)) {
        return Err(INVALID.into());
    }
    if let Some(d) = day {
        if !(1..=31).contains(&d) || NaiveDate::from_ymd_opt(y as i32, m as u32, d as u32).is_none()
        {
            return Err(INVALID.into());
        }
    }
    Ok((m as u32, day.map(|d| d as u32), y as i32))
}

struct Table {
    file: String,
    index: HashMap<String, usize>,
    records: Vec<csv::StringRecord>,
}

impl Table {
    fn read<R: Read>(reader: R, file: &str, required: &[&str]) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new()
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let csv_err = |source| DataError::Csv {
            file: file.to_string(),
            source,
        };
        let headers = rdr.headers().map_err(csv_err)?.clone();
        let index: HashMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_ascii_uppercase(), i))
            .collect();
        for col in required {
            if !index.contains_key(*col) {
                return Err(DataError::MissingColumn {
                    file: file.to_string(),
                    column: col.to_string(),
                });
            }
        }
        let records = rdr
            .records()
            .collect::<Result<Vec<_>, _>>()
            .map_err(csv_err)?;
        Ok(Self {
            file: file.to_string(),
            index,
            records,
        })
    }

    fn get<'a>(&self, rec: &'a csv::StringRecord, column: &str) -> &'a str {
        rec.get(self.index[column]).unwrap_or("")
    }

    /// Parses every record with `f`, routing failures to `rejects`.
    fn parse_rows<T>(
        &self,
        rejects: &mut Vec<Reject>,
        f: impl Fn(&Self, &csv::StringRecord) -> Result<T, String>,
    ) -> Vec<T> {
        let mut out = Vec::with_capacity(self.records.len());
        for (i, rec) in self.records.iter().enumerate() {
            let id = self.get(rec, "NACCID").to_string();
            let result = if id.is_empty() {
                Err("missing subject id".to_string())
            } else {
                f(self, rec)
            };
            match result {
                Ok(v) => out.push(v),
                Err(reason) => rejects.push(Reject {
                    file: self.file.clone(),
                    line: i + 1,
                    subject_id: id,
                    reason,
                }),
            }
        }
        out
    }
}

pub fn parse_csf<R: Read>(
    reader: R,
    rejects: &mut Vec<Reject>,
) -> Result<Vec<RawCsfRow>, DataError> {
    let t = Table::read(reader, "csf", &CSF_COLUMNS)?;
    Ok(t.parse_rows(rejects, |t, r| {
        let (month, day, year) = date_parts(
            integer(t.get(r, "CSFLPMO"), "CSFLPMO")?,
            integer(t.get(r, "CSFLPDY"), "CSFLPDY")?,
            integer(t.get(r, "CSFLPYR"), "CSFLPYR")?,
        )?;
        let values = [
            number(t.get(r, "CSFABETA"), "CSFABETA")?.filter(|v| *v > 0.0),
            number(t.get(r, "CSFPTAU"), "CSFPTAU")?.filter(|v| *v > 0.0),
            number(t.get(r, "CSFTTAU"), "CSFTTAU")?.filter(|v| *v > 0.0),
        ];
        let methods = [
            method(t.get(r, "CSFABMD"), "CSFABMD")?,
            method(t.get(r, "CSFPTMD"), "CSFPTMD")?,
            method(t.get(r, "CSFTTMD"), "CSFTTMD")?,
        ];
        Ok(RawCsfRow {
            subject_id: t.get(r, "NACCID").to_string(),
            values,
            methods,
            month,
            day,
            year,
        })
    }))
}

pub fn parse_visits<R: Read>(
    reader: R,
    rejects: &mut Vec<Reject>,
) -> Result<Vec<VisitRow>, DataError> {
    let t = Table::read(reader, "visits", &VISIT_COLUMNS)?;
    Ok(t.parse_rows(rejects, |t, r| {
        let visit_number = integer(t.get(r, "NACCVNUM"), "NACCVNUM")?
            .filter(|v| *v >= 1)
            .ok_or("invalid visit number")?;
        let (month, day, year) = date_parts(
            integer(t.get(r, "VISITMO"), "VISITMO")?,
            integer(t.get(r, "VISITDAY"), "VISITDAY")?,
            integer(t.get(r, "VISITYR"), "VISITYR")?,
        )?;
        let date = NaiveDate::from_ymd_opt(year, month, day.unwrap_or(super::MISSING_DAY))
            .ok_or("invalid date")?;
        let dx = t.get(r, "NACCUDSD");
        let diagnosis = if is_missing(dx) || dx.trim().starts_with('-') {
            None
        } else {
            Some(Diagnosis::parse(dx).ok_or_else(|| format!("unknown diagnosis {dx:?}"))?)
        };
        let cdrsb = bounded(t.get(r, "CDRSUM"), "CDRSUM", 0.0, 18.0)?;
        Ok(VisitRow {
            subject_id: t.get(r, "NACCID").to_string(),
            visit_number: visit_number as u32,
            date,
            mmse: bounded(t.get(r, "NACCMMSE"), "NACCMMSE", 0.0, 30.0)?,
            cdrsb,
            diagnosis,
        })
    }))
}

pub fn parse_demographics<R: Read>(
    reader: R,
    rejects: &mut Vec<Reject>,
) -> Result<Vec<Demographics>, DataError> {
    let t = Table::read(reader, "demographics", &DEMOGRAPHIC_COLUMNS)?;
    Ok(t.parse_rows(rejects, |t, r| {
        let female = match integer(t.get(r, "SEX"), "SEX")? {
            None => None,
            Some(1) => Some(false),
            Some(2) => Some(true),
            Some(c) => return Err(format!("unknown SEX code {c}")),
        };
        let birth_year = integer(t.get(r, "BIRTHYR"), "BIRTHYR")?
            .filter(|y| (1880..=2100).contains(y))
            .map(|y| y as i32);
        let center = t.get(r, "NACCADC");
        Ok(Demographics {
            subject_id: t.get(r, "NACCID").to_string(),
            female,
            birth_year,
            education: bounded(t.get(r, "EDUC"), "EDUC", 0.0, 36.0)?,
            center: (!is_missing(center)).then(|| center.to_string()),
        })
    }))
}

fn open(path: &Path) -> Result<std::fs::File, DataError> {
    std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads the CSF, visit and demographics files.
pub fn parse_dataset(
    csf: &Path,
    visits: &Path,
    demographics: &Path,
) -> Result<ParsedDataset, DataError> {
    let mut rejects = Vec::new();
    let csf = parse_csf(open(csf)?, &mut rejects)?;
    let visits = parse_visits(open(visits)?, &mut rejects)?;
    let demographics = parse_demographics(open(demographics)?, &mut rejects)?;
    Ok(ParsedDataset {
        csf,
        visits,
        demographics,
        rejects,
    })
}
