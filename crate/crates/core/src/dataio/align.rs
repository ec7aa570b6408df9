use super::{days_between, ParticipantRecord, RawCsfRow, VisitRow};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// Largest CSF-to-visit gap (inclusive) accepted for alignment.
pub const MAX_ALIGN_GAP_DAYS: i64 = 90;
/// Visits per sequence window.
pub const WINDOW_LEN: usize = 5;

/// Returns the visit closest in time to the CSF draw, or `None` when the
/// closest one is more than `max_gap_days` away. Ties go to the earlier visit.
pub fn align_csf_to_visit<'a>(
    csf: &RawCsfRow,
    visits: &'a [VisitRow],
    max_gap_days: i64,
) -> Option<&'a VisitRow> {
    let date = csf.date();
    visits
        .iter()
        .map(|v| (days_between(date, v.date).abs(), v))
        .filter(|(gap, _)| *gap <= max_gap_days)
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.date.cmp(&b.1.date)))
        .map(|(_, v)| v)
}

/// Picks the CSF row collected closest to `baseline`; the earlier draw wins ties.
pub fn select_csf_measurement<'a>(
    rows: &[&'a RawCsfRow],
    baseline: NaiveDate,
) -> Option<&'a RawCsfRow> {
    rows.iter().copied().min_by(|a, b| {
        let (da, db) = (a.date(), b.date());
        days_between(baseline, da)
            .abs()
            .cmp(&days_between(baseline, db).abs())
            .then(da.cmp(&db))
    })
}

/// `L` consecutive visit states `[MMSE, CDR-SB, years from baseline]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceWindow {
    pub subject_id: String,
    /// Index of the first visit in the window.
    pub start: usize,
    pub states: Vec<[f64; 3]>,
}

/// Sliding windows of length `len` over a subject's visits: `V − len + 1`
/// windows when `V ≥ len`, none otherwise. A visit without MMSE carries the
/// last observed score forward.
pub fn build_sequences(record: &ParticipantRecord, len: usize) -> Vec<SequenceWindow> {
    let v = record.visits.len();
    if len == 0 || v < len {
        return Vec::new();
    }
    let mut last_mmse = record.baseline_mmse;
    let states: Vec<[f64; 3]> = record
        .visits
        .iter()
        .map(|p| {
            if let Some(m) = p.mmse {
                last_mmse = m;
            }
            [last_mmse, p.cdrsb, p.t]
        })
        .collect();
    (0..=v - len)
        .map(|start| SequenceWindow {
            subject_id: record.subject_id.clone(),
            start,
            states: states[start..start + len].to_vec(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csf_on(date: NaiveDate) -> RawCsfRow {
        RawCsfRow {
            subject_id: "S".into(),
            values: [Some(1.0), None, None],
            methods: [None; 3],
            month: chrono::Datelike::month(&date),
            day: Some(chrono::Datelike::day(&date)),
            year: chrono::Datelike::year(&date),
        }
    }

    fn visit_on(n: u32, date: NaiveDate) -> VisitRow {
        VisitRow {
            subject_id: "S".into(),
            visit_number: n,
            date,
            mmse: None,
            cdrsb: Some(0.0),
            diagnosis: None,
        }
    }

    fn d(days: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2010, 6, 1).unwrap() + chrono::Duration::days(days)
    }

    #[test]
    fn alignment_rules() {
        let csf = csf_on(d(0));
        let visits = vec![visit_on(1, d(-151)), visit_on(2, d(78))];
        assert_eq!(
            align_csf_to_visit(&csf, &visits, 90).unwrap().visit_number,
            2
        );
        assert!(align_csf_to_visit(&csf, &[visit_on(1, d(91))], 90).is_none());
        assert!(align_csf_to_visit(&csf, &[visit_on(1, d(-90))], 90).is_some());
        let tie = vec![visit_on(2, d(30)), visit_on(1, d(-30))];
        assert_eq!(align_csf_to_visit(&csf, &tie, 90).unwrap().visit_number, 1);
    }

    #[test]
    fn selection_rules() {
        let a = csf_on(d(-30));
        let b = csf_on(d(10));
        assert_eq!(select_csf_measurement(&[&a], d(0)), Some(&a));
        assert_eq!(select_csf_measurement(&[&a, &b], d(0)), Some(&b));
        let c = csf_on(d(20));
        let e = csf_on(d(-20));
        assert_eq!(select_csf_measurement(&[&c, &e], d(0)), Some(&e));
    }
}
