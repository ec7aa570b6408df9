use super::SurvError;
use serde::{Deserialize, Serialize};

/// Horizons (years) at which survival probabilities are reported.
pub const REPORT_HORIZONS: [f64; 3] = [2.0, 3.0, 5.0];

/// Step-function cumulative baseline hazard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineHazard {
    /// Distinct event times, ascending.
    pub times: Vec<f64>,
    /// Cumulative hazard just after each event time.
    pub cumulative: Vec<f64>,
}

impl BaselineHazard {
    /// Right-continuous `H₀(t)`; zero before the first event.
    pub fn at(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|x| *x <= t);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    pub fn curve(&self, score: f64) -> SurvivalCurve {
        let hr = score.exp();
        SurvivalCurve {
            score,
            times: self.times.clone(),
            survival: self.cumulative.iter().map(|h| (-h * hr).exp()).collect(),
        }
    }

    /// `S(t | ψ)` without materializing the curve.
    pub fn survival(&self, score: f64, t: f64) -> f64 {
        (-self.at(t) * score.exp()).exp()
    }
}

/// Breslow estimator of the cumulative baseline hazard given fitted scores.
pub fn breslow_fit(
    scores: &[f64],
    times: &[f64],
    events: &[bool],
) -> Result<BaselineHazard, SurvError> {
    if scores.len() != times.len() || times.len() != events.len() {
        return Err(SurvError::Shape("breslow inputs differ in length".into()));
    }
    if !events.iter().any(|e| *e) {
        return Err(SurvError::NoEvents);
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
    // Walk from the latest time backward accumulating the risk-set sum, then
    // reverse into ascending order.
    let mut steps: Vec<(f64, f64)> = Vec::new();
    let mut risk = 0.0;
    let mut k = 0;
    while k < order.len() {
        let t = times[order[k]];
        let mut d = 0usize;
        while k < order.len() && times[order[k]] == t {
            risk += scores[order[k]].exp();
            d += events[order[k]] as usize;
            k += 1;
        }
        if d > 0 {
            steps.push((t, d as f64 / risk));
        }
    }
    steps.reverse();
    let mut acc = 0.0;
    let (times, cumulative) = steps
        .into_iter()
        .map(|(t, inc)| {
            acc += inc;
            (t, acc)
        })
        .unzip();
    Ok(BaselineHazard { times, cumulative })
}

/// Individual survival curve `S(t) = exp(−H₀(t)·exp(ψ))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub score: f64,
    pub times: Vec<f64>,
    /// `S` just after each time.
    pub survival: Vec<f64>,
}

impl SurvivalCurve {
    pub fn at(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|x| *x <= t);
        if idx == 0 {
            1.0
        } else {
            self.survival[idx - 1]
        }
    }

    /// First time at which `S ≤ 0.5`, if the curve gets there.
    pub fn median(&self) -> Option<f64> {
        self.survival
            .iter()
            .position(|s| *s <= 0.5)
            .map(|i| self.times[i])
    }

    pub fn at_report_horizons(&self) -> [f64; 3] {
        REPORT_HORIZONS.map(|h| self.at(h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_subject() {
        let h = breslow_fit(&[0.0], &[2.0], &[true]).unwrap();
        assert_eq!(h.at(2.0), 1.0);
        assert_eq!(h.at(1.999), 0.0);
    }

    #[test]
    fn hand_instance_with_tie() {
        // times 1,2,2,3,4,5; events 1,1,1,0,1,0; scores ln(1..6)
        let scores: Vec<f64> = (1..=6).map(|k| (k as f64).ln()).collect();
        let times = [1.0, 2.0, 2.0, 3.0, 4.0, 5.0];
        let events = [true, true, true, false, true, false];
        let h = breslow_fit(&scores, &times, &events).unwrap();
        let s1 = 1.0 / 21.0;
        let s2 = s1 + 2.0 / 20.0;
        let s4 = s2 + 1.0 / 11.0;
        assert_eq!(h.times, vec![1.0, 2.0, 4.0]);
        for (a, b) in h.cumulative.iter().zip([s1, s2, s4]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((h.at(3.5) - s2).abs() < 1e-15);
    }

    #[test]
    fn curve_values() {
        let h = BaselineHazard {
            times: vec![1.0, 3.0],
            cumulative: vec![0.3, 0.9],
        };
        let c = h.curve(0.0);
        assert_eq!(c.at(0.0), 1.0);
        assert!((c.at(2.0) - 0.740_818_220_681_717_8).abs() < 1e-12);
        assert_eq!(c.median(), Some(3.0));
        let low = h.curve(-50.0);
        assert!(low.at(10.0) > 1.0 - 1e-15);
        assert_eq!(low.median(), None);
    }
}
