use super::StatsError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub r2: f64,
    pub rmse: f64,
    pub pearson_r: f64,
}

/// R² (may be negative), RMSE and Pearson correlation.
pub fn regression_metrics(pred: &[f64], truth: &[f64]) -> Result<RegressionMetrics, StatsError> {
    super::check_lengths(&[pred.len(), truth.len()])?;
    let n = truth.len();
    if n < 2 {
        return Err(StatsError::InsufficientData(
            "regression metrics need n ≥ 2".into(),
        ));
    }
    let nf = n as f64;
    let mean_t = truth.iter().sum::<f64>() / nf;
    let mean_p = pred.iter().sum::<f64>() / nf;
    let sst: f64 = truth.iter().map(|t| (t - mean_t).powi(2)).sum();
    if sst == 0.0 {
        return Err(StatsError::Undefined("R² with zero truth variance".into()));
    }
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    let spp: f64 = pred.iter().map(|p| (p - mean_p).powi(2)).sum();
    let spt: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - mean_p) * (t - mean_t))
        .sum();
    let pearson_r = if spp > 0.0 {
        spt / (spp * sst).sqrt()
    } else {
        f64::NAN
    };
    Ok(RegressionMetrics {
        r2: 1.0 - sse / sst,
        rmse: (sse / nf).sqrt(),
        pearson_r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalMetrics {
    pub picp: f64,
    pub mpiw: f64,
}

/// Coverage (inclusive bounds) and mean width of prediction intervals.
pub fn picp_mpiw(lo: &[f64], hi: &[f64], truth: &[f64]) -> Result<IntervalMetrics, StatsError> {
    super::check_lengths(&[lo.len(), hi.len(), truth.len()])?;
    if truth.is_empty() {
        return Err(StatsError::InsufficientData("no intervals".into()));
    }
    if lo.iter().zip(hi).any(|(l, h)| l > h) {
        return Err(StatsError::Invalid("interval with lo > hi".into()));
    }
    let n = truth.len() as f64;
    let covered = (0..truth.len())
        .filter(|&i| lo[i] <= truth[i] && truth[i] <= hi[i])
        .count() as f64;
    let width: f64 = lo.iter().zip(hi).map(|(l, h)| h - l).sum();
    Ok(IntervalMetrics {
        picp: covered / n,
        mpiw: width / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let t = [1.0, 2.0, 4.0];
        let m = regression_metrics(&t, &t).unwrap();
        assert_eq!((m.r2, m.rmse), (1.0, 0.0));
        assert!((m.pearson_r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mean_prediction_has_zero_r2() {
        let t = [1.0, 2.0, 6.0];
        let m = regression_metrics(&[3.0; 3], &t).unwrap();
        assert!(m.r2.abs() < 1e-15);
    }

    #[test]
    fn anti_correlated_is_negative() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let p = [4.0, 3.0, 2.0, 1.0];
        assert!(regression_metrics(&p, &t).unwrap().r2 < 0.0);
    }

    #[test]
    fn zero_variance_truth() {
        assert!(regression_metrics(&[1.0, 2.0], &[3.0, 3.0]).is_err());
    }

    #[test]
    fn interval_coverage() {
        let truth = [1.0, 2.0, 3.0];
        let m = picp_mpiw(&[0.0, 1.0, 2.0], &[2.0, 3.0, 4.0], &truth).unwrap();
        assert_eq!((m.picp, m.mpiw), (1.0, 2.0));
        let z = picp_mpiw(&truth, &truth, &truth).unwrap();
        assert_eq!((z.picp, z.mpiw), (1.0, 0.0));
    }

    #[test]
    fn seven_point_count() {
        let truth = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let lo = [-1.0, 1.5, 2.0, 0.0, 4.1, 4.0, 7.0];
        let hi = [1.0, 2.0, 2.5, 3.0, 5.0, 6.0, 8.0];
        // covered: 0 (yes), 1 (no), 2 (yes), 3 (yes), 4 (no), 5 (yes), 6 (no)
        let m = picp_mpiw(&lo, &hi, &truth).unwrap();
        assert!((m.picp - 4.0 / 7.0).abs() < 1e-15);
        assert!((m.mpiw - (2.0 + 0.5 + 0.5 + 3.0 + 0.9 + 2.0 + 1.0) / 7.0).abs() < 1e-12);
    }
}
