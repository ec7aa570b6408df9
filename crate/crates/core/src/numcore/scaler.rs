use serde::{Deserialize, Serialize};

/// Column-wise z-scoring fitted on a training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    /// Fits per-column mean and sample SD. Zero-variance columns get SD 1 so
    /// they map to a constant 0.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let p = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mut mean = vec![0.0; p];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut sd = vec![0.0; p];
        for r in rows {
            for ((s, v), m) in sd.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        for s in &mut sd {
            *s = if rows.len() > 1 {
                (*s / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            if !(*s > 1e-12) {
                *s = 1.0;
            }
        }
        Self { mean, sd }
    }

    pub fn identity(p: usize) -> Self {
        Self {
            mean: vec![0.0; p],
            sd: vec![1.0; p],
        }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_constant_column() {
        let rows = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(&rows);
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert!((s.sd[0] - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(s.sd[1], 1.0);
        let z = s.transform(&rows[0]);
        assert_eq!(z[1], 0.0);
        let back = s.inverse(&z);
        assert!((back[0] - 1.0).abs() < 1e-12);
    }
}
