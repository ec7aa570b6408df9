use serde::{Deserialize, Serialize};
use std::fmt;

/// Positivity cutoffs in pg/mL. Amyloid is positive strictly below its
/// cutoff; tau markers strictly above theirs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtnThresholds {
    pub abeta42: f64,
    pub ptau: f64,
    pub ttau: f64,
}

impl Default for AtnThresholds {
    fn default() -> Self {
        Self {
            abeta42: 500.0,
            ptau: 60.0,
            ttau: 400.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AtnProfile {
    pub amyloid: bool,
    pub tau: bool,
    pub neurodegeneration: bool,
}

impl AtnProfile {
    pub fn label(&self) -> String {
        let s = |b: bool| if b { '+' } else { '-' };
        format!(
            "A{}T{}N{}",
            s(self.amyloid),
            s(self.tau),
            s(self.neurodegeneration)
        )
    }

    /// All eight profiles in a fixed order.
    pub fn all() -> [AtnProfile; 8] {
        std::array::from_fn(|k| AtnProfile {
            amyloid: k & 4 != 0,
            tau: k & 2 != 0,
            neurodegeneration: k & 1 != 0,
        })
    }
}

impl fmt::Display for AtnProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

pub fn classify_atn(abeta42: f64, ptau: f64, ttau: f64, thresholds: &AtnThresholds) -> AtnProfile {
    AtnProfile {
        amyloid: abeta42 < thresholds.abeta42,
        tau: ptau > thresholds.ptau,
        neurodegeneration: ttau > thresholds.ttau,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_examples() {
        let t = AtnThresholds::default();
        assert_eq!(classify_atn(400.0, 70.0, 300.0, &t).label(), "A+T+N-");
        assert_eq!(classify_atn(600.0, 50.0, 350.0, &t).label(), "A-T-N-");
        assert_eq!(classify_atn(500.0, 60.0, 400.0, &t).label(), "A-T-N-");
    }

    #[test]
    fn eight_distinct_profiles() {
        let labels: std::collections::BTreeSet<String> =
            AtnProfile::all().iter().map(|p| p.label()).collect();
        assert_eq!(labels.len(), 8);
    }
}
