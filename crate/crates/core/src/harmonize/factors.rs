use super::{AssayMethod, Biomarker, HarmonizeError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Multiplicative cross-assay factors mapping each (biomarker, method) to the
/// ELISA reference scale.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonizationFactors {
    factors: BTreeMap<(Biomarker, AssayMethod), f64>,
}

impl Default for HarmonizationFactors {
    /// ELISA is the reference (1.0); Luminex Aβ42 reads low by a factor of
    /// 1.15; every other pair defaults to 1.0.
    fn default() -> Self {
        let mut factors = BTreeMap::new();
        for b in Biomarker::ALL {
            for m in AssayMethod::ALL {
                factors.insert((b, m), 1.0);
            }
        }
        factors.insert((Biomarker::Abeta42, AssayMethod::Luminex), 1.15);
        Self { factors }
    }
}

/// Serialized form: a flat list, since JSON maps need string keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorEntry {
    pub biomarker: Biomarker,
    pub method: AssayMethod,
    pub factor: f64,
}

impl HarmonizationFactors {
    pub fn empty() -> Self {
        Self {
            factors: BTreeMap::new(),
        }
    }

    /// Sets one factor. ELISA must remain the 1.0 reference.
    pub fn set(
        &mut self,
        biomarker: Biomarker,
        method: AssayMethod,
        factor: f64,
    ) -> Result<(), HarmonizeError> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(HarmonizeError::Config(format!(
                "factor for {biomarker:?}/{method:?} must be > 0"
            )));
        }
        if method == AssayMethod::Elisa && factor != 1.0 {
            return Err(HarmonizeError::Config(
                "ELISA is the reference method and must have factor 1.0".into(),
            ));
        }
        self.factors.insert((biomarker, method), factor);
        Ok(())
    }

    pub fn get(&self, biomarker: Biomarker, method: AssayMethod) -> Result<f64, HarmonizeError> {
        self.factors
            .get(&(biomarker, method))
            .copied()
            .ok_or_else(|| {
                HarmonizeError::Config(format!(
                    "no factor for {biomarker:?} measured by {method:?}"
                ))
            })
    }

    /// Converts a raw reading to the reference scale.
    pub fn apply(
        &self,
        value: f64,
        biomarker: Biomarker,
        method: AssayMethod,
    ) -> Result<f64, HarmonizeError> {
        if !(value > 0.0) {
            return Err(HarmonizeError::Invalid(format!(
                "{biomarker:?} value {value} is not positive"
            )));
        }
        Ok(self.get(biomarker, method)? * value)
    }

    pub fn entries(&self) -> Vec<FactorEntry> {
        self.factors
            .iter()
            .map(|(&(biomarker, method), &factor)| FactorEntry {
                biomarker,
                method,
                factor,
            })
            .collect()
    }

    pub fn from_entries(entries: &[FactorEntry]) -> Result<Self, HarmonizeError> {
        let mut f = Self::default();
        for e in entries {
            f.set(e.biomarker, e.method, e.factor)?;
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_factors() {
        let f = HarmonizationFactors::default();
        assert_eq!(
            f.apply(500.0, Biomarker::Abeta42, AssayMethod::Elisa)
                .unwrap(),
            500.0
        );
        assert!(
            (f.apply(500.0, Biomarker::Abeta42, AssayMethod::Luminex)
                .unwrap()
                - 575.0)
                .abs()
                < 1e-12
        );
        assert_eq!(
            f.apply(42.0, Biomarker::Ptau, AssayMethod::Other).unwrap(),
            42.0
        );
    }

    #[test]
    fn unknown_pair_is_config_error() {
        let f = HarmonizationFactors::empty();
        assert!(matches!(
            f.apply(1.0, Biomarker::Ttau, AssayMethod::Luminex),
            Err(HarmonizeError::Config(_))
        ));
    }

    #[test]
    fn elisa_must_stay_reference() {
        let mut f = HarmonizationFactors::default();
        assert!(f.set(Biomarker::Ptau, AssayMethod::Elisa, 1.1).is_err());
        assert!(f.set(Biomarker::Ptau, AssayMethod::Luminex, 0.9).is_ok());
    }
}
