//! Paired comparison tests and multiple-testing corrections.

use super::StatsError;
use crate::numcore::rng_from_seed;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Largest number of non-zero differences handled by exact enumeration.
pub const WILCOXON_EXACT_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of positive differences.
    pub statistic: f64,
    pub p_value: f64,
    pub n_nonzero: usize,
    pub exact: bool,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Average ranks (1-based) of `values`.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided Wilcoxon signed-rank test on paired samples.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult, StatsError> {
    super::check_lengths(&[a.len(), b.len()])?;
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            p_value: 1.0,
            n_nonzero: 0,
            exact: true,
        });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();

    if n <= WILCOXON_EXACT_MAX_N {
        // doubled ranks are integers even with mid-ranks
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let total: usize = doubled.iter().sum();
        let mut counts = vec![0.0f64; total + 1];
        counts[0] = 1.0;
        for &r in &doubled {
            for s in (r..=total).rev() {
                counts[s] += counts[s - r];
            }
        }
        let denom = 2f64.powi(n as i32);
        let w2 = (2.0 * w_plus).round() as usize;
        let lower: f64 = counts[..=w2].iter().sum::<f64>() / denom;
        let upper: f64 = counts[w2..].iter().sum::<f64>() / denom;
        let p_value = (2.0 * lower.min(upper)).min(1.0);
        return Ok(WilcoxonResult {
            statistic: w_plus,
            p_value,
            n_nonzero: n,
            exact: true,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    // tie correction
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let dev = (w_plus - mean).abs() - 0.5;
    let z = dev.max(0.0) / var.sqrt();
    let p_value = (2.0 * std_normal().sf(z)).min(1.0);
    Ok(WilcoxonResult {
        statistic: w_plus,
        p_value,
        n_nonzero: n,
        exact: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub p_value: f64,
}

/// Bias-corrected and accelerated bootstrap interval for the mean of `diffs`.
pub fn bootstrap_bca(
    diffs: &[f64],
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapResult, StatsError> {
    let n = diffs.len();
    if n < 5 {
        return Err(StatsError::InsufficientData("bootstrap needs n ≥ 5".into()));
    }
    if diffs.iter().all(|d| *d == diffs[0]) {
        let mean = diffs[0];
        let p_value = if mean == 0.0 { 1.0 } else { 0.0 };
        return Ok(BootstrapResult {
            mean,
            lo: mean,
            hi: mean,
            p_value,
        });
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let mut rng = rng_from_seed(seed);
    let mut boot: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| diffs[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    boot.sort_by(f64::total_cmp);
    let b = resamples as f64;

    let normal = std_normal();
    let below = boot.iter().filter(|v| **v < mean).count() as f64;
    let ties = boot.iter().filter(|v| **v == mean).count() as f64;
    let prop = ((below + 0.5 * ties) / b).clamp(1.0 / (b + 1.0), b / (b + 1.0));
    let z0 = normal.inverse_cdf(prop);

    // jackknife acceleration
    let total: f64 = diffs.iter().sum();
    let jack: Vec<f64> = diffs.iter().map(|d| (total - d) / (n - 1) as f64).collect();
    let jack_mean = jack.iter().sum::<f64>() / n as f64;
    let num: f64 = jack.iter().map(|j| (jack_mean - j).powi(3)).sum();
    let den: f64 = jack
        .iter()
        .map(|j| (jack_mean - j).powi(2))
        .sum::<f64>()
        .powf(1.5);
    let accel = if den > 0.0 { num / (6.0 * den) } else { 0.0 };

    let alpha = (1.0 - level) / 2.0;
    let adjusted = |q: f64| {
        let z = normal.inverse_cdf(q);
        normal.cdf(z0 + (z0 + z) / (1.0 - accel * (z0 + z)))
    };
    let pick = |q: f64| {
        let pos = (q * (b - 1.0)).round().clamp(0.0, b - 1.0) as usize;
        boot[pos]
    };
    let lo = pick(adjusted(alpha)).min(mean);
    let hi = pick(adjusted(1.0 - alpha)).max(mean);

    let frac_le = boot.iter().filter(|v| **v <= 0.0).count() as f64 / b;
    let frac_ge = boot.iter().filter(|v| **v >= 0.0).count() as f64 / b;
    let p_value = (2.0 * frac_le.min(frac_ge)).min(1.0);
    Ok(BootstrapResult {
        mean,
        lo,
        hi,
        p_value,
    })
}

/// Sign-flip permutation test on paired differences.
///
/// With `2^n ≤ permutations` every sign pattern is enumerated and the exact
/// p-value `#{|perm mean| ≥ |obs mean|} / 2^n` is returned; otherwise random
/// flips give `(1 + #exceed) / (P + 1)`.
pub fn permutation_test(
    a: &[f64],
    b: &[f64],
    permutations: usize,
    seed: u64,
) -> Result<f64, StatsError> {
    super::check_lengths(&[a.len(), b.len()])?;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    if n < 5 {
        return Err(StatsError::InsufficientData(
            "permutation test needs n ≥ 5".into(),
        ));
    }
    let observed = (diffs.iter().sum::<f64>() / n as f64).abs();
    let tol = 1e-12 * observed.max(1e-300);
    let exceeds = |m: f64| m.abs() >= observed - tol;

    if n < 63 && (1u64 << n) <= permutations as u64 {
        let total = 1u64 << n;
        let hits = (0..total)
            .filter(|mask| {
                let s: f64 = diffs
                    .iter()
                    .enumerate()
                    .map(|(i, d)| if mask >> i & 1 == 1 { -d } else { *d })
                    .sum();
                exceeds(s / n as f64)
            })
            .count();
        return Ok(hits as f64 / total as f64);
    }

    let mut rng = rng_from_seed(seed);
    let hits = (0..permutations)
        .filter(|_| {
            let s: f64 = diffs
                .iter()
                .map(|d| if rng.random::<bool>() { *d } else { -d })
                .sum();
            exceeds(s / n as f64)
        })
        .count();
    Ok((1 + hits) as f64 / (permutations + 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdjustMethod {
    Holm,
    Bh,
}

/// Holm step-down or Benjamini–Hochberg step-up adjustment, clipped at 1.
pub fn p_adjust(raw: &[f64], method: AdjustMethod) -> Vec<f64> {
    let m = raw.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
    let mut adjusted = vec![0.0; m];
    match method {
        AdjustMethod::Holm => {
            let mut running = 0.0f64;
            for (rank, &i) in order.iter().enumerate() {
                let v = ((m - rank) as f64 * raw[i]).min(1.0);
                running = running.max(v);
                adjusted[i] = running;
            }
        }
        AdjustMethod::Bh => {
            let mut running = 1.0f64;
            for (rank, &i) in order.iter().enumerate().rev() {
                let v = (m as f64 / (rank + 1) as f64 * raw[i]).min(1.0);
                running = running.min(v);
                adjusted[i] = running;
            }
        }
    }
    adjusted
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_samples() {
        let a = [0.8, 0.7, 0.9, 0.85, 0.75];
        assert_eq!(wilcoxon_signed_rank(&a, &a).unwrap().p_value, 1.0);
        assert_eq!(permutation_test(&a, &a, 1000, 1).unwrap(), 1.0);
    }

    #[test]
    fn all_positive_n10_exact() {
        let b: Vec<f64> = (0..10).map(|i| i as f64 * 0.37).collect();
        let a: Vec<f64> = b.iter().map(|x| x + 1.0).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!(r.exact);
        assert!((r.p_value - 2.0 / 1024.0).abs() < 1e-15);
    }

    #[test]
    fn large_n_uses_normal_approximation() {
        let a: Vec<f64> = (0..30).map(|i| (i as f64 * 1.3).sin()).collect();
        let b = vec![0.0; 30];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!(!r.exact);
        assert!(r.p_value > 0.0 && r.p_value <= 1.0);
    }

    #[test]
    fn bca_constant_and_symmetric() {
        let c = bootstrap_bca(&[0.3; 10], 1000, 0.95, 4).unwrap();
        assert_eq!((c.lo, c.hi), (0.3, 0.3));
        let sym: Vec<f64> = (0..25).map(|i| (i as f64 - 12.0) * 0.01).collect();
        let r = bootstrap_bca(&sym, 10_000, 0.95, 4).unwrap();
        assert!(r.lo <= 0.0 && r.hi >= 0.0);
        let again = bootstrap_bca(&sym, 10_000, 0.95, 4).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn permutation_floor() {
        let a: Vec<f64> = (0..25).map(|i| 1.0 + i as f64 * 0.01).collect();
        let b = vec![0.0; 25];
        let p = permutation_test(&a, &b, 1000, 9).unwrap();
        assert!((p - 1.0 / 1001.0).abs() < 1e-15);
    }

    #[test]
    fn adjustments_match_published_table() {
        let raw = [0.0001, 0.287, 0.059];
        let holm = p_adjust(&raw, AdjustMethod::Holm);
        let bh = p_adjust(&raw, AdjustMethod::Bh);
        for (got, want) in holm.iter().zip([0.0003, 0.287, 0.118]) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in bh.iter().zip([0.0003, 0.287, 0.0885]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn adjust_edge_cases() {
        assert_eq!(p_adjust(&[0.03], AdjustMethod::Holm), vec![0.03]);
        assert_eq!(p_adjust(&[0.03], AdjustMethod::Bh), vec![0.03]);
        assert_eq!(p_adjust(&[1.0, 1.0], AdjustMethod::Holm), vec![1.0, 1.0]);
        assert_eq!(p_adjust(&[1.0, 1.0], AdjustMethod::Bh), vec![1.0, 1.0]);
    }
}
