use progress_core::evalstats::{c_index, km_fit, logrank_test, p_adjust, AdjustMethod};
use progress_core::survnet::{breslow_fit, linear_coxph_fit};
use proptest::prelude::*;

/// Survival samples: (score, time, event) with deliberate ties in time.
fn survival_sample(max_n: usize) -> impl Strategy<Value = Vec<(f64, f64, bool)>> {
    prop::collection::vec(
        (-3.0f64..3.0, 1u32..12, prop::bool::weighted(0.6)),
        2..max_n,
    )
    .prop_map(|v| {
        v.into_iter()
            .map(|(s, t, e)| (s, t as f64 * 0.5, e))
            .collect()
    })
}

fn unzip3(v: &[(f64, f64, bool)]) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    (
        v.iter().map(|x| x.0).collect(),
        v.iter().map(|x| x.1).collect(),
        v.iter().map(|x| x.2).collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn c_index_is_rank_based(sample in survival_sample(40)) {
        let (s, t, e) = unzip3(&sample);
        if let Ok(c) = c_index(&s, &t, &e) {
            prop_assert!((0.0..=1.0).contains(&c));
            let transformed: Vec<f64> = s.iter().map(|x| (2.0 * x).exp() + 1.0).collect();
            prop_assert_eq!(c_index(&transformed, &t, &e).unwrap(), c);
            let negated: Vec<f64> = s.iter().map(|x| -x).collect();
            prop_assert!((c_index(&negated, &t, &e).unwrap() - (1.0 - c)).abs() < 1e-12);
        }
    }

    #[test]
    fn adjusted_p_values_are_bounded_and_ordered(raw in prop::collection::vec(0.0f64..1.0, 1..12)) {
        let holm = p_adjust(&raw, AdjustMethod::Holm);
        let bh = p_adjust(&raw, AdjustMethod::Bh);
        for i in 0..raw.len() {
            prop_assert!(holm[i] >= raw[i] - 1e-15 && holm[i] <= 1.0);
            prop_assert!(bh[i] >= raw[i] - 1e-15 && bh[i] <= holm[i] + 1e-15);
            for j in 0..raw.len() {
                if raw[i] < raw[j] {
                    prop_assert!(holm[i] <= holm[j] && bh[i] <= bh[j]);
                }
            }
        }
    }

    #[test]
    fn kaplan_meier_and_breslow_are_monotone(sample in survival_sample(40)) {
        let (s, t, e) = unzip3(&sample);
        let km = km_fit(&t, &e);
        prop_assert!(km.survival.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(km.survival.iter().all(|p| (0.0..=1.0).contains(p)));
        if e.iter().any(|x| *x) {
            let h = breslow_fit(&s, &t, &e).unwrap();
            prop_assert!(h.cumulative.windows(2).all(|w| w[1] >= w[0]));
            prop_assert_eq!(h.at(h.times[0] - 1e-9), 0.0);
            // a common shift of the scores rescales the baseline hazard exactly
            let shifted: Vec<f64> = s.iter().map(|x| x + 0.7).collect();
            let h2 = breslow_fit(&shifted, &t, &e).unwrap();
            for (a, b) in h.cumulative.iter().zip(&h2.cumulative) {
                prop_assert!((a - b * 0.7f64.exp()).abs() <= 1e-9 * a.max(1.0));
            }
        }
    }

    #[test]
    fn log_rank_of_identical_groups_is_null(sample in survival_sample(30)) {
        let (_, t, e) = unzip3(&sample);
        if e.iter().any(|x| *x) {
            let r = logrank_test(&[(&t, &e), (&t, &e)]).unwrap();
            prop_assert!(r.chi_square.abs() < 1e-9);
            prop_assert!(r.p_value > 0.999);
        }
    }
}

#[test]
fn linear_cox_recovers_a_known_coefficient() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let beta = [0.8, -0.5];
    let n = 2000;
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)])
        .collect();
    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for row in &x {
        let rate = 0.2 * (beta[0] * row[0] + beta[1] * row[1]).exp();
        let t = -rng.random::<f64>().ln() / rate;
        let c = -rng.random::<f64>().ln() / 0.1;
        times.push(t.min(c));
        events.push(t <= c);
    }
    let fit = linear_coxph_fit(&x, &times, &events).unwrap();
    for k in 0..2 {
        assert!(
            (fit.coefficients[k] - beta[k]).abs() < 0.12,
            "{:?}",
            fit.coefficients
        );
    }
}
