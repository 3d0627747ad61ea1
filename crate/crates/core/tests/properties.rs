use proptest::prelude::*;

use surrex::data::{read_dataset, write_dataset_to};
use surrex::diagnostics::{effective_sample_size, mcmc_error};
use surrex::randkit::{bvn_logpdf, sample_truncnorm, stream_id_for};
use surrex::stats::quantile;
use surrex::surrogacy::{classify, credible_interval};
use surrex::{mixture_weight_conditional, Dataset, RngStream, StudyRecord};

fn record() -> impl Strategy<Value = (f64, f64, f64, f64, f64)> {
    (
        -5.0..5.0f64,
        0.01..2.0f64,
        -5.0..5.0f64,
        0.01..2.0f64,
        -0.99..0.99f64,
    )
}

fn chain(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = RngStream::new(seed, 0);
    (0..n).map(|_| rng.std_normal()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(rows in prop::collection::vec(record(), 1..20), classes in 1usize..4) {
        let studies: Vec<StudyRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, &(y1, se1, y2, se2, rho))| StudyRecord {
                study_id: format!("s{i}"),
                class_id: format!("k{}", i % classes),
                y1,
                se1,
                y2,
                se2,
                rho_w: rho,
            })
            .collect();
        let ds = Dataset::new(studies).unwrap();
        let mut buf = Vec::new();
        write_dataset_to(&ds, &mut buf).unwrap();
        let back = read_dataset(buf.as_slice()).unwrap();
        prop_assert_eq!(back.studies(), ds.studies());
        prop_assert_eq!(back.fingerprint(), ds.fingerprint());
    }

    #[test]
    fn bvn_is_symmetric_in_data_and_mean((y1, s1, y2, s2, rho) in record(), m1 in -3.0..3.0f64, m2 in -3.0..3.0f64) {
        let a = bvn_logpdf((y1, y2), (m1, m2), s1, s2, rho).unwrap();
        let b = bvn_logpdf((m1, m2), (y1, y2), s1, s2, rho).unwrap();
        let c = bvn_logpdf((y2, y1), (m2, m1), s2, s1, rho).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!((a - c).abs() < 1e-9);
    }

    #[test]
    fn mixture_weight_is_a_monotone_probability(l in -3.0..3.0f64, beta in -3.0..3.0f64, xi in 0.01..3.0f64,
                                                b in 0.1..20.0f64, p1 in 0.0..1.0f64, p2 in 0.0..1.0f64) {
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        let w1 = mixture_weight_conditional(l, beta, xi, b, lo).unwrap();
        let w2 = mixture_weight_conditional(l, beta, xi, b, hi).unwrap();
        prop_assert!((0.0..=1.0).contains(&w1));
        prop_assert!(w1 <= w2 + 1e-12);
    }

    #[test]
    fn credible_interval_is_ordered_and_nested(seed in any::<u64>()) {
        let c = chain(seed, 500);
        let wide = credible_interval(&c, 0.95).unwrap();
        let narrow = credible_interval(&c, 0.5).unwrap();
        prop_assert!(wide.lo <= narrow.lo && narrow.hi <= wide.hi);
        prop_assert!(narrow.lo <= narrow.hi);
    }

    #[test]
    fn verdict_is_conjunction_of_criteria(seed in any::<u64>(), shift in -1.0..1.0f64, psi_scale in 0.001..1.0f64) {
        let l0: Vec<f64> = chain(seed, 400).iter().map(|x| 0.1 * x + shift).collect();
        let l1: Vec<f64> = chain(seed ^ 1, 400).iter().map(|x| 0.2 * x + 0.4).collect();
        let psi: Vec<f64> = chain(seed ^ 2, 400).iter().map(|x| (psi_scale * x).abs() + 1e-9).collect();
        let v = classify("c", &l0, &l1, &psi, 2.0, 0.95).unwrap();
        prop_assert_eq!(v.strong, v.criterion_intercept && v.criterion_slope && v.criterion_variance);
        prop_assert!(v.bf_psi > 0.0);
        prop_assert!(v.ci_lambda0.lo <= v.ci_lambda0.hi && v.ci_lambda1.lo <= v.ci_lambda1.hi);
    }

    #[test]
    fn quantiles_are_monotone(xs in prop::collection::vec(-100.0..100.0f64, 1..50), p in 0.0..1.0f64, q in 0.0..1.0f64) {
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        prop_assert!(quantile(&xs, lo) <= quantile(&xs, hi));
    }

    #[test]
    fn chain_metrics_respect_bounds(seed in any::<u64>(), n in 100usize..2000) {
        let c = chain(seed, n);
        prop_assert!(mcmc_error(&c).unwrap() >= 0.0);
        let ess = effective_sample_size(&c).unwrap();
        prop_assert!(ess > 0.0 && ess <= 1.05 * n as f64);
    }

    #[test]
    fn truncated_draws_respect_the_bound(seed in any::<u64>(), mu in -5.0..5.0f64, sd in 0.01..3.0f64, lower in -5.0..5.0f64) {
        let mut rng = RngStream::new(seed, 0);
        for _ in 0..50 {
            prop_assert!(sample_truncnorm(&mut rng, mu, sd, lower) >= lower);
        }
    }

    #[test]
    fn streams_replay_and_separate(seed in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        prop_assume!(a != b);
        let mut x = RngStream::derived(seed, &[a]);
        let mut y = RngStream::derived(seed, &[a]);
        let mut z = RngStream::derived(seed, &[b]);
        let xs: Vec<u64> = (0..4).map(|_| x.next_u64()).collect();
        let ys: Vec<u64> = (0..4).map(|_| y.next_u64()).collect();
        let zs: Vec<u64> = (0..4).map(|_| z.next_u64()).collect();
        prop_assert_eq!(&xs, &ys);
        prop_assert_ne!(&xs, &zs);
        prop_assert_ne!(stream_id_for(&[seed, a]), stream_id_for(&[seed, b]));
    }
}
