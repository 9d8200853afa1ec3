mod common;

use common::monotone_step;
use ldp_core::metrics::{d_j1, d_m1p, d_uniform, metric_oracle, step, Which};
use proptest::prelude::*;

const TRI: f64 = 1e-9;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn metric_axioms(a in monotone_step(), b in monotone_step(), c in monotone_step()) {
        for f in [
            |x: &_, y: &_| d_uniform(x, y).unwrap(),
            |x: &_, y: &_| d_j1(x, y).unwrap().distance,
            |x: &_, y: &_| d_m1p(x, y).unwrap(),
        ] {
            let (ab, ba) = (f(&a, &b), f(&b, &a));
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-12, "asymmetric {} {}", ab, ba);
            prop_assert!(f(&a, &a) <= 1e-12);
            prop_assert!(ab <= f(&a, &c) + f(&c, &b) + TRI);
        }
    }

    #[test]
    fn m1p_below_j1_below_uniform(a in monotone_step(), b in monotone_step()) {
        let m1 = d_m1p(&a, &b).unwrap();
        let j1 = d_j1(&a, &b).unwrap().distance;
        let du = d_uniform(&a, &b).unwrap();
        prop_assert!(m1 <= j1 + 1e-12, "m1p {} > j1 {}", m1, j1);
        prop_assert!(j1 <= du + 1e-12, "j1 {} > uniform {}", j1, du);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn oracle_brackets_exact_values(a in monotone_step(), b in monotone_step(), seed in any::<u64>()) {
        let j1 = d_j1(&a, &b).unwrap().distance;
        let (lo, hi) = metric_oracle(&a, &b, Which::J1, 200, seed).unwrap();
        prop_assert!(lo - TRI <= j1 && j1 <= hi + TRI, "J1 {} not in [{}, {}]", j1, lo, hi);
        let m1 = d_m1p(&a, &b).unwrap();
        let (lo, hi) = metric_oracle(&a, &b, Which::M1p, 200, seed).unwrap();
        prop_assert!(lo - TRI <= m1 && m1 <= hi + TRI, "M1' {} not in [{}, {}]", m1, lo, hi);
    }

    #[test]
    fn j1_witness_is_order_preserving(a in monotone_step(), b in monotone_step()) {
        let r = d_j1(&a, &b).unwrap();
        for w in r.matching.windows(2) {
            prop_assert!(w[0].0 < w[1].0 && w[0].1 < w[1].1);
        }
        for &(i, j) in &r.matching {
            prop_assert!((a.jumps()[i].time - b.jumps()[j].time).abs() <= r.distance + 1e-12);
        }
    }
}

#[test]
fn boundary_jump_separates_j1_not_m1p() {
    let a = step(1.0, 0.0, &[(0.0, 1.0)]).unwrap();
    for eps in [0.1, 0.01] {
        let b = step(1.0, 0.0, &[(eps, 1.0)]).unwrap();
        assert_eq!(d_j1(&a, &b).unwrap().distance, 1.0);
        assert!(d_m1p(&a, &b).unwrap() <= eps + 1e-12);
    }
}

#[test]
fn m1p_truncations_converge_monotonically() {
    let sizes = [1.3, 0.7, 1.9, 0.4, 1.1, 1.6, 0.9, 1.2, 0.5, 1.8, 1.0, 0.6];
    let times = [0.31, 0.77, 0.12, 0.58, 0.93, 0.45, 0.05, 0.66, 0.24, 0.85, 0.39, 0.51];
    let trunc = |n: usize| {
        let js: Vec<(f64, f64)> = (0..n).map(|i| (times[i], sizes[i] / 2f64.powi(i as i32 + 1))).collect();
        ldp_core::paths::StepPath::from_unsorted(1.0, 0.0, 0.0, js).unwrap()
    };
    let full = trunc(sizes.len());
    let ds: Vec<f64> = (0..=sizes.len()).map(|n| d_m1p(&trunc(n), &full).unwrap()).collect();
    for w in ds.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{ds:?}");
    }
    assert_eq!(*ds.last().unwrap(), 0.0);
}
