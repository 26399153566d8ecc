use proptest::prelude::*;
use shiftlab::hilbert::FourierSeries;
use shiftlab::stochastic::{
    mc_pair_norms, run_pair, simulate_ensemble, McRun, PairMoments, PathModel,
};
use shiftlab::walk::{SimConfig, WalkPath};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn merging_matches_sequential_pushes(
        xs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..200),
        cut in 0usize..200,
    ) {
        let cut = cut % xs.len();
        let mut all = PairMoments::default();
        let mut left = PairMoments::default();
        let mut right = PairMoments::default();
        for (i, (a, b)) in xs.iter().enumerate() {
            all.push(*a, *b);
            if i < cut { left.push(*a, *b) } else { right.push(*a, *b) }
        }
        left.merge(&right);
        prop_assert_eq!(left.count, all.count);
        let (va, vb, c) = all.variances();
        let (wa, wb, d) = left.variances();
        let tol = 1e-9 * (1.0 + va.abs() + vb.abs());
        prop_assert!((left.mean_a - all.mean_a).abs() <= 1e-9);
        prop_assert!((left.mean_b - all.mean_b).abs() <= 1e-9);
        prop_assert!((va - wa).abs() <= tol && (vb - wb).abs() <= tol && (c - d).abs() <= tol);
    }
}

fn two_mode() -> FourierSeries {
    FourierSeries::from_trig(0.0, &[1.0, 0.0, 0.5], &[])
}

#[test]
fn streaming_path_agrees_with_stored_path() {
    let c = SimConfig::new(4, 2.0).unwrap();
    let f = two_mode();
    let model = PathModel::new(&f).unwrap();
    for index in 0..20 {
        let stored = run_pair(&f, &WalkPath::generate(&c, 3, index), &c).unwrap();
        let streamed = model.simulate(&c, 3, index).unwrap();
        assert!((stored.mf.last().unwrap() - streamed.mf).abs() <= 1e-12);
        assert!((stored.mg.last().unwrap() - streamed.mg).abs() <= 1e-12);
        assert!(stored.identity_defect() <= 1e-12);
    }
}

#[test]
fn affine_fast_path_agrees_with_stepping() {
    let c = SimConfig::new(4, 2.0).unwrap();
    let f = FourierSeries::from_trig(0.3, &[1.0], &[-0.5]);
    let model = PathModel::new(&f).unwrap();
    assert!(model.is_affine());
    for index in 0..20 {
        let stored = run_pair(&f, &WalkPath::generate(&c, 8, index), &c).unwrap();
        let fast = model.simulate(&c, 8, index).unwrap();
        assert!((stored.mf.last().unwrap() - fast.mf).abs() <= 1e-12);
        assert!((stored.mg.last().unwrap() - fast.mg).abs() <= 1e-12);
    }
}

#[test]
fn reductions_do_not_depend_on_worker_count() {
    let c = SimConfig::new(8, 4.0).unwrap();
    let f = two_mode();
    let one = simulate_ensemble(&f, 3.0, &c, &McRun::new(2500, 4).with_workers(1)).unwrap();
    let three = simulate_ensemble(&f, 3.0, &c, &McRun::new(2500, 4).with_workers(3)).unwrap();
    assert_eq!(one, three);
}

#[test]
fn relaxed_configs_extrapolate_past_the_circle() {
    let c = SimConfig::relaxed(8, 8.0).unwrap();
    let e = mc_pair_norms(&two_mode(), 2.0, &c, &McRun::new(3000, 1)).unwrap();
    assert!(e.overshoot_fraction > 0.0);
    assert!(e.summary.max_identity_defect <= 1e-12);
}

#[test]
fn complex_data_is_refused() {
    let f = FourierSeries::from_coeffs(1, [(1, rustfft::num_complex::Complex64::new(1.0, 0.0))]);
    assert!(PathModel::new(&f.unwrap()).is_err());
}
