use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use shiftlab::hilbert::{
    conjugate_exponent, hilbert_pv, hilbert_spectral, hp_constant, poisson_extend, FourierSeries,
};

fn series() -> impl Strategy<Value = FourierSeries> {
    (
        -2.0f64..2.0,
        prop::collection::vec(-1.0f64..1.0, 1..6),
        prop::collection::vec(-1.0f64..1.0, 0..6),
    )
        .prop_map(|(a0, c, s)| FourierSeries::from_trig(a0, &c, &s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conjugation_twice_removes_the_mean_and_negates(f in series(), theta in 0.0f64..std::f64::consts::TAU) {
        let hh = hilbert_spectral(&hilbert_spectral(&f));
        prop_assert!((hh.eval(theta) + f.eval(theta) - f.mean()).abs() <= 1e-12);
    }

    #[test]
    fn principal_value_matches_the_multiplier(f in series(), theta in 0.0f64..std::f64::consts::TAU) {
        let pv = hilbert_pv(|x| f.eval(x), theta, 256, &[]).unwrap();
        prop_assert!((pv - hilbert_spectral(&f).eval(theta)).abs() <= 1e-10);
    }

    #[test]
    fn harmonic_extension_reaches_the_boundary(f in series(), theta in 0.0f64..std::f64::consts::TAU) {
        let r = 1.0 - 1e-9;
        let u = poisson_extend(&f, r * theta.cos(), r * theta.sin()).unwrap();
        prop_assert!((u.value - f.eval(theta)).abs() <= 1e-6);
    }

    #[test]
    fn hp_is_symmetric_under_duality(p in 1.05f64..20.0) {
        let q = conjugate_exponent(p).unwrap();
        prop_assert!((hp_constant(p).unwrap() - hp_constant(q).unwrap()).abs() <= 1e-9 * hp_constant(p).unwrap());
    }
}

#[test]
fn conjugate_of_cosine_is_sine() {
    let h = hilbert_spectral(&FourierSeries::cosine(3, 2.0));
    assert_abs_diff_eq!(h.eval(0.4), 2.0 * (1.2f64).sin(), epsilon = 1e-14);
}

#[test]
fn hp_at_two_and_four() {
    assert_abs_diff_eq!(hp_constant(2.0).unwrap(), 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(hp_constant(4.0).unwrap(), 1.0 + 2f64.sqrt(), epsilon = 1e-14);
    assert!(hp_constant(1.0).is_err());
}
