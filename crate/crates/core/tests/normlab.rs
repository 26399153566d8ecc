use shiftlab::dyadic::HaarExpansion;
use shiftlab::hilbert::hp_constant;
use shiftlab::lowerbound::c0_constant;
use shiftlab::normlab::{
    dual_witness, norm_lp_lower_bound, norm_p2_exact, witness_ratio, OptimizerConfig,
};
use shiftlab::operators::ShiftKind;

fn quick() -> OptimizerConfig {
    OptimizerConfig {
        restarts: 6,
        max_iterations: 400,
        ..OptimizerConfig::default()
    }
}

#[test]
fn two_norm_of_s0_is_one() {
    assert!((norm_p2_exact(&ShiftKind::S0Interval, 6).unwrap() - 1.0).abs() <= 1e-12);
    let lb = norm_lp_lower_bound(&ShiftKind::S0Interval, 2.0, 6, &quick(), 1).unwrap();
    assert!((lb.value - 1.0).abs() <= 1e-8);
}

#[test]
fn witness_certifies_the_bound() {
    let lb = norm_lp_lower_bound(&ShiftKind::S0Interval, 4.0, 6, &quick(), 2).unwrap();
    let ratio = witness_ratio(&ShiftKind::S0Interval, &lb.witness, 4.0).unwrap();
    assert!((ratio - lb.value).abs() <= 1e-12 * lb.value);
    assert!(lb.value <= hp_constant(4.0).unwrap() / c0_constant() + 1e-9);
    assert!(lb.value > 1.0);
}

#[test]
fn best_so_far_is_monotone_and_reproducible() {
    let a = norm_lp_lower_bound(&ShiftKind::S0Interval, 3.0, 5, &quick(), 9).unwrap();
    let b = norm_lp_lower_bound(&ShiftKind::S0Interval, 3.0, 5, &quick(), 9).unwrap();
    assert_eq!(a, b);
    assert!(a.best_so_far().windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn dual_witness_transfers_the_bound() {
    let p = 4.0;
    let lb = norm_lp_lower_bound(&ShiftKind::S0Interval, p, 6, &quick(), 5).unwrap();
    let dual = dual_witness(&ShiftKind::S0Interval, &lb.witness, p).unwrap();
    let ratio = witness_ratio(&ShiftKind::S0Interval, &dual, p / (p - 1.0)).unwrap();
    assert!(ratio >= lb.value * (1.0 - 1e-9));
}

#[test]
fn identity_has_norm_one_for_every_p() {
    let lb = norm_lp_lower_bound(&ShiftKind::Identity, 5.0, 4, &quick(), 1).unwrap();
    assert!((lb.value - 1.0).abs() <= 1e-12);
    assert!(witness_ratio(&ShiftKind::Identity, &HaarExpansion::constant(2.0, 3), 5.0).unwrap() == 1.0);
}
