use std::sync::Arc;

use circle_renorm::conjugacy::{build_conjugacy, criterion_audit, endpoint_gap_audit, fundamental_ratio_audit};
use circle_renorm::maps::{BiCriticalMap, Recentered};
use circle_renorm::numerics::Real;
use circle_renorm::renorm::critical_orbit;
use circle_renorm::rotation::{partial_quotients_by_returns, tune_parameter, ContinuedFraction, CriticalOrbit, TuneOptions};
use circle_renorm::AdaptiveReal;

const BITS: u32 = 384;
const DEPTH: usize = 6;

fn golden() -> BiCriticalMap<AdaptiveReal> {
    let target = ContinuedFraction::new(vec![1; DEPTH]).unwrap();
    let tol = AdaptiveReal::exp2_at(-(BITS as i32 - 112), BITS);
    let opts = TuneOptions { bits: BITS, ..TuneOptions::default() };
    let t = tune_parameter(BiCriticalMap::arnold_bicritical, &target, DEPTH, &tol, &opts).unwrap();
    BiCriticalMap::arnold_bicritical(t.a).unwrap()
}

#[test]
fn recentring_at_the_second_critical_point_is_a_conjugate_up_to_rounding() {
    let f = golden();
    let fo = CriticalOrbit::from_parts(
        Arc::new(f.clone()),
        partial_quotients_by_returns(&f, DEPTH + 3, 1 << 24).unwrap(),
        1 << 24,
    )
    .unwrap();
    let g: CriticalOrbit<AdaptiveReal, Recentered<_, _>> = critical_orbit(f, 1, DEPTH + 3, 1 << 24).unwrap();
    let h = build_conjugacy(&fo, &g, DEPTH).unwrap();
    assert!(h.is_monotone());
    let floor = 2f64.powi(24 - BITS as i32);
    let crit = criterion_audit(&h, DEPTH).unwrap();
    for (n, v) in &crit.decay.values {
        assert!(*v <= floor, "D_{n} = {v:e}");
    }
    let gap = endpoint_gap_audit(&h, DEPTH - 1, 0.5).unwrap();
    for c in &gap.cells {
        assert!(c.value.unwrap_or(0.0) <= floor, "{c:?}");
    }
    for s in fundamental_ratio_audit(&h, DEPTH).unwrap() {
        assert!(s.raw.values.iter().all(|(_, v)| *v <= floor), "{:?}", s.raw.values);
    }
}

#[test]
fn perturbation_gives_a_nonzero_conjugacy() {
    let f = golden();
    let target = ContinuedFraction::new(vec![1; DEPTH]).unwrap();
    let tol = AdaptiveReal::exp2_at(-(BITS as i32 - 112), BITS);
    let opts = TuneOptions { bits: BITS, ..TuneOptions::default() };
    let coeffs = vec![AdaptiveReal::new(BITS, 0.01)];
    let family = |a| BiCriticalMap::perturbed_family(a, coeffs.clone());
    let tg = tune_parameter(family, &target, DEPTH, &tol, &opts).unwrap();
    let fo = CriticalOrbit::new(f, DEPTH + 3, 1 << 24).unwrap();
    let go = CriticalOrbit::from_parts(Arc::new(family(tg.a).unwrap()), tg.combinatorics, 1 << 24).unwrap();
    let h = build_conjugacy(&fo, &go, DEPTH).unwrap();
    assert!(h.is_monotone());
    let crit = criterion_audit(&h, DEPTH).unwrap();
    assert!(crit.decay.all_finite());
    assert!(crit.decay.values.iter().any(|(_, v)| *v > 1e-6));
}
