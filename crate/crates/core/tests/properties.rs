use circle_renorm::maps::RigidRotation;
use circle_renorm::numerics::Real;
use circle_renorm::partitions::classical_partition;
use circle_renorm::renorm::{critical_orbit, pair_at_level, pseudo_distances};
use circle_renorm::rotation::{cf_expansion, convergents_in, ContinuedFraction, CriticalOrbit};
use circle_renorm::tubular::{funnel_bound_check, model_orbit, riccati_crossing_time};
use circle_renorm::AdaptiveReal;
use num_bigint::BigInt;
use proptest::prelude::*;

fn quotients(max: u64, len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(1..=max, len)
}

fn rho(q: &[u64]) -> f64 {
    ContinuedFraction::new(q.to_vec()).unwrap().extended(30).value::<f64>(53)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn determinant_alternates(q in quotients(1_000_000, 1..60)) {
        let t = convergents_in::<BigInt>(&ContinuedFraction::new(q).unwrap());
        for k in 1..t.len() {
            let det = t.p(k) * t.q(k - 1) - t.p(k - 1) * t.q(k);
            prop_assert_eq!(det, BigInt::from(if k % 2 == 0 { -1 } else { 1 }));
        }
    }

    #[test]
    fn expansion_recovers_quotients(q in quotients(50, 1..10)) {
        let cf = ContinuedFraction::new(q.clone()).unwrap().extended(40);
        let x: AdaptiveReal = cf.value(256);
        prop_assert_eq!(cf_expansion(&x, q.len()).unwrap().quotients, q);
    }

    #[test]
    fn rotation_partitions_are_valid(q in quotients(4, 2..6)) {
        let orb = CriticalOrbit::new(RigidRotation::new(rho(&q)), 10, 1 << 20).unwrap();
        prop_assert_eq!(&orb.comb.cf.quotients[..q.len()], &q[..]);
        let mut prev = None;
        for n in 0..=orb.max_partition_level().min(6) {
            let p = classical_partition(&orb, n).unwrap();
            prop_assert_eq!(p.atom_count() as u64, orb.q(n) + orb.q(n + 1));
            prop_assert!(p.coverage_defect() < 1e-12);
            if let Some(c) = &prev {
                prop_assert!(p.nesting_in(c).holds());
            }
            prev = Some(p);
        }
    }

    #[test]
    fn pseudo_distance_is_symmetric_and_ordered(a in quotients(3, 3..5), b in quotients(3, 3..5)) {
        let f = critical_orbit(RigidRotation::new(rho(&a)), 0, 8, 1 << 20).unwrap();
        let g = critical_orbit(RigidRotation::new(rho(&b)), 0, 8, 1 << 20).unwrap();
        let (pf, pg) = (pair_at_level(&f, 1).unwrap(), pair_at_level(&g, 1).unwrap());
        let fg = pseudo_distances(&pf, &pg, 2, 64).unwrap();
        let gf = pseudo_distances(&pg, &pf, 2, 64).unwrap();
        prop_assert_eq!(&fg, &gf);
        prop_assert!(fg[0] <= fg[1] && fg[1] <= fg[2]);
        prop_assert!(pseudo_distances(&pf, &pf, 2, 64).unwrap().iter().all(|d| *d == 0.0));
    }

    #[test]
    fn funnel_model_tracks_harmonic_law(s0 in 1e-3f64..0.1) {
        let s = model_orbit(s0, 4000, |s| s - s * s);
        let r = funnel_bound_check(&s, 1.0).unwrap();
        prop_assert!(r.d1.is_finite());
        prop_assert!(r.split_consistent(), "{:?}", r);
        let m = model_orbit(s0, 4000, |s| s / (1.0 + s));
        for (i, x) in m.iter().enumerate() {
            let exact = s0 / (1.0 + i as f64 * s0);
            prop_assert!((x - exact).abs() <= 1e-12 * exact);
        }
    }

    #[test]
    fn crossing_time_is_pi_over_root_eps(k in 3i32..7) {
        let eps = 10f64.powi(-k);
        let n = riccati_crossing_time(&eps, &0.5, 1 << 24).unwrap() as f64;
        let pi = std::f64::consts::PI;
        prop_assert!((n * eps.sqrt() - pi).abs() <= 0.1 * pi);
    }
}

#[test]
fn expansion_reports_termination_of_rationals() {
    let x: AdaptiveReal = ContinuedFraction::new(vec![2, 3]).unwrap().value(128);
    assert!(cf_expansion(&x, 6).is_err());
    assert!(cf_expansion(&x.int(2), 3).is_err());
    let one_third = AdaptiveReal::from_i64_at(1, 128) / AdaptiveReal::from_i64_at(3, 128);
    assert!(cf_expansion(&one_third, 4).is_err());
}
