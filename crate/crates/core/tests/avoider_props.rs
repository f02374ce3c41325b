use fractal_avoid::avoider::{
    avoid_single_scale, check_hypothesis, collect_conflicts, compute_intermediate_scale, conflict_threshold, prune,
    random_select, verify_properties, AvoidanceInstance, PatternCubes,
};
use fractal_avoid::builder::strong_cover_schedule;
use fractal_avoid::oracle::Budget;
use fractal_avoid::{CubeSet, DyadicScale, Error};
use fractal_avoid_testkit::{meets_lower_bound, random_instance};
use proptest::prelude::*;

fn instance_params() -> impl Strategy<Value = (u64, usize, usize, u32, u32)> {
    (any::<u64>(), 1usize..=2, 2usize..=3, 0u32..=2, 3u32..=5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn selection_invariants((seed, d, n, l_exp, gap) in instance_params()) {
        let inst = random_instance(seed, d, n, l_exp, gap);
        let view = inst.view();
        let budget = Budget::default();
        prop_assert!(check_hypothesis(&view));
        let r = compute_intermediate_scale(&view).unwrap();
        let m = r.exponent() as i64;
        prop_assert!(meets_lower_bound(&inst, m) && !meets_lower_bound(&inst, m + 1));

        let u = random_select(&view, r, seed, 0, &budget).unwrap();
        // exactly one s-cube in every r-cube of E
        let cells = inst.e.refine(r, 1 << 24).unwrap();
        prop_assert_eq!(u.coarsen(r).unwrap(), cells.clone());
        prop_assert_eq!(u.len(), cells.len());
        prop_assert_eq!(&random_select(&view, r, seed, 0, &budget).unwrap(), &u);

        let k = collect_conflicts(&u, &inst.g, d, n);
        let f = prune(&u, &k).unwrap();
        prop_assert!(f.is_subset(&u));
        let firsts = k.first_factors(d).unwrap();
        prop_assert!(f.intersection(&firsts).unwrap().is_empty());
        prop_assert_eq!(f.union(&firsts.intersection(&u).unwrap()).unwrap(), u);
        prop_assert!(collect_conflicts(&f, &inst.g, d, n).is_empty());
    }

    #[test]
    fn single_scale_guarantees((seed, d, n, l_exp, gap) in instance_params()) {
        let inst = random_instance(seed, d, n, l_exp, gap);
        let view = inst.view();
        let res = avoid_single_scale(&view, seed, 0, 64, &Budget::default()).unwrap();
        let r = res.r();
        prop_assert!(inst.l <= r && r <= inst.s);
        prop_assert!(num_bigint::BigUint::from(res.conflicts) <= conflict_threshold(d, inst.l, r));
        let report = verify_properties(&view, &res.f, r).unwrap();
        prop_assert!(report.all_pass(), "{:?}", report);
        prop_assert!(report.worst_cell_count <= 1);
        prop_assert!(report.offending.is_empty());
    }

    #[test]
    fn schedule_covers_every_component(m in 1usize..=8, len in 0usize..=400) {
        let s = strong_cover_schedule(m, len);
        prop_assert_eq!(s.len(), len);
        prop_assert!(s.iter().all(|&i| (1..=m).contains(&i)));
        let floor = ((2.0 * len as f64).sqrt() - m as f64).floor().max(0.0) as usize;
        for i in 1..=m {
            let hits = s.iter().filter(|&&x| x == i).count();
            prop_assert!(hits >= floor, "component {} of {} occurs {} times in {}, bound {}", i, m, hits, len, floor);
        }
        // prefixes of a schedule are schedules
        prop_assert_eq!(&strong_cover_schedule(m, len / 2)[..], &s[..len / 2]);
    }
}

#[test]
fn hypothesis_bounds_are_enforced() {
    let l = DyadicScale::new(1).unwrap();
    let s = DyadicScale::new(4).unwrap();
    let e = CubeSet::from_indices(1, l, [[0]]).unwrap();
    // (l/s)^d = 8 is the least admissible count
    let g = CubeSet::from_indices(2, s, (0..7u64).map(|i| [i, i + 1])).unwrap();
    let inst = AvoidanceInstance {
        d: 1,
        n: 2,
        l,
        s,
        e: &e,
        g: PatternCubes::Explicit(&g),
    };
    assert!(!check_hypothesis(&inst));
    assert!(matches!(
        compute_intermediate_scale(&inst),
        Err(Error::Hypothesis { .. })
    ));
    let g8 = CubeSet::from_indices(2, s, (0..8u64).map(|i| [i, i + 1])).unwrap();
    let inst = AvoidanceInstance {
        g: PatternCubes::Explicit(&g8),
        ..inst
    };
    assert!(check_hypothesis(&inst));
}

#[test]
fn degenerate_instances_are_rejected() {
    let l = DyadicScale::new(2).unwrap();
    let e = CubeSet::from_indices(1, l, [[0]]).unwrap();
    let g = CubeSet::empty(2, l);
    let inst = AvoidanceInstance {
        d: 1,
        n: 2,
        l,
        s: l,
        e: &e,
        g: PatternCubes::Explicit(&g),
    };
    assert!(matches!(inst.validate(), Err(Error::Precondition(_))));
}
