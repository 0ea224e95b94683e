use num_rational::Ratio;
use proptest::prelude::*;
use symvmc_core::ansatz::{Ansatz, Wavefunction};
use symvmc_core::groups::{apply_diagonal, compose, Configuration, SpaceGroup};
use symvmc_core::lattice::{Cell, LatticeKind};
use symvmc_core::rng::{child_seed, stream_seed};
use symvmc_core::smoothing::{boundary_set, lambda_eps, FundamentalRegion, SmoothingSpec, StepKind};
use symvmc_core::stats::DiscreteToy;
use symvmc_core::symmetrize::{GroupAveraged, SmoothedCanonical};

fn square_ansatz(seed: u64) -> Ansatz {
    Ansatz::initial(Cell::new(LatticeKind::Square, 1.0), 2, 2, 1, true, 0.4, seed).unwrap()
}

fn square_config(p: &[f64]) -> Configuration {
    Configuration::with_counts(2, p.to_vec(), 2).unwrap()
}

fn kind() -> impl Strategy<Value = StepKind> {
    prop_oneof![Just(StepKind::Spline2), Just(StepKind::SmoothInf)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn builtin_groups_are_closed(name in prop::sample::select(SpaceGroup::builtin_names().to_vec())) {
        let g = SpaceGroup::builtin(name).unwrap();
        for a in g.elements() {
            prop_assert!(g.index_of(&a.inverse()).is_some());
            for b in g.elements() {
                prop_assert!(g.index_of(&compose(a, b).unwrap()).is_some());
            }
        }
    }

    #[test]
    fn group_average_is_invariant(p in prop::collection::vec(0.0..1.0f64, 6), seed in 0u64..1000) {
        let a = square_ansatz(seed);
        let g = SpaceGroup::builtin("square-p4mm").unwrap();
        let ga = GroupAveraged::full(&a, &g).unwrap();
        let c = square_config(&p);
        let (l0, s0) = ga.value(&c).unwrap();
        prop_assume!(s0 != 0.0);
        for h in g.elements() {
            let (l, _) = ga.value(&apply_diagonal(h, &c).unwrap()).unwrap();
            prop_assert!((l - l0).abs() <= 1e-10);
        }
    }

    #[test]
    fn smoothed_canonical_is_invariant_and_antisymmetric(
        p in prop::collection::vec(0.0..1.0f64, 6),
        seed in 0u64..1000,
        k in kind(),
        eps in 0.02..0.2f64,
    ) {
        let a = square_ansatz(seed);
        let g = SpaceGroup::builtin("square-p4mm").unwrap();
        let region = FundamentalRegion::for_builtin_group("square-p4mm").unwrap();
        prop_assume!(eps < region.inradius());
        let sc = SmoothedCanonical::new(&a, g.clone(), region, SmoothingSpec::new(k, eps).unwrap()).unwrap();
        let c = square_config(&p);
        let (l0, s0) = sc.value(&c).unwrap();
        prop_assume!(s0 != 0.0);
        for h in g.elements() {
            let (l, s) = sc.value(&apply_diagonal(h, &c).unwrap()).unwrap();
            prop_assert!((l - l0).abs() <= 1e-10);
            prop_assert_eq!(s, s0);
        }
        let (l, s) = sc.value(&c.swapped(0, 1)).unwrap();
        prop_assert!((l - l0).abs() <= 1e-12);
        prop_assert_eq!(s, -s0);
    }

    #[test]
    fn boundary_weights_normalize(x in 0.0..1.0f64, y in 0.0..1.0f64, k in kind(), eps in 0.01..0.2f64) {
        let g = SpaceGroup::builtin("square-p4mm").unwrap();
        let region = FundamentalRegion::for_builtin_group("square-p4mm").unwrap();
        prop_assume!(eps < region.inradius());
        let b = boundary_set(&region, &SmoothingSpec::new(k, eps).unwrap(), &g, &[x, y]).unwrap();
        prop_assert!((b.total_weight() - 1.0).abs() <= 1e-12);
        prop_assert!(b.members.iter().all(|m| (0.0..=1.0).contains(&m.weight)));
    }

    #[test]
    fn lambda_is_a_monotone_step(k in kind(), eps in 0.01..1.0f64, u in 0.0..1.0f64, v in 0.0..1.0f64) {
        let spec = SmoothingSpec::new(k, eps).unwrap();
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        let (a, b) = (lambda_eps(&spec, lo * eps), lambda_eps(&spec, hi * eps));
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        prop_assert!(b <= a);
        prop_assert_eq!(lambda_eps(&spec, 0.0), 1.0);
        prop_assert_eq!(lambda_eps(&spec, eps), 0.0);
    }

    #[test]
    fn seed_streams_are_stable_and_distinct(master in any::<u64>(), i in 0u64..1000) {
        prop_assert_eq!(stream_seed(master, "sampler"), stream_seed(master, "sampler"));
        prop_assert_ne!(stream_seed(master, "sampler"), stream_seed(master, "da-draws"));
        prop_assert_ne!(child_seed(master, i), child_seed(master, i + 1));
    }

    #[test]
    fn discrete_excess_identity(
        w in 1i128..9,
        f in prop::array::uniform4(-5i64..6),
        k in 1usize..4,
        per in 1usize..4,
    ) {
        let toy = DiscreteToy::four_point(Ratio::new(w, 10), f);
        let e = toy.excess(k * per, k).unwrap();
        prop_assert_eq!(e.measured, e.predicted);
        prop_assert!(e.measured >= Ratio::from_integer(0));
    }
}
