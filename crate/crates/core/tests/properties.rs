use std::sync::OnceLock;

use mosco_graphs_core::convergence::stage_resolvent;
use mosco_graphs_core::models::neumann_interval;
use mosco_graphs_core::*;
use proptest::prelude::*;

const POINTS: usize = 128;

fn model() -> &'static SpectralModel {
    static MODEL: OnceLock<SpectralModel> = OnceLock::new();
    MODEL.get_or_init(|| neumann_interval(POINTS, 16, 4).unwrap())
}

fn vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, POINTS)
}

fn index() -> impl Strategy<Value = StageIndex> {
    (0u32..12, 1usize..=16, 1usize..=4, 0u32..6).prop_flat_map(|(n, m, l, k)| {
        prop_oneof![
            Just(StageIndex::semigroup(n)),
            Just(StageIndex::galerkin(n, m)),
            Just(StageIndex::truncated(n, m, l)),
            Just(StageIndex::full(n, m, l, k)),
        ]
    })
}

fn norm(f: &[f64]) -> f64 {
    weighted_norm(f, model().space()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conditioning_is_a_contraction(f in vector(), m in 1usize..6, k in 0u32..5, l in 1usize..=4) {
        let space = model().space();
        let p = level_partition(model().basis(), m, k).unwrap();
        let set = space.exhaustion_set(l).unwrap();
        if let Ok(sf) = condition_on_partition(&f, &p, space, &set) {
            let masked = MeasureVector::new(f.clone()).masked(&set);
            prop_assert!(norm(&expand_step(&sf, space).unwrap()) <= norm(&masked) + 1e-12);
        }
    }

    #[test]
    fn semigroup_contracts(f in vector(), t in 0.0f64..1.0) {
        let pt = model().apply_semigroup(t, &f).unwrap();
        prop_assert!(norm(&pt) <= norm(&f) + 1e-12);
    }

    #[test]
    fn stage_forms_are_bounded(f in vector(), ix in index()) {
        let e = stage_form(model(), model().basis(), ix, &f).unwrap();
        let n2 = norm(&f).powi(2);
        prop_assert!(e >= -1e-12 * n2.max(1.0));
        prop_assert!(e <= ix.rate() * n2 * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn stage_resolvents_contract(f in vector(), ix in index(), lambda in 0.1f64..10.0) {
        let g = stage_generator(model(), model().basis(), ix).unwrap();
        let u = stage_resolvent(&g, lambda, &f).unwrap();
        prop_assert!(lambda * norm(&u) <= norm(&f) + 1e-10);
        // (λ - L) u = f
        let lu = g.apply(&u).unwrap();
        let back: Vec<f64> = u.iter().zip(lu.iter()).map(|(a, b)| lambda * a - b).collect();
        let diff: Vec<f64> = back.iter().zip(&f).map(|(a, b)| a - b).collect();
        prop_assert!(norm(&diff) <= 1e-9 * norm(&f).max(1.0));
    }

    #[test]
    fn exhaustion_masks_grow(f in vector()) {
        let space = model().space();
        let norms: Vec<f64> = (1..=4).map(|l| norm(&sigma_truncate(space, l, &f).unwrap())).collect();
        prop_assert!(norms.windows(2).all(|w| w[0] <= w[1]));
    }
}
