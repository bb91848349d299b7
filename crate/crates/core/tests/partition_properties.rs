use dotbench_core::complexity::{dyadic_partition, refinement_chain};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dyadic_count_and_diameter(dim in 1usize..=3, eps in 0.02f64..=1.0) {
        let p = dyadic_partition(dim, eps).unwrap();
        let m = ((dim as f64).sqrt() / eps).ceil() as usize;
        prop_assert!(p.per_axis == m || p.per_axis + 1 == m);
        prop_assert!(p.max_diameter() <= eps * (1.0 + 1e-12));
        prop_assert!(p.count() as f64 <= p.count_bound());
    }

    #[test]
    fn every_point_lands_in_a_cell_containing_it(dim in 1usize..=3, eps in 0.05f64..=1.0, x in prop::collection::vec(0.0f64..=1.0, 3)) {
        let p = dyadic_partition(dim, eps).unwrap();
        let x = &x[..dim];
        let k = p.locate(x).unwrap();
        let c = p.cell(k);
        for ((lo, hi), v) in c.lo.iter().zip(&c.hi).zip(x) {
            prop_assert!(lo <= v && v <= hi);
        }
    }

    #[test]
    fn random_chains_nest(dim in 1usize..=2, levels in 1u32..=3, k in 0u32..=2) {
        let eps = 3f64.powi(-((levels + k) as i32));
        let chain = refinement_chain(dim, eps, levels).unwrap();
        prop_assert_eq!(chain.len(), levels as usize);
        for (i, p) in chain.iter().enumerate() {
            let t = levels - i as u32;
            let scale = eps * 3f64.powi(t as i32);
            prop_assert!(p.max_diameter() <= scale * (1.0 + 1e-12));
            prop_assert!(p.count() as f64 <= p.k_const * scale.powi(-(dim as i32)));
        }
        for w in chain.windows(2) {
            let (coarse, fine) = (&w[0], &w[1]);
            let coarse_cells = coarse.cells();
            for f in fine.cells() {
                prop_assert_eq!(coarse_cells.iter().filter(|c| c.contains_cell(&f)).count(), 1);
            }
        }
    }
}
