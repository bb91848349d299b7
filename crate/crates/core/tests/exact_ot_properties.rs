mod common;

use common::{random_measure, random_weights};
use dotbench_core::exact_ot::{solve_transport, wasserstein};
use dotbench_core::measure::{euclidean, stream_rng};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

/// A random plan with marginals `a`, `b`: a positive matrix balanced by
/// alternating row and column scaling, or a north-west-corner plan on shuffled
/// indices.
fn random_plan(a: &[f64], b: &[f64], rng: &mut ChaCha20Rng) -> Vec<f64> {
    let (n, m) = (a.len(), b.len());
    if rng.gen_bool(0.5) {
        let mut k: Vec<f64> = (0..n * m)
            .map(|_| rng.gen::<f64>().powi(3) + 1e-3)
            .collect();
        for _ in 0..5000 {
            for i in 0..n {
                let s: f64 = k[i * m..(i + 1) * m].iter().sum();
                k[i * m..(i + 1) * m]
                    .iter_mut()
                    .for_each(|v| *v *= a[i] / s);
            }
            for j in 0..m {
                let s: f64 = (0..n).map(|i| k[i * m + j]).sum();
                (0..n).for_each(|i| k[i * m + j] *= b[j] / s);
            }
        }
        k
    } else {
        let mut rows: Vec<usize> = (0..n).collect();
        let mut cols: Vec<usize> = (0..m).collect();
        for v in [&mut rows, &mut cols] {
            for i in (1..v.len()).rev() {
                v.swap(i, rng.gen_range(0..=i));
            }
        }
        let mut ra = a.to_vec();
        let mut cb = b.to_vec();
        let mut plan = vec![0.0; n * m];
        let (mut r, mut c) = (0, 0);
        while r < n && c < m {
            let (i, j) = (rows[r], cols[c]);
            let t = ra[i].min(cb[j]);
            plan[i * m + j] += t;
            ra[i] -= t;
            cb[j] -= t;
            if ra[i] <= cb[j] {
                r += 1;
            } else {
                c += 1;
            }
        }
        plan
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn triangle_inequality(seed in any::<u64>(), dim in 1usize..=3, p_idx in 0usize..3) {
        let p = [1.0, 2.0, 3.0][p_idx];
        let mut rng = stream_rng(seed, 0);
        let ms: Vec<_> = (0..3).map(|_| {
            let n = rng.gen_range(1..=8);
            random_measure(n, dim, &mut rng)
        }).collect();
        let w = |i: usize, j: usize| wasserstein(&ms[i], &ms[j], p).unwrap().0;
        prop_assert!(w(0, 2) <= w(0, 1) + w(1, 2) + 1e-9);
        prop_assert!((w(0, 1) - w(1, 0)).abs() <= 1e-9);
    }

    #[test]
    fn optimal_plan_beats_random_feasible_plans(seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 1);
        let (n, m) = (rng.gen_range(1..=9), rng.gen_range(1..=9));
        let a = random_weights(n, &mut rng);
        let b = random_weights(m, &mut rng);
        let cost: Vec<f64> = (0..n * m).map(|_| rng.gen::<f64>()).collect();
        let plan = solve_transport(&a, &b, &cost).unwrap();
        for (i, s) in plan.row_sums().iter().enumerate() {
            prop_assert!((s - a[i]).abs() <= 1e-10);
        }
        for (j, s) in plan.col_sums().iter().enumerate() {
            prop_assert!((s - b[j]).abs() <= 1e-10);
        }
        prop_assert!(plan.mass.iter().all(|&x| x >= 0.0));
        prop_assert!((plan.primal_objective - plan.dual_objective).abs() <= 1e-10);
        for _ in 0..100 {
            let q = random_plan(&a, &b, &mut rng);
            let v: f64 = q.iter().zip(&cost).map(|(x, c)| x * c).sum();
            prop_assert!(plan.primal_objective <= v + 1e-10);
        }
    }

    #[test]
    fn one_dimensional_w1_is_cdf_distance(seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 2);
        let mu = random_measure(rng.gen_range(1..=10), 1, &mut rng);
        let nu = random_measure(rng.gen_range(1..=10), 1, &mut rng);
        let mut grid: Vec<f64> = mu.points().iter().chain(nu.points()).map(|x| x[0]).collect();
        grid.sort_by(f64::total_cmp);
        let cdf = |m: &dotbench_core::DiscreteMeasure, t: f64| -> f64 {
            m.points().iter().zip(m.weights()).filter(|(x, _)| x[0] <= t).map(|(_, w)| w).sum()
        };
        let oracle: f64 = grid.windows(2).map(|g| (cdf(&mu, g[0]) - cdf(&nu, g[0])).abs() * (g[1] - g[0])).sum();
        prop_assert!((wasserstein(&mu, &nu, 1.0).unwrap().0 - oracle).abs() <= 1e-10);
    }
}

#[test]
fn dirac_distance_is_euclidean() {
    let mut rng = stream_rng(3, 0);
    for _ in 0..20 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
        let d = wasserstein(
            &dotbench_core::DiscreteMeasure::dirac(x.clone()),
            &dotbench_core::DiscreteMeasure::dirac(y.clone()),
            2.0,
        )
        .unwrap()
        .0;
        assert!((d - euclidean(&x, &y)).abs() < 1e-12);
    }
}
