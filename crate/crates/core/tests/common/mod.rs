#![allow(dead_code)]

use dotbench_core::measure::{DiscreteMeasure, MarginalTuple};
use rand::Rng;
use rand_chacha::ChaCha20Rng;

/// Classical two-marginal Sinkhorn in the log domain for
/// `min <C, π> + ε KL(π | a ⊗ b)`. Returns the coupling (row-major) and value.
pub fn log_sinkhorn(a: &[f64], b: &[f64], cost: &[f64], eps: f64) -> (Vec<f64>, f64) {
    let (n, m) = (a.len(), b.len());
    let lse = |v: &mut dyn Iterator<Item = f64>| {
        let xs: Vec<f64> = v.collect();
        let mx = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        mx + xs.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
    };
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    for _ in 0..200_000 {
        for i in 0..n {
            f[i] = -eps * lse(&mut (0..m).map(|j| b[j].ln() + (g[j] - cost[i * m + j]) / eps));
        }
        for j in 0..m {
            g[j] = -eps * lse(&mut (0..n).map(|i| a[i].ln() + (f[i] - cost[i * m + j]) / eps));
        }
        let err: f64 = (0..n)
            .map(|i| {
                let row: f64 = (0..m)
                    .map(|j| a[i] * b[j] * ((f[i] + g[j] - cost[i * m + j]) / eps).exp())
                    .sum();
                (row - a[i]).abs()
            })
            .fold(0.0, f64::max);
        if err < 1e-15 {
            break;
        }
    }
    let mut plan = vec![0.0; n * m];
    let mut value = 0.0;
    for i in 0..n {
        for j in 0..m {
            let p = a[i] * b[j] * ((f[i] + g[j] - cost[i * m + j]) / eps).exp();
            plan[i * m + j] = p;
            if p > 0.0 {
                value += p * cost[i * m + j] + eps * p * (p / (a[i] * b[j])).ln();
            }
        }
    }
    (plan, value)
}

/// Random probability vector bounded away from zero.
pub fn random_weights(n: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| 0.2 + rng.gen::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

pub fn random_measure(n: usize, dim: usize, rng: &mut ChaCha20Rng) -> DiscreteMeasure<f64> {
    let pts = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect())
        .collect();
    DiscreteMeasure::new(pts, random_weights(n, rng)).unwrap()
}

pub fn random_tuple(
    n_marg: usize,
    max_atoms: usize,
    dim: usize,
    p: f64,
    rng: &mut ChaCha20Rng,
) -> MarginalTuple<f64> {
    let ms = (0..n_marg)
        .map(|_| {
            let n = rng.gen_range(2..=max_atoms);
            random_measure(n, dim, rng)
        })
        .collect();
    MarginalTuple::new(ms, p).unwrap()
}

/// Ten uniform points on `{0, 1/9, …, 1}`, twice.
pub fn ten_point_grid_tuple() -> MarginalTuple<f64> {
    let pts: Vec<f64> = (0..10).map(|i| i as f64 / 9.0).collect();
    let m = DiscreteMeasure::uniform_1d(&pts).unwrap();
    MarginalTuple::new(vec![m.clone(), m], 2.0).unwrap()
}
