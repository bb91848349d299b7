//! Exact discrete optimal transport.
//!
//! The transportation LP is solved by the primal transportation simplex on a
//! spanning-tree basis (the bipartite specialization of network simplex).
//! Entering cells are chosen by block pricing over the cells in row-major
//! order; after a long run of degenerate pivots the solver switches to Bland's
//! rule (first improving cell, smallest leaving cell) until the next
//! nondegenerate pivot, so ties are resolved deterministically and cycling
//! cannot occur. Optimality is certified by complementary slackness: the
//! returned row/column prices satisfy `u_i + v_j = c_ij` on basic cells and
//! `c_ij − u_i − v_j ≥ −tol` everywhere.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::measure::{euclidean, product_distance_pow, DiscreteMeasure, MarginalTuple};
use crate::scalar::Real;
use crate::solver::Coupling;

/// Default cap on the number of atoms per side.
pub const DEFAULT_OT_LIMIT: usize = 500;

/// An optimal plan together with its dual certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan<T> {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows × cols` masses.
    pub mass: Vec<T>,
    pub row_prices: Vec<T>,
    pub col_prices: Vec<T>,
    /// `Σ c_ij π_ij`.
    pub primal_objective: T,
    /// `Σ a_i u_i + Σ b_j v_j`.
    pub dual_objective: T,
    /// Most negative reduced cost at termination (≥ −tol).
    pub min_reduced_cost: T,
    pub pivots: usize,
}

impl<T: Real> TransportPlan<T> {
    pub fn at(&self, i: usize, j: usize) -> T {
        self.mass[i * self.cols + j]
    }

    pub fn row_sums(&self) -> Vec<T> {
        self.mass
            .chunks(self.cols)
            .map(|r| r.iter().copied().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for r in self.mass.chunks(self.cols) {
            for (o, &x) in out.iter_mut().zip(r) {
                *o += x;
            }
        }
        out
    }
}

struct Basis<T> {
    m: usize,
    n: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<T>,
    /// basic slot for each cell, `usize::MAX` when nonbasic.
    slot_of: Vec<usize>,
    /// basic slots incident to each node (rows `0..m`, columns `m..m+n`).
    adj: Vec<Vec<usize>>,
}

impl<T: Real> Basis<T> {
    fn north_west(a: &[T], b: &[T]) -> Self {
        let (m, n) = (a.len(), b.len());
        let mut ra = a.to_vec();
        let mut rb = b.to_vec();
        let mut basis = Basis {
            m,
            n,
            cells: Vec::with_capacity(m + n - 1),
            flow: Vec::with_capacity(m + n - 1),
            slot_of: vec![usize::MAX; m * n],
            adj: vec![Vec::new(); m + n],
        };
        let (mut i, mut j) = (0, 0);
        loop {
            let x = ra[i].min(rb[j]).max(T::zero());
            ra[i] -= x;
            rb[j] -= x;
            basis.push(i, j, x);
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || ra[i] <= rb[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        // Absorb rounding drift in the last cell.
        let last = basis.flow.len() - 1;
        basis.flow[last] += ra[m - 1].min(rb[n - 1]).max(T::zero());
        basis
    }

    fn push(&mut self, i: usize, j: usize, x: T) {
        let s = self.cells.len();
        self.cells.push((i, j));
        self.flow.push(x);
        self.slot_of[i * self.n + j] = s;
        self.adj[i].push(s);
        self.adj[self.m + j].push(s);
    }

    fn other_end(&self, slot: usize, node: usize) -> usize {
        let (i, j) = self.cells[slot];
        if node == i {
            self.m + j
        } else {
            i
        }
    }

    fn prices(&self, cost: &[T]) -> (Vec<T>, Vec<T>) {
        let mut pot = vec![T::zero(); self.m + self.n];
        let mut seen = vec![false; self.m + self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &s in &self.adj[u] {
                let v = self.other_end(s, u);
                if seen[v] {
                    continue;
                }
                seen[v] = true;
                let (i, j) = self.cells[s];
                let c = cost[i * self.n + j];
                // u_i + v_j = c_ij
                pot[v] = c - pot[u];
                queue.push_back(v);
            }
        }
        let cols = pot.split_off(self.m);
        (pot, cols)
    }

    /// Basic slots on the tree path from `from` to `to`, ordered starting at `to`.
    fn path(&self, from: usize, to: usize) -> Vec<usize> {
        let total = self.m + self.n;
        let mut parent_slot = vec![usize::MAX; total];
        let mut seen = vec![false; total];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(u) = queue.pop_front() {
            if u == to {
                break;
            }
            for &s in &self.adj[u] {
                let v = self.other_end(s, u);
                if !seen[v] {
                    seen[v] = true;
                    parent_slot[v] = s;
                    queue.push_back(v);
                }
            }
        }
        let mut out = Vec::new();
        let mut node = to;
        while node != from {
            let s = parent_slot[node];
            out.push(s);
            node = self.other_end(s, node);
        }
        out
    }

    fn replace(&mut self, leaving: usize, i: usize, j: usize, x: T) {
        let (li, lj) = self.cells[leaving];
        self.slot_of[li * self.n + lj] = usize::MAX;
        self.adj[li].retain(|&s| s != leaving);
        self.adj[self.m + lj].retain(|&s| s != leaving);
        self.cells[leaving] = (i, j);
        self.flow[leaving] = x;
        self.slot_of[i * self.n + j] = leaving;
        self.adj[i].push(leaving);
        self.adj[self.m + j].push(leaving);
    }
}

/// Solves `min Σ c_ij π_ij` over couplings of `a` (rows) and `b` (columns).
pub fn solve_transport<T: Real>(a: &[T], b: &[T], cost: &[T]) -> Result<TransportPlan<T>> {
    let (m, n) = (a.len(), b.len());
    if m == 0 || n == 0 {
        return Err(Error::Validation("empty marginal".into()));
    }
    if cost.len() != m * n {
        return Err(Error::ShapeMismatch(format!(
            "cost has {} entries, expected {}",
            cost.len(),
            m * n
        )));
    }
    let sa: T = a.iter().copied().sum();
    let sb: T = b.iter().copied().sum();
    if (sa - sb).abs() > T::lit(1e-9) * sa.max(T::one()) {
        return Err(Error::Validation(format!("unbalanced masses {sa} vs {sb}")));
    }
    let cmax = cost.iter().fold(T::zero(), |acc, &c| acc.max(c.abs()));
    let tol = T::epsilon() * T::lit(1e3) * cmax.max(T::one());

    let mut basis = Basis::north_west(a, b);
    let total = m * n;
    let block = ((total as f64).sqrt() as usize).max(32).min(total);
    let mut next_start = 0usize;
    let mut degenerate_run = 0usize;
    let bland_after = 2 * (m + n);
    let max_pivots = 50 * total + 10_000;
    let mut pivots = 0usize;

    loop {
        let (u, v) = basis.prices(cost);
        let reduced = |k: usize| cost[k] - u[k / n] - v[k % n];

        let entering = if degenerate_run >= bland_after {
            (0..total).find(|&k| basis.slot_of[k] == usize::MAX && reduced(k) < -tol)
        } else {
            let mut found = None;
            let mut scanned = 0usize;
            let mut k = next_start;
            while scanned < total && found.is_none() {
                let mut best: Option<(usize, T)> = None;
                let end = (scanned + block).min(total);
                while scanned < end {
                    if basis.slot_of[k] == usize::MAX {
                        let r = reduced(k);
                        if r < -tol && best.is_none_or(|(_, br)| r < br) {
                            best = Some((k, r));
                        }
                    }
                    k += 1;
                    if k == total {
                        k = 0;
                    }
                    scanned += 1;
                }
                if let Some((bk, _)) = best {
                    found = Some(bk);
                    next_start = k;
                }
            }
            found
        };

        let Some(k) = entering else {
            let mut min_red = T::infinity();
            for kk in 0..total {
                min_red = min_red.min(reduced(kk));
            }
            let mut mass = vec![T::zero(); total];
            for (s, &(i, j)) in basis.cells.iter().enumerate() {
                mass[i * n + j] = basis.flow[s];
            }
            let primal = mass.iter().zip(cost).map(|(&x, &c)| x * c).sum();
            let dual = a.iter().zip(&u).map(|(&ai, &ui)| ai * ui).sum::<T>()
                + b.iter().zip(&v).map(|(&bj, &vj)| bj * vj).sum::<T>();
            return Ok(TransportPlan {
                rows: m,
                cols: n,
                mass,
                row_prices: u,
                col_prices: v,
                primal_objective: primal,
                dual_objective: dual,
                min_reduced_cost: min_red,
                pivots,
            });
        };

        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Numeric(format!(
                "transportation simplex exceeded {max_pivots} pivots"
            )));
        }
        let (i, j) = (k / n, k % n);
        // Path from column j back to row i; alternate −, +, −, … starting at column j.
        let path = basis.path(i, m + j);
        let mut theta = T::infinity();
        let mut leaving = usize::MAX;
        for (pos, &s) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let x = basis.flow[s];
                let (ci, cj) = basis.cells[s];
                let better = x < theta
                    || (x == theta && {
                        let (li, lj) = basis.cells[leaving];
                        (ci, cj) < (li, lj)
                    });
                if better {
                    theta = x;
                    leaving = s;
                }
            }
        }
        for (pos, &s) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis.flow[s] -= theta;
            } else {
                basis.flow[s] += theta;
            }
        }
        if theta > T::zero() {
            degenerate_run = 0;
        } else {
            degenerate_run += 1;
        }
        basis.replace(leaving, i, j, theta);
    }
}

fn check_limit(what: &str, size: usize, limit: usize) -> Result<()> {
    if size > limit {
        return Err(Error::Capacity {
            what: what.into(),
            requested: size,
            limit,
        });
    }
    Ok(())
}

/// `W_p(μ, ν)` and an optimal plan, with the default size limit.
pub fn wasserstein<T: Real>(
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    p: T,
) -> Result<(T, TransportPlan<T>)> {
    wasserstein_with_limit(mu, nu, p, DEFAULT_OT_LIMIT)
}

pub fn wasserstein_with_limit<T: Real>(
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    p: T,
    limit: usize,
) -> Result<(T, TransportPlan<T>)> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    if !(p >= T::one()) || !p.is_finite() {
        return Err(Error::Config(format!("p must be in [1, inf), got {p}")));
    }
    check_limit("source support", mu.len(), limit)?;
    check_limit("target support", nu.len(), limit)?;
    let mut cost = Vec::with_capacity(mu.len() * nu.len());
    for x in mu.points() {
        for y in nu.points() {
            cost.push(euclidean(x, y).powf(p));
        }
    }
    let plan = solve_transport(mu.weights(), nu.weights(), &cost)?;
    let value = plan.primal_objective.max(T::zero()).powf(p.recip());
    Ok((value, plan))
}

/// `W_p(𝛍; 𝛍̃) = (Σ_i W_p(μ_i, μ̃_i)^p)^{1/p}`.
pub fn marginal_tuple_distance<T: Real>(
    mu: &MarginalTuple<T>,
    mu_tilde: &MarginalTuple<T>,
    p: T,
) -> Result<T> {
    Ok(per_marginal_plans(mu, mu_tilde, p)?
        .iter()
        .map(|(w, _)| w.powf(p))
        .sum::<T>()
        .powf(p.recip()))
}

/// Per-marginal optimal `W_p` values and plans.
pub fn per_marginal_plans<T: Real>(
    mu: &MarginalTuple<T>,
    mu_tilde: &MarginalTuple<T>,
    p: T,
) -> Result<Vec<(T, TransportPlan<T>)>> {
    if mu.n_marginals() != mu_tilde.n_marginals() {
        return Err(Error::ShapeMismatch(format!(
            "{} marginals vs {}",
            mu.n_marginals(),
            mu_tilde.n_marginals()
        )));
    }
    mu.marginals()
        .iter()
        .zip(mu_tilde.marginals())
        .map(|(a, b)| wasserstein(a, b, p))
        .collect()
}

/// Exact `W_q(π, π̃)` between couplings viewed as measures on the product space
/// with metric `d_{X,q}`.
pub fn coupling_distance<T: Real>(
    pi: &Coupling<T>,
    mu: &MarginalTuple<T>,
    pi_tilde: &Coupling<T>,
    mu_tilde: &MarginalTuple<T>,
    q: T,
) -> Result<T> {
    coupling_distance_with_limit(pi, mu, pi_tilde, mu_tilde, q, DEFAULT_OT_LIMIT)
}

pub fn coupling_distance_with_limit<T: Real>(
    pi: &Coupling<T>,
    mu: &MarginalTuple<T>,
    pi_tilde: &Coupling<T>,
    mu_tilde: &MarginalTuple<T>,
    q: T,
    limit: usize,
) -> Result<T> {
    if mu.dims() != mu_tilde.dims() {
        return Err(Error::ShapeMismatch(
            "couplings live on product spaces of different shape".into(),
        ));
    }
    if pi.shape() != mu.shape().shape() || pi_tilde.shape() != mu_tilde.shape().shape() {
        return Err(Error::ShapeMismatch(
            "coupling does not match its marginals".into(),
        ));
    }
    let support = |c: &Coupling<T>, t: &MarginalTuple<T>| -> (Vec<Vec<T>>, Vec<T>) {
        let sh = t.shape();
        let mut pts = Vec::new();
        let mut w = Vec::new();
        for (flat, &m) in c.mass().iter().enumerate() {
            if m > T::zero() {
                pts.push(t.product_atom(&sh.unravel(flat)));
                w.push(m);
            }
        }
        let s: T = w.iter().copied().sum();
        w.iter_mut().for_each(|x| *x /= s);
        (pts, w)
    };
    let (xs, a) = support(pi, mu);
    let (ys, b) = support(pi_tilde, mu_tilde);
    check_limit("coupling support", xs.len(), limit)?;
    check_limit("coupling support", ys.len(), limit)?;
    let dims = mu.dims();
    let mut cost = Vec::with_capacity(xs.len() * ys.len());
    for x in &xs {
        for y in &ys {
            cost.push(product_distance_pow(&dims, x, y, q));
        }
    }
    let plan = solve_transport(&a, &b, &cost)?;
    Ok(plan.primal_objective.max(T::zero()).powf(q.recip()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for k in 0..=p.len() {
                let mut q = p.clone();
                q.insert(k, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn identical_measures_give_diagonal() {
        let mu =
            DiscreteMeasure::<f64>::uniform(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.3, 2.0]])
                .unwrap();
        let (w, plan) = wasserstein(&mu, &mu, 2.0).unwrap();
        assert!(w.abs() < 1e-12);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 / 3.0 } else { 0.0 };
                assert!((plan.at(i, j) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn diracs() {
        let a = DiscreteMeasure::<f64>::dirac(vec![0.0, 0.0]);
        let b = DiscreteMeasure::dirac(vec![3.0, 4.0]);
        let (w, plan) = wasserstein(&a, &b, 1.5).unwrap();
        assert!((w - 5.0).abs() < 1e-12);
        assert_eq!(plan.mass, vec![1.0]);
    }

    #[test]
    fn five_by_five_matches_permutation_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let pts = |rng: &mut ChaCha8Rng| {
                (0..5)
                    .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()])
                    .collect::<Vec<_>>()
            };
            let mu = DiscreteMeasure::uniform(pts(&mut rng)).unwrap();
            let nu = DiscreteMeasure::uniform(pts(&mut rng)).unwrap();
            let (w, plan) = wasserstein(&mu, &nu, 2.0).unwrap();
            let best = permutations(5)
                .iter()
                .map(|perm| {
                    perm.iter()
                        .enumerate()
                        .map(|(i, &j)| euclidean(&mu.points()[i], &nu.points()[j]).powi(2) / 5.0)
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            assert!((w * w - best).abs() <= 1e-9 * best.max(1e-12));
            assert!((plan.primal_objective - plan.dual_objective).abs() < 1e-12);
        }
    }

    #[test]
    fn tuple_distance_of_translates() {
        let m1 = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 0.5]]).unwrap();
        let m2 = DiscreteMeasure::uniform_1d(&[0.0, 0.2, 0.9]).unwrap();
        let t = MarginalTuple::new(vec![m1.clone(), m2.clone()], 2.0).unwrap();
        let tt = MarginalTuple::new(
            vec![
                m1.translate(&[0.3, -0.4]).unwrap(),
                m2.translate(&[1.2]).unwrap(),
            ],
            2.0,
        )
        .unwrap();
        let d = marginal_tuple_distance(&t, &tt, 2.0).unwrap();
        assert!((d - (0.25f64 + 1.44).sqrt()).abs() < 1e-12);
        assert!(marginal_tuple_distance(&t, &t, 2.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn dimension_and_size_errors() {
        let a = DiscreteMeasure::dirac(vec![0.0]);
        let b = DiscreteMeasure::dirac(vec![0.0, 1.0]);
        assert!(matches!(
            wasserstein(&a, &b, 2.0),
            Err(Error::DimensionMismatch { .. })
        ));
        let big =
            DiscreteMeasure::uniform_1d(&(0..10).map(|k| k as f64).collect::<Vec<_>>()).unwrap();
        assert!(matches!(
            wasserstein_with_limit(&big, &big, 1.0, 5),
            Err(Error::Capacity { .. })
        ));
    }
}
