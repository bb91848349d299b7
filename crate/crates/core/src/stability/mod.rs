//! Shadows of couplings, the weighted strong-convexity certificate, and the
//! Hölder stability and value-continuity experiments.

mod perturb;

pub use perturb::{perturb, perturb_to_level, PerturbSpec, Perturbed};

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::exact_ot::{coupling_distance, marginal_tuple_distance, per_marginal_plans};
use crate::measure::{product_distance_pow, MarginalTuple, ProductShape};
use crate::scalar::Real;
use crate::solver::{objective, solve, Coupling, ProblemSpec, SolverOptions};
use crate::stats::log_log_fit;

/// A shadow together with its displacement and divergence bookkeeping.
#[derive(Debug, Clone)]
pub struct ShadowResult<T> {
    pub shadow: Coupling<T>,
    /// `(Σ_x π(x) Σ_y K(x, y) d_{X,p}(x, y)^p)^{1/p}`.
    pub transport_cost: T,
    /// `W_p(𝛍; 𝛍̃)`.
    pub marginal_distance: T,
    /// `D_φ(π, P)`.
    pub divergence_before: T,
    /// `D_φ(π̃, P̃)`.
    pub divergence_after: T,
}

/// Contracts axis `axis` of a row-major tensor with a row-stochastic kernel
/// `k` of shape `shape[axis] × out`.
fn mode_product<T: Real>(
    tensor: &[T],
    shape: &[usize],
    axis: usize,
    k: &[T],
    out: usize,
) -> Vec<T> {
    let n = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut res = vec![T::zero(); outer * out * inner];
    for o in 0..outer {
        for a in 0..n {
            let src = &tensor[(o * n + a) * inner..(o * n + a + 1) * inner];
            for b in 0..out {
                let kab = k[a * out + b];
                if kab == T::zero() {
                    continue;
                }
                let dst = &mut res[(o * out + b) * inner..(o * out + b + 1) * inner];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += kab * s;
                }
            }
        }
    }
    res
}

/// Shadow of `pi ∈ Π(𝛍)` on `𝛍̃`: push `π` through the product of the
/// optimal `W_p` kernels `K_i = θ_i / μ_i`.
pub fn shadow<T: Real>(
    pi: &Coupling<T>,
    mu: &MarginalTuple<T>,
    mu_tilde: &MarginalTuple<T>,
    p: T,
    divergence: &Divergence<T>,
) -> Result<ShadowResult<T>> {
    if pi.shape() != mu.shape().shape() {
        return Err(Error::ShapeMismatch(
            "coupling does not match its marginals".into(),
        ));
    }
    let plans = per_marginal_plans(mu, mu_tilde, p)?;
    let mut shape = mu.shape().shape().to_vec();
    let mut mass = pi.mass().to_vec();
    let mut cost_p = T::zero();
    for (i, (_, plan)) in plans.iter().enumerate() {
        let src = mu.marginal(i);
        let dst = mu_tilde.marginal(i);
        let pi_i = pi.marginal(i);
        let mut kernel = plan.mass.clone();
        for (a, &w) in src.weights().iter().enumerate() {
            if !(w > T::zero()) {
                return Err(Error::Validation(format!(
                    "atom {a} of marginal {i} has no mass"
                )));
            }
            for b in 0..plan.cols {
                kernel[a * plan.cols + b] /= w;
            }
            let moved: T = (0..plan.cols)
                .map(|b| {
                    kernel[a * plan.cols + b]
                        * crate::measure::euclidean(&src.points()[a], &dst.points()[b]).powf(p)
                })
                .sum();
            cost_p += pi_i[a] * moved;
        }
        mass = mode_product(&mass, &shape, i, &kernel, plan.cols);
        shape[i] = plan.cols;
    }
    let marginal_distance = plans
        .iter()
        .map(|(w, _)| w.powf(p))
        .sum::<T>()
        .powf(p.recip());
    let w = mu.product_weights()?;
    let w_tilde = mu_tilde.product_weights()?;
    let shadow = Coupling::from_mass(mass, &w_tilde, ProductShape::new(shape))?;
    Ok(ShadowResult {
        divergence_before: pi.divergence(divergence, &w),
        divergence_after: shadow.divergence(divergence, &w_tilde),
        shadow,
        transport_cost: cost_p.max(T::zero()).powf(p.recip()),
        marginal_distance,
    })
}

/// Weight `ρ(x) = d_{X,p}(x_0, x)^q` with `x_0` a product atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoWeight {
    /// Multi-index of `x_0`; the first product atom when absent.
    #[serde(default)]
    pub base: Option<Vec<usize>>,
    pub q: f64,
}

impl RhoWeight {
    pub fn first_atom(q: f64) -> Self {
        Self { base: None, q }
    }

    pub fn tensor<T: Real>(&self, tuple: &MarginalTuple<T>) -> Result<Vec<T>> {
        let shape = tuple.shape();
        let base = self.base.clone().unwrap_or_else(|| vec![0; shape.ndim()]);
        if base.len() != shape.ndim() || base.iter().zip(shape.shape()).any(|(&b, &s)| b >= s) {
            return Err(Error::Config(format!(
                "weight base point {base:?} is not a product atom"
            )));
        }
        let x0 = tuple.product_atom(&base);
        let dims = tuple.dims();
        let p = tuple.p();
        let expo = T::lit(self.q) / p;
        Ok((0..shape.len())
            .map(|flat| {
                let x = tuple.product_atom(&shape.unravel(flat));
                product_distance_pow(&dims, &x0, &x, p).powf(expo)
            })
            .collect())
    }
}

/// Both sides of the weighted strong-convexity inequality, on the rescaled
/// (`ε = 1`) objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrongConvexityCheck {
    /// `(Σ ρ |π* − π|)²`.
    pub lhs: f64,
    /// `4 max(λ1, λ2) · Σ ρ² (P + π* + π) · (F(π) − F(π*)) / ε`.
    pub rhs: f64,
    /// Absolute tolerance applied to the comparison.
    pub tolerance: f64,
    pub ok: bool,
}

impl StrongConvexityCheck {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Feasibility tolerance on the marginals of a candidate coupling.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// Relative tolerance of the strong-convexity comparison.
pub const CERTIFICATE_REL_TOL: f64 = 1e-9;

/// Certifies the strong-convexity inequality at a precomputed optimizer.
pub fn strong_convexity_check_at<T: Real>(
    prob: &ProblemSpec<T>,
    pi_star: &Coupling<T>,
    pi: &Coupling<T>,
    weight: &RhoWeight,
) -> Result<StrongConvexityCheck> {
    let tuple = prob.marginals();
    for (name, c) in [("candidate", pi), ("optimizer", pi_star)] {
        let err = c.marginal_error(tuple)?;
        if !(err <= T::lit(FEASIBILITY_TOL)) {
            return Err(Error::Validation(format!(
                "{name} coupling violates the marginals by {err:e}"
            )));
        }
    }
    let (l1, l2) = prob.divergence().convexity_params()?;
    let big_c = T::lit(4.0) * l1.max(l2);
    let rho = weight.tensor(tuple)?;
    let w = tuple.product_weights()?;
    let tv: T = rho
        .iter()
        .zip(pi_star.mass().iter().zip(pi.mass()))
        .map(|(&r, (&a, &b))| r * (a - b).abs())
        .sum();
    let moment: T = rho
        .iter()
        .zip(w.iter().zip(pi_star.mass().iter().zip(pi.mass())))
        .map(|(&r, (&pw, (&a, &b)))| r * r * (pw + a + b))
        .sum();
    let eps = prob.epsilon();
    let f_pi = objective(pi, prob)?;
    let f_star = objective(pi_star, prob)?;
    let lhs = tv * tv;
    let rhs = big_c * moment * (f_pi - f_star) / eps;
    let scale = T::one() + big_c * moment * (f_pi.abs() + f_star.abs()) / eps;
    let tolerance = T::lit(CERTIFICATE_REL_TOL) * scale;
    Ok(StrongConvexityCheck {
        lhs: lhs.to_f64_lossy(),
        rhs: rhs.to_f64_lossy(),
        tolerance: tolerance.to_f64_lossy(),
        ok: lhs <= rhs + tolerance,
    })
}

/// Solves for `π*` and certifies the inequality for `pi`.
pub fn strong_convexity_check<T: Real>(
    prob: &ProblemSpec<T>,
    opts: &SolverOptions,
    pi: &Coupling<T>,
    weight: &RhoWeight,
) -> Result<StrongConvexityCheck> {
    let sol = solve(prob, opts)?;
    strong_convexity_check_at(prob, &sol.coupling, pi, weight)
}

/// Iterative proportional fitting of a positive tensor onto `Π(𝛍)`.
pub fn ipf_project<T: Real>(
    mut mass: Vec<T>,
    tuple: &MarginalTuple<T>,
    tol: T,
    max_iters: usize,
) -> Result<Coupling<T>> {
    let shape = tuple.shape();
    if mass.len() != shape.len() {
        return Err(Error::ShapeMismatch(
            "tensor does not match product support".into(),
        ));
    }
    for it in 0..=max_iters {
        let mut err = T::zero();
        for (i, m) in tuple.marginals().iter().enumerate() {
            let cur = shape.marginalize(&mass, i);
            for (c, &t) in cur.iter().zip(m.weights()) {
                err = err.max((*c - t).abs());
            }
        }
        if err <= tol {
            let w = tuple.product_weights()?;
            return Coupling::from_mass(mass, &w, shape);
        }
        if it == max_iters {
            return Err(Error::IterationLimit {
                iterations: it,
                residual: err.to_f64_lossy(),
            });
        }
        for (i, m) in tuple.marginals().iter().enumerate() {
            let cur = shape.marginalize(&mass, i);
            let fac: Vec<T> = cur
                .iter()
                .zip(m.weights())
                .map(|(&c, &t)| if c > T::zero() { t / c } else { T::zero() })
                .collect();
            let n = shape.shape()[i];
            let s = shape.strides()[i];
            for (flat, v) in mass.iter_mut().enumerate() {
                *v *= fac[(flat / s) % n];
            }
        }
    }
    unreachable!()
}

/// How random feasible couplings are drawn around an optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibleSampler {
    /// `(1 − t) π* + t Q` with `Q` an IPF-projected random positive tensor and
    /// `t` uniform on `(0, 1]`.
    Mixture,
    /// `π*` multiplied entrywise by `exp(σ Z)`, `Z` uniform on `[−1, 1]`, then
    /// IPF-projected (keeps the support of `π*`).
    Multiplicative { sigma: f64 },
}

/// Draws a random coupling in `Π(𝛍)`.
pub fn random_feasible<T: Real>(
    tuple: &MarginalTuple<T>,
    pi_star: &Coupling<T>,
    sampler: FeasibleSampler,
    rng: &mut ChaCha20Rng,
) -> Result<Coupling<T>> {
    let tol = T::lit(1e-12);
    let w = tuple.product_weights()?;
    match sampler {
        FeasibleSampler::Mixture => {
            let raw: Vec<T> = w
                .iter()
                .map(|&p| p * T::lit(-(1.0 - rng.gen::<f64>()).ln()))
                .collect();
            let q = ipf_project(raw, tuple, tol, 100_000)?;
            let t = T::lit(1.0 - rng.gen::<f64>());
            let mass: Vec<T> = pi_star
                .mass()
                .iter()
                .zip(q.mass())
                .map(|(&a, &b)| (T::one() - t) * a + t * b)
                .collect();
            ipf_project(mass, tuple, tol, 100_000)
        }
        FeasibleSampler::Multiplicative { sigma } => {
            let mass: Vec<T> = pi_star
                .mass()
                .iter()
                .map(|&m| m * T::lit((sigma * (2.0 * rng.gen::<f64>() - 1.0)).exp()))
                .collect();
            ipf_project(mass, tuple, tol, 100_000)
        }
    }
}

/// One level of the stability experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub level: usize,
    pub target: f64,
    /// Achieved `Δ = W_p(𝛍; 𝛍̃)`.
    pub delta: f64,
    /// `W_q(π*, π̃*)`.
    pub wq: f64,
    /// `(W_q − N^{1/q − 1/p} Δ)_+ / (L Δ)^{1/(2q)}`.
    pub ratio: f64,
    pub value: f64,
    pub value_tilde: f64,
    pub iterations: usize,
    pub iterations_tilde: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub p: f64,
    pub q: f64,
    pub n_marginals: usize,
    pub lipschitz: f64,
    pub rows: Vec<StabilityRow>,
    /// Least-squares slope of `log W_q` against `log Δ` over rows with `Δ > 0`.
    pub slope: Option<f64>,
    /// `max r / min r` over rows with `Δ > 0`.
    pub ratio_spread: Option<f64>,
}

impl StabilityReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "level,target,delta,wq,ratio,value,value_tilde,iterations,iterations_tilde\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{},{}\n",
                r.level,
                r.target,
                r.delta,
                r.wq,
                r.ratio,
                r.value,
                r.value_tilde,
                r.iterations,
                r.iterations_tilde
            ));
        }
        s
    }
}

/// Hölder stability experiment: for each target `Δ` perturbs the marginals to
/// that distance, re-solves, and measures `W_q(π*, π̃*)`. Levels run in
/// parallel.
pub fn stability_experiment<T: Real>(
    prob: &ProblemSpec<T>,
    opts: &SolverOptions,
    perturbation: &PerturbSpec,
    q: T,
    levels: &[T],
    seed: u64,
) -> Result<StabilityReport> {
    let tuple = prob.marginals();
    let p = tuple.p();
    if !(q >= T::one() && q <= p) {
        return Err(Error::Config(format!("q must lie in [1, p], got {q}")));
    }
    let n = tuple.n_marginals();
    let base = solve(prob, opts)?;
    let agg = T::from_count(n).powf(q.recip() - p.recip());
    let rows: Vec<(StabilityRow, T)> = levels
        .par_iter()
        .enumerate()
        .map(|(level, &target)| -> Result<(StabilityRow, T)> {
            let run = || -> Result<(StabilityRow, T)> {
                let pert = perturb_to_level(tuple, perturbation, target, seed)?;
                let tilde = prob.rebuild_on(pert.marginals.clone())?;
                let sol = solve(&tilde, opts)?;
                let wq =
                    coupling_distance(&base.coupling, tuple, &sol.coupling, &pert.marginals, q)?;
                let lip = lipschitz_for(prob, &pert.marginals)?;
                let delta = pert.delta;
                let ratio = if delta > T::zero() {
                    (wq - agg * delta).max(T::zero())
                        / (lip * delta).powf((T::lit(2.0) * q).recip())
                } else {
                    T::zero()
                };
                Ok((
                    StabilityRow {
                        level,
                        target: target.to_f64_lossy(),
                        delta: delta.to_f64_lossy(),
                        wq: wq.to_f64_lossy(),
                        ratio: ratio.to_f64_lossy(),
                        value: base.primal_value.to_f64_lossy(),
                        value_tilde: sol.primal_value.to_f64_lossy(),
                        iterations: base.iterations,
                        iterations_tilde: sol.iterations,
                    },
                    lip,
                ))
            };
            run().map_err(|e| e.at_level(level))
        })
        .collect::<Result<_>>()?;
    let lipschitz = rows
        .iter()
        .fold(T::zero(), |m, (_, l)| m.max(*l))
        .to_f64_lossy();
    let rows: Vec<StabilityRow> = rows.into_iter().map(|(r, _)| r).collect();
    let pos: Vec<&StabilityRow> = rows
        .iter()
        .filter(|r| r.delta > 0.0 && r.wq > 0.0)
        .collect();
    let slope = if pos.len() >= 2 {
        let x: Vec<f64> = pos.iter().map(|r| r.delta).collect();
        let y: Vec<f64> = pos.iter().map(|r| r.wq).collect();
        log_log_fit(&x, &y).ok().map(|f| f.slope)
    } else {
        None
    };
    let ratios: Vec<f64> = rows
        .iter()
        .filter(|r| r.delta > 0.0)
        .map(|r| r.ratio)
        .collect();
    let ratio_spread = if ratios.is_empty() {
        None
    } else {
        let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        Some(if min > 0.0 { max / min } else { f64::INFINITY })
    };
    Ok(StabilityReport {
        p: p.to_f64_lossy(),
        q: q.to_f64_lossy(),
        n_marginals: n,
        lipschitz,
        rows,
        slope,
        ratio_spread,
    })
}

/// Lipschitz constant of the cost on the hull of both supports; explicit
/// tensors keep their user-supplied constant.
fn lipschitz_for<T: Real>(prob: &ProblemSpec<T>, other: &MarginalTuple<T>) -> Result<T> {
    match prob.cost().kind() {
        crate::solver::CostKind::ExplicitTensor => Ok(prob.cost().lipschitz()),
        kind => kind.lipschitz(&[prob.marginals(), other], prob.marginals().p()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValueContinuity {
    /// `|OT_φ(𝛍) − OT_φ(𝛍̃)|`.
    pub value_gap: f64,
    pub delta: f64,
    pub lipschitz: f64,
    /// `L · Δ`.
    pub bound: f64,
    pub ok: bool,
}

/// Relative slack allowed by the value-continuity comparison.
pub const CONTINUITY_REL_TOL: f64 = 1e-6;

/// Solves both problems and compares the value gap with `L · W_p(𝛍; 𝛍̃)`.
pub fn value_continuity_check<T: Real>(
    prob: &ProblemSpec<T>,
    mu_tilde: &MarginalTuple<T>,
    opts: &SolverOptions,
) -> Result<ValueContinuity> {
    let tilde = prob.rebuild_on(mu_tilde.clone())?;
    let a = solve(prob, opts)?;
    let b = solve(&tilde, opts)?;
    let delta = marginal_tuple_distance(prob.marginals(), mu_tilde, prob.marginals().p())?;
    let lip = lipschitz_for(prob, mu_tilde)?;
    let gap = (a.primal_value - b.primal_value).abs();
    let bound = lip * delta;
    Ok(ValueContinuity {
        value_gap: gap.to_f64_lossy(),
        delta: delta.to_f64_lossy(),
        lipschitz: lip.to_f64_lossy(),
        bound: bound.to_f64_lossy(),
        ok: gap <= bound * T::lit(1.0 + CONTINUITY_REL_TOL),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{stream_rng, DiscreteMeasure};
    use crate::solver::CostKind;

    fn grid(n: usize) -> DiscreteMeasure<f64> {
        let pts: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        DiscreteMeasure::uniform_1d(&pts).unwrap()
    }

    #[test]
    fn mode_product_identity() {
        let t = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let id = vec![1.0, 0.0, 0.0, 1.0];
        assert_eq!(mode_product(&t, &[3, 2], 1, &id, 2), t);
        let id3 = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(mode_product(&t, &[3, 2], 0, &id3, 3), t);
    }

    #[test]
    fn shadow_on_same_marginals_is_identity() {
        let m = grid(4);
        let t = MarginalTuple::new(vec![m.clone(), m], 2.0).unwrap();
        let prob = ProblemSpec::builtin(
            t.clone(),
            CostKind::SqEuclideanSum,
            Divergence::entropic(),
            0.1,
        )
        .unwrap();
        let s = solve(&prob, &SolverOptions::default()).unwrap();
        let sh = shadow(&s.coupling, &t, &t, 2.0, prob.divergence()).unwrap();
        for (a, b) in sh.shadow.mass().iter().zip(s.coupling.mass()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(sh.transport_cost.abs() < 1e-12);
    }

    #[test]
    fn ipf_hits_marginals() {
        let m = grid(5);
        let t = MarginalTuple::new(vec![m.clone(), m.clone(), m], 2.0).unwrap();
        let mut rng = stream_rng(1, 0);
        let raw: Vec<f64> = (0..125).map(|_| rng.gen::<f64>() + 0.01).collect();
        let c = ipf_project(raw, &t, 1e-12, 10_000).unwrap();
        assert!(c.marginal_error(&t).unwrap() <= 1e-12);
    }

    #[test]
    fn optimizer_itself_passes_with_zero_sides() {
        let m = grid(5);
        let t = MarginalTuple::new(vec![m.clone(), m], 2.0).unwrap();
        let prob = ProblemSpec::builtin(
            t,
            CostKind::SqEuclideanSum,
            Divergence::alpha(1.5).unwrap(),
            0.2,
        )
        .unwrap();
        let s = solve(&prob, &SolverOptions::default()).unwrap();
        let c =
            strong_convexity_check_at(&prob, &s.coupling, &s.coupling, &RhoWeight::first_atom(2.0))
                .unwrap();
        assert_eq!(c.lhs, 0.0);
        assert_eq!(c.rhs, 0.0);
        assert!(c.ok);
    }

    #[test]
    fn infeasible_candidate_rejected() {
        let m = grid(3);
        let t = MarginalTuple::new(vec![m.clone(), m], 2.0).unwrap();
        let prob = ProblemSpec::builtin(
            t.clone(),
            CostKind::SqEuclideanSum,
            Divergence::entropic(),
            1.0,
        )
        .unwrap();
        let s = solve(&prob, &SolverOptions::default()).unwrap();
        let w = t.product_weights().unwrap();
        let mut bad = s.coupling.mass().to_vec();
        bad[0] += 0.01;
        let bad = Coupling::from_mass(bad, &w, t.shape()).unwrap();
        let r = strong_convexity_check_at(&prob, &s.coupling, &bad, &RhoWeight::first_atom(1.0));
        assert!(matches!(r, Err(Error::Validation(_))));
    }
}
