//! Generalized Sinkhorn: block dual ascent on the potentials of the
//! divergence-regularized multi-marginal problem.
//!
//! The cost is rescaled to `c̃ = c/ε` so the inner problem always has unit
//! regularization weight. A round updates every marginal in order `0..N`; for
//! marginal `i` each atom `x_i` receives the unique root `v` of
//! `Σ_k P^{−i}_k ψ'(v + h^{−i}_k − c̃(x_i, k)) = 1`.

mod cost;
mod coupling;
mod root;

pub use cost::{CostKind, CostSpec};
pub use coupling::Coupling;
pub use root::{bracketed_root, entropic_root};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::{Divergence, DivergenceKind};
use crate::error::{Error, Result};
use crate::measure::{euclidean, MarginalTuple, ProductShape, DEFAULT_PRODUCT_CAPACITY};
use crate::scalar::Real;

/// Atom update order within one marginal. The per-atom equations of a single
/// marginal do not couple, so both modes produce identical iterates; `Jacobi`
/// solves them in parallel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sweep {
    #[default]
    GaussSeidel,
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Bound on the max first-order residual.
    pub tol: f64,
    /// Bound on `|F − 1|` for each scalar root.
    pub root_tol: f64,
    pub max_iters: usize,
    pub sweep: Sweep,
    /// Cross-check every entropic closed-form update against the generic
    /// bracketed root finder.
    #[serde(skip)]
    pub check_closed_form: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            root_tol: 1e-12,
            max_iters: 10_000,
            sweep: Sweep::GaussSeidel,
            check_closed_form: false,
        }
    }
}

/// A DOT instance: marginals, cost, divergence and regularization weight.
#[derive(Debug, Clone)]
pub struct ProblemSpec<T> {
    marginals: MarginalTuple<T>,
    cost: CostSpec<T>,
    divergence: Divergence<T>,
    epsilon: T,
}

impl<T: Real> ProblemSpec<T> {
    pub fn new(
        marginals: MarginalTuple<T>,
        cost: CostSpec<T>,
        divergence: Divergence<T>,
        epsilon: T,
    ) -> Result<Self> {
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return Err(Error::Config(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        let size = marginals.checked_support_size(DEFAULT_PRODUCT_CAPACITY)?;
        if cost.tensor().len() != size {
            return Err(Error::ShapeMismatch(format!(
                "cost tensor has {} entries, product support has {size}",
                cost.tensor().len()
            )));
        }
        if cost.tensor().iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("cost tensor must be finite".into()));
        }
        Ok(Self {
            marginals,
            cost,
            divergence,
            epsilon,
        })
    }

    /// Built-in cost evaluated on `marginals`.
    pub fn builtin(
        marginals: MarginalTuple<T>,
        kind: CostKind,
        divergence: Divergence<T>,
        epsilon: T,
    ) -> Result<Self> {
        let cost = CostSpec::builtin(kind, &marginals)?;
        Self::new(marginals, cost, divergence, epsilon)
    }

    /// Same cost family, divergence and ε on other marginals.
    pub fn rebuild_on(&self, marginals: MarginalTuple<T>) -> Result<Self> {
        let cost = self.cost.rebuild_on(&marginals)?;
        Self::new(marginals, cost, self.divergence, self.epsilon)
    }

    pub fn with_epsilon(&self, epsilon: T) -> Result<Self> {
        Self::new(
            self.marginals.clone(),
            self.cost.clone(),
            self.divergence,
            epsilon,
        )
    }

    pub fn with_divergence(&self, divergence: Divergence<T>) -> Result<Self> {
        Self::new(
            self.marginals.clone(),
            self.cost.clone(),
            divergence,
            self.epsilon,
        )
    }

    pub fn marginals(&self) -> &MarginalTuple<T> {
        &self.marginals
    }

    pub fn cost(&self) -> &CostSpec<T> {
        &self.cost
    }

    pub fn divergence(&self) -> &Divergence<T> {
        &self.divergence
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }
}

/// Per-marginal potentials, stored for the rescaled (`ε = 1`) problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPotentials<T> {
    epsilon: T,
    rescaled: Vec<Vec<T>>,
}

impl<T: Real> DualPotentials<T> {
    pub fn from_rescaled(epsilon: T, rescaled: Vec<Vec<T>>) -> Self {
        Self { epsilon, rescaled }
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn rescaled(&self) -> &[Vec<T>] {
        &self.rescaled
    }

    /// `h_i = ε h̃_i`.
    pub fn original(&self) -> Vec<Vec<T>> {
        self.rescaled
            .iter()
            .map(|h| h.iter().map(|&v| v * self.epsilon).collect())
            .collect()
    }

    /// `∫ h_i dμ_i` in original units, per marginal.
    pub fn integrals(&self, tuple: &MarginalTuple<T>) -> Vec<T> {
        self.original()
            .iter()
            .zip(tuple.marginals())
            .map(|(h, m)| h.iter().zip(m.weights()).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// Shifts the potentials by constants summing to zero so that every
    /// `∫ h_i dμ_i` takes the same value; `h⊕` is unchanged.
    pub fn normalize(&mut self, tuple: &MarginalTuple<T>) {
        let means: Vec<T> = self
            .rescaled
            .iter()
            .zip(tuple.marginals())
            .map(|(h, m)| h.iter().zip(m.weights()).map(|(&a, &b)| a * b).sum())
            .collect();
        let avg = means.iter().copied().sum::<T>() / T::from_count(means.len());
        for (h, &m) in self.rescaled.iter_mut().zip(&means) {
            let shift = m - avg;
            h.iter_mut().for_each(|v| *v -= shift);
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub potentials: DualPotentials<T>,
    pub coupling: Coupling<T>,
    /// `∫ c dπ + ε D_φ(π, P)`.
    pub primal_value: T,
    /// `ε ∫ h⊕ − ψ(h⊕ − c̃) dP`.
    pub dual_value: T,
    pub gap: T,
    pub iterations: usize,
    /// Max first-order residual over all atoms of all marginals.
    pub residual: T,
}

impl<T: Real> Solution<T> {
    pub fn relative_gap(&self) -> T {
        self.gap.abs() / T::one().max(self.primal_value.abs())
    }
}

struct Axis<T> {
    offsets: Vec<usize>,
    weights: Vec<T>,
    stride: usize,
}

/// Stateful solver; [`solve`] drives it to convergence. Exposed so callers can
/// observe intermediate dual values.
pub struct Solver<'a, T> {
    prob: &'a ProblemSpec<T>,
    opts: SolverOptions,
    shape: ProductShape,
    scaled_cost: Vec<T>,
    axes: Vec<Axis<T>>,
    h: Vec<Vec<T>>,
    iterations: usize,
}

impl<'a, T: Real> Solver<'a, T> {
    /// Starts from `h_i ≡ x0/N`, which is exact for a constant cost.
    pub fn new(prob: &'a ProblemSpec<T>, opts: SolverOptions) -> Result<Self> {
        let n = prob.marginals.n_marginals();
        let start = prob.divergence.x0() / T::from_count(n);
        let h = prob
            .marginals
            .marginals()
            .iter()
            .map(|m| vec![start; m.len()])
            .collect();
        Self::with_rescaled(prob, opts, h)
    }

    pub fn with_potentials(
        prob: &'a ProblemSpec<T>,
        opts: SolverOptions,
        init: &DualPotentials<T>,
    ) -> Result<Self> {
        let scale = init.epsilon / prob.epsilon;
        let h = init
            .rescaled
            .iter()
            .map(|v| v.iter().map(|&x| x * scale).collect())
            .collect();
        Self::with_rescaled(prob, opts, h)
    }

    fn with_rescaled(
        prob: &'a ProblemSpec<T>,
        opts: SolverOptions,
        h: Vec<Vec<T>>,
    ) -> Result<Self> {
        if !(opts.tol > 0.0) || !(opts.root_tol > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        let tuple = &prob.marginals;
        let shape = tuple.shape();
        if h.len() != tuple.n_marginals() || h.iter().zip(shape.shape()).any(|(v, &s)| v.len() != s)
        {
            return Err(Error::ShapeMismatch(
                "initial potentials do not match marginals".into(),
            ));
        }
        let inv = prob.epsilon.recip();
        let scaled_cost = prob.cost.tensor().iter().map(|&c| c * inv).collect();
        let axes = (0..shape.ndim())
            .map(|i| Axis {
                offsets: shape.rest_offsets(i),
                weights: tuple.product_weights_except(i),
                stride: shape.strides()[i],
            })
            .collect();
        Ok(Self {
            prob,
            opts,
            shape,
            scaled_cost,
            axes,
            h,
            iterations: 0,
        })
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn potentials(&self) -> DualPotentials<T> {
        DualPotentials::from_rescaled(self.prob.epsilon, self.h.clone())
    }

    /// `h^{−i}` over the remaining axes in row-major order.
    fn rest_sum(&self, axis: usize) -> Vec<T> {
        let mut acc = vec![T::zero()];
        for (j, hj) in self.h.iter().enumerate() {
            if j != axis {
                acc = acc
                    .iter()
                    .flat_map(|&a| hj.iter().map(move |&b| a + b))
                    .collect();
            }
        }
        acc
    }

    /// `h⊕` on the full product support.
    fn full_sum(&self) -> Vec<T> {
        let mut acc = vec![T::zero()];
        for hj in &self.h {
            acc = acc
                .iter()
                .flat_map(|&a| hj.iter().map(move |&b| a + b))
                .collect();
        }
        acc
    }

    fn atom_args(&self, axis: usize, rest: &[T], x: usize, buf: &mut Vec<T>) {
        let ax = &self.axes[axis];
        let base = x * ax.stride;
        buf.clear();
        buf.extend(
            rest.iter()
                .zip(&ax.offsets)
                .map(|(&r, &off)| r - self.scaled_cost[base + off]),
        );
    }

    fn solve_atom(&self, a: &[T], w: &[T], warm: T) -> Result<T> {
        let div = &self.prob.divergence;
        let root_tol = T::lit(self.opts.root_tol);
        if div.kind() == DivergenceKind::Entropic {
            let v = entropic_root(a, w);
            if self.opts.check_closed_form {
                let g = bracketed_root(div, a, w, warm, root_tol)?;
                let scale = T::one() + v.abs();
                if (g - v).abs() > T::lit(1e-8) * scale {
                    return Err(Error::Numeric(format!(
                        "closed-form update {v} disagrees with generic root {g}"
                    )));
                }
            }
            Ok(v)
        } else {
            bracketed_root(div, a, w, warm, root_tol)
        }
    }

    /// Max `|F_i(x_i) − 1|` over the atoms of one marginal, and optionally the
    /// updated potential of that marginal.
    fn axis_pass(&self, axis: usize, update: bool) -> Result<(T, Option<Vec<T>>)> {
        let rest = self.rest_sum(axis);
        let w = &self.axes[axis].weights;
        let div = &self.prob.divergence;
        let atom = |x: usize, buf: &mut Vec<T>| -> Result<(T, T)> {
            self.atom_args(axis, &rest, x, buf);
            let cur = self.h[axis][x];
            let f = root::eval_value(div, buf, w, cur);
            let r = (f - T::one()).abs();
            let v = if update {
                self.solve_atom(buf, w, cur)?
            } else {
                cur
            };
            Ok((r, v))
        };
        let n = self.h[axis].len();
        let results: Vec<(T, T)> = match self.opts.sweep {
            Sweep::GaussSeidel => {
                let mut buf = Vec::with_capacity(rest.len());
                (0..n).map(|x| atom(x, &mut buf)).collect::<Result<_>>()?
            }
            Sweep::Jacobi => (0..n)
                .into_par_iter()
                .map_init(|| Vec::with_capacity(rest.len()), |buf, x| atom(x, buf))
                .collect::<Result<_>>()?,
        };
        let res = results.iter().fold(
            T::zero(),
            |m, &(r, _)| if r.is_nan() { T::nan() } else { m.max(r) },
        );
        let new = update.then(|| results.into_iter().map(|(_, v)| v).collect());
        Ok((res, new))
    }

    /// Max first-order residual over every atom of every marginal.
    pub fn residual(&self) -> Result<T> {
        let mut worst = T::zero();
        for i in 0..self.h.len() {
            let (r, _) = self.axis_pass(i, false)?;
            if r.is_nan() {
                return Ok(r);
            }
            worst = worst.max(r);
        }
        Ok(worst)
    }

    /// One round over all marginals.
    pub fn sweep(&mut self) -> Result<()> {
        for i in 0..self.h.len() {
            let (_, new) = self.axis_pass(i, true)?;
            self.h[i] = new.expect("update requested");
        }
        self.iterations += 1;
        Ok(())
    }

    /// `ε ∫ h⊕ − ψ(h⊕ − c̃) dP` at the current potentials.
    pub fn dual_value(&self) -> Result<T> {
        let hs = self.full_sum();
        let w = self.prob.marginals.product_weights()?;
        let div = &self.prob.divergence;
        let s: T = hs
            .iter()
            .zip(&self.scaled_cost)
            .zip(&w)
            .map(|((&h, &c), &p)| (h - div.psi(h - c)) * p)
            .sum();
        Ok(s * self.prob.epsilon)
    }

    /// Iterates until the residual drops below `tol`.
    ///
    /// After a completed round the last marginal satisfies its equations up to
    /// the root tolerance, and the residual of marginal 0 at that state is
    /// exactly what the next round computes before updating it, so only the
    /// middle marginals need a separate residual pass.
    pub fn run(mut self) -> Result<Solution<T>> {
        let n = self.h.len();
        let tol = T::lit(self.opts.tol);
        loop {
            let first = if self.iterations == 0 {
                1
            } else {
                1.min(n - 1)
            };
            let last = if self.iterations == 0 { n } else { n - 1 };
            let mut res = T::zero();
            for i in first..last {
                let (r, _) = self.axis_pass(i, false)?;
                res = if r.is_nan() { r } else { res.max(r) };
            }
            let (r0, new0) = self.axis_pass(0, true)?;
            res = if r0.is_nan() { r0 } else { res.max(r0) };
            if res.is_nan() {
                return Err(Error::Numeric(format!(
                    "residual is not finite after {} iterations",
                    self.iterations
                )));
            }
            if res <= tol {
                break;
            }
            if self.iterations >= self.opts.max_iters {
                return Err(Error::IterationLimit {
                    iterations: self.iterations,
                    residual: res.to_f64_lossy(),
                });
            }
            self.h[0] = new0.expect("update requested");
            for i in 1..n {
                let (_, new) = self.axis_pass(i, true)?;
                self.h[i] = new.expect("update requested");
            }
            self.iterations += 1;
        }
        self.finish()
    }

    fn finish(self) -> Result<Solution<T>> {
        let residual = self.residual()?;
        let mut potentials = self.potentials();
        potentials.normalize(&self.prob.marginals);
        let prob = self.prob;
        let w = prob.marginals.product_weights()?;
        let div = &prob.divergence;
        let hs = self.full_sum();
        let density: Vec<T> = hs
            .iter()
            .zip(&self.scaled_cost)
            .map(|(&h, &c)| div.psi_prime(h - c))
            .collect();
        let coupling = Coupling::from_density(density, &w, self.shape.clone())?;
        let primal_value = objective(&coupling, prob)?;
        let dual_value = self.dual_value()?;
        Ok(Solution {
            potentials,
            coupling,
            primal_value,
            dual_value,
            gap: primal_value - dual_value,
            iterations: self.iterations,
            residual,
        })
    }
}

/// Solves the DOT problem from the default initialization.
pub fn solve<T: Real>(prob: &ProblemSpec<T>, opts: &SolverOptions) -> Result<Solution<T>> {
    Solver::new(prob, *opts)?.run()
}

/// Solves the DOT problem from the given potentials.
pub fn solve_from<T: Real>(
    prob: &ProblemSpec<T>,
    opts: &SolverOptions,
    init: &DualPotentials<T>,
) -> Result<Solution<T>> {
    Solver::with_potentials(prob, *opts, init)?.run()
}

/// The single-atom update: the unique `v` with
/// `Σ_k P^{−i}_k ψ'(v + h^{−i}_k − c̃(x_i, k)) = 1` on the rescaled problem.
pub fn root_update<T: Real>(
    prob: &ProblemSpec<T>,
    opts: &SolverOptions,
    potentials: &DualPotentials<T>,
    axis: usize,
    atom: usize,
) -> Result<T> {
    let s = Solver::with_potentials(prob, *opts, potentials)?;
    if axis >= s.h.len() || atom >= s.h[axis].len() {
        return Err(Error::Validation(format!(
            "no atom {atom} on marginal {axis}"
        )));
    }
    let rest = s.rest_sum(axis);
    let mut buf = Vec::new();
    s.atom_args(axis, &rest, atom, &mut buf);
    s.solve_atom(&buf, &s.axes[axis].weights, s.h[axis][atom])
}

/// Max first-order residual of given potentials.
pub fn first_order_residual<T: Real>(
    prob: &ProblemSpec<T>,
    potentials: &DualPotentials<T>,
) -> Result<T> {
    Solver::with_potentials(prob, SolverOptions::default(), potentials)?.residual()
}

/// `ε ∫ h⊕ − ψ(h⊕ − c̃) dP` for given potentials.
pub fn dual_objective<T: Real>(prob: &ProblemSpec<T>, potentials: &DualPotentials<T>) -> Result<T> {
    Solver::with_potentials(prob, SolverOptions::default(), potentials)?.dual_value()
}

/// `∫ c dπ + ε Σ φ(ρ_π) P`; `+∞` if mass sits where `P` vanishes.
pub fn objective<T: Real>(pi: &Coupling<T>, prob: &ProblemSpec<T>) -> Result<T> {
    let tuple = &prob.marginals;
    if pi.shape() != tuple.shape().shape() {
        return Err(Error::ShapeMismatch(
            "coupling does not match the problem's marginals".into(),
        ));
    }
    let w = tuple.product_weights()?;
    let transport: T = pi
        .mass()
        .iter()
        .zip(prob.cost.tensor())
        .map(|(&m, &c)| m * c)
        .sum();
    Ok(transport + prob.epsilon * pi.divergence(&prob.divergence, &w))
}

/// Number of cells with density above `threshold · max density`.
pub fn support_count<T: Real>(pi: &Coupling<T>, threshold: T) -> usize {
    pi.support_count(threshold)
}

/// Per-marginal `max |h_i(x) − h_i(x')| / d(x, x')` in original units;
/// single-atom marginals report 0.
pub fn potential_lipschitz<T: Real>(
    potentials: &DualPotentials<T>,
    tuple: &MarginalTuple<T>,
) -> Result<Vec<T>> {
    if potentials.rescaled.len() != tuple.n_marginals() {
        return Err(Error::ShapeMismatch(
            "potentials do not match marginals".into(),
        ));
    }
    Ok(potentials
        .original()
        .iter()
        .zip(tuple.marginals())
        .map(|(h, m)| {
            let pts = m.points();
            let mut best = T::zero();
            for a in 0..pts.len() {
                for b in a + 1..pts.len() {
                    let d = euclidean(&pts[a], &pts[b]);
                    best = best.max((h[a] - h[b]).abs() / d);
                }
            }
            best
        })
        .collect())
}
