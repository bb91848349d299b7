//! Axis-aligned cube partitions of `[0,1]^d` certifying the covering condition
//! `|𝒜_ε| ≤ K ε^{−d}` with `D_{𝒜_ε} ≤ ε`, and nested chains of them.

use serde::Serialize;

use crate::error::{Error, Result};

/// Default cap on the number of cells of a single partition.
pub const DEFAULT_CELL_CAPACITY: usize = 10_000_000;

/// Slack used when turning `√d / ε` into an integer cell count, so that
/// resolutions such as `ε = 1/27` are not pushed up by rounding.
const CEIL_SLACK: f64 = 1e-9;

/// One closed cell `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Cell {
    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains_cell(&self, other: &Cell) -> bool {
        self.lo.iter().zip(&other.lo).all(|(a, b)| a <= b)
            && self.hi.iter().zip(&other.hi).all(|(a, b)| b <= a)
    }
}

/// A lattice partition of `[0,1]^d` into `m^d` cubes of side `1/m`.
///
/// Cells are closed; a point on a shared face belongs to the lexicographically
/// smallest cell containing it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionScheme {
    pub dim: usize,
    /// Cells per axis.
    pub per_axis: usize,
    /// Target resolution: every cell has diameter at most `epsilon`.
    pub epsilon: f64,
    /// Certified dimension `d_μ` (the ambient dimension for the cube).
    pub d_mu: f64,
    /// Smoothness order the certificate is stated for; `Ω_ε` is the whole cube,
    /// so the tail condition holds for every `s`.
    pub s: u32,
    /// Covering constant `K = (2√d)^d`.
    pub k_const: f64,
}

fn cells_per_axis(dim: usize, epsilon: f64) -> usize {
    ((dim as f64).sqrt() / epsilon - CEIL_SLACK).ceil().max(1.0) as usize
}

fn check_capacity(per_axis: usize, dim: usize) -> Result<()> {
    match per_axis.checked_pow(dim as u32) {
        Some(n) if n <= DEFAULT_CELL_CAPACITY => Ok(()),
        _ => Err(Error::Capacity {
            what: "partition cells".into(),
            requested: per_axis.saturating_pow(dim as u32),
            limit: DEFAULT_CELL_CAPACITY,
        }),
    }
}

/// Cube partition of `[0,1]^d` with cells of side at most `ε/√d`.
pub fn dyadic_partition(dim: usize, epsilon: f64) -> Result<PartitionScheme> {
    if dim == 0 {
        return Err(Error::Config("partition dimension must be >= 1".into()));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Config(format!(
            "partition resolution must lie in (0, 1], got {epsilon}"
        )));
    }
    let per_axis = cells_per_axis(dim, epsilon);
    check_capacity(per_axis, dim)?;
    Ok(PartitionScheme::lattice(dim, per_axis, epsilon))
}

/// Nested partitions `𝒜_T, …, 𝒜_1` (coarsest first) with
/// `D_{𝒜_t} ≤ 3^t ε`, `|𝒜_t| ≤ K (3^t ε)^{−d}` and every `𝒜_{t−1}` refining
/// `𝒜_t`. Built from `m_T = ⌈√d / (3^T ε)⌉` cells per axis at the top level
/// and `m_t = 3^{T−t} m_T` below it.
pub fn refinement_chain(dim: usize, epsilon: f64, levels: u32) -> Result<Vec<PartitionScheme>> {
    if dim == 0 || levels == 0 {
        return Err(Error::Config(
            "refinement chain needs dim >= 1 and T >= 1".into(),
        ));
    }
    let top = epsilon * 3f64.powi(levels as i32);
    if !(epsilon > 0.0) || top > 1.0 + CEIL_SLACK {
        return Err(Error::Config(format!(
            "refinement chain needs 0 < eps and eps * 3^T <= 1, got eps = {epsilon}, T = {levels}"
        )));
    }
    let m_top = cells_per_axis(dim, top.min(1.0));
    (1..=levels)
        .rev()
        .map(|t| {
            let per_axis = m_top * 3usize.pow(levels - t);
            check_capacity(per_axis, dim)?;
            Ok(PartitionScheme::lattice(
                dim,
                per_axis,
                epsilon * 3f64.powi(t as i32),
            ))
        })
        .collect()
}

impl PartitionScheme {
    fn lattice(dim: usize, per_axis: usize, epsilon: f64) -> Self {
        Self {
            dim,
            per_axis,
            epsilon,
            d_mu: dim as f64,
            s: 1,
            k_const: (2.0 * (dim as f64).sqrt()).powi(dim as i32),
        }
    }

    pub fn count(&self) -> usize {
        self.per_axis.pow(self.dim as u32)
    }

    /// `K ε^{−d_μ}`.
    pub fn count_bound(&self) -> f64 {
        self.k_const * self.epsilon.powf(-self.d_mu)
    }

    pub fn side(&self) -> f64 {
        1.0 / self.per_axis as f64
    }

    pub fn max_diameter(&self) -> f64 {
        self.side() * (self.dim as f64).sqrt()
    }

    /// Cell with row-major index `flat`.
    pub fn cell(&self, flat: usize) -> Cell {
        let m = self.per_axis;
        let mut idx = vec![0usize; self.dim];
        let mut rem = flat;
        for a in (0..self.dim).rev() {
            idx[a] = rem % m;
            rem /= m;
        }
        let edge = |k: usize| k as f64 / m as f64;
        Cell {
            lo: idx.iter().map(|&k| edge(k)).collect(),
            hi: idx.iter().map(|&k| edge(k + 1)).collect(),
        }
    }

    pub fn cells(&self) -> Vec<Cell> {
        (0..self.count()).map(|k| self.cell(k)).collect()
    }

    /// Row-major index of the cell owning `x`, or `None` outside `[0,1]^d`.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dim || x.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return None;
        }
        let m = self.per_axis;
        Some(x.iter().fold(0usize, |acc, &v| {
            let k = ((v * m as f64).ceil() as usize)
                .saturating_sub(1)
                .min(m - 1);
            acc * m + k
        }))
    }

    /// Whether every cell of `self` lies in exactly one cell of `coarse`.
    /// Cells are products of intervals, so containment is checked per axis and
    /// the per-axis counts multiply.
    pub fn refines(&self, coarse: &PartitionScheme) -> bool {
        if self.dim != coarse.dim {
            return false;
        }
        let fine = self.per_axis;
        let wide = coarse.per_axis;
        (0..fine).all(|k| {
            let (lo, hi) = (k as f64 / fine as f64, (k + 1) as f64 / fine as f64);
            let owners = (0..wide)
                .filter(|&j| {
                    let (a, b) = (j as f64 / wide as f64, (j + 1) as f64 / wide as f64);
                    a <= lo + 1e-12 && hi <= b + 1e-12
                })
                .count();
            owners == 1
        })
    }
}
