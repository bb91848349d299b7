//! Discrete measures, product measures and empirical sampling.
//!
//! Sampling uses ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64(seed)`, with independent streams selected via
//! `set_stream`. Uniform reals are drawn as `(u64 >> 11) · 2^-53`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default cap on the number of atoms of a product support.
pub const DEFAULT_PRODUCT_CAPACITY: usize = 1_000_000;

/// Weighted point cloud in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure<T>", into = "RawMeasure<T>")]
#[serde(bound = "T: Real")]
pub struct DiscreteMeasure<T> {
    points: Vec<Vec<T>>,
    weights: Vec<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct RawMeasure<T> {
    points: Vec<Vec<T>>,
    weights: Vec<T>,
}

impl<T: Real> TryFrom<RawMeasure<T>> for DiscreteMeasure<T> {
    type Error = Error;
    fn try_from(raw: RawMeasure<T>) -> Result<Self> {
        DiscreteMeasure::new(raw.points, raw.weights)
    }
}

impl<T: Real> From<DiscreteMeasure<T>> for RawMeasure<T> {
    fn from(m: DiscreteMeasure<T>) -> Self {
        RawMeasure {
            points: m.points,
            weights: m.weights,
        }
    }
}

fn weight_tolerance<T: Real>(n: usize) -> T {
    T::lit(1e-12).max(T::epsilon() * T::from_count(n.max(1)) * T::lit(4.0))
}

fn lex_cmp<T: Real>(a: &[T], b: &[T]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    std::cmp::Ordering::Equal
}

impl<T: Real> DiscreteMeasure<T> {
    /// Validates and builds a measure: nonempty, common dimension, positive
    /// weights summing to one, pairwise distinct atoms.
    pub fn new(points: Vec<Vec<T>>, weights: Vec<T>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Validation("measure has no atoms".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::Validation("atoms must have dimension >= 1".into()));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation("non-finite coordinate".into()));
            }
        }
        if weights.iter().any(|&w| !(w > T::zero()) || !w.is_finite()) {
            return Err(Error::Validation("weights must be positive".into()));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > weight_tolerance::<T>(weights.len()) {
            return Err(Error::Validation(format!("weights sum to {total}, not 1")));
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| lex_cmp(&points[a], &points[b]));
        for w in order.windows(2) {
            if points[w[0]] == points[w[1]] {
                return Err(Error::Validation("atoms must be pairwise distinct".into()));
            }
        }
        Ok(Self { points, weights })
    }

    /// Uniform weights on the given (distinct) atoms.
    pub fn uniform(points: Vec<Vec<T>>) -> Result<Self> {
        let n = points.len();
        let w = T::one() / T::from_count(n.max(1));
        Self::new(points, vec![w; n])
    }

    pub fn dirac(point: Vec<T>) -> Self {
        Self {
            points: vec![point],
            weights: vec![T::one()],
        }
    }

    /// Uniform measure on the scalar atoms `xs`.
    pub fn uniform_1d(xs: &[T]) -> Result<Self> {
        Self::uniform(xs.iter().map(|&x| vec![x]).collect())
    }

    /// Empirical measure of `samples`; duplicates are merged and atoms are
    /// returned in lexicographic order with weights `k/n`.
    pub fn from_samples(mut samples: Vec<Vec<T>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Validation("no samples".into()));
        }
        let n = T::from_count(samples.len());
        samples.sort_by(|a, b| lex_cmp(a, b));
        let mut points: Vec<Vec<T>> = Vec::with_capacity(samples.len());
        let mut counts: Vec<usize> = Vec::with_capacity(samples.len());
        for s in samples {
            match points.last() {
                Some(last) if *last == s => *counts.last_mut().unwrap() += 1,
                _ => {
                    points.push(s);
                    counts.push(1);
                }
            }
        }
        let weights = counts.into_iter().map(|c| T::from_count(c) / n).collect();
        Self::new(points, weights)
    }

    /// Cell-centred grid on `[0,1]^d` with `m` points per axis, uniform weights.
    pub fn cube_grid(dim: usize, m: usize) -> Result<Self> {
        if dim == 0 || m == 0 {
            return Err(Error::Config("cube grid needs dim >= 1 and m >= 1".into()));
        }
        let total = m
            .checked_pow(dim as u32)
            .filter(|&t| t <= DEFAULT_PRODUCT_CAPACITY)
            .ok_or_else(|| Error::Capacity {
                what: "cube grid".into(),
                requested: usize::MAX,
                limit: DEFAULT_PRODUCT_CAPACITY,
            })?;
        let step = T::one() / T::from_count(m);
        let mut points = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            points.push(
                idx.iter()
                    .map(|&k| (T::from_count(k) + T::lit(0.5)) * step)
                    .collect(),
            );
            for a in (0..dim).rev() {
                idx[a] += 1;
                if idx[a] < m {
                    break;
                }
                idx[a] = 0;
            }
        }
        Self::uniform(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn mean(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.dim()];
        for (p, &w) in self.points.iter().zip(&self.weights) {
            for (mi, &x) in m.iter_mut().zip(p) {
                *mi += w * x;
            }
        }
        m
    }

    /// Same weights, atoms moved by `f`.
    pub fn map_points(&self, f: impl Fn(usize, &[T]) -> Vec<T>) -> Result<Self> {
        let points = self
            .points
            .iter()
            .enumerate()
            .map(|(k, p)| f(k, p))
            .collect();
        Self::new(points, self.weights.clone())
    }

    pub fn translate(&self, t: &[T]) -> Result<Self> {
        if t.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: t.len(),
            });
        }
        self.map_points(|_, p| p.iter().zip(t).map(|(&x, &s)| x + s).collect())
    }
}

/// Euclidean distance between two points.
pub fn euclidean<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

/// Row-major index arithmetic on a product support.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductShape {
    shape: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl ProductShape {
    pub fn new(shape: Vec<usize>) -> Self {
        let mut strides = vec![1usize; shape.len()];
        for a in (0..shape.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        let len = shape.iter().product();
        Self {
            shape,
            strides,
            len,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.shape.len()];
        for (a, &s) in self.strides.iter().enumerate() {
            out[a] = flat / s;
            flat %= s;
        }
        out
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Flat offsets of every cell with axis `axis` fixed at 0, in row-major
    /// order of the remaining axes.
    pub fn rest_offsets(&self, axis: usize) -> Vec<usize> {
        let mut rest_shape = self.shape.clone();
        rest_shape[axis] = 1;
        let rest = ProductShape::new(rest_shape);
        (0..rest.len())
            .map(|k| {
                let mut idx = rest.unravel(k);
                idx[axis] = 0;
                self.ravel(&idx)
            })
            .collect()
    }

    /// Sums a tensor over every axis except `axis`.
    pub fn marginalize<T: Real>(&self, tensor: &[T], axis: usize) -> Vec<T> {
        let n = self.shape[axis];
        let s = self.strides[axis];
        let mut out = vec![T::zero(); n];
        for (flat, &v) in tensor.iter().enumerate() {
            out[(flat / s) % n] += v;
        }
        out
    }
}

/// An ordered tuple of `N ≥ 2` marginals with product-metric exponent `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MarginalTuple<T> {
    marginals: Vec<DiscreteMeasure<T>>,
    p: T,
}

impl<T: Real> MarginalTuple<T> {
    pub fn new(marginals: Vec<DiscreteMeasure<T>>, p: T) -> Result<Self> {
        if marginals.len() < 2 {
            return Err(Error::Validation(format!(
                "need at least two marginals, got {}",
                marginals.len()
            )));
        }
        if !(p >= T::one()) || !p.is_finite() {
            return Err(Error::Config(format!(
                "metric exponent p must be in [1, inf), got {p}"
            )));
        }
        Ok(Self { marginals, p })
    }

    pub fn marginals(&self) -> &[DiscreteMeasure<T>] {
        &self.marginals
    }

    pub fn marginal(&self, i: usize) -> &DiscreteMeasure<T> {
        &self.marginals[i]
    }

    pub fn n_marginals(&self) -> usize {
        self.marginals.len()
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn dims(&self) -> Vec<usize> {
        self.marginals.iter().map(|m| m.dim()).collect()
    }

    pub fn shape(&self) -> ProductShape {
        ProductShape::new(self.marginals.iter().map(|m| m.len()).collect())
    }

    /// Support size of the product measure, or a capacity error.
    pub fn checked_support_size(&self, limit: usize) -> Result<usize> {
        let mut total = 1usize;
        for m in &self.marginals {
            total = total.saturating_mul(m.len());
        }
        if total > limit {
            return Err(Error::Capacity {
                what: "product support".into(),
                requested: total,
                limit,
            });
        }
        Ok(total)
    }

    /// Weights of `P = μ_1 ⊗ … ⊗ μ_N` in row-major order.
    pub fn product_weights(&self) -> Result<Vec<T>> {
        let total = self.checked_support_size(DEFAULT_PRODUCT_CAPACITY)?;
        let mut w = vec![T::one(); 1];
        w.reserve(total);
        for m in &self.marginals {
            let mut next = Vec::with_capacity(w.len() * m.len());
            for &a in &w {
                for &b in m.weights() {
                    next.push(a * b);
                }
            }
            w = next;
        }
        Ok(w)
    }

    /// Weights of `P^{-i}` in row-major order of the remaining axes.
    pub fn product_weights_except(&self, axis: usize) -> Vec<T> {
        let mut w = vec![T::one()];
        for (j, m) in self.marginals.iter().enumerate() {
            if j == axis {
                continue;
            }
            let mut next = Vec::with_capacity(w.len() * m.len());
            for &a in &w {
                for &b in m.weights() {
                    next.push(a * b);
                }
            }
            w = next;
        }
        w
    }

    /// The product measure on the product space, atoms as concatenated
    /// coordinates.
    pub fn product(&self, limit: usize) -> Result<DiscreteMeasure<T>> {
        let shape = ProductShape::new(self.marginals.iter().map(|m| m.len()).collect());
        self.checked_support_size(limit)?;
        let weights = self.product_weights()?;
        let points = (0..shape.len())
            .map(|flat| self.product_atom(&shape.unravel(flat)))
            .collect();
        Ok(DiscreteMeasure { points, weights })
    }

    /// Concatenated coordinates of the product atom with multi-index `idx`.
    pub fn product_atom(&self, idx: &[usize]) -> Vec<T> {
        let mut out = Vec::new();
        for (m, &k) in self.marginals.iter().zip(idx) {
            out.extend_from_slice(&m.points()[k]);
        }
        out
    }

    /// Product metric `d_{X,q}(x, y) = (Σ_i |x_i − y_i|^q)^{1/q}` on concatenated atoms.
    pub fn product_distance(&self, x: &[T], y: &[T], q: T) -> T {
        product_distance_pow(&self.dims(), x, y, q).powf(q.recip())
    }

    /// Largest pairwise distance between atoms of all marginals (all in a
    /// common ambient space).
    pub fn diameter(&self) -> T {
        diameter_of(self.marginals.iter().flat_map(|m| m.points().iter()))
    }
}

/// `Σ_i |x_i − y_i|^q` where slot `i` spans `dims[i]` coordinates.
pub fn product_distance_pow<T: Real>(dims: &[usize], x: &[T], y: &[T], q: T) -> T {
    let mut off = 0;
    let mut acc = T::zero();
    for &d in dims {
        let di = euclidean(&x[off..off + d], &y[off..off + d]);
        acc += di.powf(q);
        off += d;
    }
    acc
}

pub(crate) fn diameter_of<'a, T: Real>(points: impl Iterator<Item = &'a Vec<T>>) -> T {
    let pts: Vec<&Vec<T>> = points.collect();
    let mut best = T::zero();
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            if pts[a].len() == pts[b].len() {
                best = best.max(euclidean(pts[a], pts[b]));
            }
        }
    }
    best
}

/// Parametric curves in `R^3`, parameterized on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curve {
    /// `t ↦ (r cos 2πkt, r sin 2πkt, h t)`.
    Helix {
        radius: f64,
        turns: f64,
        height: f64,
    },
    /// `t ↦ start + t (end − start)`.
    Segment { start: [f64; 3], end: [f64; 3] },
}

impl Curve {
    pub fn eval<T: Real>(&self, t: f64) -> Vec<T> {
        let v = match self {
            Curve::Helix {
                radius,
                turns,
                height,
            } => {
                let a = 2.0 * std::f64::consts::PI * turns * t;
                [radius * a.cos(), radius * a.sin(), height * t]
            }
            Curve::Segment { start, end } => [
                start[0] + t * (end[0] - start[0]),
                start[1] + t * (end[1] - start[1]),
                start[2] + t * (end[2] - start[2]),
            ],
        };
        v.iter().map(|&x| T::lit(x)).collect()
    }

    /// Axis-aligned bounding box of the curve image, from a dense parameter
    /// grid.
    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for k in 0..=10_000 {
            let x: Vec<f64> = self.eval(k as f64 / 10_000.0);
            for a in 0..3 {
                lo[a] = lo[a].min(x[a]);
                hi[a] = hi[a].max(x[a]);
            }
        }
        (lo, hi)
    }

    /// Curve image of the cell-centred parameter grid with `m` points.
    pub fn grid<T: Real>(&self, m: usize) -> Result<DiscreteMeasure<T>> {
        let pts = (0..m)
            .map(|k| self.eval((k as f64 + 0.5) / m as f64))
            .collect();
        DiscreteMeasure::uniform(pts)
    }
}

/// Source distribution for empirical measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[serde(bound = "T: Real")]
pub enum SamplerSpec<T> {
    /// Uniform on `[0,1]^dim`.
    UniformCube { dim: usize },
    /// Uniform on the box `[lo, hi]`.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// i.i.d. draws from a discrete measure.
    Resample(DiscreteMeasure<T>),
    /// `γ(U)` with `U` uniform on `[0, 1]`.
    Curve(Curve),
}

impl<T: Real> SamplerSpec<T> {
    /// Ambient dimension of the draws.
    pub fn dim(&self) -> usize {
        match self {
            SamplerSpec::UniformCube { dim } => *dim,
            SamplerSpec::UniformBox { lo, .. } => lo.len(),
            SamplerSpec::Resample(m) => m.dim(),
            SamplerSpec::Curve(_) => 3,
        }
    }

    pub fn draw(&self, rng: &mut ChaCha20Rng) -> Vec<T> {
        match self {
            SamplerSpec::UniformCube { dim } => {
                (0..*dim).map(|_| T::lit(rng.gen::<f64>())).collect()
            }
            SamplerSpec::UniformBox { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(&a, &b)| T::lit(a + (b - a) * rng.gen::<f64>()))
                .collect(),
            SamplerSpec::Resample(m) => {
                let u = T::lit(rng.gen::<f64>());
                let mut acc = T::zero();
                for (p, &w) in m.points().iter().zip(m.weights()) {
                    acc += w;
                    if u < acc {
                        return p.clone();
                    }
                }
                m.points().last().unwrap().clone()
            }
            SamplerSpec::Curve(c) => c.eval(rng.gen::<f64>()),
        }
    }

    /// A discretization of the source used as a ground-truth proxy.
    pub fn discretize(&self, resolution: usize) -> Result<DiscreteMeasure<T>> {
        match self {
            SamplerSpec::UniformCube { dim } => DiscreteMeasure::cube_grid(*dim, resolution),
            SamplerSpec::UniformBox { lo, hi } => {
                if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(Error::Config(
                        "box sampler needs lo < hi in every coordinate".into(),
                    ));
                }
                DiscreteMeasure::cube_grid(lo.len(), resolution)?.map_points(|_, x| {
                    x.iter()
                        .zip(lo.iter().zip(hi))
                        .map(|(&v, (&a, &b))| T::lit(a) + v * T::lit(b - a))
                        .collect()
                })
            }
            SamplerSpec::Resample(m) => Ok(m.clone()),
            SamplerSpec::Curve(c) => c.grid(resolution),
        }
    }
}

/// Seeded ChaCha20 generator on stream `stream`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Empirical measure of `n` i.i.d. draws from `source`.
pub fn empirical<T: Real>(
    source: &SamplerSpec<T>,
    n: usize,
    seed: u64,
) -> Result<DiscreteMeasure<T>> {
    empirical_with(source, n, &mut stream_rng(seed, 0))
}

pub fn empirical_with<T: Real>(
    source: &SamplerSpec<T>,
    n: usize,
    rng: &mut ChaCha20Rng,
) -> Result<DiscreteMeasure<T>> {
    if n == 0 {
        return Err(Error::Config("empirical measure needs n >= 1".into()));
    }
    let samples = (0..n).map(|_| source.draw(rng)).collect();
    DiscreteMeasure::from_samples(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unif(xs: &[f64]) -> DiscreteMeasure<f64> {
        DiscreteMeasure::uniform_1d(xs).unwrap()
    }

    #[test]
    fn rejects_bad_measures() {
        assert!(DiscreteMeasure::<f64>::new(vec![vec![0.0]], vec![0.5]).is_err());
        assert!(DiscreteMeasure::<f64>::new(vec![vec![0.0], vec![0.0]], vec![0.5, 0.5]).is_err());
        assert!(DiscreteMeasure::<f64>::new(vec![vec![0.0], vec![1.0]], vec![1.0, 0.0]).is_err());
        assert!(
            DiscreteMeasure::<f64>::new(vec![vec![0.0], vec![1.0, 2.0]], vec![0.5, 0.5]).is_err()
        );
    }

    #[test]
    fn product_of_two_uniform_pairs() {
        let t = MarginalTuple::new(vec![unif(&[0.0, 1.0]), unif(&[2.0, 3.0])], 2.0).unwrap();
        let p = t.product(DEFAULT_PRODUCT_CAPACITY).unwrap();
        assert_eq!(p.len(), 4);
        assert!(p.weights().iter().all(|&w| w == 0.25));
        assert_eq!(p.points()[1], vec![0.0, 3.0]);
    }

    #[test]
    fn product_with_dirac() {
        let mu2 = DiscreteMeasure::new(vec![vec![1.0], vec![2.0]], vec![0.3, 0.7]).unwrap();
        let t = MarginalTuple::new(vec![DiscreteMeasure::dirac(vec![5.0]), mu2], 1.0).unwrap();
        assert_eq!(t.product_weights().unwrap(), vec![0.3, 0.7]);
    }

    #[test]
    fn triple_product() {
        let m = unif(&[0.0, 0.5, 1.0]);
        let t = MarginalTuple::new(vec![m.clone(), m.clone(), m], 2.0).unwrap();
        let p = t.product(DEFAULT_PRODUCT_CAPACITY).unwrap();
        assert_eq!(p.len(), 27);
        let s: f64 = p.weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
        assert!(p.weights().iter().all(|&w| (w - 1.0 / 27.0).abs() < 1e-16));
    }

    #[test]
    fn capacity_is_enforced() {
        let m = unif(&[0.0, 1.0, 2.0]);
        let t = MarginalTuple::new(vec![m.clone(), m], 2.0).unwrap();
        assert!(matches!(t.product(8), Err(Error::Capacity { .. })));
    }

    #[test]
    fn marginalizing_product_recovers_marginals() {
        let a = DiscreteMeasure::<f64>::new(vec![vec![0.0], vec![1.0]], vec![0.25, 0.75]).unwrap();
        let b = DiscreteMeasure::new(vec![vec![0.0], vec![1.0], vec![2.0]], vec![0.2, 0.3, 0.5])
            .unwrap();
        let t = MarginalTuple::new(vec![a.clone(), b.clone()], 2.0).unwrap();
        let w = t.product_weights().unwrap();
        let sh = t.shape();
        let m0 = sh.marginalize(&w, 0);
        let m1 = sh.marginalize(&w, 1);
        for (x, y) in m0.iter().zip(a.weights()) {
            assert!((x - y).abs() < 1e-15);
        }
        for (x, y) in m1.iter().zip(b.weights()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn rest_offsets_cover_axis() {
        let sh = ProductShape::new(vec![2, 3, 4]);
        let off = sh.rest_offsets(1);
        assert_eq!(off.len(), 8);
        assert_eq!(off[0], 0);
        assert_eq!(off[1], 1);
        assert_eq!(off[4], 12);
    }

    #[test]
    fn resampling_a_dirac() {
        let d = DiscreteMeasure::dirac(vec![0.3, 0.4]);
        let e = empirical(&SamplerSpec::Resample(d.clone()), 5, 9).unwrap();
        assert_eq!(e, d);
    }

    #[test]
    fn empirical_is_reproducible() {
        let s = SamplerSpec::<f64>::UniformCube { dim: 2 };
        let a = empirical(&s, 100, 42).unwrap();
        let b = empirical(&s, 100, 42).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let c = empirical(&s, 100, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empirical_mean_of_uniform() {
        // standard error of the mean is sqrt(1/12 / 1e4) ≈ 0.0029
        let e = empirical(&SamplerSpec::<f64>::UniformCube { dim: 1 }, 10_000, 7).unwrap();
        assert!((e.mean()[0] - 0.5).abs() < 0.02);
    }

    #[test]
    fn empirical_resampling_first_moment_converges() {
        let src =
            DiscreteMeasure::<f64>::new(vec![vec![0.0], vec![1.0], vec![4.0]], vec![0.5, 0.3, 0.2])
                .unwrap();
        let mean = 0.3 + 0.8;
        let var = 0.3 + 0.2 * 16.0 - mean * mean;
        let n = 20_000;
        let e = empirical(&SamplerSpec::Resample(src), n, 3).unwrap();
        assert!((e.mean()[0] - mean).abs() < 3.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn duplicates_are_merged() {
        let m =
            DiscreteMeasure::<f64>::from_samples(vec![vec![1.0], vec![0.0], vec![1.0], vec![1.0]])
                .unwrap();
        assert_eq!(m.points(), &[vec![0.0], vec![1.0]]);
        assert_eq!(m.weights(), &[0.25, 0.75]);
    }

    #[test]
    fn json_schema() {
        let m = DiscreteMeasure::<f64>::new(vec![vec![0.0, 1.0]], vec![1.0]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"points":[[0.0,1.0]],"weights":[1.0]}"#);
        let bad = r#"{"points":[[0.0],[1.0]],"weights":[0.9,0.9]}"#;
        assert!(serde_json::from_str::<DiscreteMeasure<f64>>(bad).is_err());
    }

    #[test]
    fn sampler_config_parses() {
        let s: SamplerSpec<f64> = serde_json::from_str(r#"{"uniform_cube":{"dim":3}}"#).unwrap();
        assert_eq!(s, SamplerSpec::UniformCube { dim: 3 });
        let c: SamplerSpec<f64> =
            serde_json::from_str(r#"{"curve":{"helix":{"radius":0.5,"turns":2.0,"height":1.0}}}"#)
                .unwrap();
        assert!(matches!(c, SamplerSpec::Curve(Curve::Helix { .. })));
        assert!(serde_json::from_str::<SamplerSpec<f64>>(r#"{"gaussian":{}}"#).is_err());
    }

    #[test]
    fn cube_grid_is_cell_centred() {
        let g = DiscreteMeasure::<f64>::cube_grid(2, 4).unwrap();
        assert_eq!(g.len(), 16);
        assert_eq!(g.points()[0], vec![0.125, 0.125]);
        assert_eq!(g.points()[15], vec![0.875, 0.875]);
    }

    proptest! {
        #[test]
        fn product_is_associative_in_weights(a in 1usize..4, b in 1usize..4, c in 1usize..4) {
            let m = |n: usize| DiscreteMeasure::<f64>::uniform_1d(&(0..n).map(|k| k as f64).collect::<Vec<_>>()).unwrap();
            let t = MarginalTuple::new(vec![m(a), m(b), m(c)], 2.0).unwrap();
            let w = t.product_weights().unwrap();
            let s: f64 = w.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-14);
            // (μ1⊗μ2)⊗μ3 as a two-marginal product of a flattened pair
            let pair = MarginalTuple::new(vec![m(a), m(b)], 2.0).unwrap().product(DEFAULT_PRODUCT_CAPACITY).unwrap();
            let t2 = MarginalTuple::new(vec![pair, m(c)], 2.0).unwrap();
            let w2 = t2.product_weights().unwrap();
            for (x, y) in w.iter().zip(&w2) {
                prop_assert!((x - y).abs() < 1e-16);
            }
        }
    }
}
