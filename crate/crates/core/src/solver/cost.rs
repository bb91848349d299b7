use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{euclidean, MarginalTuple, DEFAULT_PRODUCT_CAPACITY};
use crate::scalar::Real;

/// Built-in cost families. For `N` marginals in a common ambient space the
/// built-in costs sum over all pairs `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    /// `Σ_{i<j} ‖x_i − x_j‖²`.
    SqEuclideanSum,
    /// `Σ_{i<j} ‖x_i − x_j‖^r`, `r ≥ 1`.
    PowerDistance(f64),
    /// User-supplied tensor.
    ExplicitTensor,
}

impl CostKind {
    /// Evaluates a built-in cost at the atoms `xs`.
    pub fn eval<T: Real>(&self, xs: &[&[T]]) -> T {
        let r = match self {
            CostKind::SqEuclideanSum => 2.0,
            CostKind::PowerDistance(r) => *r,
            CostKind::ExplicitTensor => return T::nan(),
        };
        let mut acc = T::zero();
        for a in 0..xs.len() {
            for b in a + 1..xs.len() {
                let d = euclidean(xs[a], xs[b]);
                acc += if r == 2.0 { d * d } else { d.powf(T::lit(r)) };
            }
        }
        acc
    }

    /// Lipschitz constant with respect to `d_{X,p}` on the product of the
    /// convex hull of all atoms of `tuples` (common ambient space).
    ///
    /// Each slot gradient is bounded by `(N − 1) r D^{r−1}` with `D` the hull
    /// diameter; Hölder in the slot index then gives the factor `N^{1−1/p}`.
    pub fn lipschitz<T: Real>(&self, tuples: &[&MarginalTuple<T>], p: T) -> Result<T> {
        let r = match self {
            CostKind::SqEuclideanSum => 2.0,
            CostKind::PowerDistance(r) => *r,
            CostKind::ExplicitTensor => {
                return Err(Error::Unsupported(
                    "explicit cost tensors carry a user-supplied Lipschitz constant".into(),
                ))
            }
        };
        let first = tuples
            .first()
            .ok_or_else(|| Error::Validation("no marginals for Lipschitz bound".into()))?;
        let n = first.n_marginals();
        let dim = first.marginal(0).dim();
        if tuples
            .iter()
            .any(|t| t.n_marginals() != n || t.dims().iter().any(|&d| d != dim))
        {
            return Err(Error::ShapeMismatch(
                "built-in costs need a common ambient dimension".into(),
            ));
        }
        let diam = crate::measure::diameter_of(
            tuples
                .iter()
                .flat_map(|t| t.marginals().iter().flat_map(|m| m.points().iter())),
        );
        let slot = T::from_count(n - 1) * T::lit(r) * diam.powf(T::lit(r - 1.0));
        Ok(slot * T::from_count(n).powf(T::one() - p.recip()))
    }
}

/// Cost function evaluated on the product support, with its Lipschitz constant.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec<T> {
    kind: CostKind,
    tensor: Vec<T>,
    lipschitz: T,
}

impl<T: Real> CostSpec<T> {
    /// Evaluates a built-in cost on the product support of `tuple`.
    pub fn builtin(kind: CostKind, tuple: &MarginalTuple<T>) -> Result<Self> {
        if kind == CostKind::ExplicitTensor {
            return Err(Error::Config("explicit costs need a tensor".into()));
        }
        if let CostKind::PowerDistance(r) = kind {
            if !(r >= 1.0) {
                return Err(Error::Config(format!(
                    "power cost exponent must be >= 1, got {r}"
                )));
            }
        }
        let lipschitz = kind.lipschitz(&[tuple], tuple.p())?;
        let shape = tuple.shape();
        tuple.checked_support_size(DEFAULT_PRODUCT_CAPACITY)?;
        let mut tensor = Vec::with_capacity(shape.len());
        let mut idx = vec![0usize; shape.ndim()];
        for _ in 0..shape.len() {
            let atoms: Vec<&[T]> = idx
                .iter()
                .enumerate()
                .map(|(i, &k)| tuple.marginal(i).points()[k].as_slice())
                .collect();
            tensor.push(kind.eval(&atoms));
            for a in (0..idx.len()).rev() {
                idx[a] += 1;
                if idx[a] < shape.shape()[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(Self {
            kind,
            tensor,
            lipschitz,
        })
    }

    pub fn sq_euclidean_sum(tuple: &MarginalTuple<T>) -> Result<Self> {
        Self::builtin(CostKind::SqEuclideanSum, tuple)
    }

    /// A user-supplied cost tensor (row-major over the product support).
    pub fn explicit(tensor: Vec<T>, tuple: &MarginalTuple<T>, lipschitz: T) -> Result<Self> {
        let size = tuple.shape().len();
        if tensor.len() != size {
            return Err(Error::ShapeMismatch(format!(
                "cost tensor has {} entries, product support has {size}",
                tensor.len()
            )));
        }
        if tensor.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("cost tensor must be finite".into()));
        }
        Ok(Self {
            kind: CostKind::ExplicitTensor,
            tensor,
            lipschitz,
        })
    }

    /// Re-evaluates the same built-in cost on another marginal tuple.
    pub fn rebuild_on(&self, tuple: &MarginalTuple<T>) -> Result<Self> {
        Self::builtin(self.kind, tuple)
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    pub fn tensor(&self) -> &[T] {
        &self.tensor
    }

    pub fn lipschitz(&self) -> T {
        self.lipschitz
    }

    pub fn max_abs(&self) -> T {
        self.tensor.iter().fold(T::zero(), |m, &c| m.max(c.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::DiscreteMeasure;

    #[test]
    fn builtin_tensor_matches_formula() {
        let a = DiscreteMeasure::<f64>::uniform_1d(&[0.0, 0.5, 1.0]).unwrap();
        let b = DiscreteMeasure::uniform_1d(&[0.2, 0.9]).unwrap();
        let t = MarginalTuple::new(vec![a.clone(), b.clone()], 2.0).unwrap();
        let c = CostSpec::sq_euclidean_sum(&t).unwrap();
        for (i, x) in a.points().iter().enumerate() {
            for (j, y) in b.points().iter().enumerate() {
                let expect = (x[0] - y[0]) * (x[0] - y[0]);
                assert!((c.tensor()[i * 2 + j] - expect).abs() < 1e-12);
            }
        }
        // L = 2 · 1 · D^1 · 2^{1/2} with D = 1
        assert!((c.lipschitz() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn three_marginal_pairwise_sum() {
        let m = DiscreteMeasure::uniform_1d(&[0.0, 1.0]).unwrap();
        let t = MarginalTuple::new(vec![m.clone(), m.clone(), m], 2.0).unwrap();
        let c = CostSpec::builtin(CostKind::PowerDistance(1.0), &t).unwrap();
        // (0,1,0): |0−1| + |0−0| + |1−0| = 2
        assert_eq!(c.tensor()[2], 2.0);
    }

    #[test]
    fn explicit_shape_checked() {
        let m = DiscreteMeasure::uniform_1d(&[0.0, 1.0]).unwrap();
        let t = MarginalTuple::new(vec![m.clone(), m], 2.0).unwrap();
        assert!(CostSpec::explicit(vec![0.0; 3], &t, 1.0).is_err());
        assert!(CostSpec::explicit(vec![0.0, f64::NAN, 0.0, 0.0], &t, 1.0).is_err());
    }
}
