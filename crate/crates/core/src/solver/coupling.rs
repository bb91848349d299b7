use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::measure::{MarginalTuple, ProductShape};
use crate::scalar::Real;

/// A probability tensor over a product support together with its density
/// `ρ_π = dπ/dP`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling<T> {
    shape: ProductShape,
    mass: Vec<T>,
    density: Vec<T>,
}

impl<T: Real> Coupling<T> {
    /// Builds a coupling from its density with respect to `P`.
    pub fn from_density(
        density: Vec<T>,
        product_weights: &[T],
        shape: ProductShape,
    ) -> Result<Self> {
        if density.len() != shape.len() || product_weights.len() != shape.len() {
            return Err(Error::ShapeMismatch(
                "density does not match product support".into(),
            ));
        }
        let mass = density
            .iter()
            .zip(product_weights)
            .map(|(&r, &w)| r * w)
            .collect();
        Ok(Self {
            shape,
            mass,
            density,
        })
    }

    /// Builds a coupling from its mass tensor.
    pub fn from_mass(mass: Vec<T>, product_weights: &[T], shape: ProductShape) -> Result<Self> {
        if mass.len() != shape.len() || product_weights.len() != shape.len() {
            return Err(Error::ShapeMismatch(
                "mass does not match product support".into(),
            ));
        }
        let density = mass
            .iter()
            .zip(product_weights)
            .map(|(&m, &w)| if w > T::zero() { m / w } else { T::infinity() })
            .collect();
        Ok(Self {
            shape,
            mass,
            density,
        })
    }

    /// The product coupling `π = P`.
    pub fn product(tuple: &MarginalTuple<T>) -> Result<Self> {
        let w = tuple.product_weights()?;
        let n = w.len();
        Self::from_density(vec![T::one(); n], &w, tuple.shape())
    }

    pub fn shape(&self) -> &[usize] {
        self.shape.shape()
    }

    pub fn product_shape(&self) -> &ProductShape {
        &self.shape
    }

    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    pub fn density(&self) -> &[T] {
        &self.density
    }

    pub fn marginal(&self, axis: usize) -> Vec<T> {
        self.shape.marginalize(&self.mass, axis)
    }

    /// Largest `|π_i(x_i) − μ_i(x_i)|` over all marginals and atoms.
    pub fn marginal_error(&self, tuple: &MarginalTuple<T>) -> Result<T> {
        if self.shape() != tuple.shape().shape() {
            return Err(Error::ShapeMismatch(
                "coupling does not match marginals".into(),
            ));
        }
        let mut err = T::zero();
        for (i, m) in tuple.marginals().iter().enumerate() {
            for (a, &b) in self.marginal(i).iter().zip(m.weights()) {
                err = err.max((*a - b).abs());
            }
        }
        Ok(err)
    }

    /// `D_φ(π, P) = Σ φ(ρ) P`.
    pub fn divergence(&self, div: &Divergence<T>, product_weights: &[T]) -> T {
        self.density
            .iter()
            .zip(product_weights)
            .map(|(&r, &w)| {
                if w > T::zero() {
                    div.phi_unchecked(r.max(T::zero())) * w
                } else if r > T::zero() {
                    T::infinity()
                } else {
                    T::zero()
                }
            })
            .sum()
    }

    /// Number of cells with density strictly above `threshold · max density`.
    pub fn support_count(&self, threshold: T) -> usize {
        let max = self.density.iter().fold(T::zero(), |m, &r| m.max(r));
        let cut = threshold.max(T::zero()) * max;
        self.density.iter().filter(|&&r| r > cut).count()
    }

    /// Largest `|π(x, y) − π(y, x)|` for a two-marginal square coupling.
    pub fn asymmetry(&self) -> Option<T> {
        let s = self.shape();
        if s.len() != 2 || s[0] != s[1] {
            return None;
        }
        let n = s[0];
        let mut worst = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.mass[i * n + j] - self.mass[j * n + i]).abs());
            }
        }
        Some(worst)
    }
}
