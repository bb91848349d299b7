//! φ-divergence generators and their convex conjugates.
//!
//! Every kind is stored as a conjugate pair `(φ, ψ)` with
//! `ψ(y) = sup_{x ≥ 0} (x y − φ(x))`. The conjugates are hard-coded in closed
//! form:
//!
//! | kind          | φ(x)                                   | ψ'(y)                              |
//! |---------------|----------------------------------------|------------------------------------|
//! | `Entropic`    | `x log x`                              | `exp(y − 1)`                       |
//! | `Alpha(α)`    | `(x^α − α(x − 1) − 1) / (α(α − 1))`    | `((1 + (α − 1) y)_+)^{1/(α−1)}`    |
//! | `PolyDual(β)` | `k (x^{β/(β−1)} − 1)`                  | `β (y_+)^{β−1}`                    |
//!
//! For `Alpha(α)` the conjugate is `ψ(y) = ((1 + (α − 1) y)_+)^{α/(α−1)} / α − 1/α`.
//! For `PolyDual(β)`, `ψ(y) = (y_+)^β + k` with `k = (β − 1)/β · β^{−1/(β−1)}`, the
//! constant that makes `φ(1) = 0`.
//!
//! The regularization strength ε never enters a [`Divergence`]; the solver
//! divides the cost by ε instead. For `PolyDual(β)` this means the rescaled
//! problem uses exactly `ψ_ε(y) = (y_+)^β / ε^{β−1}` as the conjugate of `ε φ`
//! (up to the additive constant).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{pos, Real};

/// Which generator a divergence uses. Serializes as the config fragment
/// `"entropic" | {"alpha": a} | {"poly_beta": b}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    Entropic,
    Alpha(f64),
    #[serde(rename = "poly_beta")]
    PolyDual(u32),
}

impl std::fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DivergenceKind::Entropic => write!(f, "entropic"),
            DivergenceKind::Alpha(a) => write!(f, "alpha({a})"),
            DivergenceKind::PolyDual(b) => write!(f, "poly_beta({b})"),
        }
    }
}

/// A conjugate pair `(φ, ψ)` with regularity metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence<T> {
    kind: DivergenceKind,
    /// α for `Alpha`, β for `PolyDual`, unused for `Entropic`.
    order: T,
    /// Additive constant of the `PolyDual` pair.
    shift: T,
    x0: T,
    delta: T,
}

impl<T: Real> Divergence<T> {
    pub fn new(kind: DivergenceKind) -> Result<Self> {
        let (order, shift, x0, delta) = match kind {
            DivergenceKind::Entropic => (T::one(), T::zero(), T::one(), T::one()),
            DivergenceKind::Alpha(a) => {
                if !(a > 1.0 && a <= 2.0) {
                    return Err(Error::Config(format!(
                        "alpha divergence needs 1 < alpha <= 2, got {a}"
                    )));
                }
                (T::lit(a), T::zero(), T::zero(), T::lit(0.5 / (a - 1.0)))
            }
            DivergenceKind::PolyDual(b) => {
                if b < 2 {
                    return Err(Error::Config(format!(
                        "poly_beta divergence needs beta >= 2, got {b}"
                    )));
                }
                let bf = f64::from(b);
                let x0 = bf.powf(-1.0 / (bf - 1.0));
                let k = (bf - 1.0) / bf * x0;
                (T::lit(bf), T::lit(k), T::lit(x0), T::lit(0.5 * x0))
            }
        };
        Ok(Self {
            kind,
            order,
            shift,
            x0,
            delta,
        })
    }

    pub fn entropic() -> Self {
        Self::new(DivergenceKind::Entropic).expect("entropic is always valid")
    }

    pub fn alpha(a: f64) -> Result<Self> {
        Self::new(DivergenceKind::Alpha(a))
    }

    pub fn poly_dual(beta: u32) -> Result<Self> {
        Self::new(DivergenceKind::PolyDual(beta))
    }

    pub fn kind(&self) -> DivergenceKind {
        self.kind
    }

    /// Anchor with `ψ'(x0) = 1`.
    pub fn x0(&self) -> T {
        self.x0
    }

    /// ψ is strictly convex on `[x0 − δ, ∞)`.
    pub fn delta(&self) -> T {
        self.delta
    }

    /// True when ψ' vanishes on a half-line, so optimal couplings can be sparse.
    pub fn is_sparse(&self) -> bool {
        !matches!(self.kind, DivergenceKind::Entropic)
    }

    /// The generator φ on `[0, ∞)`.
    pub fn phi(&self, x: T) -> Result<T> {
        if x < T::zero() || x.is_nan() {
            return Err(Error::Domain(format!("phi needs x >= 0, got {x}")));
        }
        Ok(self.phi_unchecked(x))
    }

    pub(crate) fn phi_unchecked(&self, x: T) -> T {
        match self.kind {
            DivergenceKind::Entropic => {
                if x == T::zero() {
                    T::zero()
                } else {
                    x * x.ln()
                }
            }
            DivergenceKind::Alpha(_) => {
                let a = self.order;
                (x.powf(a) - a * (x - T::one()) - T::one()) / (a * (a - T::one()))
            }
            DivergenceKind::PolyDual(_) => {
                let b = self.order;
                let r = b / (b - T::one());
                self.shift * (x.powf(r) - T::one())
            }
        }
    }

    /// φ'(x) for `x > 0`.
    pub fn phi_prime(&self, x: T) -> T {
        match self.kind {
            DivergenceKind::Entropic => x.ln() + T::one(),
            DivergenceKind::Alpha(_) => {
                let a = self.order;
                (x.powf(a - T::one()) - T::one()) / (a - T::one())
            }
            DivergenceKind::PolyDual(_) => {
                let b = self.order;
                let r = b / (b - T::one());
                self.shift * r * x.powf(r - T::one())
            }
        }
    }

    /// φ''(x) for `x > 0`.
    pub fn phi_second(&self, x: T) -> T {
        match self.kind {
            DivergenceKind::Entropic => x.recip(),
            DivergenceKind::Alpha(_) => x.powf(self.order - T::lit(2.0)),
            DivergenceKind::PolyDual(_) => {
                let b = self.order;
                let r = b / (b - T::one());
                self.shift * r * (r - T::one()) * x.powf(r - T::lit(2.0))
            }
        }
    }

    /// The conjugate ψ.
    pub fn psi(&self, y: T) -> T {
        match self.kind {
            DivergenceKind::Entropic => (y - T::one()).exp(),
            DivergenceKind::Alpha(_) => {
                let a = self.order;
                let u = pos(T::one() + (a - T::one()) * y);
                let beta = a / (a - T::one());
                (u.powf(beta) - T::one()) / a
            }
            DivergenceKind::PolyDual(_) => pos(y).powf(self.order) + self.shift,
        }
    }

    /// ψ', which is the density map `y ↦ dπ/dP`.
    pub fn psi_prime(&self, y: T) -> T {
        match self.kind {
            DivergenceKind::Entropic => (y - T::one()).exp(),
            DivergenceKind::Alpha(_) => {
                let a = self.order;
                let u = T::one() + (a - T::one()) * y;
                if u <= T::zero() {
                    T::zero()
                } else if a == T::lit(2.0) {
                    u
                } else {
                    u.powf((a - T::one()).recip())
                }
            }
            DivergenceKind::PolyDual(_) => {
                if y <= T::zero() {
                    T::zero()
                } else {
                    self.order * y.powf(self.order - T::one())
                }
            }
        }
    }

    /// ψ''. Taken as zero on the flat side of a kink.
    pub fn psi_second(&self, y: T) -> T {
        match self.kind {
            DivergenceKind::Entropic => (y - T::one()).exp(),
            DivergenceKind::Alpha(_) => {
                let a = self.order;
                let u = T::one() + (a - T::one()) * y;
                if u <= T::zero() {
                    T::zero()
                } else {
                    u.powf((T::lit(2.0) - a) / (a - T::one()))
                }
            }
            DivergenceKind::PolyDual(_) => {
                if y <= T::zero() {
                    T::zero()
                } else {
                    let b = self.order;
                    b * (b - T::one()) * y.powf(b - T::lit(2.0))
                }
            }
        }
    }

    /// `(λ1, λ2)` with `1/φ''(x) ≤ λ1 + λ2 x` on `(0, ∞)`.
    pub fn convexity_params(&self) -> Result<(T, T)> {
        match self.kind {
            DivergenceKind::Entropic => Ok((T::zero(), T::one())),
            DivergenceKind::Alpha(_) => {
                let a = self.order;
                Ok((a - T::one(), T::lit(2.0) - a))
            }
            // φ = (x² − 1)/4 has constant φ'' = 1/2.
            DivergenceKind::PolyDual(2) => Ok((T::lit(2.0), T::zero())),
            DivergenceKind::PolyDual(b) => Err(Error::Unsupported(format!(
                "no (lambda1, lambda2) certificate for poly_beta({b})"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kinds() -> Vec<Divergence<f64>> {
        vec![
            Divergence::entropic(),
            Divergence::alpha(2.0).unwrap(),
            Divergence::alpha(1.5).unwrap(),
            Divergence::alpha(1.2).unwrap(),
            Divergence::poly_dual(2).unwrap(),
            Divergence::poly_dual(3).unwrap(),
        ]
    }

    /// Golden-section maximization of a concave function on `[lo, hi]`.
    fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut a = hi - g * (hi - lo);
        let mut b = lo + g * (hi - lo);
        let (mut fa, mut fb) = (f(a), f(b));
        for _ in 0..200 {
            if fa < fb {
                lo = a;
                a = b;
                fa = fb;
                b = lo + g * (hi - lo);
                fb = f(b);
            } else {
                hi = b;
                b = a;
                fb = fa;
                a = hi - g * (hi - lo);
                fa = f(a);
            }
        }
        f(lo).max(f(hi)).max(fa).max(fb)
    }

    /// Brute-force `sup_{x ∈ [0, xmax]} (x y − φ(x))`: grid search then golden refinement.
    fn conjugate_oracle(d: &Divergence<f64>, y: f64, xmax: f64) -> f64 {
        let steps = 20_000;
        let h = xmax / steps as f64;
        let obj = |x: f64| x * y - d.phi(x).unwrap();
        let (mut best_k, mut best) = (0usize, obj(0.0));
        for k in 1..=steps {
            let v = obj(k as f64 * h);
            if v > best {
                best = v;
                best_k = k;
            }
        }
        let lo = (best_k.saturating_sub(1)) as f64 * h;
        let hi = ((best_k + 1).min(steps)) as f64 * h;
        golden_max(obj, lo, hi).max(best)
    }

    #[test]
    fn phi_at_one_vanishes() {
        for d in kinds() {
            assert!(d.phi(1.0).unwrap().abs() < 1e-15, "{:?}", d.kind());
        }
    }

    #[test]
    fn phi_examples() {
        assert_eq!(Divergence::<f64>::entropic().phi(1.0).unwrap(), 0.0);
        let a2 = Divergence::<f64>::alpha(2.0).unwrap();
        assert!((a2.phi(3.0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn phi_rejects_negative() {
        let d = Divergence::<f64>::entropic();
        assert!(matches!(d.phi(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn alpha_one_and_a_half_phi_matches_conjugate_of_psi() {
        // φ(2) = sup_y (2y − ψ(y)); the maximizer sits where ψ'(y) = 2.
        let d = Divergence::<f64>::alpha(1.5).unwrap();
        let obj = |y: f64| 2.0 * y - d.psi(y);
        let steps = 20_000;
        let (lo, hi) = (-5.0, 10.0);
        let h = (hi - lo) / steps as f64;
        let mut best_k = 0;
        let mut best = f64::NEG_INFINITY;
        for k in 0..=steps {
            let v = obj(lo + k as f64 * h);
            if v > best {
                best = v;
                best_k = k;
            }
        }
        let a = lo + (best_k as f64 - 1.0) * h;
        let b = lo + (best_k as f64 + 1.0) * h;
        let sup = golden_max(obj, a, b);
        assert!((d.phi(2.0).unwrap() - sup).abs() < 1e-9);
    }

    #[test]
    fn psi_examples() {
        let e = Divergence::<f64>::entropic();
        assert!((e.psi(1.0) - 1.0).abs() < 1e-15);
        assert!((e.psi_prime(1.0) - 1.0).abs() < 1e-15);
        let a2 = Divergence::<f64>::alpha(2.0).unwrap();
        assert_eq!(a2.psi_prime(-2.0), 0.0);
        let a15 = Divergence::<f64>::alpha(1.5).unwrap();
        let oracle = conjugate_oracle(&a15, 0.7, 100.0);
        assert!((a15.psi(0.7) - oracle).abs() < 1e-6);
    }

    #[test]
    fn alpha_two_closed_form() {
        let a2 = Divergence::<f64>::alpha(2.0).unwrap();
        for &y in &[-3.0f64, -1.0, -0.5, 0.0, 0.4, 2.0] {
            let u: f64 = (1.0 + y).max(0.0);
            assert!((a2.psi(y) - (u * u - 1.0) / 2.0).abs() < 1e-15);
            assert_eq!(a2.psi_prime(y), u);
        }
    }

    #[test]
    fn conjugacy_against_brute_force() {
        for d in kinds() {
            for k in 0..=40 {
                let y = -5.0 + 0.25 * k as f64;
                let oracle = conjugate_oracle(&d, y, 100.0);
                assert!(
                    (d.psi(y) - oracle).abs() <= 1e-6,
                    "{:?} y={y}: {} vs {oracle}",
                    d.kind(),
                    d.psi(y)
                );
            }
        }
    }

    #[test]
    fn anchor_has_unit_slope() {
        for d in kinds() {
            assert!((d.psi_prime(d.x0()) - 1.0).abs() <= 1e-12, "{:?}", d.kind());
            // strict convexity just below the anchor
            let y = d.x0() - 0.99 * d.delta();
            assert!(d.psi_second(y) > 0.0, "{:?}", d.kind());
        }
    }

    #[test]
    fn psi_derivatives_match_finite_differences() {
        let h = 1e-6;
        for d in kinds() {
            for &y in &[-0.3, 0.2, 0.9, 1.7] {
                let fd1 = (d.psi(y + h) - d.psi(y - h)) / (2.0 * h);
                assert!((fd1 - d.psi_prime(y)).abs() < 1e-6, "{:?}", d.kind());
                let fd2 = (d.psi_prime(y + h) - d.psi_prime(y - h)) / (2.0 * h);
                assert!((fd2 - d.psi_second(y)).abs() < 1e-5, "{:?}", d.kind());
            }
        }
    }

    #[test]
    fn convexity_params_examples() {
        assert_eq!(
            Divergence::<f64>::entropic().convexity_params().unwrap(),
            (0.0, 1.0)
        );
        assert_eq!(
            Divergence::<f64>::alpha(2.0)
                .unwrap()
                .convexity_params()
                .unwrap(),
            (1.0, 0.0)
        );
        assert_eq!(
            Divergence::<f64>::alpha(1.5)
                .unwrap()
                .convexity_params()
                .unwrap(),
            (0.5, 0.5)
        );
        assert!(matches!(
            Divergence::<f64>::poly_dual(3).unwrap().convexity_params(),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn convexity_certificate_on_log_grid() {
        for d in kinds() {
            let Ok((l1, l2)) = d.convexity_params() else {
                continue;
            };
            for k in 0..=240 {
                let x = 10f64.powf(-6.0 + 0.05 * k as f64);
                let lhs = 1.0 / d.phi_second(x);
                let rhs = l1 + l2 * x;
                assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12, "{:?} x={x}", d.kind());
            }
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Divergence::<f64>::alpha(1.0).is_err());
        assert!(Divergence::<f64>::alpha(2.5).is_err());
        assert!(Divergence::<f64>::poly_dual(1).is_err());
    }

    #[test]
    fn config_fragment_roundtrip() {
        let k: DivergenceKind = serde_json::from_str("\"entropic\"").unwrap();
        assert_eq!(k, DivergenceKind::Entropic);
        let k: DivergenceKind = serde_json::from_str("{\"alpha\": 1.5}").unwrap();
        assert_eq!(k, DivergenceKind::Alpha(1.5));
        let k: DivergenceKind = serde_json::from_str("{\"poly_beta\": 2}").unwrap();
        assert_eq!(k, DivergenceKind::PolyDual(2));
        assert!(serde_json::from_str::<DivergenceKind>("\"kl\"").is_err());
    }

    #[test]
    fn f32_pair_is_consistent() {
        let d = Divergence::<f32>::alpha(1.5).unwrap();
        assert!((d.psi_prime(0.0) - 1.0).abs() < 1e-6);
        assert!(d.phi(1.0).unwrap().abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn psi_prime_is_monotone(y1 in -10.0f64..10.0, y2 in -10.0f64..10.0, which in 0usize..6) {
            let d = kinds()[which];
            let (lo, hi) = if y1 <= y2 { (y1, y2) } else { (y2, y1) };
            prop_assert!(d.psi_prime(lo) <= d.psi_prime(hi));
            prop_assert!(d.psi_prime(lo) >= 0.0);
        }

        #[test]
        fn fenchel_young(x in 0.0f64..20.0, y in -4.0f64..3.0, which in 0usize..6) {
            let d = kinds()[which];
            prop_assert!(x * y <= d.phi(x).unwrap() + d.psi(y) + 1e-12);
            let xs = d.psi_prime(y);
            let gap = d.phi(xs).unwrap() + d.psi(y) - xs * y;
            prop_assert!(gap.abs() <= 1e-9 * (1.0 + xs.abs() * y.abs()), "gap {}", gap);
        }
    }
}
