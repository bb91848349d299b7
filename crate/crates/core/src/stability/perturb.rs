use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_ot::marginal_tuple_distance;
use crate::measure::{stream_rng, DiscreteMeasure, MarginalTuple};
use crate::scalar::Real;

/// Perturbation families with a scalar amplitude `s`. Atom counts never change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbSpec {
    /// Atom `k` of marginal `i` moves to `x_k + s u_{ik}` with `u_{ik}` uniform on
    /// `[−1, 1]^d`, drawn once per seed. With `weight_mix > 0` the weights are
    /// also moved towards a flat Dirichlet draw by the fraction
    /// `min(1, s · weight_mix)`.
    Jitter {
        #[serde(default)]
        weight_mix: f64,
    },
    /// `μ̃_i = μ_i` translated by `s t_i`.
    Translate { shifts: Vec<Vec<f64>> },
}

impl Default for PerturbSpec {
    fn default() -> Self {
        PerturbSpec::Jitter { weight_mix: 0.0 }
    }
}

/// Perturbs `tuple` with amplitude `s`.
pub fn perturb<T: Real>(
    tuple: &MarginalTuple<T>,
    spec: &PerturbSpec,
    s: T,
    seed: u64,
) -> Result<MarginalTuple<T>> {
    let marginals = tuple
        .marginals()
        .iter()
        .enumerate()
        .map(|(i, m)| -> Result<DiscreteMeasure<T>> {
            match spec {
                PerturbSpec::Jitter { weight_mix } => {
                    let mut rng = stream_rng(seed, i as u64);
                    let pts: Vec<Vec<T>> = m
                        .points()
                        .iter()
                        .map(|x| {
                            x.iter()
                                .map(|&v| v + s * T::lit(2.0 * rng.gen::<f64>() - 1.0))
                                .collect()
                        })
                        .collect();
                    let mut w = m.weights().to_vec();
                    if *weight_mix > 0.0 {
                        let raw: Vec<f64> = (0..w.len())
                            .map(|_| -(1.0 - rng.gen::<f64>()).ln())
                            .collect();
                        let tot: f64 = raw.iter().sum();
                        let lam = T::lit((s.to_f64_lossy() * weight_mix).min(1.0));
                        for (wk, r) in w.iter_mut().zip(&raw) {
                            *wk = (T::one() - lam) * *wk + lam * T::lit(r / tot);
                        }
                        let sum: T = w.iter().copied().sum();
                        w.iter_mut().for_each(|v| *v /= sum);
                    }
                    DiscreteMeasure::new(pts, w)
                }
                PerturbSpec::Translate { shifts } => {
                    let t = shifts.get(i).ok_or_else(|| {
                        Error::Config(format!("translation has no shift for marginal {i}"))
                    })?;
                    if t.len() != m.dim() {
                        return Err(Error::DimensionMismatch {
                            expected: m.dim(),
                            found: t.len(),
                        });
                    }
                    let t: Vec<T> = t.iter().map(|&v| s * T::lit(v)).collect();
                    m.translate(&t)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    MarginalTuple::new(marginals, tuple.p())
}

/// A perturbed tuple with its amplitude and achieved distance.
#[derive(Debug, Clone)]
pub struct Perturbed<T> {
    pub marginals: MarginalTuple<T>,
    pub scale: T,
    /// `W_p(𝛍; 𝛍̃)`.
    pub delta: T,
}

/// Finds the amplitude whose perturbation sits at distance `target` from
/// `tuple` (doubling, then bisection to relative accuracy `1e−9`).
pub fn perturb_to_level<T: Real>(
    tuple: &MarginalTuple<T>,
    spec: &PerturbSpec,
    target: T,
    seed: u64,
) -> Result<Perturbed<T>> {
    if !(target >= T::zero()) || !target.is_finite() {
        return Err(Error::Config(format!(
            "perturbation level must be finite and >= 0, got {target}"
        )));
    }
    let p = tuple.p();
    let eval = |s: T| -> Result<(MarginalTuple<T>, T)> {
        let m = perturb(tuple, spec, s, seed)?;
        let d = marginal_tuple_distance(tuple, &m, p)?;
        Ok((m, d))
    };
    if target == T::zero() {
        return Ok(Perturbed {
            marginals: tuple.clone(),
            scale: T::zero(),
            delta: T::zero(),
        });
    }
    let rel = T::lit(1e-9);
    let mut lo = T::zero();
    let mut hi = target;
    let mut best = eval(hi)?;
    let mut k = 0;
    while best.1 < target {
        lo = hi;
        hi = hi + hi;
        best = eval(hi)?;
        k += 1;
        if k > 60 {
            return Err(Error::Numeric(format!(
                "perturbation cannot reach distance {target}"
            )));
        }
    }
    let mut best_s = hi;
    for _ in 0..200 {
        if (best.1 - target).abs() <= rel * target {
            break;
        }
        let mid = lo + (hi - lo) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let cand = eval(mid)?;
        if cand.1 < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (cand.1 - target).abs() < (best.1 - target).abs() {
            best = cand;
            best_s = mid;
        }
    }
    Ok(Perturbed {
        marginals: best.0,
        scale: best_s,
        delta: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tuple() -> MarginalTuple<f64> {
        let pts: Vec<f64> = (0..6).map(|i| i as f64 / 5.0).collect();
        let m = DiscreteMeasure::uniform_1d(&pts).unwrap();
        MarginalTuple::new(vec![m.clone(), m], 2.0).unwrap()
    }

    #[test]
    fn jitter_reaches_target() {
        let t = tuple();
        for target in [0.125, 0.01, 1.0 / 256.0] {
            let p = perturb_to_level(&t, &PerturbSpec::default(), target, 7).unwrap();
            assert!(
                (p.delta - target).abs() <= 1e-8 * target,
                "{} vs {target}",
                p.delta
            );
        }
    }

    #[test]
    fn translation_distance_is_exact() {
        let t = tuple();
        let spec = PerturbSpec::Translate {
            shifts: vec![vec![3.0], vec![-4.0]],
        };
        let p = perturb_to_level(&t, &spec, 0.5, 0).unwrap();
        assert!((p.scale - 0.1).abs() < 1e-9);
    }

    #[test]
    fn deterministic_per_seed() {
        let t = tuple();
        let a = perturb(&t, &PerturbSpec::Jitter { weight_mix: 0.5 }, 0.05, 3).unwrap();
        let b = perturb(&t, &PerturbSpec::Jitter { weight_mix: 0.5 }, 0.05, 3).unwrap();
        assert_eq!(a, b);
    }
}
