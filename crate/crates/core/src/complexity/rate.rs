//! Monte-Carlo harness for plug-in errors `Δ^n = E|OT(𝛍) − OT(𝛍̂^n)|`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::{Divergence, DivergenceKind};
use crate::error::{Error, Result};
use crate::measure::{empirical_with, stream_rng, Curve, MarginalTuple, SamplerSpec};
use crate::scalar::Real;
use crate::solver::{solve, CostKind, ProblemSpec, SolverOptions};
use crate::stats::{
    curvature_f_statistic, f1_critical, log_log_fit, mean, percentile_interval, resample_indices,
    std_dev,
};

/// How the ground-truth value is formed from grid discretizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMethod {
    /// Value on the finest grid.
    #[default]
    Finest,
    /// Richardson extrapolation of the two finest grids.
    Richardson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSpec {
    /// Grid resolutions passed to [`SamplerSpec::discretize`], ascending.
    pub resolutions: Vec<usize>,
    pub method: ReferenceMethod,
    /// Convergence order of the grid values in the resolution.
    pub order: f64,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self {
            resolutions: vec![32, 64],
            method: ReferenceMethod::Finest,
            order: 2.0,
        }
    }
}

/// Everything a rate experiment needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", deny_unknown_fields)]
pub struct RateSpec<T> {
    /// One sampler per marginal.
    pub samplers: Vec<SamplerSpec<T>>,
    #[serde(default = "default_cost")]
    pub cost: CostKind,
    pub divergence: DivergenceKind,
    pub epsilon: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    pub n_values: Vec<usize>,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub reference: ReferenceSpec,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_ci_level")]
    pub ci_level: f64,
    /// Significance level of the curvature test that may drop the smallest n.
    #[serde(default = "default_alpha")]
    pub lack_of_fit_alpha: f64,
    #[serde(default = "default_failures")]
    pub max_failure_fraction: f64,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn default_cost() -> CostKind {
    CostKind::SqEuclideanSum
}
fn default_p() -> f64 {
    2.0
}
fn default_bootstrap() -> usize {
    1000
}
fn default_ci_level() -> f64 {
    0.95
}
fn default_alpha() -> f64 {
    0.05
}
fn default_failures() -> f64 {
    0.1
}

impl<T: Real> RateSpec<T> {
    pub fn new(
        samplers: Vec<SamplerSpec<T>>,
        divergence: DivergenceKind,
        epsilon: f64,
        n_values: Vec<usize>,
        replications: usize,
    ) -> Self {
        Self {
            samplers,
            cost: default_cost(),
            divergence,
            epsilon,
            p: default_p(),
            n_values,
            replications,
            seed: 0,
            reference: ReferenceSpec::default(),
            bootstrap: default_bootstrap(),
            ci_level: default_ci_level(),
            lack_of_fit_alpha: default_alpha(),
            max_failure_fraction: default_failures(),
            solver: SolverOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.samplers.len() < 2 {
            return Err(Error::Config(
                "rate experiments need at least two samplers".into(),
            ));
        }
        if self.n_values.is_empty()
            || self.n_values.windows(2).any(|w| w[0] >= w[1])
            || self.n_values[0] == 0
        {
            return Err(Error::Config(
                "n_values must be positive and strictly increasing".into(),
            ));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if self.reference.resolutions.is_empty()
            || self.reference.resolutions.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config(
                "reference resolutions must be strictly increasing".into(),
            ));
        }
        if self.reference.method == ReferenceMethod::Richardson
            && self.reference.resolutions.len() < 2
        {
            return Err(Error::Config(
                "Richardson extrapolation needs two resolutions".into(),
            ));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::Config(format!(
                "ci_level must lie in (0, 1), got {}",
                self.ci_level
            )));
        }
        Ok(())
    }

    fn problem(&self, tuple: MarginalTuple<T>) -> Result<ProblemSpec<T>> {
        ProblemSpec::builtin(
            tuple,
            self.cost,
            Divergence::new(self.divergence)?,
            T::lit(self.epsilon),
        )
    }
}

/// Ground-truth proxy and its estimated discretization bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub value: f64,
    pub resolutions: Vec<usize>,
    /// Solved value at each resolution.
    pub grid_values: Vec<f64>,
    pub method: ReferenceMethod,
    /// Estimated `|value − OT(𝛍)|`.
    pub bias_estimate: f64,
}

fn richardson(v_coarse: f64, v_fine: f64, m_coarse: usize, m_fine: usize, order: f64) -> f64 {
    let a = (m_fine as f64).powf(order);
    let b = (m_coarse as f64).powf(order);
    (a * v_fine - b * v_coarse) / (a - b)
}

/// Solves the problem on every grid resolution and forms the reference value.
///
/// The bias of the finest value is estimated by the Richardson error
/// estimate `|R − v_fine|`; the bias of an extrapolated value by the change
/// between the two finest extrapolations, or, with only two grids, by the
/// same error estimate (a conservative stand-in).
pub fn build_reference<T: Real>(spec: &RateSpec<T>) -> Result<Reference> {
    spec.validate()?;
    let res = &spec.reference.resolutions;
    let grid_values = res
        .iter()
        .map(|&m| -> Result<f64> {
            let marg = spec
                .samplers
                .iter()
                .map(|s| s.discretize(m))
                .collect::<Result<Vec<_>>>()?;
            let tuple = MarginalTuple::new(marg, T::lit(spec.p))?;
            let prob = spec.problem(tuple)?;
            Ok(solve(&prob, &spec.solver)?.primal_value.to_f64_lossy())
        })
        .collect::<Result<Vec<f64>>>()?;
    let k = res.len();
    let order = spec.reference.order;
    let fine = grid_values[k - 1];
    let (value, bias_estimate) = if k == 1 {
        (fine, f64::NAN)
    } else {
        let r_top = richardson(grid_values[k - 2], fine, res[k - 2], res[k - 1], order);
        match spec.reference.method {
            ReferenceMethod::Finest => (fine, (r_top - fine).abs()),
            ReferenceMethod::Richardson if k >= 3 => {
                let r_low = richardson(
                    grid_values[k - 3],
                    grid_values[k - 2],
                    res[k - 3],
                    res[k - 2],
                    order,
                );
                (r_top, (r_top - r_low).abs())
            }
            ReferenceMethod::Richardson => (r_top, (r_top - fine).abs()),
        }
    };
    Ok(Reference {
        value,
        resolutions: res.clone(),
        grid_values,
        method: spec.reference.method,
        bias_estimate,
    })
}

/// Result of a rate experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub n_values: Vec<usize>,
    /// Mean of `|OT(𝛍̂^n) − reference|` over the successful replications.
    pub mean_abs_errors: Vec<f64>,
    /// Standard error of each mean.
    pub std_errors: Vec<f64>,
    pub replications: usize,
    /// Per `n`, the individual replication errors.
    pub errors: Vec<Vec<f64>>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_ci: (f64, f64),
    /// `n` values entering the fit.
    pub fitted_n: Vec<usize>,
    /// Curvature F statistic on the full set and its critical value.
    pub curvature_f: Option<f64>,
    pub curvature_critical: Option<f64>,
    pub dropped_smallest: bool,
    pub failures: usize,
    pub reference: Reference,
    /// Reference bias below 10 % of the smallest mean error.
    pub reference_ok: bool,
    /// Means nonincreasing in `n` up to two standard errors.
    pub monotone_2sigma: bool,
}

impl RateReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,mean_abs_error,std_error,replications\n");
        for (i, n) in self.n_values.iter().enumerate() {
            s.push_str(&format!(
                "{},{:e},{:e},{}\n",
                n,
                self.mean_abs_errors[i],
                self.std_errors[i],
                self.errors[i].len()
            ));
        }
        s
    }
}

/// Stream id of replication `rep` at the `k`-th sample size, marginal `i`.
fn stream_id(k: usize, rep: usize, i: usize, replications: usize, n_marg: usize) -> u64 {
    ((k * replications + rep) * n_marg + i) as u64
}

/// Runs the plug-in experiment against a precomputed reference.
/// Replications are solved in parallel; every draw uses its own ChaCha20
/// stream `(n index, replication, marginal)` of the master seed.
pub fn sample_complexity_run<T: Real>(
    spec: &RateSpec<T>,
    reference: &Reference,
) -> Result<RateReport> {
    spec.validate()?;
    let n_marg = spec.samplers.len();
    let r = spec.replications;
    let jobs: Vec<(usize, usize)> = (0..spec.n_values.len())
        .flat_map(|k| (0..r).map(move |rep| (k, rep)))
        .collect();
    let outcomes: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(k, rep)| -> Result<f64> {
            let n = spec.n_values[k];
            let marg = spec
                .samplers
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    empirical_with(
                        s,
                        n,
                        &mut stream_rng(spec.seed, stream_id(k, rep, i, r, n_marg)),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let tuple = MarginalTuple::new(marg, T::lit(spec.p))?;
            let prob = spec.problem(tuple)?;
            let v = solve(&prob, &spec.solver)?.primal_value.to_f64_lossy();
            Ok((v - reference.value).abs())
        })
        .collect();
    let mut errors = vec![Vec::with_capacity(r); spec.n_values.len()];
    let mut failures = 0;
    let mut first_failure = None;
    for ((k, _), o) in jobs.iter().zip(outcomes) {
        match o {
            Ok(e) => errors[*k].push(e),
            Err(e) => {
                failures += 1;
                first_failure.get_or_insert(e);
            }
        }
    }
    if failures as f64 > spec.max_failure_fraction * jobs.len() as f64
        || errors.iter().any(|e| e.is_empty())
    {
        return Err(Error::Numeric(format!(
            "{failures} of {} replications failed (first: {})",
            jobs.len(),
            first_failure.map(|e| e.to_string()).unwrap_or_default()
        )));
    }
    summarize(spec, reference.clone(), errors, failures)
}

fn summarize<T: Real>(
    spec: &RateSpec<T>,
    reference: Reference,
    errors: Vec<Vec<f64>>,
    failures: usize,
) -> Result<RateReport> {
    let means: Vec<f64> = errors.iter().map(|e| mean(e)).collect();
    let ses: Vec<f64> = errors
        .iter()
        .map(|e| std_dev(e) / (e.len() as f64).sqrt())
        .collect();
    let ns: Vec<f64> = spec.n_values.iter().map(|&n| n as f64).collect();
    let lx: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = means.iter().map(|v| v.ln()).collect();
    let curvature_f = if ly.iter().all(|v| v.is_finite()) {
        curvature_f_statistic(&lx, &ly)?
    } else {
        None
    };
    let curvature_critical = curvature_f.map(|_| f1_critical(lx.len() - 3, spec.lack_of_fit_alpha));
    let dropped_smallest = matches!((curvature_f, curvature_critical), (Some(f), Some(c)) if f > c);
    let start = usize::from(dropped_smallest);
    let fit = log_log_fit(&ns[start..], &means[start..])?;

    let mut rng = stream_rng(spec.seed, u64::MAX);
    let boot: Vec<f64> = (0..spec.bootstrap)
        .map(|_| {
            let m: Vec<f64> = errors[start..]
                .iter()
                .map(|e| {
                    mean(
                        &resample_indices(e.len(), &mut rng)
                            .iter()
                            .map(|&i| e[i])
                            .collect::<Vec<_>>(),
                    )
                })
                .collect();
            log_log_fit(&ns[start..], &m)
                .map(|f| f.slope)
                .unwrap_or(f64::NAN)
        })
        .collect();
    let slope_ci = if spec.bootstrap > 0 {
        percentile_interval(boot, spec.ci_level)?
    } else {
        (f64::NAN, f64::NAN)
    };
    let smallest = means.iter().cloned().fold(f64::INFINITY, f64::min);
    let reference_ok = reference.bias_estimate < 0.1 * smallest;
    let monotone_2sigma = means
        .windows(2)
        .zip(ses.windows(2))
        .all(|(m, s)| m[1] <= m[0] + 2.0 * (s[0] * s[0] + s[1] * s[1]).sqrt());
    Ok(RateReport {
        n_values: spec.n_values.clone(),
        mean_abs_errors: means,
        std_errors: ses,
        replications: spec.replications,
        errors,
        slope: fit.slope,
        intercept: fit.intercept,
        slope_ci,
        fitted_n: spec.n_values[start..].to_vec(),
        curvature_f,
        curvature_critical,
        dropped_smallest,
        failures,
        reference,
        reference_ok,
        monotone_2sigma,
    })
}

/// Reference plus run in one call.
pub fn rate_experiment<T: Real>(spec: &RateSpec<T>) -> Result<RateReport> {
    let reference = build_reference(spec)?;
    sample_complexity_run(spec, &reference)
}

/// The intrinsic-dimension demonstration: every marginal is the uniform law
/// of the curve parameter pushed onto `curve`. Returns the curve run together
/// with the baseline run whose marginals are uniform on the curve's bounding
/// box, at the same harness parameters (box grids use `box_resolutions`).
pub fn intrinsic_dimension_demo<T: Real>(
    curve: &Curve,
    template: &RateSpec<T>,
    box_resolutions: Option<Vec<usize>>,
) -> Result<(RateReport, RateReport)> {
    let n_marg = template.samplers.len().max(2);
    let mut on_curve = template.clone();
    on_curve.samplers = vec![SamplerSpec::Curve(curve.clone()); n_marg];
    let (lo, hi) = curve.bounding_box();
    let mut boxed = template.clone();
    boxed.samplers = vec![
        SamplerSpec::UniformBox {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
        };
        n_marg
    ];
    if let Some(r) = box_resolutions {
        boxed.reference.resolutions = r;
    }
    Ok((rate_experiment(&on_curve)?, rate_experiment(&boxed)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::DiscreteMeasure;

    #[test]
    fn richardson_removes_leading_term() {
        let v = |m: usize| 1.0 + 3.0 / (m * m) as f64;
        assert!((richardson(v(4), v(8), 4, 8, 2.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn resampling_reference_errors_shrink() {
        let m = DiscreteMeasure::<f64>::uniform_1d(&[0.0, 0.3, 1.0]).unwrap();
        let mut spec = RateSpec::new(
            vec![SamplerSpec::Resample(m.clone()), SamplerSpec::Resample(m)],
            DivergenceKind::Entropic,
            0.5,
            vec![8, 64, 512],
            30,
        );
        spec.reference.resolutions = vec![1];
        spec.bootstrap = 200;
        let r = rate_experiment(&spec).unwrap();
        assert_eq!(r.reference.grid_values.len(), 1);
        assert!(r.mean_abs_errors[2] < r.mean_abs_errors[0]);
        assert!(r.slope < 0.0);
        assert!(r.slope_ci.0 <= r.slope && r.slope <= r.slope_ci.1);
    }

    #[test]
    fn deterministic_per_seed() {
        let mut spec = RateSpec::<f64>::new(
            vec![SamplerSpec::UniformCube { dim: 1 }; 2],
            DivergenceKind::Entropic,
            1.0,
            vec![4, 8],
            3,
        );
        spec.reference.resolutions = vec![4, 8];
        spec.bootstrap = 10;
        assert_eq!(
            rate_experiment(&spec).unwrap(),
            rate_experiment(&spec).unwrap()
        );
    }
}
