//! JSON config schemas for every command, and loading with line/field
//! diagnostics. Omitted fields fall back to [`DEFAULTS`].

use std::path::Path;

use dotbench_core::complexity::RateSpec;
use dotbench_core::measure::Curve;
use dotbench_core::stability::{FeasibleSampler, PerturbSpec, RhoWeight};
use dotbench_core::{
    CostKind, CostSpec, DiscreteMeasure, Divergence, DivergenceKind, MarginalTuple, ProblemSpec,
    SolverOptions,
};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::defaults::{DEFAULTS, DEFAULTS_VERSION};
use crate::error::{CliError, CliResult};

/// Reads and parses `path`, reporting the line, column and field path of the
/// first error.
pub fn load<T: DeserializeOwned + Versioned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text, &path.display().to_string())
}

pub fn parse<T: DeserializeOwned + Versioned>(text: &str, origin: &str) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: T = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.to_string();
        let msg = msg.split(" at line ").next().unwrap_or(&msg).to_string();
        CliError::Config(format!(
            "{origin}:{}:{}: field `{field}`: {msg}",
            inner.line(),
            inner.column()
        ))
    })?;
    match cfg.version() {
        Some(v) if v != DEFAULTS_VERSION => Err(CliError::Config(format!(
            "{origin}: config targets defaults version {v}, this build provides version {DEFAULTS_VERSION}"
        ))),
        _ => Ok(cfg),
    }
}

pub trait Versioned {
    fn version(&self) -> Option<u32>;
}

macro_rules! versioned {
    ($($t:ty),*) => {$(
        impl Versioned for $t {
            fn version(&self) -> Option<u32> {
                self.version
            }
        }
    )*};
}

/// A marginal given by its atoms; uniform weights when `weights` is absent.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureInput {
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

impl MeasureInput {
    fn build(&self) -> CliResult<DiscreteMeasure> {
        Ok(match &self.weights {
            Some(w) => DiscreteMeasure::new(self.points.clone(), w.clone())?,
            None => DiscreteMeasure::uniform(self.points.clone())?,
        })
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CostInput {
    #[default]
    SqEuclideanSum,
    PowerDistance(f64),
    /// Row-major tensor over the product support.
    Explicit {
        tensor: Vec<f64>,
        lipschitz: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub version: Option<u32>,
    pub marginals: Vec<MeasureInput>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub cost: CostInput,
    pub divergence: DivergenceKind,
    pub epsilon: f64,
    #[serde(default)]
    pub solver: Option<SolverOptions>,
}

impl ProblemConfig {
    pub fn build(&self) -> CliResult<ProblemSpec> {
        let marg = self
            .marginals
            .iter()
            .enumerate()
            .map(|(i, m)| {
                m.build()
                    .map_err(|e| CliError::Config(format!("marginals[{i}]: {e}")))
            })
            .collect::<CliResult<Vec<_>>>()?;
        let tuple = MarginalTuple::new(marg, self.p.unwrap_or(DEFAULTS.p))?;
        let div = Divergence::new(self.divergence)?;
        Ok(match &self.cost {
            CostInput::SqEuclideanSum => {
                ProblemSpec::builtin(tuple, CostKind::SqEuclideanSum, div, self.epsilon)?
            }
            CostInput::PowerDistance(r) => {
                ProblemSpec::builtin(tuple, CostKind::PowerDistance(*r), div, self.epsilon)?
            }
            CostInput::Explicit { tensor, lipschitz } => {
                let cost = CostSpec::explicit(tensor.clone(), &tuple, *lipschitz)?;
                ProblemSpec::new(tuple, cost, div, self.epsilon)?
            }
        })
    }

    pub fn solver(&self) -> SolverOptions {
        self.solver.unwrap_or_else(|| DEFAULTS.solver())
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureConfig {
    #[serde(default)]
    pub version: Option<u32>,
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub divergences: Option<Vec<DivergenceKind>>,
    #[serde(default)]
    pub support_threshold: Option<f64>,
    #[serde(default)]
    pub solver: Option<SolverOptions>,
}

impl FigureConfig {
    pub fn points(&self) -> usize {
        self.points.unwrap_or(DEFAULTS.figure_points)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(DEFAULTS.figure_epsilon)
    }

    pub fn divergences(&self) -> Vec<DivergenceKind> {
        self.divergences
            .clone()
            .unwrap_or_else(|| DEFAULTS.figure_divergences.to_vec())
    }

    pub fn support_threshold(&self) -> f64 {
        self.support_threshold.unwrap_or(DEFAULTS.support_threshold)
    }

    pub fn solver(&self) -> SolverOptions {
        self.solver.unwrap_or_else(|| DEFAULTS.solver())
    }

    /// Two uniform marginals on `{i/(n−1)}` with cost `(x2 − x1)²`.
    pub fn instance(&self, kind: DivergenceKind) -> CliResult<ProblemSpec> {
        let n = self.points();
        if n < 2 {
            return Err(CliError::Config(format!(
                "figure needs at least 2 points, got {n}"
            )));
        }
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let m = DiscreteMeasure::uniform_1d(&xs)?;
        let tuple = MarginalTuple::new(vec![m.clone(), m], DEFAULTS.p)?;
        Ok(ProblemSpec::builtin(
            tuple,
            CostKind::SqEuclideanSum,
            Divergence::new(kind)?,
            self.epsilon(),
        )?)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    #[serde(default)]
    pub version: Option<u32>,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub perturbation: PerturbSpec,
    #[serde(default)]
    pub q: Option<f64>,
    /// Target distances `W_p(𝛍; 𝛍̃)`.
    #[serde(default)]
    pub levels: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrongConvexityConfig {
    #[serde(default)]
    pub version: Option<u32>,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub pairs: Option<usize>,
    #[serde(default)]
    pub samplers: Option<Vec<FeasibleSampler>>,
    #[serde(default)]
    pub weight: Option<RhoWeight>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityConfig {
    #[serde(default)]
    pub version: Option<u32>,
    pub experiment: RateSpec<f64>,
}

/// The experiment's `samplers` are replaced by the curve and its bounding
/// box; only their count matters (two when fewer are given).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicConfig {
    #[serde(default)]
    pub version: Option<u32>,
    pub curve: Curve,
    pub experiment: RateSpec<f64>,
    /// Grid resolutions for the bounding-box reference; the experiment's own
    /// resolutions when absent.
    #[serde(default)]
    pub box_resolutions: Option<Vec<usize>>,
}

versioned!(
    ProblemConfig,
    FigureConfig,
    StabilityConfig,
    StrongConvexityConfig,
    ComplexityConfig,
    IntrinsicConfig
);
