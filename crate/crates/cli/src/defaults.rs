//! The single table of numeric defaults used when a config omits a field.
//! Bump [`DEFAULTS_VERSION`] whenever a value changes; configs may pin the
//! version they were written against.

use dotbench_core::stability::FeasibleSampler;
use dotbench_core::{DivergenceKind, SolverOptions, Sweep};
use serde::Serialize;

pub const DEFAULTS_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Defaults {
    pub version: u32,
    pub seed: u64,
    pub solver_tol: f64,
    pub solver_root_tol: f64,
    pub solver_max_iters: usize,
    /// Metric exponent of the product space.
    pub p: f64,
    /// Atoms per marginal of the figure instance, on `{i/(n−1)}`.
    pub figure_points: usize,
    pub figure_epsilon: f64,
    pub figure_divergences: &'static [DivergenceKind],
    /// Densities at or below `threshold · max density` count as zero.
    pub support_threshold: f64,
    pub stability_q: f64,
    /// Perturbation levels `2^{−k}` for `k` in this range.
    pub stability_level_exponents: (i32, i32),
    pub strong_convexity_pairs: usize,
    pub strong_convexity_weight_q: f64,
    pub strong_convexity_samplers: &'static [FeasibleSampler],
    pub heatmap_cell_px: f64,
}

pub const DEFAULTS: Defaults = Defaults {
    version: DEFAULTS_VERSION,
    seed: 0,
    solver_tol: 1e-9,
    solver_root_tol: 1e-12,
    solver_max_iters: 10_000,
    p: 2.0,
    figure_points: 10,
    figure_epsilon: 0.01,
    figure_divergences: &[
        DivergenceKind::Entropic,
        DivergenceKind::Alpha(2.0),
        DivergenceKind::Alpha(1.5),
    ],
    support_threshold: 0.0,
    stability_q: 2.0,
    stability_level_exponents: (3, 8),
    strong_convexity_pairs: 200,
    strong_convexity_weight_q: 2.0,
    strong_convexity_samplers: &[
        FeasibleSampler::Mixture,
        FeasibleSampler::Multiplicative { sigma: 0.3 },
        FeasibleSampler::Multiplicative { sigma: 2.0 },
    ],
    heatmap_cell_px: 32.0,
};

impl Defaults {
    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver_tol,
            root_tol: self.solver_root_tol,
            max_iters: self.solver_max_iters,
            sweep: Sweep::GaussSeidel,
            check_closed_form: false,
        }
    }

    pub fn stability_levels(&self) -> Vec<f64> {
        let (a, b) = self.stability_level_exponents;
        (a..=b).map(|k| 2f64.powi(-k)).collect()
    }
}
