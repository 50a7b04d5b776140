//! Report JSON. Field names are part of the public interface (see README).

use std::collections::BTreeMap;

use halfrange_core::problem::AdmissibilityReport;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub mode: &'static str,
    pub strict: bool,
    pub status: &'static str,
    pub exit_code: i32,
    /// Message of the error that ended the run, if any.
    pub error: Option<String>,
    pub problem: ProblemSummary,
    /// `null` for presets without coefficients.
    pub admissibility: Option<AdmissibilityReport>,
    pub admissibility_pass: Option<bool>,
    pub kinetic_axioms: Option<KineticAxioms>,
    pub spectrum: Option<SpectrumSummary>,
    pub gamma: Option<f64>,
    pub beta_proj: Option<f64>,
    pub restriction_conditions: Option<[f64; 2]>,
    pub contraction: Option<ContractionSummary>,
    pub boundary_residuals: Option<BoundaryResiduals>,
    pub oracle: Option<OracleSummary>,
    pub cache: CacheSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<&'static str, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSummary {
    pub preset: &'static str,
    pub label: String,
    pub dim: usize,
    pub model_hash: String,
    /// `null` for the half-space.
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KineticAxioms {
    pub pass: bool,
    pub failure: Option<String>,
    /// Worst relative defect of `⟨Ah, g⟩ = ⟨h, Ag⟩` over random pairs.
    pub pairing_defect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub min_abs: f64,
    pub max_abs: f64,
    pub n_plus: usize,
    pub n_minus: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionSummary {
    pub tau: f64,
    pub norm_g_plus: f64,
    pub norm_g_minus: f64,
}

/// Recomputed from the emitted solution CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryResiduals {
    pub plus: f64,
    /// 0 on the half-space.
    pub minus: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSummary {
    pub nx: usize,
    pub extrapolated: bool,
    pub unknowns: usize,
    pub lower_bandwidth: usize,
    pub upper_bandwidth: usize,
    pub solver_residual: f64,
    /// Relative `L²(0, τ; H)` distance on the oracle's own nodes.
    pub l2_relative_difference: f64,
    pub max_delta: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub deltas: Vec<Delta>,
}

/// `‖ψ_spectral(x) − ψ_oracle(x)‖_W / ‖ψ_oracle(x)‖_W`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Delta {
    pub x: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CacheSummary {
    pub enabled: bool,
    pub hit: bool,
    pub path: Option<String>,
}
