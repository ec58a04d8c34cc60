//! Shared tolerance and integrator settings. Every threshold used by the
//! numerical pipeline is pinned here with its default value.

use serde::{Deserialize, Serialize};

/// Tolerances shared across modules.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Minimum pairwise pole distance; configurations below it are rejected.
    pub pole_separation: f64,
    /// Required gap between the leading eigenvalues at a rank-1 pole.
    pub eigen_gap: f64,
    /// Eigenvalue gap under which the matrix logarithm switches to the
    /// nilpotent 2x2 formula.
    pub log_gap: f64,
    /// Minimum distance from an evaluation point or path segment to a pole.
    pub evaluation_guard: f64,
    /// Residue-sum residual admitted at construction time.
    pub residue_sum: f64,
    /// The infinity expansion of a trivial system must have |R21| above this
    /// for the auxiliary chart to exist.
    pub gauge_r21_min: f64,
    /// Accepted residual of the commutator identity for U1 during
    /// deformation steps.
    pub u1_identity: f64,
    /// Newton refinement target for |u1| at a theta zero.
    pub newton_residual: f64,
    /// Newton iteration cap.
    pub newton_max_iter: usize,
    /// |b_i1| above this counts as a nonzero position-gradient entry.
    pub gradient_floor: f64,
    /// Noise floor for |u1| in disc scans; the boundary must stay above
    /// ten times this value.
    pub scan_noise_floor: f64,
    /// Coefficient-norm ceiling that flags a theta-crossing blowup when
    /// deforming a trivially normalized system.
    pub blowup_ceiling: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            pole_separation: 1e-6,
            eigen_gap: 1e-6,
            log_gap: 1e-8,
            evaluation_guard: 1e-7,
            residue_sum: 1e-10,
            gauge_r21_min: 1e-8,
            u1_identity: 1e-8,
            newton_residual: 1e-10,
            newton_max_iter: 25,
            gradient_floor: 1e-6,
            scan_noise_floor: 1e-9,
            blowup_ceiling: 1e8,
        }
    }
}

/// Settings for the adaptive Runge-Kutta integrator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest admissible step relative to the integration interval.
    pub h_min_rel: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h_min_rel: 1e-14, max_steps: 2_000_000 }
    }
}

impl IntegratorConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol * 1e-2, ..Self::default() }
    }
}
