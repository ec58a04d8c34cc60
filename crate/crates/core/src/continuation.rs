//! Transport of fundamental solutions along complex paths, monodromy
//! matrices, normalized logarithms, irreducibility and apparent-singularity
//! checks.
//!
//! Conventions: a fundamental solution is normalized to the identity at the
//! start of the path, so integrating `dY/dz = B(z) Y` around a closed
//! counterclockwise loop returns the monodromy matrix in that basis.
//! Transport operators compose by left multiplication.

use crate::config::{IntegratorConfig, Tolerances};
use crate::connection::{evaluate_matrix, validate_connection, Normalization, RationalConnection};
use crate::error::{Error, Result};
use crate::mat2;
use crate::ode::{AdaptiveRk, StepVerdict};
use crate::path::{monodromy_loop, ComplexPath};
use crate::{C64, CMat2};

/// Result of transporting a matrix along a path.
#[derive(Debug, Clone)]
pub struct TransportResult {
    pub matrix: CMat2,
    /// Smallest |det Y| seen at accepted steps relative to the running
    /// maximum; values near zero indicate determinant collapse.
    pub det_floor_ratio: f64,
    /// Set when the determinant dipped below the collapse threshold.
    pub det_collapse: bool,
    pub steps: usize,
}

fn flatten(m: &CMat2) -> [C64; 4] {
    [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
}

fn unflatten(v: &[C64]) -> CMat2 {
    CMat2::new(v[0], v[1], v[2], v[3])
}

/// Integrates `dY/dz = B(z) Y` along `p` starting from `y0`.
///
/// The path must stay beyond the evaluation guard from every pole and `y0`
/// must be invertible. The local error per step is controlled by `tol`.
pub fn integrate_along_path(
    c: &RationalConnection,
    p: &ComplexPath,
    y0: &CMat2,
    tol: f64,
    tolerances: &Tolerances,
) -> Result<TransportResult> {
    p.validate_against(c, tolerances.evaluation_guard)?;
    if mat2::det(y0).norm() == 0.0 {
        return Err(Error::NonInvertible(0.0));
    }
    let rk = AdaptiveRk::new(IntegratorConfig { rtol: tol, atol: tol * 1e-2, ..Default::default() });

    let mut y = flatten(y0);
    let mut det_max = mat2::det(y0).norm();
    let mut det_floor_ratio = 1.0_f64;
    let mut steps = 0usize;

    for (za, zb) in p.segments() {
        let dz = zb - za;
        if dz.norm() == 0.0 {
            continue;
        }
        let rhs = |s: f64, v: &[C64], dv: &mut [C64]| -> Result<()> {
            let z = za + dz * s;
            let b = evaluate_matrix(c, z, tolerances)?;
            let m = unflatten(v);
            let d = b * m * dz;
            dv.copy_from_slice(&flatten(&d));
            Ok(())
        };
        let sol = rk.integrate(rhs, 0.0, 1.0, &y, |_s, v| {
            let d = mat2::det(&unflatten(v)).norm();
            det_max = det_max.max(d);
            det_floor_ratio = det_floor_ratio.min(d / det_max);
            StepVerdict::Accept
        })?;
        steps += sol.steps;
        y.copy_from_slice(&sol.y);
    }

    Ok(TransportResult {
        matrix: unflatten(&y),
        det_floor_ratio,
        det_collapse: det_floor_ratio < 1e-12,
        steps,
    })
}

/// Monodromy matrix around pole `i`: transport of the identity along the
/// auto-constructed counterclockwise loop from `base`.
pub fn monodromy_matrix(
    c: &RationalConnection,
    i: usize,
    base: C64,
    tol: f64,
    tolerances: &Tolerances,
) -> Result<CMat2> {
    let loop_path = monodromy_loop(c, i, base, tolerances.evaluation_guard)?;
    Ok(integrate_along_path(c, &loop_path, &mat2::identity(), tol, tolerances)?.matrix)
}

/// Normalized monodromy logarithm: `exp(2 pi i E) = g` with the eigenvalue
/// real parts in `[0, 1)`.
pub fn normalized_log(g: &CMat2, tolerances: &Tolerances) -> Result<CMat2> {
    mat2::normalized_log(g, tolerances.log_gap)
}

/// Monodromy data of a connection: loops, matrices and normalized logs for
/// every pole, in pole order, from a common base point.
#[derive(Debug, Clone)]
pub struct MonodromyData {
    pub base_point: C64,
    pub loops: Vec<ComplexPath>,
    pub matrices: Vec<CMat2>,
    pub normalized_logs: Vec<CMat2>,
    /// Eigenvalues of each normalized log.
    pub exponents: Vec<(C64, C64)>,
    pub tol: f64,
}

impl MonodromyData {
    /// Largest deviation of `exp(2 pi i E_i)` from `G_i`.
    pub fn max_reconstruction_error(&self) -> f64 {
        self.matrices
            .iter()
            .zip(&self.normalized_logs)
            .map(|(g, e)| mat2::norm(&(mat2::exp(&(e * (mat2::TWO_PI * mat2::I))) - g)))
            .fold(0.0, f64::max)
    }

    pub fn traces(&self) -> Vec<C64> {
        self.matrices.iter().map(mat2::trace).collect()
    }

    pub fn dets(&self) -> Vec<C64> {
        self.matrices.iter().map(mat2::det).collect()
    }
}

/// Default base point for monodromy loops: above the pole cloud.
pub fn default_base_point(c: &RationalConnection) -> C64 {
    let n = c.poles.len() as f64;
    let centroid = c.poles.iter().map(|p| p.position).sum::<C64>() / n;
    let spread = c
        .poles
        .iter()
        .map(|p| (p.position - centroid).norm())
        .fold(0.0, f64::max);
    centroid + C64::new(0.0, 1.5 * spread + 1.0)
}

/// Computes loops, monodromy matrices and normalized logs for all poles.
pub fn compute_monodromy_data(
    c: &RationalConnection,
    base: Option<C64>,
    tol: f64,
    tolerances: &Tolerances,
) -> Result<MonodromyData> {
    let base_point = base.unwrap_or_else(|| default_base_point(c));
    let mut loops = Vec::with_capacity(c.poles.len());
    let mut matrices = Vec::with_capacity(c.poles.len());
    let mut normalized_logs = Vec::with_capacity(c.poles.len());
    let mut exponents = Vec::with_capacity(c.poles.len());
    for i in 0..c.poles.len() {
        let loop_path = monodromy_loop(c, i, base_point, tolerances.evaluation_guard)?;
        let g = integrate_along_path(c, &loop_path, &mat2::identity(), tol, tolerances)?.matrix;
        let e = normalized_log(&g, tolerances)?;
        exponents.push(mat2::eigenvalues(&e));
        loops.push(loop_path);
        matrices.push(g);
        normalized_logs.push(e);
    }
    Ok(MonodromyData { base_point, loops, matrices, normalized_logs, exponents, tol })
}

/// Outcome of the common-invariant-line search on a monodromy tuple.
#[derive(Debug, Clone)]
pub struct IrreducibilityReport {
    pub irreducible: bool,
    /// A common eigenvector when one exists (reducible case).
    pub common_line: Option<[C64; 2]>,
}

fn is_scalar(g: &CMat2, tol: f64) -> bool {
    let s = mat2::trace(g) * 0.5;
    mat2::norm(&(g - mat2::identity() * s)) <= tol * mat2::norm(g).max(1.0)
}

fn line_invariant(v: &[C64; 2], g: &CMat2, tol: f64) -> bool {
    let w = [g[(0, 0)] * v[0] + g[(0, 1)] * v[1], g[(1, 0)] * v[0] + g[(1, 1)] * v[1]];
    let cross = v[0] * w[1] - v[1] * w[0];
    let wn = (w[0].norm_sqr() + w[1].norm_sqr()).sqrt();
    cross.norm() <= tol * wn.max(1.0)
}

/// True iff no single one-dimensional subspace is invariant under all
/// matrices. In the 2x2 case the candidates are the finitely many
/// eigen-lines of any non-scalar member.
pub fn irreducibility_check(matrices: &[CMat2], tol: f64) -> IrreducibilityReport {
    let anchor = matrices.iter().find(|g| !is_scalar(g, tol));
    let anchor = match anchor {
        // every matrix is scalar: any line is invariant
        None => {
            return IrreducibilityReport { irreducible: false, common_line: Some([mat2::ONE, mat2::ZERO]) }
        }
        Some(g) => g,
    };
    let (l1, l2) = mat2::eigenvalues(anchor);
    let mut candidates = vec![mat2::eigenvector(anchor, l1)];
    if (l1 - l2).norm() > tol {
        candidates.push(mat2::eigenvector(anchor, l2));
    }
    for v in candidates {
        if matrices.iter().all(|g| line_invariant(&v, g, tol)) {
            return IrreducibilityReport { irreducible: false, common_line: Some(v) };
        }
    }
    IrreducibilityReport { irreducible: true, common_line: None }
}

/// Result of the trivial-monodromy check at infinity.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ApparentInfinityReport {
    pub passed: bool,
    /// `|| G_infinity - I ||` along the enclosing circle.
    pub deviation: f64,
}

/// Counterclockwise polygonal circle enclosing all poles, starting on the
/// positive real axis relative to the centroid.
pub fn enclosing_circle(c: &RationalConnection) -> ComplexPath {
    let n = c.poles.len() as f64;
    let centroid = c.poles.iter().map(|p| p.position).sum::<C64>() / n;
    let spread = c
        .poles
        .iter()
        .map(|p| (p.position - centroid).norm())
        .fold(0.0, f64::max);
    let sides = 32usize;
    let radius = 2.0 * (spread + 1.0) / (std::f64::consts::PI / sides as f64).cos();
    let waypoints = (0..sides)
        .map(|k| {
            let theta = std::f64::consts::TAU * (k as f64) / (sides as f64);
            centroid + C64::new(theta.cos(), theta.sin()) * radius
        })
        .collect();
    ComplexPath::closed(waypoints)
}

/// True iff the monodromy along a large circle enclosing all poles is the
/// identity within `tol`. Requires a validated auxiliary connection.
pub fn apparent_infinity_check(
    c: &RationalConnection,
    tol: f64,
    tolerances: &Tolerances,
) -> Result<ApparentInfinityReport> {
    if c.normalization != Normalization::Auxiliary {
        return Err(Error::NormalizationMismatch {
            expected: "auxiliary",
            found: c.normalization.name(),
        });
    }
    let report = validate_connection(c, tolerances);
    if !report.passed {
        return Err(Error::InvalidConnection(report.failure_summary()));
    }
    let circle = enclosing_circle(c);
    let g = integrate_along_path(c, &circle, &mat2::identity(), tol, tolerances)?.matrix;
    let deviation = mat2::norm(&(g - mat2::identity()));
    Ok(ApparentInfinityReport { passed: deviation < tol * 1e2, deviation })
}
