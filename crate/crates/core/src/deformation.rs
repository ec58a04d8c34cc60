//! Right-hand sides and path integration of the isomonodromic deformation
//! equations in the pole positions, for Fuchsian and rank-1 configurations,
//! together with propagation of the infinity-expansion coefficients.
//!
//! The deformation form in the pole-position directions is
//! `omega = A(z) dz + sum_i Omega_i(z) da_i` with
//! `A(z) = sum_{k,j} B_kj / (z - a_k)^j` and
//! `Omega_i(z) = -sum_j B_ij / (z - a_i)^j`. Matching partial fractions in
//! the zero-curvature identity `dA/da_i = dOmega_i/dz + [Omega_i, A]`
//! yields, with `d = a_i - a_k`:
//!
//! ```text
//! dB_k1/da_i =  [B_i1,B_k1]/d - [B_i2,B_k1]/d^2 + [B_i1,B_k2]/d^2 - 2[B_i2,B_k2]/d^3
//! dB_k2/da_i =  [B_i1,B_k2]/d - [B_i2,B_k2]/d^2                        (k != i)
//! dB_i1/da_i = -sum_{k != i} ( [B_i1,B_k1]/d - [B_i2,B_k1]/d^2 + [B_i1,B_k2]/d^2 - 2[B_i2,B_k2]/d^3 )
//! dB_i2/da_i = -sum_{k != i} ( [B_i2,B_k1]/d + [B_i2,B_k2]/d^2 )
//! ```
//!
//! All-Fuchsian input reduces these to the Schlesinger equations. The
//! residue sum is conserved identically by the antisymmetry of the paired
//! terms.

use serde::Serialize;

use crate::config::{IntegratorConfig, Tolerances};
use crate::connection::{
    local_formal_data_with, validate_connection, Normalization, RationalConnection,
};
use crate::error::{Error, Result};
use crate::gauge;
use crate::mat2::{self, commutator};
use crate::ode::{AdaptiveRk, StepVerdict};
use crate::{C64, CMat2};

/// Snapshot of an isomonodromic family at one point of the deformation
/// space: the coefficient matrices, and for auxiliary systems the first two
/// infinity-expansion coefficients.
#[derive(Debug, Clone)]
pub struct DeformationState {
    pub connection: RationalConnection,
    /// First expansion coefficient at infinity (auxiliary systems);
    /// recomputed algebraically from the coefficients.
    pub u1: Option<CMat2>,
    /// Second expansion coefficient, carried along deformation paths from
    /// its base-point value. Its (1,2) entry is a free gauge constant.
    pub u2: Option<CMat2>,
    /// Path parameter reached along the most recent deformation.
    pub path_parameter: f64,
}

impl DeformationState {
    /// Builds a state from a validated connection. For auxiliary systems
    /// the expansion coefficients are initialized algebraically with the
    /// free (1,2) entry of `U2` set to zero.
    pub fn new(connection: RationalConnection, tol: &Tolerances) -> Result<Self> {
        let report = validate_connection(&connection, tol);
        if !report.passed {
            return Err(Error::InvalidConnection(report.failure_summary()));
        }
        let (u1, u2) = match connection.normalization {
            Normalization::Auxiliary => {
                let u1 = gauge::compute_u1_matrix(&connection);
                let u2 = gauge::base_u2(&connection, &u1);
                (Some(u1), Some(u2))
            }
            Normalization::Trivial => (None, None),
        };
        Ok(Self { connection, u1, u2, path_parameter: 0.0 })
    }

    pub fn positions(&self) -> Vec<C64> {
        self.connection.positions()
    }

    pub fn is_auxiliary(&self) -> bool {
        self.connection.normalization == Normalization::Auxiliary
    }

    /// The tau value: upper-right entry of `U1`.
    pub fn u1_upper_right(&self) -> C64 {
        gauge::compute_u1(&self.connection)
    }
}

/// Partial derivatives of every coefficient matrix (and of the expansion
/// coefficients, for auxiliary systems) in one pole-position direction.
#[derive(Debug, Clone)]
pub struct DeformationVectorField {
    pub direction: usize,
    /// `field[k][j]` is `dB_k,j+1 / da_direction`.
    pub coeffs: Vec<Vec<CMat2>>,
    pub du1: Option<CMat2>,
    pub du2: Option<CMat2>,
}

impl DeformationVectorField {
    /// Entrywise sum of the residue derivatives; zero by construction.
    pub fn residue_sum_derivative(&self) -> CMat2 {
        self.coeffs.iter().fold(mat2::zero(), |acc, c| acc + c[0])
    }
}

fn check_separation(c: &RationalConnection, tol: &Tolerances) -> Result<()> {
    if let Some((d, i, j)) = c.min_pole_distance() {
        if d < tol.pole_separation {
            return Err(Error::PoleCollision { i, j, dist: d, tol: tol.pole_separation });
        }
    }
    Ok(())
}

fn check_resonance(c: &RationalConnection, tol: &Tolerances) -> Result<()> {
    for (i, p) in c.poles.iter().enumerate() {
        if p.rank == 1 {
            let data = local_formal_data_with(c, i, tol);
            if data.resonant {
                return Err(Error::ResonanceOnset { pole: i, gap: data.eigen_gap(), tol: tol.eigen_gap });
            }
        }
    }
    Ok(())
}

/// Schlesinger right-hand side in direction `i` for an all-Fuchsian
/// configuration: `dB_i/da_i = -sum_{j != i} [B_i, B_j]/(a_i - a_j)` and
/// `dB_j/da_i = [B_i, B_j]/(a_i - a_j)`.
pub fn schlesinger_rhs(state: &DeformationState, i: usize, tol: &Tolerances) -> Result<DeformationVectorField> {
    let c = &state.connection;
    if c.poles.iter().any(|p| p.rank != 0) {
        return Err(Error::Shape("schlesinger_rhs requires all ranks zero".into()));
    }
    check_separation(c, tol)?;
    let n = c.poles.len();
    let mut coeffs: Vec<Vec<CMat2>> = c.poles.iter().map(|p| vec![mat2::zero(); p.coeffs.len()]).collect();
    let bi = c.poles[i].coeffs[0];
    let ai = c.poles[i].position;
    for k in 0..n {
        if k == i {
            continue;
        }
        let comm = commutator(&bi, &c.poles[k].coeffs[0]);
        let d = ai - c.poles[k].position;
        coeffs[k][0] += comm / d;
        coeffs[i][0] -= comm / d;
    }
    Ok(DeformationVectorField { direction: i, coeffs, du1: None, du2: None })
}

/// Rank-1 right-hand side in direction `i`, from the partial-fraction
/// matching documented at module level. Reduces to [`schlesinger_rhs`] on
/// all-Fuchsian input.
pub fn rank1_rhs(state: &DeformationState, i: usize, tol: &Tolerances) -> Result<DeformationVectorField> {
    let c = &state.connection;
    check_separation(c, tol)?;
    check_resonance(c, tol)?;
    let n = c.poles.len();
    let mut coeffs: Vec<Vec<CMat2>> = c.poles.iter().map(|p| vec![mat2::zero(); p.coeffs.len()]).collect();
    let ai = c.poles[i].position;
    let bi1 = c.poles[i].coeffs[0];
    let bi2 = if c.poles[i].rank == 1 { Some(c.poles[i].coeffs[1]) } else { None };

    for k in 0..n {
        if k == i {
            continue;
        }
        let d = ai - c.poles[k].position;
        let d2 = d * d;
        let d3 = d2 * d;
        let bk1 = c.poles[k].coeffs[0];
        let bk2 = if c.poles[k].rank == 1 { Some(c.poles[k].coeffs[1]) } else { None };

        let mut dk1 = commutator(&bi1, &bk1) / d;
        if let Some(bi2) = &bi2 {
            dk1 -= commutator(bi2, &bk1) / d2;
        }
        if let Some(bk2) = &bk2 {
            dk1 += commutator(&bi1, bk2) / d2;
            if let Some(bi2) = &bi2 {
                dk1 -= commutator(bi2, bk2) * (2.0 / d3);
            }
        }
        coeffs[k][0] += dk1;
        coeffs[i][0] -= dk1;

        if let Some(bk2) = &bk2 {
            let mut dk2 = commutator(&bi1, bk2) / d;
            if let Some(bi2) = &bi2 {
                dk2 -= commutator(bi2, bk2) / d2;
            }
            coeffs[k][1] += dk2;
        }
        if let Some(bi2) = &bi2 {
            let mut di2 = commutator(bi2, &bk1) / d;
            if let Some(bk2) = &bk2 {
                di2 += commutator(bi2, bk2) / d2;
            }
            coeffs[i][1] -= di2;
        }
    }

    let (du1, du2) = if state.is_auxiliary() {
        let u1 = state.u1.unwrap_or_else(|| gauge::compute_u1_matrix(c));
        (Some(-bi1), Some(u2_direction_derivative(c, i, &u1)))
    } else {
        (None, None)
    };
    Ok(DeformationVectorField { direction: i, coeffs, du1, du2 })
}

/// `dU2/da_i = -B_i1 U1 - (B_i1 a_i + B_i2)`, the order `z^-2` matching of
/// `dU/da_i = Omega_i U` at infinity.
pub fn u2_direction_derivative(c: &RationalConnection, i: usize, u1: &CMat2) -> CMat2 {
    let p = &c.poles[i];
    let mut d = -p.coeffs[0] * u1 - p.coeffs[0] * p.position;
    if p.rank == 1 {
        d -= p.coeffs[1];
    }
    d
}

/// Same derivative read off a [`DeformationState`] (auxiliary systems).
pub fn propagate_u2(state: &DeformationState, i: usize) -> CMat2 {
    let u1 = state.u1.unwrap_or_else(|| gauge::compute_u1_matrix(&state.connection));
    u2_direction_derivative(&state.connection, i, &u1)
}

/// A deformation path: straight-line motion of selected pole positions
/// through successive waypoints, all other coordinates frozen.
#[derive(Debug, Clone)]
pub struct DeformationPath {
    /// `(pole index, waypoints)`; waypoint lists must share one length and
    /// start at the pole's current position.
    pub moves: Vec<(usize, Vec<C64>)>,
}

impl DeformationPath {
    /// Single moving coordinate, straight segment from the current position
    /// to `target`.
    pub fn segment(pole: usize, from: C64, target: C64) -> Self {
        Self { moves: vec![(pole, vec![from, target])] }
    }

    fn legs(&self) -> usize {
        self.moves.first().map_or(0, |(_, w)| w.len().saturating_sub(1))
    }
}

/// Diagnostics accumulated along a deformation run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DeformDiagnostics {
    /// Largest drift of the residue sum from its initial value.
    pub residue_sum_drift: f64,
    /// Largest residual between the integrated `U1` and the algebraic one
    /// (auxiliary systems only).
    pub u1_identity_residual: f64,
    pub steps: usize,
    pub rejected_steps: usize,
    /// Largest drift of monodromy traces between the endpoints, when the
    /// endpoint monodromy cross-check is requested.
    pub monodromy_trace_drift: Option<f64>,
    /// Largest drift of monodromy determinants between the endpoints.
    pub monodromy_det_drift: Option<f64>,
}

/// Result of [`deform_path`]: the endpoint (or last good) state plus
/// diagnostics; `blowup` is set when a trivial-normalization run hit the
/// coefficient ceiling (a theta crossing), reported rather than fatal.
#[derive(Debug, Clone)]
pub struct DeformOutcome {
    pub state: DeformationState,
    pub diagnostics: DeformDiagnostics,
    pub completed: bool,
    /// Path parameter and coefficient norm at the blowup detection point.
    pub blowup: Option<(f64, f64)>,
}

/// Options for [`deform_path`].
#[derive(Debug, Clone)]
pub struct DeformOptions {
    pub integrator: IntegratorConfig,
    /// Cross-check monodromy traces/determinants at the path endpoints.
    pub monodromy_check: bool,
    /// Transport tolerance for the endpoint monodromy cross-check.
    pub monodromy_tol: f64,
}

impl Default for DeformOptions {
    fn default() -> Self {
        Self { integrator: IntegratorConfig::default(), monodromy_check: false, monodromy_tol: 1e-10 }
    }
}

struct StateLayout {
    /// (pole, coeff index) per matrix slot.
    slots: Vec<(usize, usize)>,
    /// Complex length of the flattened state.
    len: usize,
    aux: bool,
}

impl StateLayout {
    fn of(c: &RationalConnection, aux: bool) -> Self {
        let mut slots = Vec::new();
        for (k, p) in c.poles.iter().enumerate() {
            for j in 0..p.coeffs.len() {
                slots.push((k, j));
            }
        }
        // 4 entries per matrix, plus U1 and U2 for auxiliary systems
        let len = 4 * (slots.len() + if aux { 2 } else { 0 });
        Self { slots, len, aux }
    }

    fn pack(&self, c: &RationalConnection, u1: Option<&CMat2>, u2: Option<&CMat2>) -> Vec<C64> {
        let mut v = Vec::with_capacity(self.len);
        for &(k, j) in &self.slots {
            let m = &c.poles[k].coeffs[j];
            v.extend_from_slice(&[m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]);
        }
        if self.aux {
            for m in [u1.expect("auxiliary state carries U1"), u2.expect("auxiliary state carries U2")] {
                v.extend_from_slice(&[m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]);
            }
        }
        v
    }

    fn unpack_into(&self, v: &[C64], c: &mut RationalConnection) -> (Option<CMat2>, Option<CMat2>) {
        for (s, &(k, j)) in self.slots.iter().enumerate() {
            c.poles[k].coeffs[j] = CMat2::new(v[4 * s], v[4 * s + 1], v[4 * s + 2], v[4 * s + 3]);
        }
        if self.aux {
            let base = 4 * self.slots.len();
            let u1 = CMat2::new(v[base], v[base + 1], v[base + 2], v[base + 3]);
            let u2 = CMat2::new(v[base + 4], v[base + 5], v[base + 6], v[base + 7]);
            (Some(u1), Some(u2))
        } else {
            (None, None)
        }
    }
}

/// Integrates the coupled system of coefficient matrices (and `U1`, `U2`
/// for auxiliary normalization) along a path in pole-position space.
///
/// `U1` is carried in the integrated state and cross-checked against its
/// algebraic value at every accepted step; a residual above the tolerance
/// rejects the step. The endpoint state stores the algebraic `U1`.
pub fn deform_path(
    state0: &DeformationState,
    path: &DeformationPath,
    tol: &Tolerances,
    options: &DeformOptions,
) -> Result<DeformOutcome> {
    let aux = state0.is_auxiliary();
    let n = state0.connection.poles.len();
    for (idx, waypoints) in &path.moves {
        if *idx >= n {
            return Err(Error::InvalidParameter(format!("moving pole index {idx} out of range")));
        }
        if waypoints.len() < 2 {
            return Err(Error::InvalidParameter("a move needs at least two waypoints".into()));
        }
        let here = state0.connection.poles[*idx].position;
        if (waypoints[0] - here).norm() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "move for pole {idx} starts at {} instead of the current position {here}",
                waypoints[0]
            )));
        }
    }
    let legs = path.legs();
    if path.moves.iter().any(|(_, w)| w.len() != legs + 1) {
        return Err(Error::InvalidParameter("all moves must share one waypoint count".into()));
    }

    let start_monodromy = if options.monodromy_check {
        Some(crate::continuation::compute_monodromy_data(
            &state0.connection,
            None,
            options.monodromy_tol,
            tol,
        )?)
    } else {
        None
    };

    let layout = StateLayout::of(&state0.connection, aux);
    let rk = AdaptiveRk::new(options.integrator);
    let residue_sum0 = state0.connection.residue_sum();

    let mut work = state0.connection.clone();
    let mut y = layout.pack(&work, state0.u1.as_ref(), state0.u2.as_ref());
    let mut diagnostics = DeformDiagnostics::default();
    let mut completed = true;
    let mut blowup = None;
    let mut s_done = 0.0f64;

    'legs: for leg in 0..legs {
        let starts: Vec<(usize, C64, C64)> = path
            .moves
            .iter()
            .map(|(idx, w)| (*idx, w[leg], w[leg + 1] - w[leg]))
            .collect();

        // scratch connection reused by the rhs closure
        let mut scratch = work.clone();
        let rhs = |s: f64, v: &[C64], dv: &mut [C64]| -> Result<()> {
            layout.unpack_into(v, &mut scratch);
            for &(idx, from, delta) in &starts {
                scratch.poles[idx].position = from + delta * s;
            }
            // trial stages may wander into a collision; signalling rejects
            check_separation(&scratch, tol)?;
            if scratch.poles.iter().any(|p| p.rank == 1) {
                check_resonance(&scratch, tol)?;
            }
            let u1_alg = if aux { Some(gauge::compute_u1_matrix(&scratch)) } else { None };
            dv.fill(C64::new(0.0, 0.0));
            let dummy = DeformationState {
                connection: scratch.clone(),
                u1: u1_alg,
                u2: None,
                path_parameter: s,
            };
            for &(idx, _, delta) in &starts {
                let field = rank1_rhs(&dummy, idx, tol)?;
                for (slot, &(k, j)) in layout.slots.iter().enumerate() {
                    let m = field.coeffs[k][j] * delta;
                    dv[4 * slot] += m[(0, 0)];
                    dv[4 * slot + 1] += m[(0, 1)];
                    dv[4 * slot + 2] += m[(1, 0)];
                    dv[4 * slot + 3] += m[(1, 1)];
                }
                if aux {
                    let base = 4 * layout.slots.len();
                    let du1 = field.du1.expect("auxiliary field carries dU1") * delta;
                    let du2 = field.du2.expect("auxiliary field carries dU2") * delta;
                    for (off, m) in [(base, du1), (base + 4, du2)] {
                        dv[off] += m[(0, 0)];
                        dv[off + 1] += m[(0, 1)];
                        dv[off + 2] += m[(1, 0)];
                        dv[off + 3] += m[(1, 1)];
                    }
                }
            }
            Ok(())
        };

        let mut check_conn = work.clone();
        let mut hook_blowup: Option<(f64, f64)> = None;
        let mut max_residue_drift = diagnostics.residue_sum_drift;
        let mut max_u1_residual = diagnostics.u1_identity_residual;
        let hook = |s: f64, v: &[C64]| -> StepVerdict {
            let (u1_int, _) = layout.unpack_into(v, &mut check_conn);
            for &(idx, from, delta) in &starts {
                check_conn.poles[idx].position = from + delta * s;
            }
            if aux {
                let u1_alg = gauge::compute_u1_matrix(&check_conn);
                let residual = mat2::norm(&(u1_int.unwrap() - u1_alg));
                if residual > tol.u1_identity {
                    return StepVerdict::Reject;
                }
                max_u1_residual = max_u1_residual.max(residual);
            } else {
                let coeff_norm = check_conn
                    .poles
                    .iter()
                    .flat_map(|p| p.coeffs.iter())
                    .map(mat2::norm)
                    .fold(0.0, f64::max);
                if coeff_norm > tol.blowup_ceiling && hook_blowup.is_none() {
                    hook_blowup = Some((s, coeff_norm));
                }
            }
            let drift = mat2::max_abs(&(check_conn.residue_sum() - residue_sum0));
            max_residue_drift = max_residue_drift.max(drift);
            StepVerdict::Accept
        };

        let result = rk.integrate(rhs, 0.0, 1.0, &y, hook);
        diagnostics.residue_sum_drift = max_residue_drift;
        diagnostics.u1_identity_residual = max_u1_residual;
        match result {
            Ok(sol) => {
                diagnostics.steps += sol.steps;
                diagnostics.rejected_steps += sol.rejected;
                y = sol.y;
                layout.unpack_into(&y, &mut work);
                for &(idx, _, _) in &starts {
                    work.poles[idx].position = path.moves.iter().find(|(k, _)| *k == idx).unwrap().1[leg + 1];
                }
                s_done = (leg + 1) as f64 / legs as f64;
                if let Some(b) = hook_blowup {
                    blowup = Some(((leg as f64 + b.0) / legs as f64, b.1));
                    completed = false;
                    break 'legs;
                }
            }
            Err(err) => {
                // a blowup drives the integrator into the floor; report the
                // last good state instead of failing for trivial systems
                if let Some(b) = hook_blowup {
                    blowup = Some(((leg as f64 + b.0) / legs as f64, b.1));
                    completed = false;
                    break 'legs;
                }
                return Err(err);
            }
        }
    }

    let (u1_int, u2_int) = layout.unpack_into(&y, &mut work);
    let _ = u1_int;
    let u1 = if aux { Some(gauge::compute_u1_matrix(&work)) } else { None };
    let state = DeformationState { connection: work, u1, u2: u2_int, path_parameter: s_done };

    if let Some(start) = &start_monodromy {
        let end = crate::continuation::compute_monodromy_data(
            &state.connection,
            Some(start.base_point),
            options.monodromy_tol,
            tol,
        )?;
        let trace_drift = start
            .traces()
            .iter()
            .zip(end.traces())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let det_drift = start
            .dets()
            .iter()
            .zip(end.dets())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        diagnostics.monodromy_trace_drift = Some(trace_drift);
        diagnostics.monodromy_det_drift = Some(det_drift);
    }

    Ok(DeformOutcome { state, diagnostics, completed, blowup })
}

/// Central finite-difference check of `dU1/da_i = -B_i1`: deforms the
/// state to `a_i +- h`, recomputes the algebraic `U1` on both sides and
/// returns `|| (U1(+h) - U1(-h)) / 2h + B_i1 ||`.
pub fn u1_partial_identity(
    state: &DeformationState,
    i: usize,
    h: f64,
    tol: &Tolerances,
) -> Result<f64> {
    if !state.is_auxiliary() {
        return Err(Error::NormalizationMismatch {
            expected: "auxiliary",
            found: state.connection.normalization.name(),
        });
    }
    let here = state.connection.poles[i].position;
    let options = DeformOptions {
        integrator: IntegratorConfig::with_tol(1e-12),
        ..Default::default()
    };
    let step = C64::new(h, 0.0);
    let plus = deform_path(state, &DeformationPath::segment(i, here, here + step), tol, &options)?;
    let minus = deform_path(state, &DeformationPath::segment(i, here, here - step), tol, &options)?;
    let u1_plus = plus.state.u1.expect("auxiliary deformation keeps U1");
    let u1_minus = minus.state.u1.expect("auxiliary deformation keeps U1");
    let fd = (u1_plus - u1_minus) / C64::new(2.0 * h, 0.0);
    Ok(mat2::norm(&(fd + state.connection.poles[i].coeffs[0])))
}
