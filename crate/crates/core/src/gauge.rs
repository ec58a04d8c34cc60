//! The local tau value `u1`, the polynomial gauge between the auxiliary
//! and trivial normalizations, and the constructions mapping between them.
//!
//! For an auxiliary system (`sum B_i1 = K = diag(-1,1)`, apparent Fuchsian
//! point at infinity with `Y = U(z) z^K`), expanding `dY/dz = A(z) Y` at
//! infinity order by order gives
//!
//! - order `z^-2`: `-U1 + [U1, K] = R`, `R = sum_i B_i1 a_i + sum B_i2`,
//!   solvable entrywise; `u1 = (U1)_12 = R_12`;
//! - order `z^-3`: `-2 U2 + [U2, K] = A3 + R U1` with
//!   `A3 = sum B_i1 a_i^2 + 2 sum B_i2 a_i`; the operator annihilates the
//!   (1,2) entry, which is the free gauge constant of the expansion, and
//!   `(A3 + R U1)_12 = 0` expresses that infinity is genuinely apparent.
//!
//! The gauge `Gamma1(z) = [[z + f/u1, -u1], [1/u1, 0]]`, with
//! `f = u1 (U1)_22 - (U2)_12`, maps the auxiliary family to the trivially
//! normalized one; its determinant is identically 1, so all recovery
//! formulas are polynomial in `z`.

use crate::config::Tolerances;
use crate::connection::{Normalization, Pole, RationalConnection};
use crate::deformation::DeformationState;
use crate::error::{Error, Result};
use crate::mat2;
use crate::{C64, CMat2};

/// Solves `-U1 + [U1, K] = R` entrywise:
/// `(U1)_11 = -R_11`, `(U1)_12 = R_12`, `(U1)_21 = -R_21/3`, `(U1)_22 = -R_22`.
pub fn solve_u1(r: &CMat2) -> CMat2 {
    CMat2::new(-r[(0, 0)], r[(0, 1)], -r[(1, 0)] / 3.0, -r[(1, 1)])
}

/// First infinity-expansion coefficient of an auxiliary connection,
/// computed algebraically from `R = sum B_i1 a_i + sum B_i2`.
pub fn compute_u1_matrix(c: &RationalConnection) -> CMat2 {
    solve_u1(&c.infinity_r())
}

/// The local tau value: upper-right entry of `U1`, equal to `R_12`.
pub fn compute_u1(c: &RationalConnection) -> C64 {
    c.infinity_r()[(0, 1)]
}

/// Base value of `U2` from the order `z^-3` matching, with the free (1,2)
/// entry set to zero: `-2 U2 + [U2, K] = A3 + R U1` on the other entries.
pub fn base_u2(c: &RationalConnection, u1: &CMat2) -> CMat2 {
    let rhs = c.infinity_a3() + c.infinity_r() * u1;
    CMat2::new(-rhs[(0, 0)] / 2.0, mat2::ZERO, -rhs[(1, 0)] / 4.0, -rhs[(1, 1)] / 2.0)
}

/// Residual of the apparentness obstruction `(A3 + R U1)_12`; zero exactly
/// when the infinity expansion `U(z) z^K` exists.
pub fn apparentness_residual(c: &RationalConnection) -> f64 {
    let u1 = compute_u1_matrix(c);
    (c.infinity_a3() + c.infinity_r() * u1)[(0, 1)].norm()
}

/// `f = u1 (U1)_22 - (U2)_12`, from matching the series `Gamma1' U` against
/// `(U'_0 + U'_1/z + ...) z^{-K}`. Errors when `u1 = 0` (the gauge does not
/// exist on the theta divisor).
pub fn compute_f(state: &DeformationState) -> Result<C64> {
    let u1m = state
        .u1
        .unwrap_or_else(|| compute_u1_matrix(&state.connection));
    let u1 = u1m[(0, 1)];
    if u1.norm() == 0.0 {
        return Err(Error::TauVanishes);
    }
    let u2 = state
        .u2
        .ok_or_else(|| Error::InvalidParameter("state carries no propagated U2".into()))?;
    Ok(u1 * u1m[(1, 1)] - u2[(0, 1)])
}

/// The pair `(u1, f)` defining the polynomial gauge `Gamma1` and its
/// inverse, together with the constant normalizer `U'_0`.
#[derive(Debug, Clone, Copy)]
pub struct GaugeMap {
    pub u1: C64,
    pub f: C64,
}

impl GaugeMap {
    pub fn new(u1: C64, f: C64) -> Result<Self> {
        if u1.norm() == 0.0 {
            return Err(Error::TauVanishes);
        }
        Ok(Self { u1, f })
    }

    /// `Gamma1(z) = [[z + f/u1, -u1], [1/u1, 0]]`; det = 1 identically.
    pub fn gamma1(&self, z: C64) -> CMat2 {
        CMat2::new(z + self.f / self.u1, -self.u1, mat2::ONE / self.u1, mat2::ZERO)
    }

    /// `Gamma1^{-1}(z) = [[0, u1], [-1/u1, z + f/u1]]`.
    pub fn gamma1_inv(&self, z: C64) -> CMat2 {
        CMat2::new(mat2::ZERO, self.u1, -mat2::ONE / self.u1, z + self.f / self.u1)
    }

    /// `d Gamma1 / dz`, constant.
    pub fn gamma1_dz(&self) -> CMat2 {
        CMat2::new(mat2::ONE, mat2::ZERO, mat2::ZERO, mat2::ZERO)
    }

    /// `d Gamma1^{-1} / dz`, constant.
    pub fn gamma1_inv_dz(&self) -> CMat2 {
        CMat2::new(mat2::ZERO, mat2::ZERO, mat2::ZERO, mat2::ONE)
    }

    /// The constant normalizer `U'_0 = [[0, u1], [-1/u1, f/u1]]`.
    pub fn normalizer(&self) -> CMat2 {
        CMat2::new(mat2::ZERO, self.u1, -mat2::ONE / self.u1, self.f / self.u1)
    }
}

/// Maps an auxiliary state to the trivially normalized family member at the
/// same deformation point: Fuchsian residues conjugate by `Gamma1(a_i)`;
/// rank-1 poles pick up the derivative terms
/// `B_i1 = Gamma1' B*_i2 Gamma1^{-1} + Gamma1 B*_i1 Gamma1^{-1}
///         + Gamma1 B*_i2 (Gamma1^{-1})'` evaluated at `a_i`.
///
/// Errors with [`Error::TauVanishes`] on the theta divisor, where the
/// trivial form does not exist.
pub fn to_malgrange(state: &DeformationState) -> Result<(RationalConnection, GaugeMap)> {
    if !state.is_auxiliary() {
        return Err(Error::NormalizationMismatch {
            expected: "auxiliary",
            found: state.connection.normalization.name(),
        });
    }
    let u1 = compute_u1(&state.connection);
    if u1.norm() == 0.0 {
        return Err(Error::TauVanishes);
    }
    let f = compute_f(state)?;
    let map = GaugeMap::new(u1, f)?;
    let out = gauge_transform(&state.connection, &map, GaugeDirection::AuxiliaryToTrivial)?;
    Ok((out, map))
}

pub(crate) enum GaugeDirection {
    AuxiliaryToTrivial,
    TrivialToAuxiliary,
}

/// Applies the polynomial gauge to every principal part. The two directions
/// use `Gamma1` and `Gamma1^{-1}` in mirrored roles.
pub(crate) fn gauge_transform(
    c: &RationalConnection,
    map: &GaugeMap,
    direction: GaugeDirection,
) -> Result<RationalConnection> {
    let (target_norm, fwd, fwd_dz, bwd, bwd_dz): (
        Normalization,
        Box<dyn Fn(C64) -> CMat2>,
        CMat2,
        Box<dyn Fn(C64) -> CMat2>,
        CMat2,
    ) = match direction {
        GaugeDirection::AuxiliaryToTrivial => (
            Normalization::Trivial,
            Box::new(|z| map.gamma1(z)),
            map.gamma1_dz(),
            Box::new(|z| map.gamma1_inv(z)),
            map.gamma1_inv_dz(),
        ),
        GaugeDirection::TrivialToAuxiliary => (
            Normalization::Auxiliary,
            Box::new(|z| map.gamma1_inv(z)),
            map.gamma1_inv_dz(),
            Box::new(|z| map.gamma1(z)),
            map.gamma1_dz(),
        ),
    };

    let poles = c
        .poles
        .iter()
        .map(|p| {
            let g = fwd(p.position);
            let gi = bwd(p.position);
            let coeffs = if p.rank == 0 {
                vec![g * p.coeffs[0] * gi]
            } else {
                let b2 = g * p.coeffs[1] * gi;
                let b1 = fwd_dz * p.coeffs[1] * gi + g * p.coeffs[0] * gi + g * p.coeffs[1] * bwd_dz;
                vec![b1, b2]
            };
            Pole { position: p.position, rank: p.rank, coeffs }
        })
        .collect();
    let mut out = RationalConnection::new(poles, target_norm)?;
    out.polish_residue_sum();
    Ok(out)
}

/// The `f` for which the plain inverse gauge of this trivial connection has
/// residue sum exactly `K`: with `R` and `S3` the `z^-2` and `z^-3`
/// infinity coefficients, `f = (S3_21 - R_21 (R_22 - R_11)) / (2 R_21^2)`.
pub fn canonical_gauge_f(c: &RationalConnection) -> Result<C64> {
    let r = c.infinity_r();
    let r21 = r[(1, 0)];
    if r21.norm() == 0.0 {
        return Err(Error::DegenerateGaugeSource(0.0));
    }
    let s3 = c.infinity_a3();
    Ok((s3[(1, 0)] - r21 * (r[(1, 1)] - r[(0, 0)])) / (r21 * r21 * 2.0))
}

/// Builds the auxiliary chart of a trivially normalized connection.
///
/// Sets `u = -1/R_21` and transforms by `Gamma1(u, f0)^{-1}`. An `f0` other
/// than the canonical value corresponds to the constant conjugation
/// `I + (f0 - f_can) E_12` of the input, which is applied first so that the
/// output satisfies `sum B*_i1 = K` exactly for every admissible `f0`.
/// Returns the auxiliary state (with `U1`, `U2` initialized) and the gauge.
pub fn make_auxiliary(
    c: &RationalConnection,
    f0: C64,
    tol: &Tolerances,
) -> Result<(DeformationState, GaugeMap)> {
    if c.normalization != Normalization::Trivial {
        return Err(Error::NormalizationMismatch {
            expected: "trivial",
            found: c.normalization.name(),
        });
    }
    let r = c.infinity_r();
    let r21 = r[(1, 0)];
    if r21.norm() <= tol.gauge_r21_min {
        return Err(Error::DegenerateGaugeSource(r21.norm()));
    }
    let u = -mat2::ONE / r21;
    let f_can = canonical_gauge_f(c)?;
    let shift = f0 - f_can;

    let source = if shift.norm() == 0.0 {
        c.clone()
    } else {
        let conj = CMat2::new(mat2::ONE, shift, mat2::ZERO, mat2::ONE);
        let conj_inv = CMat2::new(mat2::ONE, -shift, mat2::ZERO, mat2::ONE);
        let poles = c
            .poles
            .iter()
            .map(|p| Pole {
                position: p.position,
                rank: p.rank,
                coeffs: p.coeffs.iter().map(|m| conj * m * conj_inv).collect(),
            })
            .collect();
        RationalConnection::new(poles, Normalization::Trivial)?
    };

    let map = GaugeMap::new(u, f0)?;
    let aux = gauge_transform(&source, &map, GaugeDirection::TrivialToAuxiliary)?;
    let state = DeformationState::new(aux, tol)?;
    Ok((state, map))
}
