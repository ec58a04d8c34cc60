//! Closed-form helpers for 2x2 complex matrices: eigenvalues, matrix
//! exponential, the normalized logarithm, and small conveniences the rest
//! of the crate leans on.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::{C64, CMat2};

pub const ZERO: C64 = Complex64::new(0.0, 0.0);
pub const ONE: C64 = Complex64::new(1.0, 0.0);
pub const I: C64 = Complex64::new(0.0, 1.0);
pub const TWO_PI: f64 = std::f64::consts::TAU;

pub fn zero() -> CMat2 {
    CMat2::zeros()
}

pub fn identity() -> CMat2 {
    CMat2::identity()
}

/// diag(-1, 1), the residue-sum target of the auxiliary normalization.
pub fn k_matrix() -> CMat2 {
    CMat2::new(-ONE, ZERO, ZERO, ONE)
}

pub fn diag(a: C64, b: C64) -> CMat2 {
    CMat2::new(a, ZERO, ZERO, b)
}

pub fn commutator(a: &CMat2, b: &CMat2) -> CMat2 {
    a * b - b * a
}

pub fn det(m: &CMat2) -> C64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

pub fn trace(m: &CMat2) -> C64 {
    m[(0, 0)] + m[(1, 1)]
}

/// Frobenius norm.
pub fn norm(m: &CMat2) -> f64 {
    m.iter().map(|e| e.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entry magnitude.
pub fn max_abs(m: &CMat2) -> f64 {
    m.iter().map(|e| e.norm()).fold(0.0, f64::max)
}

pub fn inverse(m: &CMat2) -> Result<CMat2> {
    let d = det(m);
    let scale = max_abs(m).max(1.0);
    if d.norm() <= 1e-300 * scale * scale {
        return Err(Error::NonInvertible(d.norm()));
    }
    Ok(CMat2::new(m[(1, 1)] / d, -m[(0, 1)] / d, -m[(1, 0)] / d, m[(0, 0)] / d))
}

/// Eigenvalues by the quadratic formula, in an arbitrary but deterministic
/// order.
pub fn eigenvalues(m: &CMat2) -> (C64, C64) {
    let half_tr = trace(m) * 0.5;
    let disc = (half_tr * half_tr - det(m)).sqrt();
    (half_tr + disc, half_tr - disc)
}

/// An eigenvector for `lambda`, read off the rank-deficient rows of
/// `m - lambda I`. Unit-normalized.
pub fn eigenvector(m: &CMat2, lambda: C64) -> [C64; 2] {
    let r1 = [m[(0, 0)] - lambda, m[(0, 1)]];
    let r2 = [m[(1, 0)], m[(1, 1)] - lambda];
    let n1 = r1[0].norm_sqr() + r1[1].norm_sqr();
    let n2 = r2[0].norm_sqr() + r2[1].norm_sqr();
    let v = if n1 >= n2 { [r1[1], -r1[0]] } else { [r2[1], -r2[0]] };
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    if n == 0.0 {
        // m is a multiple of the identity; any direction works.
        return [ONE, ZERO];
    }
    [v[0] / n, v[1] / n]
}

/// Matrix exponential via the analytic 2x2 formula
/// `exp(m) = e^s (cosh(mu) I + sinhc(mu) (m - s I))`, `s = tr/2`,
/// `mu^2 = s^2 - det`. Exact in exact arithmetic, defective case included.
pub fn exp(m: &CMat2) -> CMat2 {
    let s = trace(m) * 0.5;
    let n = m - identity() * s;
    let mu2 = s * s - det(m);
    let mu = mu2.sqrt();
    let (cosh_mu, sinhc_mu) = if mu.norm() < 1e-6 {
        // series for cosh and sinh(mu)/mu, enough terms for < 1e-30 error
        let c = ONE + mu2 * 0.5 + mu2 * mu2 * (1.0 / 24.0);
        let sc = ONE + mu2 * (1.0 / 6.0) + mu2 * mu2 * (1.0 / 120.0);
        (c, sc)
    } else {
        ((mu.exp() + (-mu).exp()) * 0.5, (mu.exp() - (-mu).exp()) * 0.5 / mu)
    };
    (identity() * cosh_mu + n * sinhc_mu) * s.exp()
}

fn strip_normalize(rho: C64) -> C64 {
    // shift by an integer so that Re rho lands in [0, 1)
    rho - C64::new(rho.re.floor(), 0.0)
}

/// Normalized monodromy logarithm: `E` with `exp(2 pi i E) = g` and every
/// eigenvalue of `E` having real part in `[0, 1)`.
///
/// Diagonalizable matrices (eigenvalue gap above `log_gap`) go through the
/// eigendecomposition; otherwise the nilpotent split
/// `log(lambda(I + N/lambda)) = log(lambda) I + N/lambda` is exact for 2x2.
pub fn normalized_log(g: &CMat2, log_gap: f64) -> Result<CMat2> {
    let d = det(g);
    if d.norm() <= 1e-300 {
        return Err(Error::NonInvertible(d.norm()));
    }
    let (l1, l2) = eigenvalues(g);
    if (l1 - l2).norm() > log_gap {
        let v1 = eigenvector(g, l1);
        let v2 = eigenvector(g, l2);
        let v = CMat2::new(v1[0], v2[0], v1[1], v2[1]);
        let v_inv = inverse(&v)?;
        let rho1 = strip_normalize(l1.ln() / (TWO_PI * I));
        let rho2 = strip_normalize(l2.ln() / (TWO_PI * I));
        Ok(v * diag(rho1, rho2) * v_inv)
    } else {
        let lambda = trace(g) * 0.5;
        if lambda.norm() <= 1e-300 {
            return Err(Error::NonInvertible(d.norm()));
        }
        let n = g - identity() * lambda;
        let log_g = identity() * lambda.ln() + n / lambda;
        let rho = lambda.ln() / (TWO_PI * I);
        let shift = strip_normalize(rho) - rho;
        Ok(log_g / (TWO_PI * I) + identity() * shift)
    }
}

/// Sum of `terms` with Kahan-compensated accumulation per entry. Used by
/// test oracles that need an independent extended-precision summation.
pub fn compensated_sum(terms: &[CMat2]) -> CMat2 {
    let mut sum = [[ZERO; 2]; 2];
    let mut carry = [[ZERO; 2]; 2];
    for t in terms {
        for r in 0..2 {
            for c in 0..2 {
                let y = t[(r, c)] - carry[r][c];
                let s = sum[r][c] + y;
                carry[r][c] = (s - sum[r][c]) - y;
                sum[r][c] = s;
            }
        }
    }
    CMat2::new(sum[0][0], sum[0][1], sum[1][0], sum[1][1])
}
