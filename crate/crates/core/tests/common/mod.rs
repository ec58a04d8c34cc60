//! Shared helpers for the integration suites: seeded random data, inline
//! connection builders, a small complex least-squares solver, and fitting
//! of the infinity expansion from transported fundamental solutions.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use isomlab_core::connection::{Normalization, Pole, RationalConnection};
use isomlab_core::continuation::integrate_along_path;
use isomlab_core::mat2;
use isomlab_core::path::ComplexPath;
use isomlab_core::{C64, CMat2, Tolerances};

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_c64(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn random_matrix(rng: &mut ChaCha8Rng) -> CMat2 {
    CMat2::new(random_c64(rng), random_c64(rng), random_c64(rng), random_c64(rng)) * C64::new(0.3, 0.0)
}

pub fn fuchsian(pos: C64, residue: CMat2) -> Pole {
    Pole { position: pos, rank: 0, coeffs: vec![residue] }
}

pub fn rank1(pos: C64, residue: CMat2, leading: CMat2) -> Pole {
    Pole { position: pos, rank: 1, coeffs: vec![residue, leading] }
}

/// Random trivially normalized configuration with the given ranks; residues
/// balanced onto the last pole.
pub fn random_trivial(ranks: &[usize], rng: &mut ChaCha8Rng) -> RationalConnection {
    let n = ranks.len();
    let mut poles = Vec::with_capacity(n);
    for (k, &r) in ranks.iter().enumerate() {
        let theta = std::f64::consts::TAU * (k as f64) / (n as f64);
        let pos = C64::new(1.5 * theta.cos(), 1.5 * theta.sin()) + random_c64(rng) * 0.2;
        let mut coeffs = vec![random_matrix(rng)];
        if r == 1 {
            coeffs.push(random_matrix(rng));
        }
        poles.push(Pole { position: pos, rank: r, coeffs });
    }
    let partial = poles[..n - 1].iter().fold(CMat2::zeros(), |acc, p| acc + p.coeffs[0]);
    poles[n - 1].coeffs[0] = -partial;
    let mut conn = RationalConnection::new(poles, Normalization::Trivial).unwrap();
    conn.polish_residue_sum();
    conn
}

/// Ridge-regularized complex least squares `argmin |A x - b|^2 + eps|x|^2`.
pub fn solve_least_squares(a: &DMatrix<C64>, b: &DMatrix<C64>, ridge: f64) -> DMatrix<C64> {
    let ah = a.adjoint();
    let mut normal = &ah * a;
    for i in 0..normal.nrows() {
        normal[(i, i)] += C64::new(ridge, 0.0);
    }
    let rhs = &ah * b;
    normal.lu().solve(&rhs).expect("normal equations solvable")
}

pub fn z_pow_k(z: C64) -> CMat2 {
    // z^K with K = diag(-1, 1)
    CMat2::new(C64::new(1.0, 0.0) / z, mat2::ZERO, mat2::ZERO, z)
}

pub fn z_pow_minus_k(z: C64) -> CMat2 {
    CMat2::new(z, mat2::ZERO, mat2::ZERO, C64::new(1.0, 0.0) / z)
}

/// Sample points on two large circles around the origin.
pub fn expansion_samples(r1: f64, r2: f64, per_circle: usize) -> Vec<C64> {
    let mut v = Vec::new();
    for &r in &[r1, r2] {
        for k in 0..per_circle {
            let t = std::f64::consts::TAU * (k as f64 + 0.3) / (per_circle as f64);
            v.push(C64::new(r * t.cos(), r * t.sin()));
        }
    }
    v
}

/// Transports `y0` from `from` to `to` along a two-segment route through a
/// large-radius corner, staying clear of the poles near the origin.
pub fn transport_far(
    c: &RationalConnection,
    from: C64,
    to: C64,
    y0: &CMat2,
    tol: f64,
    tolerances: &Tolerances,
) -> CMat2 {
    let mut corner = if (from / from.norm() + to / to.norm()).norm() < 0.3 {
        // nearly antipodal: insert a quarter-turn waypoint
        let mid = from / from.norm() * C64::new(0.0, 1.0) * from.norm().max(to.norm());
        vec![from, mid, to]
    } else {
        let r = from.norm().max(to.norm());
        let dir = (from / from.norm() + to / to.norm()) * 0.5;
        vec![from, dir / dir.norm() * r, to]
    };
    corner.dedup_by(|a, b| (*a - *b).norm() < 1e-12);
    let path = ComplexPath::open(corner);
    integrate_along_path(c, &path, y0, tol, tolerances).unwrap().matrix
}

/// Fits `U_1` of the expansion `Y(z) M = (I + sum_k U_k z^-k) z^K` from an
/// arbitrarily normalized fundamental solution `Y`, with the constant `M`
/// among the unknowns. `U_1` is gauge-invariant under the residual freedom
/// of the fit.
pub fn fit_u1_free_normalization(c: &RationalConnection, tolerances: &Tolerances) -> CMat2 {
    let orders = 4usize;
    let samples = expansion_samples(120.0, 240.0, 8);
    let anchor = samples[0];
    // Y(anchor) = I, then transport to every sample
    let mut ys = Vec::with_capacity(samples.len());
    for &z in &samples {
        let y = if z == anchor {
            mat2::identity()
        } else {
            transport_far(c, anchor, z, &mat2::identity(), 1e-13, tolerances)
        };
        ys.push(y);
    }

    // unknowns: M (4), U_1..U_orders (4 each), scaled by rho^k for balance
    let rho = 120.0;
    let unknowns = 4 + 4 * orders;
    let rows = 4 * samples.len();
    let mut a = DMatrix::<C64>::zeros(rows, unknowns);
    let mut b = DMatrix::<C64>::zeros(rows, 1);
    for (j, &z) in samples.iter().enumerate() {
        let y = &ys[j];
        for r in 0..2 {
            for cc in 0..2 {
                let row = 4 * j + 2 * r + cc;
                // (Y M z^{-K})_{rc} = sum_s Y_{rs} M_{sc} (z^{-K})_{cc}
                let w = z_pow_minus_k(z)[(cc, cc)];
                for s in 0..2 {
                    a[(row, 2 * s + cc)] = y[(r, s)] * w;
                }
                for k in 1..=orders {
                    let col = 4 * k + 2 * r + cc;
                    a[(row, col)] = -(rho / z).powi(k as i32);
                }
                b[(row, 0)] = if r == cc { mat2::ONE } else { mat2::ZERO };
            }
        }
    }
    let x = solve_least_squares(&a, &b, 1e-12);
    let scale = rho;
    CMat2::new(x[(4, 0)], x[(5, 0)], x[(6, 0)], x[(7, 0)]) * C64::new(scale, 0.0)
}

pub fn assert_close(a: &CMat2, b: &CMat2, tol: f64, what: &str) {
    let d = mat2::norm(&(a - b));
    assert!(d < tol, "{what}: deviation {d:.3e} exceeds {tol:.1e}\n a = {a}\n b = {b}");
}
