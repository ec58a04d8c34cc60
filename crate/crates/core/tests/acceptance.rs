//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line (run with `cargo test --test acceptance -- --nocapture` to see the
//! lines for passing criteria as well).

mod common;

use common::*;

use serde::Deserialize;

use isomlab_core::config::IntegratorConfig;
use isomlab_core::connection::{evaluate_matrix, RationalConnection};
use isomlab_core::continuation::{
    apparent_infinity_check, compute_monodromy_data, integrate_along_path, normalized_log,
};
use isomlab_core::deformation::{
    deform_path, rank1_rhs, schlesinger_rhs, u1_partial_identity, DeformOptions, DeformationPath,
    DeformationState,
};
use isomlab_core::fixtures::{generate_fixture, FixtureKind};
use isomlab_core::gauge::{make_auxiliary, to_malgrange};
use isomlab_core::mat2::{self, commutator, diag, identity, zero, I, ONE, TWO_PI, ZERO};
use isomlab_core::ode::{AdaptiveRk, StepVerdict};
use isomlab_core::path::ComplexPath;
use isomlab_core::schema::ConnectionDoc;
use isomlab_core::theta::{
    pole_order_fit, refine_zero, splitting_bound_check, theta_scan, DeformationSlice, FamilySample,
    FnSlice, MalgrangeFamily, RecoveredFamily, ScanParams, ThetaZero, DEFAULT_FIT_LEVELS,
};
use isomlab_core::{C64, CMat2, Tolerances};

fn tolerances() -> Tolerances {
    Tolerances::default()
}

fn report(criterion: usize, name: &str, passed: bool, detail: &str) {
    println!(
        "acceptance {criterion} ({name}): {} [{detail}]",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "criterion {criterion} ({name}) failed: {detail}");
}

#[derive(Deserialize)]
struct ThetaMetaEntry {
    file: String,
    moving: usize,
    center: [f64; 2],
    radius: f64,
    zero: [f64; 2],
}

#[derive(Deserialize)]
struct ThetaMeta {
    fuchsian_n4: ThetaMetaEntry,
    irregular_m1n4: ThetaMetaEntry,
}

fn fixtures_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn load_theta_meta() -> ThetaMeta {
    let text = std::fs::read_to_string(fixtures_dir().join("theta-meta.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn load_theta_connection(entry: &ThetaMetaEntry) -> RationalConnection {
    let text = std::fs::read_to_string(fixtures_dir().join(&entry.file)).unwrap();
    let doc: ConnectionDoc = serde_json::from_str(&text).unwrap();
    doc.to_connection().unwrap()
}

#[test]
fn criterion_1_schlesinger_isomonodromy_invariance() {
    let tol = tolerances();
    let conn = generate_fixture(FixtureKind::FuchsianN4, 1, &tol).unwrap();
    let state = DeformationState::new(conn, &tol).unwrap();
    // length-0.5 segment pointing away from the pole cloud
    let here = state.connection.poles[0].position;
    let centroid = state
        .connection
        .poles
        .iter()
        .map(|p| p.position)
        .sum::<C64>()
        / state.connection.poles.len() as f64;
    let dir = (here - centroid) / (here - centroid).norm();
    let path = DeformationPath::segment(0, here, here + dir * 0.5);
    let options = DeformOptions {
        integrator: IntegratorConfig::with_tol(1e-10),
        monodromy_check: true,
        monodromy_tol: 1e-10,
    };
    let out = deform_path(&state, &path, &tol, &options).unwrap();
    let trace_drift = out.diagnostics.monodromy_trace_drift.unwrap();
    let det_drift = out.diagnostics.monodromy_det_drift.unwrap();
    let passed = out.completed && trace_drift < 1e-6 && det_drift < 1e-6;
    report(
        1,
        "Schlesinger isomonodromy invariance",
        passed,
        &format!("trace drift {trace_drift:.3e}, det drift {det_drift:.3e}"),
    );
}

fn zero_curvature_worst(conn: &RationalConnection, seed: u64) -> f64 {
    let tol = tolerances();
    let state = DeformationState { connection: conn.clone(), u1: None, u2: None, path_parameter: 0.0 };
    let mut r = rng(seed);
    let mut worst = 0.0_f64;
    for i in 0..conn.poles.len() {
        let field = rank1_rhs(&state, i, &tol).unwrap();
        let ai = conn.poles[i].position;
        let mut checked = 0;
        while checked < 10 {
            let z = random_c64(&mut r) * 4.0;
            if conn.distance_to_poles(z).0 < 0.3 {
                continue;
            }
            checked += 1;
            let mut lhs = zero();
            for (k, p) in conn.poles.iter().enumerate() {
                let w = z - p.position;
                let mut pw = w;
                for j in 0..p.coeffs.len() {
                    lhs += field.coeffs[k][j] / pw;
                    pw *= w;
                }
            }
            let wi = z - ai;
            lhs += conn.poles[i].coeffs[0] / (wi * wi);
            if conn.poles[i].rank == 1 {
                lhs += conn.poles[i].coeffs[1] * c64(2.0, 0.0) / (wi * wi * wi);
            }
            let a_val = evaluate_matrix(conn, z, &tol).unwrap();
            let mut omega = -(conn.poles[i].coeffs[0] / wi);
            let mut d_omega = conn.poles[i].coeffs[0] / (wi * wi);
            if conn.poles[i].rank == 1 {
                omega -= conn.poles[i].coeffs[1] / (wi * wi);
                d_omega += conn.poles[i].coeffs[1] * c64(2.0, 0.0) / (wi * wi * wi);
            }
            let rhs = d_omega + commutator(&omega, &a_val);
            worst = worst.max(mat2::max_abs(&(lhs - rhs)));
        }
    }
    worst
}

#[test]
fn criterion_2_zero_curvature_consistency() {
    let tol = tolerances();
    let conn = generate_fixture(FixtureKind::IrregularM1N4, 1, &tol).unwrap();
    let worst_zc = zero_curvature_worst(&conn, 101);

    let mut worst_reduction = 0.0_f64;
    let mut r = rng(102);
    for _ in 0..100 {
        let fuchsian = random_trivial(&[0, 0, 0, 0], &mut r);
        let state =
            DeformationState { connection: fuchsian, u1: None, u2: None, path_parameter: 0.0 };
        for i in 0..4 {
            let a = schlesinger_rhs(&state, i, &tol).unwrap();
            let b = rank1_rhs(&state, i, &tol).unwrap();
            for (ca, cb) in a.coeffs.iter().zip(&b.coeffs) {
                worst_reduction = worst_reduction.max(mat2::max_abs(&(ca[0] - cb[0])));
            }
        }
    }
    let passed = worst_zc < 1e-8 && worst_reduction < 1e-12;
    report(
        2,
        "zero-curvature consistency",
        passed,
        &format!("pointwise residual {worst_zc:.3e}, reduction mismatch {worst_reduction:.3e}"),
    );
}

#[test]
fn criterion_3_u1_gradient_identity() {
    let tol = tolerances();
    let mut worst_rel = 0.0_f64;
    for kind in [FixtureKind::IrregularM1N4, FixtureKind::FuchsianN4] {
        let trivial = generate_fixture(kind, 1, &tol).unwrap();
        let (state, _) = make_auxiliary(&trivial, ZERO, &tol).unwrap();
        for i in 0..state.connection.poles.len() {
            let residual = u1_partial_identity(&state, i, 1e-6, &tol).unwrap();
            let scale = mat2::norm(&state.connection.poles[i].coeffs[0]).max(1e-30);
            worst_rel = worst_rel.max(residual / scale);
        }
    }
    report(
        3,
        "u1 gradient identity",
        worst_rel < 1e-5,
        &format!("worst relative residual {worst_rel:.3e}"),
    );
}

#[test]
fn criterion_4_gauge_round_trip() {
    let tol = tolerances();
    let mut worst_entry = 0.0_f64;
    let mut worst_trace = 0.0_f64;
    let mut worst_residue = 0.0_f64;
    let mut r = rng(104);
    for kind in [FixtureKind::FuchsianN4, FixtureKind::IrregularM1N4] {
        let trivial = generate_fixture(kind, 1, &tol).unwrap();
        let f0 = random_c64(&mut r);
        let (state, _) = make_auxiliary(&trivial, f0, &tol).unwrap();
        let (recovered, _) = to_malgrange(&state).unwrap();
        worst_residue = worst_residue.max(mat2::max_abs(&recovered.residue_sum()));

        // identify the single constant conjugation I + sigma E12
        let probe = trivial
            .poles
            .iter()
            .position(|p| p.coeffs[0][(1, 0)].norm() > 0.02)
            .expect("generic fixture");
        let sigma = (recovered.poles[probe].coeffs[0][(0, 0)]
            - trivial.poles[probe].coeffs[0][(0, 0)])
            / trivial.poles[probe].coeffs[0][(1, 0)];
        let c = CMat2::new(ONE, sigma, ZERO, ONE);
        let c_inv = CMat2::new(ONE, -sigma, ZERO, ONE);
        for (p_in, p_out) in trivial.poles.iter().zip(&recovered.poles) {
            for (m_in, m_out) in p_in.coeffs.iter().zip(&p_out.coeffs) {
                worst_entry = worst_entry.max(mat2::max_abs(&(c * m_in * c_inv - m_out)));
            }
        }

        let base = isomlab_core::continuation::default_base_point(&trivial);
        let before = compute_monodromy_data(&trivial, Some(base), 1e-10, &tol).unwrap();
        let after = compute_monodromy_data(&recovered, Some(base), 1e-10, &tol).unwrap();
        for (g_in, g_out) in before.matrices.iter().zip(&after.matrices) {
            worst_trace = worst_trace.max((mat2::trace(g_in) - mat2::trace(g_out)).norm());
        }
    }
    let passed = worst_entry < 1e-10 && worst_trace < 1e-6 && worst_residue < 1e-10;
    report(
        4,
        "gauge round trip",
        passed,
        &format!(
            "entrywise {worst_entry:.3e}, trace drift {worst_trace:.3e}, residue sum {worst_residue:.3e}"
        ),
    );
}

#[test]
fn criterion_5_apparent_infinity() {
    let tol = tolerances();
    let mut worst = 0.0_f64;
    let mut r = rng(105);
    for kind in [FixtureKind::FuchsianN4, FixtureKind::IrregularM1N4, FixtureKind::IrregularM2N2] {
        for seed in [1u64, 2u64] {
            let trivial = match generate_fixture(kind, seed, &tol) {
                Ok(c) => c,
                Err(_) => continue,
            };
            let f0 = random_c64(&mut r);
            let (state, _) = make_auxiliary(&trivial, f0, &tol).unwrap();
            let check = apparent_infinity_check(&state.connection, 1e-8, &tol).unwrap();
            worst = worst.max(check.deviation);
        }
    }
    report(5, "apparent infinity", worst < 1e-6, &format!("worst ||G_inf - I|| = {worst:.3e}"));
}

#[test]
fn criterion_6_theta_detection() {
    let tol = tolerances();
    // synthetic: exact counts and Newton residual
    let a0 = c64(0.07, -0.04);
    let slice = FnSlice(move |a: C64| (a - a0, ONE));
    let params = ScanParams::default();
    let one = theta_scan(&slice, 0, ZERO, 0.4, &params, &tol).unwrap();
    let far = FnSlice(move |a: C64| (a - c64(7.0, 0.0), ONE));
    let none = theta_scan(&far, 0, ZERO, 0.4, &params, &tol).unwrap();
    let synthetic_ok = one.winding == 1
        && one.zeros.len() == 1
        && one.zeros[0].residual < 1e-10
        && (one.zeros[0].location - a0).norm() < 1e-10
        && none.winding == 0
        && none.zeros.is_empty();

    // live checked-in fixture
    let meta = load_theta_meta();
    let entry = &meta.irregular_m1n4;
    let conn = load_theta_connection(entry);
    let state = DeformationState::new(conn, &tol).unwrap();
    let live_slice = DeformationSlice::new(state, entry.moving, tol).unwrap();
    let center = c64(entry.center[0], entry.center[1]);
    let out = theta_scan(&live_slice, entry.moving, center, entry.radius, &params, &tol).unwrap();
    let live_ok = out.winding >= 1
        && out
            .zeros
            .iter()
            .any(|z| z.residual < 1e-10 && z.gradient_nonzero);
    report(
        6,
        "theta detection",
        synthetic_ok && live_ok,
        &format!(
            "synthetic counts {}/{}, live winding {} zeros {}",
            one.winding,
            none.winding,
            out.winding,
            out.zeros.len()
        ),
    );
}

struct SyntheticBlowup {
    a0: C64,
    power: i32,
}

impl MalgrangeFamily for SyntheticBlowup {
    fn sample(&mut self, a: C64) -> isomlab_core::Result<FamilySample> {
        let u1 = a - self.a0;
        Ok(FamilySample { u1, coeff_norms: vec![(0, 1, 2.0 / u1.norm().powi(self.power))] })
    }
}

#[test]
fn criterion_7_pole_order_bound() {
    let tol = tolerances();
    // synthetic slopes recovered within 0.05
    let mut synthetic_ok = true;
    for (power, expect) in [(1, 1.0), (2, 2.0)] {
        let zero = ThetaZero {
            slice: 0,
            location: ZERO,
            residual: 0.0,
            gradient: vec![ONE],
            gradient_nonzero: true,
            iterations: 0,
            pole_fit: None,
        };
        let mut fam = SyntheticBlowup { a0: ZERO, power };
        let slopes = pole_order_fit(&mut fam, &zero, 0.7, &DEFAULT_FIT_LEVELS, &tol).unwrap();
        synthetic_ok &= (slopes[0].slope - expect).abs() < 0.05;
    }

    // live fixtures, both gated by the splitting bound
    let meta = load_theta_meta();
    let mut live_max: f64 = 0.0;
    let mut gates_ok = true;
    for entry in [&meta.fuchsian_n4, &meta.irregular_m1n4] {
        let conn = load_theta_connection(entry);
        gates_ok &= splitting_bound_check(conn.n_irregular(), conn.n_poles());
        let state = DeformationState::new(conn, &tol).unwrap();
        let mut slice = DeformationSlice::new(state.clone(), entry.moving, tol).unwrap();
        let z = refine_zero(&mut slice, entry.moving, c64(entry.zero[0], entry.zero[1]), Some(0.1), &tol)
            .unwrap();
        assert!(z.gradient_nonzero);
        let mut family =
            RecoveredFamily { slice: DeformationSlice::new(state, entry.moving, tol).unwrap() };
        let slopes = pole_order_fit(&mut family, &z, 0.4, &DEFAULT_FIT_LEVELS, &tol).unwrap();
        for s in &slopes {
            live_max = live_max.max(s.slope);
        }
    }
    let passed = synthetic_ok && gates_ok && live_max <= 2.1;
    report(
        7,
        "pole-order bound",
        passed,
        &format!("synthetic ok {synthetic_ok}, gates {gates_ok}, max live slope {live_max:.4}"),
    );
}

#[test]
fn criterion_8_normalized_log_strip() {
    let tol = tolerances();
    let mut r = rng(108);
    let mut worst_recon = 0.0_f64;
    let mut strip_ok = true;
    let mut count = 0;
    while count < 1000 {
        let g = random_matrix(&mut r) * c64(10.0 / 3.0, 0.0); // entries up to ~1
        if mat2::det(&g).norm() < 1e-3 {
            continue;
        }
        count += 1;
        let e = normalized_log(&g, &tol).unwrap();
        let back = mat2::exp(&(e * (TWO_PI * I)));
        worst_recon = worst_recon.max(mat2::norm(&(back - g)));
        let (l1, l2) = mat2::eigenvalues(&e);
        strip_ok &= (0.0..1.0).contains(&l1.re) && (0.0..1.0).contains(&l2.re);
    }
    let passed = worst_recon < 1e-10 && strip_ok;
    report(
        8,
        "normalized log strip",
        passed,
        &format!("1000 matrices, worst reconstruction {worst_recon:.3e}, strip ok {strip_ok}"),
    );
}

#[test]
fn criterion_9_continuation_oracles() {
    let tol = tolerances();
    // single-pole closed form
    let conn = RationalConnection::new(
        vec![fuchsian(ZERO, diag(c64(0.3, 0.0), c64(-0.2, 0.0)))],
        isomlab_core::connection::Normalization::Trivial,
    )
    .unwrap();
    let circle = ComplexPath::closed(
        (0..24)
            .map(|k| {
                let t = TWO_PI * (k as f64) / 24.0;
                c64(t.cos(), t.sin())
            })
            .collect(),
    );
    let g = integrate_along_path(&conn, &circle, &identity(), 1e-11, &tol).unwrap().matrix;
    let expect = diag((TWO_PI * 0.3 * I).exp(), (-TWO_PI * 0.2 * I).exp());
    let closed_form = mat2::norm(&(g - expect));

    // composition and reversal at transport tolerance 1e-10
    let ttol = 1e-10;
    let fix = generate_fixture(FixtureKind::IrregularM1N4, 1, &tol).unwrap();
    let p = ComplexPath::open(vec![c64(0.1, 2.6), c64(2.9, 0.9), c64(0.5, -2.7), c64(-2.4, 0.4)]);
    let q = ComplexPath::open(vec![c64(-2.4, 0.4), c64(-2.0, -2.8), c64(2.2, -2.9)]);
    let tp = integrate_along_path(&fix, &p, &identity(), ttol, &tol).unwrap().matrix;
    let tq = integrate_along_path(&fix, &q, &tp, ttol, &tol).unwrap().matrix;
    let tc = integrate_along_path(&fix, &p.concat(&q).unwrap(), &identity(), ttol, &tol)
        .unwrap()
        .matrix;
    let composition = mat2::norm(&(tq - tc));
    let back = integrate_along_path(&fix, &p.reversed(), &tp, ttol, &tol).unwrap().matrix;
    let reversal = mat2::norm(&(back - identity()));

    // det transport vs trace quadrature
    let rk = AdaptiveRk::with_tol(1e-12);
    let mut acc = ZERO;
    for (za, zb) in p.segments() {
        let dz = zb - za;
        let sol = rk
            .integrate(
                |s, _y, dy| {
                    let b = evaluate_matrix(&fix, za + dz * s, &tol)?;
                    dy[0] = mat2::trace(&b) * dz;
                    Ok(())
                },
                0.0,
                1.0,
                &[ZERO],
                |_, _| StepVerdict::Accept,
            )
            .unwrap();
        acc += sol.y[0];
    }
    let det_residual = (mat2::det(&tp) - acc.exp()).norm();

    let passed = closed_form < 1e-8
        && composition < 2.0 * ttol
        && reversal < 2.0 * ttol
        && det_residual < 1e-8;
    report(
        9,
        "analytic-continuation oracles",
        passed,
        &format!(
            "closed form {closed_form:.3e}, composition {composition:.3e}, reversal {reversal:.3e}, det {det_residual:.3e}"
        ),
    );
}
