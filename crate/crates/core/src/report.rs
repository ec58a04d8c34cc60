//! Serializable report documents and CSV emitters shared by the test
//! suites and the CLI. All complex values serialize as `[re, im]` pairs.

use std::io::Write;

use serde::Serialize;

use crate::connection::ValidationReport;
use crate::continuation::MonodromyData;
use crate::deformation::DeformDiagnostics;
use crate::path::PathDoc;
use crate::schema::{matrix_to_doc, ComplexPair, MatrixDoc};
use crate::theta::{FitSlope, GridSample, ScanOutcome, ThetaZero};
use crate::C64;

#[derive(Debug, Clone, Serialize)]
pub struct MonodromyPoleReport {
    pub pole: usize,
    pub loop_waypoints: PathDoc,
    pub matrix: MatrixDoc,
    pub normalized_log: MatrixDoc,
    pub exponents: [ComplexPair; 2],
    pub trace: ComplexPair,
    pub det: ComplexPair,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonodromyReport {
    pub base_point: ComplexPair,
    pub tol: f64,
    pub poles: Vec<MonodromyPoleReport>,
    /// Largest `|| exp(2 pi i E) - G ||` over the poles.
    pub reconstruction_error: f64,
    pub irreducible: bool,
}

impl MonodromyReport {
    pub fn new(data: &MonodromyData, irreducible: bool) -> Self {
        let poles = data
            .matrices
            .iter()
            .enumerate()
            .map(|(i, g)| MonodromyPoleReport {
                pole: i,
                loop_waypoints: (&data.loops[i]).into(),
                matrix: matrix_to_doc(g),
                normalized_log: matrix_to_doc(&data.normalized_logs[i]),
                exponents: [data.exponents[i].0.into(), data.exponents[i].1.into()],
                trace: crate::mat2::trace(g).into(),
                det: crate::mat2::det(g).into(),
            })
            .collect();
        MonodromyReport {
            base_point: data.base_point.into(),
            tol: data.tol,
            poles,
            reconstruction_error: data.max_reconstruction_error(),
            irreducible,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationDocument {
    pub passed: bool,
    pub findings: Vec<crate::connection::Finding>,
}

impl From<&ValidationReport> for ValidationDocument {
    fn from(r: &ValidationReport) -> Self {
        ValidationDocument { passed: r.passed, findings: r.findings.clone() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DeformReport {
    pub completed: bool,
    pub path_parameter: f64,
    pub poles: Vec<ComplexPair>,
    pub coeff_norms: Vec<CoeffNormDoc>,
    pub u1: Option<ComplexPair>,
    pub diagnostics: DeformDiagnostics,
    pub blowup: Option<BlowupDoc>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowupDoc {
    pub path_parameter: f64,
    pub coeff_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoeffNormDoc {
    pub pole: usize,
    pub order: usize,
    pub norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThetaZeroDoc {
    pub slice: usize,
    pub location: ComplexPair,
    pub residual: f64,
    pub gradient: Vec<ComplexPair>,
    pub gradient_nonzero: bool,
    pub iterations: usize,
    pub pole_fit: Option<Vec<FitSlopeDoc>>,
}

impl From<&ThetaZero> for ThetaZeroDoc {
    fn from(z: &ThetaZero) -> Self {
        ThetaZeroDoc {
            slice: z.slice,
            location: z.location.into(),
            residual: z.residual,
            gradient: z.gradient.iter().map(|&g| g.into()).collect(),
            gradient_nonzero: z.gradient_nonzero,
            iterations: z.iterations,
            pole_fit: z.pole_fit.as_ref().map(|v| v.iter().map(FitSlopeDoc::from).collect()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSlopeDoc {
    pub pole: usize,
    pub order: usize,
    pub slope: f64,
}

impl From<&FitSlope> for FitSlopeDoc {
    fn from(s: &FitSlope) -> Self {
        FitSlopeDoc { pole: s.pole, order: s.order, slope: s.slope }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub center: ComplexPair,
    pub radius: f64,
    pub winding: i64,
    pub boundary_min_abs_u1: f64,
    pub degenerate: bool,
    pub count_consistent: bool,
    pub zeros: Vec<ThetaZeroDoc>,
    pub grid_points: usize,
}

impl From<&ScanOutcome> for ScanReport {
    fn from(s: &ScanOutcome) -> Self {
        ScanReport {
            center: s.center.into(),
            radius: s.radius,
            winding: s.winding,
            boundary_min_abs_u1: s.boundary_min_abs_u1,
            degenerate: s.degenerate,
            count_consistent: s.count_consistent,
            zeros: s.zeros.iter().map(ThetaZeroDoc::from).collect(),
            grid_points: s.grid.len(),
        }
    }
}

/// `Re a, Im a, Re u1, Im u1, |u1|` rows for external plotting.
pub fn write_grid_csv<W: Write>(mut w: W, grid: &[GridSample]) -> std::io::Result<()> {
    writeln!(w, "re_a,im_a,re_u1,im_u1,abs_u1")?;
    for g in grid {
        writeln!(w, "{:e},{:e},{:e},{:e},{:e}", g.a.re, g.a.im, g.u1.re, g.u1.im, g.u1.norm())?;
    }
    Ok(())
}

/// One row per trace point of a deformation run: path parameter, pole
/// positions, coefficient norms, and the tau value when available.
pub struct TraceRow {
    pub t: f64,
    pub poles: Vec<C64>,
    pub coeff_norms: Vec<f64>,
    pub u1: Option<C64>,
}

pub fn write_trace_csv<W: Write>(
    mut w: W,
    pole_count: usize,
    coeff_labels: &[String],
    rows: &[TraceRow],
) -> std::io::Result<()> {
    let mut header = vec!["t".to_string()];
    for i in 0..pole_count {
        header.push(format!("re_a{i}"));
        header.push(format!("im_a{i}"));
    }
    for label in coeff_labels {
        header.push(format!("norm_{label}"));
    }
    header.push("re_u1".into());
    header.push("im_u1".into());
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let mut cells = vec![format!("{:e}", row.t)];
        for p in &row.poles {
            cells.push(format!("{:e}", p.re));
            cells.push(format!("{:e}", p.im));
        }
        for n in &row.coeff_norms {
            cells.push(format!("{n:e}"));
        }
        match row.u1 {
            Some(u) => {
                cells.push(format!("{:e}", u.re));
                cells.push(format!("{:e}", u.im));
            }
            None => {
                cells.push(String::new());
                cells.push(String::new());
            }
        }
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}
