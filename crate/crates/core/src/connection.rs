//! Data model and validation for 2x2 rational connections
//! `dy/dz = B(z) y`, `B(z) = sum_{i,j} B_ij / (z - a_i)^j` with Fuchsian
//! (rank 0) and rank-1 irregular poles.
//!
//! Construction enforces structural coherence only (matching lengths, rank
//! bounds); the numerical invariants — pole separation, residue sum,
//! non-resonance — are reported by [`validate_connection`] so that callers
//! can also probe deliberately broken configurations.

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::mat2;
use crate::{C64, CMat2};

/// Residue-sum normalization at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `sum_i B_i1 = 0`: infinity is a regular point.
    Trivial,
    /// `sum_i B_i1 = K = diag(-1, 1)`: infinity is an apparent Fuchsian
    /// point with fundamental matrix `U(z) z^K`.
    Auxiliary,
}

impl Normalization {
    pub fn target(self) -> CMat2 {
        match self {
            Normalization::Trivial => mat2::zero(),
            Normalization::Auxiliary => mat2::k_matrix(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Normalization::Trivial => "trivial",
            Normalization::Auxiliary => "auxiliary",
        }
    }
}

/// One pole of a rational connection: position, Poincare rank and
/// coefficient matrices `B_1 .. B_{rank+1}` of the principal part
/// `sum_j B_j / (z - a)^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pole {
    pub position: C64,
    /// Poincare rank, 0 (Fuchsian) or 1.
    pub rank: usize,
    /// `coeffs[j-1]` multiplies `(z - a)^{-j}`; the residue is `coeffs[0]`.
    pub coeffs: Vec<CMat2>,
}

impl Pole {
    pub fn residue(&self) -> &CMat2 {
        &self.coeffs[0]
    }

    /// Leading coefficient `B_{rank+1}`.
    pub fn leading(&self) -> &CMat2 {
        &self.coeffs[self.rank]
    }
}

/// A 2x2 rational connection with a declared normalization at infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalConnection {
    pub poles: Vec<Pole>,
    pub normalization: Normalization,
}

impl RationalConnection {
    /// Builds a connection, rejecting structurally incoherent data:
    /// rank > 1, more than two rank-1 poles, or coefficient lists whose
    /// length does not match the rank. Numerical invariants are left to
    /// [`validate_connection`].
    pub fn new(poles: Vec<Pole>, normalization: Normalization) -> Result<Self> {
        if poles.is_empty() {
            return Err(Error::Shape("a connection needs at least one pole".into()));
        }
        let mut irregular = 0;
        for (i, p) in poles.iter().enumerate() {
            if p.rank > 1 {
                return Err(Error::Shape(format!(
                    "pole {i} has Poincare rank {}, only ranks 0 and 1 are supported",
                    p.rank
                )));
            }
            if p.coeffs.len() != p.rank + 1 {
                return Err(Error::Shape(format!(
                    "pole {i} has rank {} but {} coefficient matrices",
                    p.rank,
                    p.coeffs.len()
                )));
            }
            if p.rank == 1 {
                irregular += 1;
            }
        }
        if irregular > 2 {
            return Err(Error::Shape(format!(
                "{irregular} rank-1 poles; at most two are supported"
            )));
        }
        Ok(Self { poles, normalization })
    }

    pub fn n_poles(&self) -> usize {
        self.poles.len()
    }

    /// Number of rank-1 poles.
    pub fn n_irregular(&self) -> usize {
        self.poles.iter().filter(|p| p.rank == 1).count()
    }

    pub fn positions(&self) -> Vec<C64> {
        self.poles.iter().map(|p| p.position).collect()
    }

    pub fn residue_sum(&self) -> CMat2 {
        self.poles.iter().fold(mat2::zero(), |acc, p| acc + p.coeffs[0])
    }

    /// Coefficient of `z^-2` in the expansion of `B(z)` at infinity:
    /// `sum_i B_i1 a_i + sum_{rank 1} B_i2`.
    pub fn infinity_r(&self) -> CMat2 {
        let mut r = mat2::zero();
        for p in &self.poles {
            r += p.coeffs[0] * p.position;
            if p.rank == 1 {
                r += p.coeffs[1];
            }
        }
        r
    }

    /// Coefficient of `z^-3`: `sum_i B_i1 a_i^2 + 2 sum_{rank 1} B_i2 a_i`.
    pub fn infinity_a3(&self) -> CMat2 {
        let mut r = mat2::zero();
        for p in &self.poles {
            r += p.coeffs[0] * (p.position * p.position);
            if p.rank == 1 {
                r += p.coeffs[1] * (p.position * 2.0);
            }
        }
        r
    }

    /// Minimum pairwise pole distance together with the closest pair.
    pub fn min_pole_distance(&self) -> Option<(f64, usize, usize)> {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..self.poles.len() {
            for j in (i + 1)..self.poles.len() {
                let d = (self.poles[i].position - self.poles[j].position).norm();
                if best.map_or(true, |(b, _, _)| d < b) {
                    best = Some((d, i, j));
                }
            }
        }
        best
    }

    /// Distance from `z` to the nearest pole.
    pub fn distance_to_poles(&self, z: C64) -> (f64, usize) {
        let mut dist = f64::INFINITY;
        let mut idx = 0;
        for (i, p) in self.poles.iter().enumerate() {
            let d = (z - p.position).norm();
            if d < dist {
                dist = d;
                idx = i;
            }
        }
        (dist, idx)
    }

    /// Nudges one residue so that the stored residue sum hits the
    /// normalization target bitwise. Intended for constructions whose
    /// output satisfies the target up to rounding; the correction is
    /// reported back as its Frobenius norm.
    pub fn polish_residue_sum(&mut self) -> f64 {
        let defect = self.residue_sum() - self.normalization.target();
        let norm = mat2::norm(&defect);
        if let Some(last) = self.poles.last_mut() {
            last.coeffs[0] -= defect;
        }
        norm
    }
}

/// One pass/fail finding of [`validate_connection`].
#[derive(Debug, Clone, Serialize)]
pub struct Finding {
    pub name: String,
    pub passed: bool,
    /// Measured residual where applicable.
    pub residual: Option<f64>,
    pub detail: String,
}

/// Validation result: one finding per invariant, overall pass iff all hold.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
    pub passed: bool,
}

impl ValidationReport {
    fn push(&mut self, name: &str, passed: bool, residual: Option<f64>, detail: String) {
        self.passed &= passed;
        self.findings.push(Finding { name: name.into(), passed, residual, detail });
    }

    pub fn failure_summary(&self) -> String {
        self.findings
            .iter()
            .filter(|f| !f.passed)
            .map(|f| format!("{}: {}", f.name, f.detail))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Checks every connection invariant and reports per-invariant findings.
/// Never fails: broken configurations come back as failed findings.
pub fn validate_connection(c: &RationalConnection, tol: &Tolerances) -> ValidationReport {
    let mut report = ValidationReport { findings: Vec::new(), passed: true };

    match c.min_pole_distance() {
        Some((d, i, j)) => {
            let ok = d > tol.pole_separation;
            report.push(
                "pole-separation",
                ok,
                Some(d),
                if ok {
                    format!("minimum pairwise distance {d:.3e}")
                } else {
                    format!("pole collision: poles {i} and {j} are {d:.3e} apart")
                },
            );
        }
        None => report.push("pole-separation", true, None, "single pole".into()),
    }

    let defect = mat2::max_abs(&(c.residue_sum() - c.normalization.target()));
    report.push(
        "residue-sum",
        defect <= tol.residue_sum,
        Some(defect),
        format!(
            "sum of residues vs {} target: entrywise defect {defect:.3e}",
            c.normalization.name()
        ),
    );

    for (i, p) in c.poles.iter().enumerate() {
        if p.rank == 1 {
            let data = local_formal_data(c, i);
            report.push(
                &format!("non-resonance-pole-{i}"),
                !data.resonant,
                Some(data.eigen_gap()),
                format!(
                    "leading eigenvalues {} and {}",
                    data.leading_eigenvalues.0, data.leading_eigenvalues.1
                ),
            );
        }
    }

    report
}

/// Eigen data of the leading coefficient at one pole.
#[derive(Debug, Clone)]
pub struct LocalFormalData {
    pub pole: usize,
    pub leading_eigenvalues: (C64, C64),
    pub resonant: bool,
}

impl LocalFormalData {
    pub fn eigen_gap(&self) -> f64 {
        (self.leading_eigenvalues.0 - self.leading_eigenvalues.1).norm()
    }
}

/// Eigenvalues of the leading coefficient matrix at pole `i`; for rank-1
/// poles the resonant flag is set when the gap falls below the configured
/// tolerance (for Fuchsian poles it reflects the same gap criterion on the
/// residue).
pub fn local_formal_data(c: &RationalConnection, i: usize) -> LocalFormalData {
    let tol = Tolerances::default();
    local_formal_data_with(c, i, &tol)
}

pub fn local_formal_data_with(c: &RationalConnection, i: usize, tol: &Tolerances) -> LocalFormalData {
    let p = &c.poles[i];
    let (l1, l2) = mat2::eigenvalues(p.leading());
    LocalFormalData {
        pole: i,
        leading_eigenvalues: (l1, l2),
        resonant: (l1 - l2).norm() < tol.eigen_gap,
    }
}

/// Evaluates `B(z)` away from the poles.
pub fn evaluate_matrix(c: &RationalConnection, z: C64, tol: &Tolerances) -> Result<CMat2> {
    let (dist, pole) = c.distance_to_poles(z);
    if dist <= tol.evaluation_guard {
        return Err(Error::EvaluationNearPole { z, pole, dist, guard: tol.evaluation_guard });
    }
    let mut b = mat2::zero();
    for p in &c.poles {
        let w = z - p.position;
        let mut pw = w;
        for coeff in &p.coeffs {
            b += coeff / pw;
            pw *= w;
        }
    }
    Ok(b)
}
