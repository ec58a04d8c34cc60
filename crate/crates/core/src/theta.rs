//! Theta-divisor numerics in a one-complex-parameter slice: disc scans of
//! the tau value `u1` with winding counts by the argument principle, Newton
//! refinement of zeros, pole-order fits of the recovered trivial family,
//! and the bundle-splitting bound gate.

use rayon::prelude::*;

use crate::config::Tolerances;
use crate::connection::RationalConnection;
use crate::deformation::{deform_path, DeformOptions, DeformationPath, DeformationState};
use crate::error::{Error, Result};
use crate::gauge;
use crate::mat2;
use crate::C64;

/// One evaluation of the tau slice at a point of the moving coordinate.
#[derive(Debug, Clone)]
pub struct SlicePoint {
    pub u1: C64,
    /// `du1/da` for the moving coordinate.
    pub slice_gradient: C64,
    /// `-b_i1` per pole (upper-right entries of `-B*_i1`), when available.
    pub gradient: Vec<C64>,
}

/// A holomorphic slice `a -> u1(a)` of the tau value. Implementations carry
/// whatever state they need; evaluations may fail (integration obstacles).
pub trait TauSlice {
    fn eval(&mut self, a: C64) -> Result<SlicePoint>;
}

/// Closure-backed slice for synthetic harnesses: the closure returns
/// `(u1, du1/da)`.
#[derive(Clone)]
pub struct FnSlice<F>(pub F)
where
    F: Fn(C64) -> (C64, C64) + Clone;

impl<F> TauSlice for FnSlice<F>
where
    F: Fn(C64) -> (C64, C64) + Clone,
{
    fn eval(&mut self, a: C64) -> Result<SlicePoint> {
        let (u1, g) = (self.0)(a);
        Ok(SlicePoint { u1, slice_gradient: g, gradient: vec![g] })
    }
}

/// Live slice: one pole position of an auxiliary deformation state varies,
/// every evaluation re-integrates the deformation equations from the
/// nearest cached state.
#[derive(Clone)]
pub struct DeformationSlice {
    base: DeformationState,
    pub moving: usize,
    tolerances: Tolerances,
    options: DeformOptions,
    cache: Vec<(C64, DeformationState)>,
    max_cache: usize,
}

impl DeformationSlice {
    pub fn new(base: DeformationState, moving: usize, tolerances: Tolerances) -> Result<Self> {
        if !base.is_auxiliary() {
            return Err(Error::NormalizationMismatch {
                expected: "auxiliary",
                found: base.connection.normalization.name(),
            });
        }
        if moving >= base.connection.poles.len() {
            return Err(Error::InvalidParameter(format!("moving pole {moving} out of range")));
        }
        Ok(Self {
            base,
            moving,
            tolerances,
            options: DeformOptions::default(),
            cache: Vec::new(),
            max_cache: 48,
        })
    }

    pub fn with_options(mut self, options: DeformOptions) -> Self {
        self.options = options;
        self
    }

    /// Every point of the closed disc must keep the moving pole clear of
    /// the frozen ones.
    pub fn check_disc(&self, center: C64, radius: f64) -> Result<()> {
        for (j, p) in self.base.connection.poles.iter().enumerate() {
            if j == self.moving {
                continue;
            }
            let d = (p.position - center).norm();
            if d <= radius + self.tolerances.pole_separation {
                return Err(Error::PoleCollision {
                    i: self.moving,
                    j,
                    dist: (d - radius).max(0.0),
                    tol: self.tolerances.pole_separation,
                });
            }
        }
        Ok(())
    }

    /// Deformation state with the moving pole at `a`, integrated from the
    /// nearest cached state.
    pub fn state_at(&mut self, a: C64) -> Result<DeformationState> {
        let start = {
            let mut best: (&C64, &DeformationState) =
                (&self.base.connection.poles[self.moving].position, &self.base);
            let mut best_d = (a - best.0).norm();
            for (pos, st) in &self.cache {
                let d = (a - pos).norm();
                if d < best_d {
                    best_d = d;
                    best = (pos, st);
                }
            }
            best.1.clone()
        };
        let here = start.connection.poles[self.moving].position;
        if (here - a).norm() == 0.0 {
            return Ok(start);
        }
        let path = DeformationPath::segment(self.moving, here, a);
        let outcome = deform_path(&start, &path, &self.tolerances, &self.options)?;
        if !outcome.completed {
            return Err(Error::SamplingFailure(format!(
                "deformation stalled at path parameter {}",
                outcome.state.path_parameter
            )));
        }
        let state = outcome.state;
        self.cache.push((a, state.clone()));
        if self.cache.len() > self.max_cache {
            self.cache.remove(0);
        }
        Ok(state)
    }
}

impl TauSlice for DeformationSlice {
    fn eval(&mut self, a: C64) -> Result<SlicePoint> {
        let state = self.state_at(a)?;
        let u1 = gauge::compute_u1(&state.connection);
        let gradient: Vec<C64> =
            state.connection.poles.iter().map(|p| -p.coeffs[0][(0, 1)]).collect();
        Ok(SlicePoint { u1, slice_gradient: gradient[self.moving], gradient })
    }
}

/// A refined zero of `u1` in the slice.
#[derive(Debug, Clone)]
pub struct ThetaZero {
    /// Index of the varying pole coordinate.
    pub slice: usize,
    pub location: C64,
    pub residual: f64,
    /// `-b_i1` entries at the zero, one per pole for live slices.
    pub gradient: Vec<C64>,
    pub gradient_nonzero: bool,
    pub iterations: usize,
    /// Fitted blow-up exponents, filled by [`pole_order_fit`].
    pub pole_fit: Option<Vec<FitSlope>>,
}

/// Newton refinement of a zero candidate using `du1/da_i = -b_i1`.
///
/// Converges to `|u1| < tolerances.newton_residual` or errors after
/// `newton_max_iter` iterations. A vanishing gradient at the zero is
/// reported through `gradient_nonzero = false` (inconclusive submanifold
/// status), not as an error, provided the residual target was met.
pub fn refine_zero<S: TauSlice>(
    slice: &mut S,
    slice_index: usize,
    start: C64,
    max_step: Option<f64>,
    tol: &Tolerances,
) -> Result<ThetaZero> {
    let mut a = start;
    let mut best: Option<(C64, SlicePoint)> = None;
    let mut first_hit = 0usize;
    let mut prev_res = f64::INFINITY;
    for iter in 0..=tol.newton_max_iter {
        let point = slice.eval(a)?;
        let res = point.u1.norm();
        if res < tol.newton_residual {
            let improving = res < prev_res * 0.5;
            if best.is_none() {
                first_hit = iter;
            }
            if best.as_ref().map_or(true, |(_, p)| res < p.u1.norm()) {
                best = Some((a, point.clone()));
            }
            // polish while the residual still halves per step: a multiple
            // zero keeps improving and drives the gradient visibly to zero,
            // a simple zero stalls at the noise floor after a step or two
            if !improving || iter == tol.newton_max_iter {
                break;
            }
        }
        prev_res = res;
        let g = point.slice_gradient;
        if g.norm() < 1e-14 * res.max(1.0) {
            return Err(Error::NewtonNonConvergence { iterations: iter, residual: res });
        }
        let mut step = -point.u1 / g;
        if let Some(cap) = max_step {
            if step.norm() > cap {
                step *= cap / step.norm();
            }
        }
        a += step;
    }
    match best {
        Some((location, point)) => {
            let max_b = point.gradient.iter().map(|g| g.norm()).fold(0.0, f64::max);
            Ok(ThetaZero {
                slice: slice_index,
                location,
                residual: point.u1.norm(),
                gradient: point.gradient,
                gradient_nonzero: max_b > tol.gradient_floor,
                iterations: first_hit,
                pole_fit: None,
            })
        }
        None => {
            let res = slice.eval(a)?.u1.norm();
            Err(Error::NewtonNonConvergence { iterations: tol.newton_max_iter, residual: res })
        }
    }
}

/// Scan parameters for [`theta_scan`].
#[derive(Debug, Clone)]
pub struct ScanParams {
    /// Boundary samples before adaptive refinement.
    pub boundary_samples: usize,
    /// Radial samples per ray (the last one is the boundary).
    pub radial_samples: usize,
    /// Cap on refined boundary points.
    pub max_boundary_points: usize,
    /// Upper bound on Newton seeds taken from the grid.
    pub max_seeds: usize,
}

impl Default for ScanParams {
    fn default() -> Self {
        Self { boundary_samples: 48, radial_samples: 5, max_boundary_points: 1024, max_seeds: 6 }
    }
}

/// One grid sample of the scan.
#[derive(Debug, Clone)]
pub struct GridSample {
    pub a: C64,
    pub u1: C64,
}

/// Result of a disc scan.
#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub center: C64,
    pub radius: f64,
    /// Zeros inside the disc counted with multiplicity by the argument
    /// principle.
    pub winding: i64,
    pub zeros: Vec<ThetaZero>,
    pub boundary_min_abs_u1: f64,
    pub grid: Vec<GridSample>,
    /// All grid values below the degeneracy floor: the configuration looks
    /// reducible (`u1` identically zero).
    pub degenerate: bool,
    /// Winding count matched by the number of refined zeros (gradient
    /// multiplicities not resolved beyond simple zeros).
    pub count_consistent: bool,
}

fn angle_point(center: C64, radius: f64, theta: f64) -> C64 {
    center + C64::new(theta.cos(), theta.sin()) * radius
}

/// Scans a disc of the slice coordinate: evaluates `u1` on radial rays,
/// counts the boundary winding by the argument principle with adaptive
/// angular refinement, seeds Newton refinement at grid minima and returns
/// the refined zeros.
///
/// Errors with [`Error::ScanInconclusive`] when the boundary modulus dips
/// below ten times the noise floor or the phase cannot be resolved.
pub fn theta_scan<S>(
    proto: &S,
    slice_index: usize,
    center: C64,
    radius: f64,
    params: &ScanParams,
    tol: &Tolerances,
) -> Result<ScanOutcome>
where
    S: TauSlice + Clone + Send + Sync,
{
    if radius <= 0.0 {
        return Err(Error::InvalidParameter("scan radius must be positive".into()));
    }
    let rays = params.boundary_samples.max(8);
    let radial = params.radial_samples.max(2);

    // radial rays, in parallel, each on its own slice clone
    let ray_results: Vec<Result<Vec<GridSample>>> = (0..rays)
        .into_par_iter()
        .map(|j| {
            let mut slice = proto.clone();
            let theta = std::f64::consts::TAU * (j as f64) / (rays as f64);
            let mut samples = Vec::with_capacity(radial);
            for k in 1..=radial {
                let r = radius * (k as f64) / (radial as f64);
                let a = angle_point(center, r, theta);
                let point = slice.eval(a)?;
                samples.push(GridSample { a, u1: point.u1 });
            }
            Ok(samples)
        })
        .collect();

    let mut grid = Vec::new();
    // the center itself
    {
        let mut slice = proto.clone();
        if let Ok(p) = slice.eval(center) {
            grid.push(GridSample { a: center, u1: p.u1 });
        }
    }
    let mut boundary: Vec<(f64, C64)> = Vec::with_capacity(rays);
    let mut failed_rays = 0usize;
    for (j, ray) in ray_results.into_iter().enumerate() {
        let theta = std::f64::consts::TAU * (j as f64) / (rays as f64);
        match ray {
            Ok(samples) => {
                if let Some(last) = samples.last() {
                    boundary.push((theta, last.u1));
                }
                grid.extend(samples);
            }
            Err(_) => failed_rays += 1,
        }
    }
    if failed_rays > 0 {
        return Err(Error::ScanInconclusive(format!(
            "{failed_rays} of {rays} boundary rays failed to integrate"
        )));
    }

    let degenerate = grid.iter().all(|g| g.u1.norm() < 1e-12);
    if degenerate {
        return Ok(ScanOutcome {
            center,
            radius,
            winding: 0,
            zeros: Vec::new(),
            boundary_min_abs_u1: 0.0,
            grid,
            degenerate: true,
            count_consistent: true,
        });
    }

    // adaptive angular refinement until every phase jump is below pi/2
    for _round in 0..8 {
        let mut gaps: Vec<usize> = Vec::new();
        for k in 0..boundary.len() {
            let (_, u_here) = boundary[k];
            let (_, u_next) = boundary[(k + 1) % boundary.len()];
            let jump = (u_next / u_here).arg().abs();
            if jump > std::f64::consts::FRAC_PI_2 {
                gaps.push(k);
            }
        }
        if gaps.is_empty() {
            break;
        }
        if boundary.len() + gaps.len() > params.max_boundary_points {
            return Err(Error::ScanInconclusive(
                "phase jumps on the boundary did not resolve under refinement".into(),
            ));
        }
        let new_points: Vec<Result<(f64, C64)>> = gaps
            .par_iter()
            .map(|&k| {
                let t0 = boundary[k].0;
                let mut t1 = boundary[(k + 1) % boundary.len()].0;
                if t1 <= t0 {
                    t1 += std::f64::consts::TAU;
                }
                let tm = 0.5 * (t0 + t1);
                let mut slice = proto.clone();
                let point = slice.eval(angle_point(center, radius, tm))?;
                Ok((tm % std::f64::consts::TAU, point.u1))
            })
            .collect();
        for p in new_points {
            let (t, u) = p.map_err(|e| Error::ScanInconclusive(format!("boundary refinement: {e}")))?;
            boundary.push((t, u));
            grid.push(GridSample { a: angle_point(center, radius, t), u1: u });
        }
        boundary.sort_by(|x, y| x.0.total_cmp(&y.0));
    }

    let boundary_min_abs_u1 = boundary.iter().map(|(_, u)| u.norm()).fold(f64::INFINITY, f64::min);
    if boundary_min_abs_u1 < 10.0 * tol.scan_noise_floor {
        return Err(Error::ScanInconclusive(format!(
            "boundary |u1| dipped to {boundary_min_abs_u1:.3e}; adjust the disc radius"
        )));
    }

    let mut total_arg = 0.0;
    for k in 0..boundary.len() {
        let (_, u_here) = boundary[k];
        let (_, u_next) = boundary[(k + 1) % boundary.len()];
        total_arg += (u_next / u_here).arg();
    }
    let winding_f = total_arg / std::f64::consts::TAU;
    let winding = winding_f.round() as i64;
    if (winding_f - winding as f64).abs() > 0.25 {
        return Err(Error::ScanInconclusive(format!(
            "argument principle did not close to an integer (got {winding_f:.3})"
        )));
    }

    // Newton seeds at the grid minima, stopping once the winding count is
    // matched or the seed budget is spent
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&x, &y| grid[x].u1.norm().total_cmp(&grid[y].u1.norm()));
    let mut zeros: Vec<ThetaZero> = Vec::new();
    let dedup = (radius * 1e-6).max(1e-10);
    if winding > 0 {
        let mut attempts = 0usize;
        for &idx in &order {
            if attempts >= params.max_seeds || zeros.len() as i64 >= winding {
                break;
            }
            attempts += 1;
            let mut slice = proto.clone();
            match refine_zero(&mut slice, slice_index, grid[idx].a, Some(radius * 0.5), tol) {
                Ok(z) => {
                    let inside = (z.location - center).norm() <= radius * (1.0 + 1e-9);
                    let duplicate = zeros.iter().any(|w| (w.location - z.location).norm() < dedup);
                    if inside && !duplicate {
                        zeros.push(z);
                    }
                }
                Err(_) => continue,
            }
        }
    }
    zeros.sort_by(|a, b| a.location.re.total_cmp(&b.location.re).then(a.location.im.total_cmp(&b.location.im)));

    let count_consistent = zeros.len() as i64 == winding;
    Ok(ScanOutcome {
        center,
        radius,
        winding,
        zeros,
        boundary_min_abs_u1,
        grid,
        degenerate: false,
        count_consistent,
    })
}

/// One sample of a coefficient family for pole-order fitting.
#[derive(Debug, Clone)]
pub struct FamilySample {
    pub u1: C64,
    /// `(pole, order j, Frobenius norm of B_ij)`.
    pub coeff_norms: Vec<(usize, usize, f64)>,
}

/// A family of coefficient matrices over the slice coordinate, blowing up
/// on the theta divisor.
pub trait MalgrangeFamily {
    fn sample(&mut self, a: C64) -> Result<FamilySample>;
}

/// Live family: the trivial-normalization coefficients recovered from the
/// auxiliary slice through the gauge.
pub struct RecoveredFamily {
    pub slice: DeformationSlice,
}

impl MalgrangeFamily for RecoveredFamily {
    fn sample(&mut self, a: C64) -> Result<FamilySample> {
        let state = self.slice.state_at(a)?;
        let u1 = gauge::compute_u1(&state.connection);
        let (trivial, _) = gauge::to_malgrange(&state)?;
        Ok(FamilySample { u1, coeff_norms: coefficient_norms(&trivial) })
    }
}

pub fn coefficient_norms(c: &RationalConnection) -> Vec<(usize, usize, f64)> {
    let mut v = Vec::new();
    for (i, p) in c.poles.iter().enumerate() {
        for (j, m) in p.coeffs.iter().enumerate() {
            v.push((i, j + 1, mat2::norm(m)));
        }
    }
    v
}

/// Fitted blow-up exponent of one coefficient matrix.
#[derive(Debug, Clone)]
pub struct FitSlope {
    pub pole: usize,
    pub order: usize,
    /// Slope of `log ||B_ij||` against `-log |u1|`.
    pub slope: f64,
}

/// Default |u1| levels for pole-order fitting: two decades above the
/// integration noise, three decades of blow-up.
pub const DEFAULT_FIT_LEVELS: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

/// Samples the family along a ray from the refined zero, bisecting onto the
/// requested `|u1|` levels, and fits the slope of `log ||B_ij||` against
/// `-log |u1|` per coefficient by least squares.
pub fn pole_order_fit<F: MalgrangeFamily>(
    family: &mut F,
    zero: &ThetaZero,
    ray_angle: f64,
    levels: &[f64],
    tol: &Tolerances,
) -> Result<Vec<FitSlope>> {
    if levels.len() < 2 {
        return Err(Error::InvalidParameter("need at least two levels to fit a slope".into()));
    }
    if !zero.gradient_nonzero {
        return Err(Error::SamplingFailure(
            "pole-order fit needs a refined zero with nonzero gradient".into(),
        ));
    }
    let dir = C64::new(ray_angle.cos(), ray_angle.sin());
    let grad = zero
        .gradient
        .iter()
        .map(|g| g.norm())
        .fold(0.0, f64::max)
        .max(tol.gradient_floor);

    let mut xs: Vec<f64> = Vec::with_capacity(levels.len());
    let mut ys: Vec<Vec<(usize, usize, f64)>> = Vec::with_capacity(levels.len());

    for &level in levels {
        // bracket |u1| = level along the ray; near the zero |u1| ~ grad * s
        let mut s_lo = 0.0_f64; // |u1| below level
        let mut s_hi = level / grad;
        let mut val_hi = family.sample(zero.location + dir * s_hi)?;
        let mut expand = 0;
        while val_hi.u1.norm() < level {
            s_lo = s_hi;
            s_hi *= 2.0;
            val_hi = family.sample(zero.location + dir * s_hi)?;
            expand += 1;
            if expand > 60 {
                return Err(Error::SamplingFailure(format!(
                    "could not reach |u1| = {level:.1e} along the ray"
                )));
            }
        }
        let mut sample = val_hi;
        for _ in 0..60 {
            let s_mid = 0.5 * (s_lo + s_hi);
            let v = family.sample(zero.location + dir * s_mid)?;
            if v.u1.norm() < level {
                s_lo = s_mid;
            } else {
                s_hi = s_mid;
                sample = v;
            }
            if (sample.u1.norm() / level - 1.0).abs() < 1e-2 {
                break;
            }
        }
        let reached = sample.u1.norm();
        if (reached / level - 1.0).abs() > 0.2 {
            return Err(Error::SamplingFailure(format!(
                "bisection stalled at |u1| = {reached:.3e} targeting {level:.1e}"
            )));
        }
        xs.push(-reached.ln());
        ys.push(sample.coeff_norms);
    }

    // least-squares slope per coefficient
    let m = ys[0].len();
    let x_mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    let mut slopes = Vec::with_capacity(m);
    for c in 0..m {
        let (pole, order, _) = ys[0][c];
        let logs: Vec<f64> = ys.iter().map(|row| row[c].2.max(1e-300).ln()).collect();
        let y_mean = logs.iter().sum::<f64>() / logs.len() as f64;
        let cov: f64 = xs.iter().zip(&logs).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
        slopes.push(FitSlope { pole, order, slope: cov / var });
    }
    Ok(slopes)
}

/// Gate from the splitting bound `2k <= m + n - 2`: true iff `m + n <= 5`,
/// which forces `k = 1` so every theta point satisfies the
/// `O(-1) + O(1)` hypothesis of the pole-order bound.
pub fn splitting_bound_check(m_irregular: usize, n_poles: usize) -> bool {
    m_irregular + n_poles <= 5
}

/// Convenience overload on a connection.
pub fn splitting_bound_check_connection(c: &RationalConnection) -> bool {
    splitting_bound_check(c.n_irregular(), c.n_poles())
}
