//! Adaptive embedded Runge-Kutta 5(4) (Dormand-Prince) over flat complex
//! state vectors, with a per-step acceptance hook and a step-doubling
//! fallback when the embedded estimate keeps rejecting at the floor.
//!
//! The right-hand side may fail (e.g. a trial stage wandering too close to
//! a pole); a failing stage rejects the step and shrinks it instead of
//! aborting, so transient excursions of large trial steps are harmless.

use crate::config::IntegratorConfig;
use crate::error::{Error, Result};
use crate::C64;

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Verdict of the per-step acceptance hook on a candidate state.
pub enum StepVerdict {
    Accept,
    /// Reject the step and retry with half the size.
    Reject,
}

#[derive(Debug, Clone)]
pub struct RkSolution {
    pub y: Vec<C64>,
    pub steps: usize,
    pub rejected: usize,
}

struct Stages {
    k: Vec<Vec<C64>>,
}

impl Stages {
    fn new(dim: usize) -> Self {
        Stages { k: vec![vec![C64::new(0.0, 0.0); dim]; 7] }
    }
}

pub struct AdaptiveRk {
    pub config: IntegratorConfig,
}

impl AdaptiveRk {
    pub fn new(config: IntegratorConfig) -> Self {
        Self { config }
    }

    pub fn with_tol(tol: f64) -> Self {
        Self { config: IntegratorConfig::with_tol(tol) }
    }

    /// Integrates `dy/dt = f(t, y)` from `t0` to `t1`.
    ///
    /// `hook` sees every candidate step that passed the embedded error test
    /// and may still reject it (problem-specific a-posteriori checks) or
    /// observe the accepted state.
    pub fn integrate<F, H>(&self, mut f: F, t0: f64, t1: f64, y0: &[C64], mut hook: H) -> Result<RkSolution>
    where
        F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
        H: FnMut(f64, &[C64]) -> StepVerdict,
    {
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(RkSolution { y: y0.to_vec(), steps: 0, rejected: 0 });
        }
        if span < 0.0 {
            return Err(Error::InvalidParameter("integration interval must be forward".into()));
        }
        let dim = y0.len();
        let cfg = &self.config;
        let h_min = span * cfg.h_min_rel;

        let mut y = y0.to_vec();
        let mut t = t0;
        let mut h = (span * 1e-3).max(h_min * 16.0);
        let mut stages = Stages::new(dim);
        let mut y5 = vec![C64::new(0.0, 0.0); dim];
        let mut y4 = vec![C64::new(0.0, 0.0); dim];
        let mut steps = 0usize;
        let mut rejected = 0usize;
        // FSAL: k[0] holds f at the current point once primed.
        let mut fsal_ready = false;

        while t < t1 {
            if steps + rejected > cfg.max_steps {
                return Err(Error::MaxStepsExceeded(cfg.max_steps));
            }
            // underflow is judged on the controller's step, not the
            // remaining-interval clip, so legitimate tiny final steps pass
            if h < h_min {
                return Err(Error::StepSizeUnderflow {
                    t,
                    h,
                    context: "embedded error control drove the step below the floor".into(),
                });
            }
            let h_step = h.min(t1 - t);
            if t + h_step <= t {
                break; // remaining interval below the float resolution of t
            }

            if !fsal_ready {
                f(t, &y, &mut stages.k[0])?;
                fsal_ready = true;
            }

            match self.try_step(&mut f, t, &y, h_step, &mut stages, &mut y5, &mut y4)? {
                None => {
                    // a trial stage failed (guard violation); shrink
                    rejected += 1;
                    h = h_step * 0.25;
                    continue;
                }
                Some(err_norm) => {
                    if err_norm <= 1.0 {
                        match hook(t + h_step, &y5) {
                            StepVerdict::Accept => {
                                t += h_step;
                                y.copy_from_slice(&y5);
                                stages.k.swap(0, 6); // FSAL
                                steps += 1;
                                let scale = (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0);
                                h = h_step * scale;
                            }
                            StepVerdict::Reject => {
                                rejected += 1;
                                h = h_step * 0.5;
                            }
                        }
                    } else {
                        rejected += 1;
                        let next = h_step * (0.9 * err_norm.powf(-0.2)).clamp(0.1, 0.9);
                        if next < h_min {
                            // step-doubling fallback: accept two half steps if
                            // their Richardson estimate against the full step
                            // passes where the embedded pair would not
                            if let Some(yd) = self.step_doubling(&mut f, t, &y, h_step, dim)? {
                                match hook(t + h_step, &yd) {
                                    StepVerdict::Accept => {
                                        t += h_step;
                                        y.copy_from_slice(&yd);
                                        fsal_ready = false;
                                        steps += 1;
                                        continue;
                                    }
                                    StepVerdict::Reject => {}
                                }
                            }
                            return Err(Error::StepSizeUnderflow {
                                t,
                                h: next,
                                context: "error estimate unattainable at the step floor".into(),
                            });
                        }
                        h = next;
                    }
                }
            }
        }

        Ok(RkSolution { y, steps, rejected })
    }

    /// One embedded trial step. Returns `None` when a stage evaluation
    /// failed, otherwise the scaled error norm of the 5th/4th order pair.
    #[allow(clippy::too_many_arguments)]
    fn try_step<F>(
        &self,
        f: &mut F,
        t: f64,
        y: &[C64],
        h: f64,
        stages: &mut Stages,
        y5: &mut [C64],
        y4: &mut [C64],
    ) -> Result<Option<f64>>
    where
        F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
    {
        let dim = y.len();
        let mut y_stage = vec![C64::new(0.0, 0.0); dim];
        for s in 1..7 {
            for (idx, ys) in y_stage.iter_mut().enumerate() {
                let mut acc = y[idx];
                for (j, aj) in A[s].iter().enumerate().take(s) {
                    acc += stages.k[j][idx] * (*aj * h);
                }
                *ys = acc;
            }
            let (head, tail) = stages.k.split_at_mut(s);
            let _ = head;
            if f(t + C[s] * h, &y_stage, &mut tail[0]).is_err() {
                return Ok(None);
            }
        }
        let cfg = &self.config;
        let mut err_norm = 0.0_f64;
        for idx in 0..dim {
            let mut acc5 = y[idx];
            let mut acc4 = y[idx];
            for s in 0..7 {
                acc5 += stages.k[s][idx] * (B5[s] * h);
                acc4 += stages.k[s][idx] * (B4[s] * h);
            }
            y5[idx] = acc5;
            y4[idx] = acc4;
            let tol = cfg.atol + cfg.rtol * y[idx].norm().max(acc5.norm());
            err_norm = err_norm.max((acc5 - acc4).norm() / tol);
        }
        Ok(Some(err_norm))
    }

    /// Richardson comparison of one full 5th-order step against two half
    /// steps; returns the half-step composition when it passes the
    /// tolerance.
    fn step_doubling<F>(&self, f: &mut F, t: f64, y: &[C64], h: f64, dim: usize) -> Result<Option<Vec<C64>>>
    where
        F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
    {
        let full = match self.raw_step(f, t, y, h, dim)? {
            Some(v) => v,
            None => return Ok(None),
        };
        let half1 = match self.raw_step(f, t, y, h * 0.5, dim)? {
            Some(v) => v,
            None => return Ok(None),
        };
        let half2 = match self.raw_step(f, t + h * 0.5, &half1, h * 0.5, dim)? {
            Some(v) => v,
            None => return Ok(None),
        };
        let cfg = &self.config;
        let mut err_norm = 0.0_f64;
        for idx in 0..dim {
            let est = (half2[idx] - full[idx]).norm() / 31.0;
            let tol = cfg.atol + cfg.rtol * half2[idx].norm();
            err_norm = err_norm.max(est / tol);
        }
        Ok(if err_norm <= 1.0 { Some(half2) } else { None })
    }

    fn raw_step<F>(&self, f: &mut F, t: f64, y: &[C64], h: f64, dim: usize) -> Result<Option<Vec<C64>>>
    where
        F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
    {
        let mut k = vec![vec![C64::new(0.0, 0.0); dim]; 7];
        if f(t, y, &mut k[0]).is_err() {
            return Ok(None);
        }
        let mut y_stage = vec![C64::new(0.0, 0.0); dim];
        for s in 1..7 {
            for (idx, ys) in y_stage.iter_mut().enumerate() {
                let mut acc = y[idx];
                for (j, aj) in A[s].iter().enumerate().take(s) {
                    acc += k[j][idx] * (*aj * h);
                }
                *ys = acc;
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            if f(t + C[s] * h, &y_stage, &mut tail[0]).is_err() {
                return Ok(None);
            }
        }
        let mut out = y.to_vec();
        for (idx, o) in out.iter_mut().enumerate() {
            for s in 0..7 {
                *o += k[s][idx] * (B5[s] * h);
            }
        }
        Ok(Some(out))
    }
}
