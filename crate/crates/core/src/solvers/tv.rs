//! Total-variation reconstruction of one exposure,
//! `min_x ||y - Phi x||^2 + lambda TV(x)`.
//!
//! The outer loop is a monotone two-step iterative shrinkage/thresholding
//! scheme. Its denoising step is the TV proximal map, computed per frame by
//! projected gradient on the dual field with a warm start carried across
//! outer iterations.

use ndarray::Array3;

use super::SolverConfig;
use crate::sensing::{CodedFrame, FrameOperator, TiledMask};
use crate::{Error, Result};

/// Dual step size; `1/8` bounds the squared norm of the discrete gradient.
const DUAL_STEP: f64 = 0.125;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TvConfig {
    pub solver: SolverConfig,
    /// Dual projection iterations per proximal step.
    pub inner_iters: usize,
    /// Lower spectral bound of the normalized system, which fixes the
    /// two-step weights.
    pub twist_lambda1: f64,
    /// Consecutive rejected steps tolerated before stopping.
    pub max_stall: usize,
}

impl Default for TvConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::tv_default(),
            inner_iters: 20,
            twist_lambda1: 1e-4,
            max_stall: 10,
        }
    }
}

impl TvConfig {
    /// Two-step weights `(alpha, beta)` for spectrum `[lambda1, 1]`.
    pub fn twist_weights(&self) -> (f64, f64) {
        let l1 = self.twist_lambda1;
        let rho = (1.0 - l1) / (1.0 + l1);
        let alpha = 2.0 / (1.0 + (1.0 - rho * rho).sqrt());
        let beta = alpha * 2.0 / (l1 + 1.0);
        (alpha, beta)
    }
}

/// Isotropic total variation of a `[frame, row, col]` array with forward
/// differences; differences past the last row or column are zero.
pub fn tv_norm(z: &Array3<f64>) -> f64 {
    let (t, h, w) = z.dim();
    let data = z.as_standard_layout();
    let data = data.as_slice().expect("standard layout");
    (0..t).map(|n| frame_tv(&data[n * h * w..(n + 1) * h * w], w, h)).sum()
}

fn frame_tv(f: &[f64], w: usize, h: usize) -> f64 {
    let mut s = 0.0;
    for y in 0..h {
        for x in 0..w {
            let v = f[y * w + x];
            let dx = if x + 1 < w { f[y * w + x + 1] - v } else { 0.0 };
            let dy = if y + 1 < h { f[(y + 1) * w + x] - v } else { 0.0 };
            s += (dx * dx + dy * dy).sqrt();
        }
    }
    s
}

/// Forward-difference gradient of one frame.
fn gradient(f: &[f64], w: usize, h: usize, gx: &mut [f64], gy: &mut [f64]) {
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            gx[i] = if x + 1 < w { f[i + 1] - f[i] } else { 0.0 };
            gy[i] = if y + 1 < h { f[i + w] - f[i] } else { 0.0 };
        }
    }
}

/// Negative adjoint of [`gradient`].
fn divergence(px: &[f64], py: &[f64], w: usize, h: usize, out: &mut [f64]) {
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mut d = 0.0;
            if x + 1 < w {
                d += px[i];
            }
            if x > 0 {
                d -= px[i - 1];
            }
            if y + 1 < h {
                d += py[i];
            }
            if y > 0 {
                d -= py[i - w];
            }
            out[i] = d;
        }
    }
}

/// Dual field of the per-frame TV proximal map, reused between calls.
struct DualField {
    w: usize,
    h: usize,
    px: Vec<f64>,
    py: Vec<f64>,
    div: Vec<f64>,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

impl DualField {
    fn new(w: usize, h: usize, frames: usize) -> Self {
        let n = w * h * frames;
        Self {
            w,
            h,
            px: vec![0.0; n],
            py: vec![0.0; n],
            div: vec![0.0; w * h],
            gx: vec![0.0; w * h],
            gy: vec![0.0; w * h],
        }
    }

    /// `argmin_x 0.5 ||x - g||^2 + tau TV(x)`, frame by frame.
    fn prox(&mut self, g: &[f64], tau: f64, iters: usize, out: &mut [f64]) {
        let (w, h) = (self.w, self.h);
        let n = w * h;
        if tau <= 0.0 {
            out.copy_from_slice(g);
            return;
        }
        for (f, (gf, of)) in g.chunks_exact(n).zip(out.chunks_exact_mut(n)).enumerate() {
            let px = &mut self.px[f * n..(f + 1) * n];
            let py = &mut self.py[f * n..(f + 1) * n];
            for _ in 0..iters {
                divergence(px, py, w, h, &mut self.div);
                for (d, &gv) in self.div.iter_mut().zip(gf) {
                    *d -= gv / tau;
                }
                gradient(&self.div, w, h, &mut self.gx, &mut self.gy);
                for i in 0..n {
                    let qx = px[i] + DUAL_STEP * self.gx[i];
                    let qy = py[i] + DUAL_STEP * self.gy[i];
                    let scale = (qx * qx + qy * qy).sqrt().max(1.0);
                    px[i] = qx / scale;
                    py[i] = qy / scale;
                }
            }
            divergence(px, py, w, h, &mut self.div);
            for ((o, &gv), &d) in of.iter_mut().zip(gf).zip(&self.div) {
                *o = gv - tau * d;
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct TvSolution {
    /// Reconstruction indexed `[frame, row, col]`.
    pub frames: Array3<f64>,
    /// Objective after initialization and after every accepted step.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
}

fn objective(op: &FrameOperator, y: &[f64], x: &[f64], lambda: f64, w: usize, h: usize) -> f64 {
    let r: f64 = op
        .apply(x)
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if lambda == 0.0 {
        return r;
    }
    let tv: f64 = x.chunks_exact(w * h).map(|f| frame_tv(f, w, h)).sum();
    r + lambda * tv
}

/// Reconstructs the `t` frames behind one coded frame.
pub fn solve_tv(coded: &CodedFrame, mask: &TiledMask, cfg: &TvConfig) -> Result<TvSolution> {
    cfg.solver.validate()?;
    let (w, h, t) = (mask.width(), mask.height(), mask.frames());
    if coded.width() != w || coded.height() != h {
        return Err(Error::DimensionMismatch(format!(
            "coded frame {}x{} vs mask {w}x{h}",
            coded.width(),
            coded.height()
        )));
    }
    if w < 2 || h < 2 {
        return Err(Error::Geometry("TV needs at least 2x2 frames".into()));
    }
    let op = FrameOperator::new(mask);
    let y = coded.data();
    let lambda = cfg.solver.lambda;
    let counts = mask.open_counts();
    // ||Phi||^2 is the largest number of open slots at any pixel.
    let lipschitz = 2.0 * counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let step = 1.0 / lipschitz;
    let tau = lambda * step;

    // Start from the temporally constant image consistent with y.
    let n = w * h;
    let mut x = vec![0.0; n * t];
    for f in 0..t {
        for i in 0..n {
            if counts[i] > 0 {
                x[f * n + i] = y[i] / counts[i] as f64;
            }
        }
    }
    let mut obj = objective(&op, y, &x, lambda, w, h);
    if !obj.is_finite() {
        return Err(Error::Numeric("TV objective is not finite at start".into()));
    }
    let mut history = vec![obj];
    let mut prev = x.clone();
    let mut dual = DualField::new(w, h, t);
    let (alpha, beta) = cfg.twist_weights();
    let mut ist = vec![0.0; n * t];
    let mut stall = 0;
    let mut iterations = 0;

    for it in 1..=cfg.solver.max_iters {
        iterations = it;
        let resid: Vec<f64> = op.apply(&x).iter().zip(y).map(|(a, b)| a - b).collect();
        let back = op.adjoint(&resid);
        let g: Vec<f64> = x
            .iter()
            .zip(&back)
            .map(|(xv, bv)| xv - 2.0 * step * bv)
            .collect();
        dual.prox(&g, tau, cfg.inner_iters, &mut ist);

        let two_step: Vec<f64> = (0..x.len())
            .map(|i| (1.0 - alpha) * prev[i] + (alpha - beta) * x[i] + beta * ist[i])
            .collect();
        let obj_two = objective(&op, y, &two_step, lambda, w, h);
        if obj_two.is_nan() {
            return Err(Error::Numeric(format!("TV objective is NaN at iteration {it}")));
        }
        let accepted = if obj_two <= obj {
            Some((two_step, obj_two))
        } else {
            let obj_ist = objective(&op, y, &ist, lambda, w, h);
            if obj_ist.is_nan() {
                return Err(Error::Numeric(format!("TV objective is NaN at iteration {it}")));
            }
            (obj_ist <= obj).then(|| (ist.clone(), obj_ist))
        };
        match accepted {
            Some((next, next_obj)) => {
                let change = obj - next_obj;
                prev = std::mem::replace(&mut x, next);
                obj = next_obj;
                history.push(obj);
                stall = 0;
                if change <= cfg.solver.rel_tol * obj.max(f64::MIN_POSITIVE) {
                    break;
                }
            }
            None => {
                // The inexact prox overshot; restart the two-step memory and
                // let the warm-started dual improve.
                prev.clone_from(&x);
                stall += 1;
                if stall >= cfg.max_stall {
                    break;
                }
            }
        }
    }
    let frames = Array3::from_shape_vec((t, h, w), x).expect("length is t * h * w");
    Ok(TvSolution {
        frames,
        objective_history: history,
        iterations,
    })
}
