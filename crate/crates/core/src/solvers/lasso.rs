//! Sparse-coding reconstruction, `min_a ||y - Phi D a||^2 + lambda ||a||_1`.
//!
//! Solved with FISTA using adaptive momentum restart; the step is the
//! inverse Lipschitz constant of the smooth term, `2 sigma_max(Phi D)^2`.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dct::Dictionary;
use super::SolverConfig;
use crate::sensing::PhiMatrix;
use crate::{Error, Result};

const POWER_MIN_ITERS: usize = 50;
const POWER_MAX_ITERS: usize = 20_000;
const POWER_TOL: f64 = 1e-12;

/// `sign(v) * max(|v| - tau, 0)`.
#[inline]
pub fn soft_threshold(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// Largest eigenvalue of `A A^T` by power iteration.
pub fn largest_squared_singular_value(a: &Array2<f64>) -> Result<f64> {
    let m = a.nrows();
    if m == 0 || a.ncols() == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Array1<f64> = Array1::from_shape_simple_fn(m, || rng.random_range(0.5..1.5));
    let norm = v.dot(&v).sqrt();
    v /= norm;
    let mut estimate = 0.0;
    for iter in 0..POWER_MAX_ITERS {
        let w = a.dot(&a.t().dot(&v));
        let next: f64 = w.dot(&w).sqrt();
        if next == 0.0 {
            return Ok(0.0);
        }
        if !next.is_finite() {
            return Err(Error::Numeric("power iteration overflowed".into()));
        }
        v = w / next;
        let converged = (next - estimate).abs() <= POWER_TOL * next;
        estimate = next;
        if iter + 1 >= POWER_MIN_ITERS && converged {
            return Ok(estimate);
        }
    }
    Err(Error::Numeric(format!(
        "power iteration did not converge in {POWER_MAX_ITERS} iterations"
    )))
}

/// A fixed sensing-times-dictionary operator with its step size.
#[derive(Clone, Debug)]
pub struct LassoProblem {
    operator: Array2<f64>,
    lipschitz: f64,
}

/// Result of a LASSO solve.
#[derive(Clone, Debug)]
pub struct LassoSolution {
    pub coefficients: Array1<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LassoProblem {
    /// Forms `Phi D` from the banded measurement matrix.
    pub fn new(phi: &PhiMatrix, dict: &Dictionary) -> Result<Self> {
        if phi.dims() != dict.dims() {
            return Err(Error::DimensionMismatch(format!(
                "measurement matrix {:?} vs dictionary {:?}",
                phi.dims(),
                dict.dims()
            )));
        }
        let m = phi.rows();
        let atoms = dict.atoms();
        let mut op = Array2::zeros((m, atoms.ncols()));
        for (col, &b) in phi.bands().iter().enumerate() {
            if b == 1 {
                let mut row = op.row_mut(col % m);
                row += &atoms.row(col);
            }
        }
        Self::from_operator(op)
    }

    pub fn from_operator(operator: Array2<f64>) -> Result<Self> {
        let sigma2 = largest_squared_singular_value(&operator)?;
        // Small margin over the power-iteration estimate, which approaches
        // the true value from below.
        let lipschitz = 2.0 * sigma2 * (1.0 + 1e-9);
        Ok(Self { operator, lipschitz })
    }

    pub fn operator(&self) -> &Array2<f64> {
        &self.operator
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn objective(&self, y: ArrayView1<f64>, a: ArrayView1<f64>, lambda: f64) -> f64 {
        let r = self.operator.dot(&a) - y;
        r.dot(&r) + lambda * a.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// `A^T (A a - y)`, half the gradient of the smooth term.
    pub fn half_gradient(&self, y: ArrayView1<f64>, a: ArrayView1<f64>) -> Array1<f64> {
        self.operator.t().dot(&(self.operator.dot(&a) - y))
    }

    pub fn solve(&self, y: ArrayView1<f64>, cfg: &SolverConfig) -> Result<LassoSolution> {
        cfg.validate()?;
        if y.len() != self.operator.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} measurements for a {}-row operator",
                y.len(),
                self.operator.nrows()
            )));
        }
        let n = self.operator.ncols();
        let zero = Array1::zeros(n);
        let zero_obj = self.objective(y, zero.view(), cfg.lambda);
        if self.lipschitz == 0.0 {
            return Ok(LassoSolution {
                coefficients: zero,
                objective: zero_obj,
                iterations: 0,
            });
        }
        let step = 1.0 / self.lipschitz;
        let tau = cfg.lambda * step;
        let mut x = zero.clone();
        let mut z = zero;
        let mut t = 1.0f64;
        let mut obj = zero_obj;
        let mut best = (x.clone(), obj);
        let mut iterations = 0;
        for it in 1..=cfg.max_iters {
            iterations = it;
            let g = self.half_gradient(y, z.view());
            let x_next = Array1::from_shape_fn(n, |i| soft_threshold(z[i] - 2.0 * step * g[i], tau));
            let obj_next = self.objective(y, x_next.view(), cfg.lambda);
            if !obj_next.is_finite() {
                return Err(Error::Numeric("LASSO objective is not finite".into()));
            }
            if obj_next > obj {
                // Adaptive restart: drop the momentum.
                t = 1.0;
                z = x_next.clone();
            } else {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let beta = (t - 1.0) / t_next;
                z = &x_next + &((&x_next - &x) * beta);
                t = t_next;
            }
            let change = (obj - obj_next).abs();
            x = x_next;
            obj = obj_next;
            if obj < best.1 {
                best = (x.clone(), obj);
            }
            if change <= cfg.rel_tol * obj.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        Ok(LassoSolution {
            coefficients: best.0,
            objective: best.1,
            iterations,
        })
    }

    /// Worst violation of the optimality conditions of the objective:
    /// off the support `|A^T (A a - y)| <= lambda / 2`, on it
    /// `A^T (A a - y) = -lambda / 2 * sign(a)`.
    pub fn optimality_residual(&self, y: ArrayView1<f64>, a: ArrayView1<f64>, lambda: f64) -> f64 {
        let g = self.half_gradient(y, a);
        let half = 0.5 * lambda;
        g.iter()
            .zip(a)
            .map(|(&gi, &ai)| {
                if ai == 0.0 {
                    (gi.abs() - half).max(0.0)
                } else {
                    (gi + half * ai.signum()).abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Solves for one block and returns its coefficients and the block `D a`.
pub fn solve_lasso(
    y: &[f64],
    phi: &PhiMatrix,
    dict: &Dictionary,
    cfg: &SolverConfig,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let problem = LassoProblem::new(phi, dict)?;
    let sol = problem.solve(ArrayView1::from(y), cfg)?;
    let x = dict.synthesize(sol.coefficients.view());
    Ok((sol.coefficients, x))
}
