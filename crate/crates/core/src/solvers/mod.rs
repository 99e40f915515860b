//! Classical reconstruction baselines.
//!
//! [`lasso`] recovers one block at a time as a sparse combination of 3D-DCT
//! atoms; [`tv`] recovers a full exposure with a spatial total-variation
//! prior. Both minimize the squared residual without a `1/2` factor.

pub mod dct;
pub mod lasso;
pub mod tv;

pub use dct::{build_dct_dictionary, Dictionary};
pub use lasso::{soft_threshold, solve_lasso, LassoProblem, LassoSolution};
pub use tv::{solve_tv, tv_norm, TvConfig, TvSolution};

/// Regularization weight and stopping rule shared by both solvers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    pub max_iters: usize,
    /// Stop once the relative objective change falls below this.
    pub rel_tol: f64,
}

impl SolverConfig {
    pub fn lasso_default() -> Self {
        Self {
            lambda: 0.005,
            max_iters: 500,
            rel_tol: 1e-6,
        }
    }

    pub fn tv_default() -> Self {
        Self {
            lambda: 0.01,
            max_iters: 300,
            rel_tol: 1e-6,
        }
    }

    pub(crate) fn validate(&self) -> crate::Result<()> {
        if !(self.lambda >= 0.0) || self.max_iters == 0 || !(self.rel_tol >= 0.0) {
            return Err(crate::Error::InvalidParameter(format!(
                "invalid solver configuration {self:?}"
            )));
        }
        Ok(())
    }
}
