//! Separable orthonormal 3D DCT-II dictionary.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1};

use crate::volume::BlockDims;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DictionaryKind {
    Dct3d,
}

/// Column-atom dictionary; `atoms` is `N_p x N_a` with unit-norm columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    kind: DictionaryKind,
    dims: BlockDims,
    atoms: Array2<f64>,
}

impl Dictionary {
    pub fn kind(&self) -> DictionaryKind {
        self.kind
    }

    pub fn dims(&self) -> BlockDims {
        self.dims
    }

    pub fn atoms(&self) -> &Array2<f64> {
        &self.atoms
    }

    /// `D a`.
    pub fn synthesize(&self, coefficients: ArrayView1<f64>) -> Array1<f64> {
        self.atoms.dot(&coefficients)
    }

    /// `D^T x`.
    pub fn analyze(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.atoms.t().dot(&x)
    }
}

/// Orthonormal DCT-II matrix, row `k` is the `k`-th basis vector.
fn dct_matrix(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            (0..n)
                .map(|i| scale * (PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos())
                .collect()
        })
        .collect()
}

/// Atom `(u, v, k)` sits in column `k * w * h + v * w + u`; pixel rows follow
/// the block vector order.
pub fn build_dct_dictionary(width: usize, height: usize, frames: usize) -> Result<Dictionary> {
    let dims = BlockDims::new(width, height, frames);
    if dims.is_empty() {
        return Err(Error::Geometry("dictionary dimensions must be positive".into()));
    }
    let (cw, ch, ct) = (dct_matrix(width), dct_matrix(height), dct_matrix(frames));
    let n = dims.len();
    let mut atoms = Array2::zeros((n, n));
    for k in 0..frames {
        for v in 0..height {
            for u in 0..width {
                let col = dims.index(u, v, k);
                for t in 0..frames {
                    for r in 0..height {
                        let tr = ct[k][t] * ch[v][r];
                        for c in 0..width {
                            atoms[(dims.index(c, r, t), col)] = tr * cw[u][c];
                        }
                    }
                }
            }
        }
    }
    Ok(Dictionary {
        kind: DictionaryKind::Dct3d,
        dims,
        atoms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dictionary_is_orthonormal() {
        let d = build_dct_dictionary(4, 2, 8).unwrap();
        let gram = d.atoms().t().dot(d.atoms());
        for ((i, j), &g) in gram.indexed_iter() {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((g - e).abs() < 1e-10, "gram[{i},{j}] = {g}");
        }
    }

    #[test]
    fn constant_block_has_only_dc() {
        let d = build_dct_dictionary(8, 8, 16).unwrap();
        let x = Array1::from_elem(1024, 0.3);
        let a = d.analyze(x.view());
        assert!((a[0] - 0.3 * 32.0).abs() < 1e-10);
        assert!(a.iter().skip(1).all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn round_trip_recovers_block() {
        let d = build_dct_dictionary(8, 8, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array1::from_shape_simple_fn(1024, || rng.random::<f64>());
        let back = d.synthesize(d.analyze(x.view()).view());
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-10);
        }
        for col in d.atoms().columns() {
            assert!((col.dot(&col) - 1.0).abs() < 1e-12);
        }
    }
}
