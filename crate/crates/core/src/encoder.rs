//! Trainable binary measurement layer.
//!
//! The encoder stores one real-valued ("shadow") weight per sub-block sample.
//! Forward and backward passes use the sign-binarized weights; updates are
//! applied to the shadow weights, which are then clipped to `[-1, 1]`.
//! Each of the `w_s * h_s` shared temporal vectors drives the four block
//! pixels that sit at the same position inside their sub-block tile.

use ndarray::{Array2, ArrayView2};

use crate::sensing::MaskSubBlock;
use crate::volume::{BlockDims, VideoBlock};
use crate::{Error, Result};

/// Sign binarization: 1 for `w >= 0`, else 0.
#[inline]
pub fn binarize(w: f64) -> u8 {
    u8::from(w >= 0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    block: BlockDims,
    sub: BlockDims,
    shadow: Vec<f64>,
    bits: Vec<u8>,
    version: u64,
}

/// State captured by a forward pass and consumed by the matching backward pass.
#[derive(Clone, Debug)]
pub struct EncoderCache {
    version: u64,
    batch: usize,
    pre: Vec<f64>,
}

/// Bit statistics of the current mask.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskStats {
    pub nonzero_pct: f64,
    pub flips: usize,
}

impl EncoderParams {
    /// Wraps a sub-block mask as the shared weights of a `2 w_s x 2 h_s x t`
    /// block encoder. A mask without shadow weights gets `+-1/sqrt(t)`
    /// according to its bits.
    pub fn from_mask(mask: &MaskSubBlock) -> Self {
        let sub = mask.dims();
        let shadow = match mask.shadow() {
            Some(s) => s.to_vec(),
            None => {
                let b = 1.0 / (sub.frames as f64).sqrt();
                mask.bits().iter().map(|&bit| if bit == 1 { b } else { -b }).collect()
            }
        };
        let bits = shadow.iter().map(|&w| binarize(w)).collect();
        Self {
            block: BlockDims::new(2 * sub.width, 2 * sub.height, sub.frames),
            sub,
            shadow,
            bits,
            version: 0,
        }
    }

    /// Shadow weights are clipped to `[-1, 1]`.
    pub fn from_shadow(sub: BlockDims, shadow: Vec<f64>) -> Result<Self> {
        if shadow.len() != sub.len() {
            return Err(Error::LengthMismatch {
                expected: sub.len(),
                actual: shadow.len(),
            });
        }
        let mut p = Self {
            block: BlockDims::new(2 * sub.width, 2 * sub.height, sub.frames),
            sub,
            shadow,
            bits: Vec::new(),
            version: 0,
        };
        p.clip_shadow();
        Ok(p)
    }

    pub fn block_dims(&self) -> BlockDims {
        self.block
    }

    pub fn sub_dims(&self) -> BlockDims {
        self.sub
    }

    /// Number of measurements per block, `M_p`.
    pub fn measurements(&self) -> usize {
        self.block.spatial()
    }

    /// Shadow weights in sub-block (spatial-then-temporal) order.
    pub fn shadow(&self) -> &[f64] {
        &self.shadow
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn to_mask(&self) -> MaskSubBlock {
        MaskSubBlock::from_shadow(self.sub, self.shadow.clone())
            .expect("shadow weights are kept inside [-1, 1]")
    }

    /// Shared vector index for block pixel `j` (row-major in the block).
    #[inline]
    pub fn share(&self, j: usize) -> usize {
        let r = j / self.block.width;
        let c = j % self.block.width;
        (r % self.sub.height) * self.sub.width + c % self.sub.width
    }

    /// Shadow weights grouped by shared vector: `[b_0[0..t], b_1[0..t], ...]`.
    pub fn shadow_shared_order(&self) -> Vec<f64> {
        let s = self.sub.spatial();
        let mut out = Vec::with_capacity(self.shadow.len());
        for j in 0..s {
            for n in 0..self.sub.frames {
                out.push(self.shadow[n * s + j]);
            }
        }
        out
    }

    /// Inverse of [`shadow_shared_order`](Self::shadow_shared_order).
    pub fn from_shared_order(sub: BlockDims, shared: &[f64]) -> Result<Self> {
        if shared.len() != sub.len() {
            return Err(Error::LengthMismatch {
                expected: sub.len(),
                actual: shared.len(),
            });
        }
        let s = sub.spatial();
        let mut shadow = vec![0.0; sub.len()];
        for j in 0..s {
            for n in 0..sub.frames {
                shadow[n * s + j] = shared[j * sub.frames + n];
            }
        }
        Self::from_shadow(sub, shadow)
    }

    /// Binarized block mask in block vector order (length `N_p`).
    pub fn block_bits(&self) -> Vec<u8> {
        let m = self.measurements();
        let s = self.sub.spatial();
        let mut out = Vec::with_capacity(self.block.len());
        for n in 0..self.block.frames {
            for j in 0..m {
                out.push(self.bits[n * s + self.share(j)]);
            }
        }
        out
    }

    /// Clamps every shadow weight to `[-1, 1]` and refreshes the bits.
    pub fn clip_shadow(&mut self) {
        for w in &mut self.shadow {
            *w = w.clamp(-1.0, 1.0);
        }
        self.bits = self.shadow.iter().map(|&w| binarize(w)).collect();
        self.version += 1;
    }

    /// Applies `f` to the shadow weights, then clips and re-binarizes.
    pub fn update_shadow(&mut self, f: impl FnOnce(&mut [f64])) {
        f(&mut self.shadow);
        self.clip_shadow();
    }

    /// Measures each row of `x` (`batch x N_p`).
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, EncoderCache)> {
        let n_p = self.block.len();
        if x.ncols() != n_p {
            return Err(Error::DimensionMismatch(format!(
                "encoder expects {n_p} inputs, got {}",
                x.ncols()
            )));
        }
        let m = self.measurements();
        let weights: Vec<f64> = self.block_bits().iter().map(|&b| f64::from(b)).collect();
        let batch = x.nrows();
        let mut pre = vec![0.0; batch * m];
        for (row, acc) in x.outer_iter().zip(pre.chunks_exact_mut(m)) {
            let row = row.as_slice().map(|s| s.to_vec()).unwrap_or_else(|| row.to_vec());
            for (w_slot, x_slot) in weights.chunks_exact(m).zip(row.chunks_exact(m)) {
                for ((a, &w), &v) in acc.iter_mut().zip(w_slot).zip(x_slot) {
                    *a += w * v;
                }
            }
        }
        let y = Array2::from_shape_fn((batch, m), |(b, j)| pre[b * m + j].max(0.0));
        Ok((
            y,
            EncoderCache {
                version: self.version,
                batch,
                pre,
            },
        ))
    }

    /// Straight-through gradient of the loss w.r.t. the shadow weights.
    ///
    /// The binarized weights stand in for the real ones; gradients from the
    /// four pixels sharing a vector are summed. The rectifier passes gradient
    /// wherever its input is nonnegative, the only branch reachable with
    /// nonnegative video.
    pub fn backward_batch(
        &self,
        grad_y: ArrayView2<f64>,
        x: ArrayView2<f64>,
        cache: &EncoderCache,
    ) -> Result<Vec<f64>> {
        if cache.version != self.version {
            return Err(Error::StaleCache(format!(
                "encoder cache from version {}, parameters at {}",
                cache.version, self.version
            )));
        }
        let m = self.measurements();
        if grad_y.dim() != (cache.batch, m) || x.dim() != (cache.batch, self.block.len()) {
            return Err(Error::DimensionMismatch(format!(
                "backward shapes {:?} / {:?} do not match forward batch {}",
                grad_y.dim(),
                x.dim(),
                cache.batch
            )));
        }
        let s = self.sub.spatial();
        let share: Vec<usize> = (0..m).map(|j| self.share(j)).collect();
        let mut grad = vec![0.0; self.shadow.len()];
        for b in 0..cache.batch {
            let pre = &cache.pre[b * m..(b + 1) * m];
            for n in 0..self.block.frames {
                let g_slot = &mut grad[n * s..(n + 1) * s];
                for j in 0..m {
                    if pre[j] >= 0.0 {
                        g_slot[share[j]] += grad_y[(b, j)] * x[(b, n * m + j)];
                    }
                }
            }
        }
        Ok(grad)
    }

    /// Share of ones in percent, and Hamming distance to `previous`.
    pub fn mask_stats(&self, previous: &[u8]) -> Result<MaskStats> {
        mask_stats(&self.bits, previous)
    }

    /// Equal-width histogram of the shadow weights over `[-1, 1]`.
    pub fn shadow_histogram(&self, n_bins: usize) -> Result<Vec<usize>> {
        histogram_unit_interval(&self.shadow, n_bins)
    }
}

/// Measures a single block with the binarized weights.
pub fn encoder_forward(block: &VideoBlock, params: &EncoderParams) -> Result<(Vec<f64>, EncoderCache)> {
    check_block(block, params)?;
    let x = ArrayView2::from_shape((1, block.as_slice().len()), block.as_slice())
        .expect("block vector is contiguous");
    let (y, cache) = params.forward_batch(x)?;
    Ok((y.into_raw_vec_and_offset().0, cache))
}

/// Straight-through gradient for a single block.
pub fn encoder_backward(
    grad_y: &[f64],
    block: &VideoBlock,
    params: &EncoderParams,
    cache: &EncoderCache,
) -> Result<Vec<f64>> {
    check_block(block, params)?;
    let gy = ArrayView2::from_shape((1, grad_y.len()), grad_y)
        .map_err(|_| Error::DimensionMismatch("gradient length".into()))?;
    let x = ArrayView2::from_shape((1, block.as_slice().len()), block.as_slice())
        .expect("block vector is contiguous");
    params.backward_batch(gy, x, cache)
}

fn check_block(block: &VideoBlock, params: &EncoderParams) -> Result<()> {
    if block.dims() != params.block {
        return Err(Error::DimensionMismatch(format!(
            "block {:?} vs encoder block {:?}",
            block.dims(),
            params.block
        )));
    }
    Ok(())
}

pub fn mask_stats(bits: &[u8], previous: &[u8]) -> Result<MaskStats> {
    if bits.len() != previous.len() {
        return Err(Error::LengthMismatch {
            expected: bits.len(),
            actual: previous.len(),
        });
    }
    if bits.is_empty() {
        return Err(Error::InvalidInput("empty mask".into()));
    }
    let ones = bits.iter().filter(|&&b| b == 1).count();
    let flips = bits.iter().zip(previous).filter(|(a, b)| a != b).count();
    Ok(MaskStats {
        nonzero_pct: 100.0 * ones as f64 / bits.len() as f64,
        flips,
    })
}

/// Counts values into `n_bins` equal bins on `[-1, 1]`; `+1` lands in the
/// last bin.
pub fn histogram_unit_interval(values: &[f64], n_bins: usize) -> Result<Vec<usize>> {
    if n_bins == 0 {
        return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
    }
    let mut counts = vec![0; n_bins];
    for &v in values {
        let pos = ((v.clamp(-1.0, 1.0) + 1.0) / 2.0 * n_bins as f64).floor() as usize;
        counts[pos.min(n_bins - 1)] += 1;
    }
    Ok(counts)
}
