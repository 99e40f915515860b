//! Binary masks, the block measurement matrix and coded-frame acquisition.
//!
//! A bit of 1 lets light through for that pixel and time slot; 0 blocks it.
//! A coded frame is the per-pixel sum of the masked frames of one exposure.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encoder::binarize;
use crate::volume::{BlockDims, VideoBlock, VideoVolume};
use crate::{Error, Result};

/// The `w_s x h_s x t` building sub-block that is tiled over the sensor.
///
/// `bits` and `shadow` are both in spatial-then-temporal order. When shadow
/// weights are present, `bits[k] == binarize(shadow[k])`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskSubBlock {
    dims: BlockDims,
    bits: Vec<u8>,
    shadow: Option<Vec<f64>>,
}

impl MaskSubBlock {
    pub fn from_bits(dims: BlockDims, bits: Vec<u8>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Geometry("mask dimensions must be positive".into()));
        }
        if bits.len() != dims.len() {
            return Err(Error::LengthMismatch {
                expected: dims.len(),
                actual: bits.len(),
            });
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidInput("mask bits must be 0 or 1".into()));
        }
        Ok(Self {
            dims,
            bits,
            shadow: None,
        })
    }

    /// Builds a mask from real-valued weights; bits follow by sign.
    pub fn from_shadow(dims: BlockDims, shadow: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Geometry("mask dimensions must be positive".into()));
        }
        if shadow.len() != dims.len() {
            return Err(Error::LengthMismatch {
                expected: dims.len(),
                actual: shadow.len(),
            });
        }
        if let Some(v) = shadow.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!(
                "shadow weight {v} outside [-1, 1]"
            )));
        }
        let bits = shadow.iter().map(|&w| binarize(w)).collect();
        Ok(Self {
            dims,
            bits,
            shadow: Some(shadow),
        })
    }

    pub fn dims(&self) -> BlockDims {
        self.dims
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn shadow(&self) -> Option<&[f64]> {
        self.shadow.as_deref()
    }

    #[inline]
    pub fn bit(&self, col: usize, row: usize, n: usize) -> u8 {
        self.bits[self.dims.index(col, row, n)]
    }

    pub fn nonzero_fraction(&self) -> f64 {
        self.bits.iter().map(|&b| f64::from(b)).sum::<f64>() / self.bits.len() as f64
    }
}

/// Draws `bits ~ Bern(p)` with shadow weights uniform on `[0, 1/sqrt(t))` for
/// ones and on `[-1/sqrt(t), 0)` for zeros.
pub fn sample_bernoulli_mask(dims: BlockDims, p: f64, seed: u64) -> Result<MaskSubBlock> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "Bernoulli probability {p} outside (0, 1)"
        )));
    }
    if dims.is_empty() {
        return Err(Error::Geometry("mask dimensions must be positive".into()));
    }
    let bound = 1.0 / (dims.frames as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bits = Vec::with_capacity(dims.len());
    let mut shadow = Vec::with_capacity(dims.len());
    for _ in 0..dims.len() {
        let on = rng.random::<f64>() < p;
        let u: f64 = rng.random();
        if on {
            bits.push(1);
            shadow.push(u * bound);
        } else {
            bits.push(0);
            // 1 - u lies in (0, 1], keeping the weight strictly negative.
            shadow.push(-(1.0 - u) * bound);
        }
    }
    Ok(MaskSubBlock {
        dims,
        bits,
        shadow: Some(shadow),
    })
}

/// Full-sensor mask, `width x height` pixels by `t` time slots.
#[derive(Clone, Debug, PartialEq)]
pub struct TiledMask {
    width: usize,
    height: usize,
    frames: usize,
    bits: Vec<u8>,
}

impl TiledMask {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn bit(&self, x: usize, y: usize, n: usize) -> u8 {
        self.bits[(n * self.height + y) * self.width + x]
    }

    /// Bits of the window at (`x0`, `y0`) in block vector order.
    pub fn block_bits(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Vec<u8>> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::OutOfRange(format!(
                "mask window {width}x{height} at ({x0}, {y0}) exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut out = Vec::with_capacity(width * height * self.frames);
        for n in 0..self.frames {
            for r in 0..height {
                for c in 0..width {
                    out.push(self.bit(x0 + c, y0 + r, n));
                }
            }
        }
        Ok(out)
    }

    /// Number of open time slots per pixel, row-major.
    pub fn open_counts(&self) -> Vec<usize> {
        let n = self.width * self.height;
        let mut counts = vec![0; n];
        for slot in self.bits.chunks_exact(n) {
            for (c, &b) in counts.iter_mut().zip(slot) {
                *c += usize::from(b);
            }
        }
        counts
    }
}

/// Repeats the sub-block over a `width x height` sensor.
pub fn tile_mask(sub: &MaskSubBlock, width: usize, height: usize) -> Result<TiledMask> {
    let d = sub.dims;
    if width == 0 || height == 0 || !width.is_multiple_of(d.width) || !height.is_multiple_of(d.height) {
        return Err(Error::Geometry(format!(
            "frame {width}x{height} is not a multiple of the {}x{} sub-block",
            d.width, d.height
        )));
    }
    let mut bits = Vec::with_capacity(width * height * d.frames);
    for n in 0..d.frames {
        for y in 0..height {
            for x in 0..width {
                bits.push(sub.bit(x % d.width, y % d.height, n));
            }
        }
    }
    Ok(TiledMask {
        width,
        height,
        frames: d.frames,
        bits,
    })
}

/// The `M_p x N_p` block measurement matrix `[diag(phi_1), ..., diag(phi_t)]`.
///
/// Only the `N_p` band entries are stored: row `j` may be nonzero at columns
/// `j, M_p + j, ..., (t - 1) M_p + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiMatrix {
    dims: BlockDims,
    bands: Vec<u8>,
}

impl PhiMatrix {
    pub fn dims(&self) -> BlockDims {
        self.dims
    }

    pub fn rows(&self) -> usize {
        self.dims.spatial()
    }

    pub fn cols(&self) -> usize {
        self.dims.len()
    }

    /// The mask bits, one per column.
    pub fn bands(&self) -> &[u8] {
        &self.bands
    }

    pub fn entry(&self, row: usize, col: usize) -> u8 {
        if col % self.rows() == row {
            self.bands[col]
        } else {
            0
        }
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let (m, n) = (self.rows(), self.cols());
        let mut dense = vec![0.0; m * n];
        for (col, &b) in self.bands.iter().enumerate() {
            dense[(col % m) * n + col] = f64::from(b);
        }
        dense
    }

    /// `Phi^T y`.
    pub fn transpose_apply(&self, y: &[f64]) -> Vec<f64> {
        let m = self.rows();
        self.bands
            .iter()
            .enumerate()
            .map(|(col, &b)| if b == 1 { y[col % m] } else { 0.0 })
            .collect()
    }
}

/// Lays the block's mask bits into the banded structure of `Phi_p`.
pub fn build_phi_p(dims: BlockDims, bits: &[u8]) -> Result<PhiMatrix> {
    if dims.is_empty() {
        return Err(Error::Geometry("block dimensions must be positive".into()));
    }
    if bits.len() != dims.len() {
        return Err(Error::LengthMismatch {
            expected: dims.len(),
            actual: bits.len(),
        });
    }
    Ok(PhiMatrix {
        dims,
        bands: bits.to_vec(),
    })
}

/// One measured image of a `t`-frame exposure.
#[derive(Clone, Debug, PartialEq)]
pub struct CodedFrame {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl CodedFrame {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Geometry("coded frame dimensions must be positive".into()));
        }
        if data.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Row-major `width x height` patch at (`x0`, `y0`).
    pub fn patch(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Vec<f64>> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::OutOfRange(format!(
                "patch {width}x{height} at ({x0}, {y0}) exceeds coded frame {}x{}",
                self.width, self.height
            )));
        }
        let mut out = Vec::with_capacity(width * height);
        for r in 0..height {
            let start = (y0 + r) * self.width + x0;
            out.extend_from_slice(&self.data[start..start + width]);
        }
        Ok(out)
    }
}

/// Integrates frames `g*t .. (g+1)*t` of `volume` through `mask`.
pub fn simulate_coded_frame(volume: &VideoVolume, mask: &TiledMask, group: usize) -> Result<CodedFrame> {
    if volume.width() != mask.width || volume.height() != mask.height {
        return Err(Error::DimensionMismatch(format!(
            "volume {}x{} vs mask {}x{}",
            volume.width(),
            volume.height(),
            mask.width,
            mask.height
        )));
    }
    let t = mask.frames;
    if volume.frames() < (group + 1) * t {
        return Err(Error::InvalidInput(format!(
            "frame group {group} needs {} frames, volume has {}",
            (group + 1) * t,
            volume.frames()
        )));
    }
    let n = mask.width * mask.height;
    let mut out = vec![0.0; n];
    for slot in 0..t {
        let frame = volume.frame(group * t + slot);
        let bits = &mask.bits[slot * n..(slot + 1) * n];
        for ((o, &p), &b) in out.iter_mut().zip(frame).zip(bits) {
            if b == 1 {
                *o += p;
            }
        }
    }
    CodedFrame::new(mask.width, mask.height, out)
}

/// Every coded frame of `volume`; trailing frames that do not fill an
/// exposure are dropped.
pub fn simulate_coded_frames(volume: &VideoVolume, mask: &TiledMask) -> Result<Vec<CodedFrame>> {
    let groups = volume.frames() / mask.frames;
    if groups == 0 {
        return Err(Error::InvalidInput(format!(
            "volume has {} frames, fewer than one exposure of {}",
            volume.frames(),
            mask.frames
        )));
    }
    (0..groups)
        .map(|g| simulate_coded_frame(volume, mask, g))
        .collect()
}

/// `y = max(0, Phi_p x)` evaluated as `M_p` independent length-`t` inner
/// products over the temporal samples of each pixel.
pub fn measure_block(block: &VideoBlock, phi: &PhiMatrix) -> Result<Vec<f64>> {
    if block.dims() != phi.dims {
        return Err(Error::DimensionMismatch(format!(
            "block {:?} vs measurement matrix {:?}",
            block.dims(),
            phi.dims
        )));
    }
    let m = phi.rows();
    let t = phi.dims.frames;
    let x = block.as_slice();
    Ok((0..m)
        .map(|j| {
            let mut acc = 0.0;
            for n in 0..t {
                let k = n * m + j;
                acc += f64::from(phi.bands[k]) * x[k];
            }
            acc.max(0.0)
        })
        .collect())
}

/// Full-frame measurement operator for one exposure, used by the TV solver.
#[derive(Clone, Debug)]
pub struct FrameOperator<'a> {
    mask: &'a TiledMask,
}

impl<'a> FrameOperator<'a> {
    pub fn new(mask: &'a TiledMask) -> Self {
        Self { mask }
    }

    pub fn mask(&self) -> &TiledMask {
        self.mask
    }

    /// `y = Phi x` for `x` in frame-major order.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.mask.width * self.mask.height;
        let mut y = vec![0.0; n];
        for (xs, bits) in x.chunks_exact(n).zip(self.mask.bits.chunks_exact(n)) {
            for ((o, &v), &b) in y.iter_mut().zip(xs).zip(bits) {
                if b == 1 {
                    *o += v;
                }
            }
        }
        y
    }

    /// `Phi^T y`.
    pub fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        let n = self.mask.width * self.mask.height;
        let mut x = Vec::with_capacity(self.mask.bits.len());
        for bits in self.mask.bits.chunks_exact(n) {
            x.extend(bits.iter().zip(y).map(|(&b, &v)| if b == 1 { v } else { 0.0 }));
        }
        x
    }
}
