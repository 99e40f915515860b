//! Acquisition and reconstruction of whole videos.
//!
//! Every method works on exposures of `t` frames. The decoder and LASSO
//! paths solve half-overlapping blocks whose origins fall on multiples of
//! the mask sub-block, so every block sees the same sensing matrix.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};

use crate::decoder::DecoderParams;
use crate::metrics::{per_frame_curves, FrameCurves};
use crate::sensing::{build_phi_p, simulate_coded_frames, tile_mask, CodedFrame, MaskSubBlock};
use crate::solvers::{build_dct_dictionary, solve_tv, LassoProblem, SolverConfig, TvConfig};
use crate::volume::{assemble_overlapping_blocks, BlockDims, PatchGrid, VideoBlock, VideoVolume};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Decoder,
    Tv,
    Lasso,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "decoder" => Ok(Self::Decoder),
            "tv" => Ok(Self::Tv),
            "lasso" => Ok(Self::Lasso),
            other => Err(Error::InvalidParameter(format!(
                "unknown method {other:?} (decoder | tv | lasso)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Decoder => "decoder",
            Self::Tv => "tv",
            Self::Lasso => "lasso",
        })
    }
}

/// Block geometry implied by a sub-block: twice as wide and tall.
pub fn block_for(sub: BlockDims) -> BlockDims {
    BlockDims::new(2 * sub.width, 2 * sub.height, sub.frames)
}

/// Center-crops `volume` to a multiple of the sub-block and returns the
/// cropped reference with its coded frames.
pub fn measure_video(volume: &VideoVolume, mask: &MaskSubBlock) -> Result<(VideoVolume, Vec<CodedFrame>)> {
    let d = mask.dims();
    let cropped = volume.crop_to_multiple(d.width, d.height)?;
    let tiled = tile_mask(mask, cropped.width(), cropped.height())?;
    let coded = simulate_coded_frames(&cropped, &tiled)?;
    Ok((cropped, coded))
}

fn check_coded(coded: &[CodedFrame]) -> Result<(usize, usize)> {
    let first = coded
        .first()
        .ok_or_else(|| Error::InvalidInput("no coded frames".into()))?;
    let dims = (first.width(), first.height());
    if coded.iter().any(|c| (c.width(), c.height()) != dims) {
        return Err(Error::DimensionMismatch("coded frames differ in size".into()));
    }
    Ok(dims)
}

/// Solves every grid block of every exposure with `solve` and averages the overlaps.
fn blockwise(
    coded: &[CodedFrame],
    block: BlockDims,
    mut solve: impl FnMut(Array2<f64>) -> Result<Array2<f64>>,
) -> Result<VideoVolume> {
    let (w, h) = check_coded(coded)?;
    let grid = PatchGrid::new(w, h, coded.len() * block.frames, block)?;
    let mut blocks = Vec::with_capacity(grid.origins().len());
    for (g, frame) in coded.iter().enumerate() {
        let origins = grid.group_origins(g);
        let mut y = Array2::zeros((origins.len(), block.spatial()));
        for (i, &(x0, y0, _)) in origins.iter().enumerate() {
            let patch = frame.patch(x0, y0, block.width, block.height)?;
            y.row_mut(i).assign(&ArrayView1::from(&patch));
        }
        let x = solve(y)?;
        if x.dim() != (origins.len(), block.len()) {
            return Err(Error::DimensionMismatch(format!(
                "solver returned {:?}, expected {:?}",
                x.dim(),
                (origins.len(), block.len())
            )));
        }
        for row in x.rows() {
            blocks.push(VideoBlock::new(block, row.to_vec())?);
        }
    }
    assemble_overlapping_blocks(&blocks, &grid)
}

/// Runs the decoder on every half-overlapping block, `batch` blocks at a time.
pub fn reconstruct_decoder(
    coded: &[CodedFrame],
    decoder: &DecoderParams,
    block: BlockDims,
    batch: usize,
) -> Result<VideoVolume> {
    if decoder.inputs() != block.spatial() || decoder.outputs() != block.len() {
        return Err(Error::DimensionMismatch(format!(
            "decoder maps {} -> {}, blocks need {} -> {}",
            decoder.inputs(),
            decoder.outputs(),
            block.spatial(),
            block.len()
        )));
    }
    let batch = batch.max(1);
    blockwise(coded, block, |y| {
        let mut out = Array2::zeros((y.nrows(), block.len()));
        let mut start = 0;
        while start < y.nrows() {
            let end = (start + batch).min(y.nrows());
            let (x, _) = decoder.forward(y.slice(ndarray::s![start..end, ..]))?;
            out.slice_mut(ndarray::s![start..end, ..]).assign(&x);
            start = end;
        }
        Ok(out)
    })
}

/// DCT-sparse LASSO on every half-overlapping block.
pub fn reconstruct_lasso(coded: &[CodedFrame], mask: &MaskSubBlock, cfg: &SolverConfig) -> Result<VideoVolume> {
    let block = block_for(mask.dims());
    let tiled = tile_mask(mask, block.width, block.height)?;
    let phi = build_phi_p(block, &tiled.block_bits(0, 0, block.width, block.height)?)?;
    let dict = build_dct_dictionary(block.width, block.height, block.frames)?;
    let problem = LassoProblem::new(&phi, &dict)?;
    blockwise(coded, block, |y| {
        let mut out = Array2::zeros((y.nrows(), block.len()));
        for (i, row) in y.rows().into_iter().enumerate() {
            let sol = problem.solve(row, cfg)?;
            out.row_mut(i).assign(&dict.synthesize(sol.coefficients.view()));
        }
        Ok(out)
    })
}

/// Spatial-TV reconstruction of each exposure over the full frame.
pub fn reconstruct_tv(coded: &[CodedFrame], mask: &MaskSubBlock, cfg: &TvConfig) -> Result<VideoVolume> {
    let (w, h) = check_coded(coded)?;
    let tiled = tile_mask(mask, w, h)?;
    let t = tiled.frames();
    let mut data = Vec::with_capacity(w * h * t * coded.len());
    for c in coded {
        let sol = solve_tv(c, &tiled, cfg)?;
        data.extend(sol.frames.iter().copied());
    }
    VideoVolume::from_clamped(w, h, t * coded.len(), data)
}

/// Compares the first `frames` frames of `recon` against `reference`,
/// center-cropping the reference to the reconstruction's size.
pub fn evaluate(reference: &VideoVolume, recon: &VideoVolume, frames: usize) -> Result<FrameCurves> {
    let reference = if (reference.width(), reference.height()) != (recon.width(), recon.height()) {
        reference.center_crop(recon.width(), recon.height())?
    } else {
        reference.clone()
    };
    let n = frames.min(reference.frames()).min(recon.frames());
    if n == 0 {
        return Err(Error::InvalidInput("no frames to evaluate".into()));
    }
    per_frame_curves(&reference.frames_range(0, n)?, &recon.frames_range(0, n)?)
}
