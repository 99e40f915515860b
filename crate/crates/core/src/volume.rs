//! Video volumes, block geometry and the vectorization convention.
//!
//! Every block is flattened spatially first (row-major inside a frame) and
//! temporally second, so element `n * w * h + r * w + c` of a block vector is
//! the pixel at column `c`, row `r` of the block's `n`-th frame.

use ndarray::Array3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Grayscale spatio-temporal signal with pixel values in `[0, 1]`.
///
/// Storage is frame-major, then row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoVolume {
    width: usize,
    height: usize,
    frames: usize,
    data: Vec<f64>,
}

impl VideoVolume {
    pub fn new(width: usize, height: usize, frames: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || frames == 0 {
            return Err(Error::Geometry(format!(
                "volume dimensions must be positive, got {width}x{height}x{frames}"
            )));
        }
        let expected = width * height * frames;
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!(
                "pixel value {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            frames,
            data,
        })
    }

    /// Builds a volume from arbitrary reals, clamping each value into `[0, 1]`.
    pub fn from_clamped(width: usize, height: usize, frames: usize, mut data: Vec<f64>) -> Result<Self> {
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self::new(width, height, frames, data)
    }

    pub fn zeros(width: usize, height: usize, frames: usize) -> Result<Self> {
        Self::new(width, height, frames, vec![0.0; width * height * frames])
    }

    /// Evaluates `f(x, y, frame)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        frames: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * frames);
        for n in 0..frames {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(x, y, n));
                }
            }
        }
        Self::new(width, height, frames, data)
    }

    /// Converts 8-bit samples to the unit pixel domain.
    pub fn from_u8(width: usize, height: usize, frames: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            width,
            height,
            frames,
            bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        )
    }

    /// Quantizes to 8 bits with round-half-up.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, frame: usize) -> usize {
        (frame * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, frame: usize) -> f64 {
        self.data[self.index(x, y, frame)]
    }

    pub fn frame(&self, frame: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[frame * n..(frame + 1) * n]
    }

    /// Keeps frames `start..start + count`.
    pub fn frames_range(&self, start: usize, count: usize) -> Result<Self> {
        if count == 0 || start + count > self.frames {
            return Err(Error::OutOfRange(format!(
                "frames {start}..{} of a {}-frame volume",
                start + count,
                self.frames
            )));
        }
        let n = self.width * self.height;
        Self::new(
            self.width,
            self.height,
            count,
            self.data[start * n..(start + count) * n].to_vec(),
        )
    }

    /// Spatial center crop to `width x height`.
    pub fn center_crop(&self, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 || width > self.width || height > self.height {
            return Err(Error::Geometry(format!(
                "cannot crop {}x{} to {width}x{height}",
                self.width, self.height
            )));
        }
        let x0 = (self.width - width) / 2;
        let y0 = (self.height - height) / 2;
        Self::from_fn(width, height, self.frames, |x, y, n| {
            self.get(x0 + x, y0 + y, n)
        })
    }

    /// Center-crops both spatial dimensions down to multiples of the strides.
    pub fn crop_to_multiple(&self, stride_x: usize, stride_y: usize) -> Result<Self> {
        if stride_x == 0 || stride_y == 0 {
            return Err(Error::Geometry("crop strides must be positive".into()));
        }
        let w = self.width / stride_x * stride_x;
        let h = self.height / stride_y * stride_y;
        if w == self.width && h == self.height {
            return Ok(self.clone());
        }
        self.center_crop(w, h)
    }
}

/// Size of a video block, `w x h` pixels by `t` frames.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockDims {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
}

impl BlockDims {
    pub const fn new(width: usize, height: usize, frames: usize) -> Self {
        Self {
            width,
            height,
            frames,
        }
    }

    /// Pixels per frame.
    pub const fn spatial(&self) -> usize {
        self.width * self.height
    }

    /// Total number of samples.
    pub const fn len(&self) -> usize {
        self.width * self.height * self.frames
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Block index of pixel (`col`, `row`) in frame `n`.
    #[inline]
    pub const fn index(&self, col: usize, row: usize, n: usize) -> usize {
        n * self.width * self.height + row * self.width + col
    }

    fn check_positive(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Geometry(format!(
                "block dimensions must be positive, got {}x{}x{}",
                self.width, self.height, self.frames
            )));
        }
        Ok(())
    }
}

/// A vectorized `w_p x h_p x t` block.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoBlock {
    dims: BlockDims,
    vec: Vec<f64>,
}

impl VideoBlock {
    pub fn new(dims: BlockDims, vec: Vec<f64>) -> Result<Self> {
        dims.check_positive()?;
        if vec.len() != dims.len() {
            return Err(Error::LengthMismatch {
                expected: dims.len(),
                actual: vec.len(),
            });
        }
        Ok(Self { dims, vec })
    }

    pub fn dims(&self) -> BlockDims {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.vec
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.vec
    }
}

/// Gathers the block whose top-left-first sample is pixel (`x0`, `y0`) of frame `f0`.
pub fn vectorize_block(
    volume: &VideoVolume,
    x0: usize,
    y0: usize,
    f0: usize,
    dims: BlockDims,
) -> Result<VideoBlock> {
    dims.check_positive()?;
    if x0 + dims.width > volume.width
        || y0 + dims.height > volume.height
        || f0 + dims.frames > volume.frames
    {
        return Err(Error::OutOfRange(format!(
            "block {}x{}x{} at ({x0}, {y0}, {f0}) exceeds volume {}x{}x{}",
            dims.width, dims.height, dims.frames, volume.width, volume.height, volume.frames
        )));
    }
    let mut vec = Vec::with_capacity(dims.len());
    for n in 0..dims.frames {
        for r in 0..dims.height {
            let start = volume.index(x0, y0 + r, f0 + n);
            vec.extend_from_slice(&volume.data[start..start + dims.width]);
        }
    }
    Ok(VideoBlock { dims, vec })
}

/// Reshapes a block vector into an array indexed `[frame, row, col]`.
pub fn unvectorize_block(block: &VideoBlock) -> Result<Array3<f64>> {
    let d = block.dims;
    Array3::from_shape_vec((d.frames, d.height, d.width), block.vec.clone()).map_err(|_| {
        Error::LengthMismatch {
            expected: d.len(),
            actual: block.vec.len(),
        }
    })
}

/// Half-overlapping tiling of a `width x height x frames` volume by blocks.
///
/// Spatial origins step by half the block size; frame groups of `block.frames`
/// frames do not overlap.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchGrid {
    block: BlockDims,
    width: usize,
    height: usize,
    frames: usize,
    origins: Vec<(usize, usize, usize)>,
}

impl PatchGrid {
    pub fn new(width: usize, height: usize, frames: usize, block: BlockDims) -> Result<Self> {
        block.check_positive()?;
        if !block.width.is_multiple_of(2) || !block.height.is_multiple_of(2) {
            return Err(Error::Geometry(format!(
                "block size {}x{} must be even",
                block.width, block.height
            )));
        }
        let (sx, sy) = (block.width / 2, block.height / 2);
        if width < block.width || height < block.height || !width.is_multiple_of(sx) || !height.is_multiple_of(sy) {
            return Err(Error::Geometry(format!(
                "frame {width}x{height} is not tiled by {}x{} blocks at stride {sx}x{sy}",
                block.width, block.height
            )));
        }
        if !frames.is_multiple_of(block.frames) || frames == 0 {
            return Err(Error::Geometry(format!(
                "{frames} frames is not a multiple of the block depth {}",
                block.frames
            )));
        }
        let mut origins = Vec::new();
        for f0 in (0..frames).step_by(block.frames) {
            for y0 in (0..=height - block.height).step_by(sy) {
                for x0 in (0..=width - block.width).step_by(sx) {
                    origins.push((x0, y0, f0));
                }
            }
        }
        Ok(Self {
            block,
            width,
            height,
            frames,
            origins,
        })
    }

    pub fn block(&self) -> BlockDims {
        self.block
    }

    pub fn stride(&self) -> (usize, usize) {
        (self.block.width / 2, self.block.height / 2)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.frames)
    }

    /// Block origins `(x0, y0, f0)`, frame group major, then row, then column.
    pub fn origins(&self) -> &[(usize, usize, usize)] {
        &self.origins
    }

    /// Origins belonging to frame group `group`.
    pub fn group_origins(&self, group: usize) -> &[(usize, usize, usize)] {
        let per = self.origins.len() / (self.frames / self.block.frames);
        &self.origins[group * per..(group + 1) * per]
    }
}

/// Averages overlapping blocks placed at `grid`'s origins.
///
/// Each output pixel is the mean of every block sample covering it, clamped
/// to the pixel domain.
pub fn assemble_overlapping_blocks(blocks: &[VideoBlock], grid: &PatchGrid) -> Result<VideoVolume> {
    let (w, h, t) = grid.dims();
    if blocks.len() != grid.origins.len() {
        return Err(Error::Assembly(format!(
            "{} blocks for {} grid positions",
            blocks.len(),
            grid.origins.len()
        )));
    }
    let mut sum = vec![0.0; w * h * t];
    let mut count = vec![0u32; w * h * t];
    for (block, &(x0, y0, f0)) in blocks.iter().zip(&grid.origins) {
        let d = block.dims;
        if d != grid.block {
            return Err(Error::Assembly(format!(
                "block {}x{}x{} does not match grid block {}x{}x{}",
                d.width, d.height, d.frames, grid.block.width, grid.block.height, grid.block.frames
            )));
        }
        for n in 0..d.frames {
            for r in 0..d.height {
                let out = ((f0 + n) * h + y0 + r) * w + x0;
                let src = d.index(0, r, n);
                for c in 0..d.width {
                    sum[out + c] += block.vec[src + c];
                    count[out + c] += 1;
                }
            }
        }
    }
    if let Some(i) = count.iter().position(|&c| c == 0) {
        return Err(Error::Assembly(format!("pixel {i} is not covered by any block")));
    }
    let data = sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| s / f64::from(c))
        .collect();
    VideoVolume::from_clamped(w, h, t, data)
}

/// Samples `n` random blocks, spread over volumes in proportion to their length.
///
/// Volumes smaller than `dims` are skipped with a warning. Per-volume counts
/// use largest-remainder rounding so they sum to exactly `n`.
pub fn extract_training_blocks(
    volumes: &[VideoVolume],
    n: usize,
    dims: BlockDims,
    seed: u64,
) -> Result<Vec<VideoBlock>> {
    dims.check_positive()?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let eligible: Vec<&VideoVolume> = volumes
        .iter()
        .enumerate()
        .filter_map(|(i, v)| {
            if v.width >= dims.width && v.height >= dims.height && v.frames >= dims.frames {
                Some(v)
            } else {
                log::warn!(
                    "skipping volume {i} ({}x{}x{}): smaller than block {}x{}x{}",
                    v.width,
                    v.height,
                    v.frames,
                    dims.width,
                    dims.height,
                    dims.frames
                );
                None
            }
        })
        .collect();
    if eligible.is_empty() {
        return Err(Error::InvalidInput(
            "no volume is large enough to hold a single block".into(),
        ));
    }
    let frames: Vec<usize> = eligible.iter().map(|v| v.frames).collect();
    let counts = proportional_counts(&frames, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks = Vec::with_capacity(n);
    for (v, &k) in eligible.iter().zip(&counts) {
        for _ in 0..k {
            let x0 = rng.random_range(0..=v.width - dims.width);
            let y0 = rng.random_range(0..=v.height - dims.height);
            let f0 = rng.random_range(0..=v.frames - dims.frames);
            blocks.push(vectorize_block(v, x0, y0, f0, dims)?);
        }
    }
    Ok(blocks)
}

/// Largest-remainder apportionment of `n` items by `weights`; ties go to the
/// earlier entry.
pub fn proportional_counts(weights: &[usize], n: usize) -> Vec<usize> {
    let total: usize = weights.iter().sum();
    if total == 0 {
        return vec![0; weights.len()];
    }
    let mut counts: Vec<usize> = weights.iter().map(|&w| w * n / total).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse((weights[i] * n) % total));
    for &i in order.iter().take(n - assigned) {
        counts[i] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_volume(w: usize, h: usize, t: usize, seed: u64) -> VideoVolume {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        VideoVolume::from_fn(w, h, t, |_, _, _| rng.random::<f64>()).unwrap()
    }

    #[test]
    fn constant_frames_vectorize_by_frame() {
        let v = VideoVolume::from_fn(2, 2, 2, |_, _, f| f as f64).unwrap();
        let b = vectorize_block(&v, 0, 0, 0, BlockDims::new(2, 2, 2)).unwrap();
        assert_eq!(b.as_slice(), &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn vectorize_matches_triple_loop_gather() {
        let v = random_volume(12, 10, 20, 3);
        let dims = BlockDims::new(4, 4, 16);
        let (x0, y0, f0) = (5, 3, 2);
        let b = vectorize_block(&v, x0, y0, f0, dims).unwrap();
        let mut expected = vec![0.0; dims.len()];
        for n in 0..16 {
            for r in 0..4 {
                for c in 0..4 {
                    expected[n * 16 + r * 4 + c] = v.data()[(f0 + n) * 120 + (y0 + r) * 12 + x0 + c];
                }
            }
        }
        assert_eq!(b.as_slice(), expected.as_slice());
    }

    #[test]
    fn unvectorize_inverts_vectorize() {
        let v = random_volume(8, 8, 16, 9);
        let dims = BlockDims::new(8, 8, 16);
        let b = vectorize_block(&v, 0, 0, 0, dims).unwrap();
        let arr = unvectorize_block(&b).unwrap();
        for ((n, r, c), val) in arr.indexed_iter() {
            assert_eq!(*val, v.get(c, r, n));
        }
        let back = VideoBlock::new(dims, arr.into_raw_vec_and_offset().0).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn out_of_bounds_window_is_rejected() {
        let v = random_volume(8, 8, 4, 1);
        let err = vectorize_block(&v, 1, 0, 0, BlockDims::new(8, 8, 4)).unwrap_err();
        assert!(matches!(err, Error::OutOfRange(_)));
        assert!(matches!(
            vectorize_block(&v, 0, 0, 1, BlockDims::new(8, 8, 4)),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn block_length_mismatch_is_rejected() {
        assert!(matches!(
            VideoBlock::new(BlockDims::new(2, 2, 2), vec![0.0; 7]),
            Err(Error::LengthMismatch { expected: 8, actual: 7 })
        ));
    }

    #[test]
    fn proportional_extraction_counts() {
        assert_eq!(proportional_counts(&[100, 300], 4), vec![1, 3]);
        assert_eq!(proportional_counts(&[1, 1, 1], 2), vec![1, 1, 0]);
        assert_eq!(proportional_counts(&[5, 7, 11], 100).iter().sum::<usize>(), 100);
    }

    #[test]
    fn extraction_is_proportional_and_deterministic() {
        let a = VideoVolume::zeros(8, 8, 100).unwrap();
        let b = VideoVolume::from_fn(8, 8, 300, |_, _, _| 1.0).unwrap();
        let dims = BlockDims::new(8, 8, 16);
        let blocks = extract_training_blocks(&[a.clone(), b.clone()], 4, dims, 7).unwrap();
        assert_eq!(blocks.len(), 4);
        let ones = blocks.iter().filter(|b| b.as_slice()[0] == 1.0).count();
        assert_eq!(ones, 3);
        let again = extract_training_blocks(&[a.clone(), b.clone()], 4, dims, 7).unwrap();
        assert_eq!(blocks, again);
        assert!(extract_training_blocks(&[a, b], 0, dims, 7).unwrap().is_empty());
    }

    #[test]
    fn extraction_skips_small_volumes() {
        let small = VideoVolume::zeros(4, 4, 100).unwrap();
        let ok = VideoVolume::zeros(8, 8, 16).unwrap();
        let dims = BlockDims::new(8, 8, 16);
        let blocks = extract_training_blocks(&[small.clone(), ok], 5, dims, 1).unwrap();
        assert_eq!(blocks.len(), 5);
        assert!(matches!(
            extract_training_blocks(&[small], 5, dims, 1),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn grid_interior_is_covered_four_times() {
        let grid = PatchGrid::new(16, 16, 16, BlockDims::new(8, 8, 16)).unwrap();
        assert_eq!(grid.origins().len(), 9);
        let mut cover = vec![0; 256];
        for &(x0, y0, _) in grid.origins() {
            for y in y0..y0 + 8 {
                for x in x0..x0 + 8 {
                    cover[y * 16 + x] += 1;
                }
            }
        }
        for y in 4..12 {
            for x in 4..12 {
                assert_eq!(cover[y * 16 + x], 4);
            }
        }
        assert_eq!(cover[0], 1);
    }

    #[test]
    fn grid_rejects_bad_geometry() {
        assert!(PatchGrid::new(16, 16, 16, BlockDims::new(7, 8, 16)).is_err());
        assert!(PatchGrid::new(18, 16, 16, BlockDims::new(8, 8, 16)).is_err());
        assert!(PatchGrid::new(16, 16, 20, BlockDims::new(8, 8, 16)).is_err());
    }

    #[test]
    fn assembling_constant_blocks_gives_constant() {
        let grid = PatchGrid::new(16, 8, 4, BlockDims::new(8, 8, 4)).unwrap();
        let dims = grid.block();
        let blocks: Vec<_> = grid
            .origins()
            .iter()
            .map(|_| VideoBlock::new(dims, vec![0.25; dims.len()]).unwrap())
            .collect();
        let out = assemble_overlapping_blocks(&blocks, &grid).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn overlap_is_averaged() {
        // Two 4x2 blocks on an 6x2 frame is not a valid grid; use 8x4 frame
        // with 4x4 blocks: columns 2..4 are covered by blocks 0 and 1.
        let grid = PatchGrid::new(8, 4, 1, BlockDims::new(4, 4, 1)).unwrap();
        let dims = grid.block();
        let values = [0.2, 0.6, 1.0];
        assert_eq!(grid.origins().len(), 3);
        let blocks: Vec<_> = values
            .iter()
            .map(|&v| VideoBlock::new(dims, vec![v; dims.len()]).unwrap())
            .collect();
        let out = assemble_overlapping_blocks(&blocks, &grid).unwrap();
        assert!((out.get(2, 0, 0) - 0.4).abs() < 1e-15);
        assert!((out.get(5, 3, 0) - 0.8).abs() < 1e-15);
        assert_eq!(out.get(0, 0, 0), 0.2);
    }

    #[test]
    fn assembly_matches_accumulate_and_divide() {
        let grid = PatchGrid::new(16, 12, 8, BlockDims::new(8, 4, 4)).unwrap();
        let dims = grid.block();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let blocks: Vec<_> = grid
            .origins()
            .iter()
            .map(|_| VideoBlock::new(dims, (0..dims.len()).map(|_| rng.random()).collect()).unwrap())
            .collect();
        let out = assemble_overlapping_blocks(&blocks, &grid).unwrap();
        // Oracle: per-pixel scan over every block.
        for f in 0..8 {
            for y in 0..12 {
                for x in 0..16 {
                    let mut s = 0.0;
                    let mut k = 0.0;
                    for (b, &(x0, y0, f0)) in blocks.iter().zip(grid.origins()) {
                        if (x0..x0 + 8).contains(&x) && (y0..y0 + 4).contains(&y) && (f0..f0 + 4).contains(&f) {
                            s += b.as_slice()[(f - f0) * 32 + (y - y0) * 8 + (x - x0)];
                            k += 1.0;
                        }
                    }
                    assert!((out.get(x, y, f) - s / k).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn assembly_reports_count_mismatch() {
        let grid = PatchGrid::new(8, 8, 4, BlockDims::new(8, 8, 4)).unwrap();
        assert!(matches!(
            assemble_overlapping_blocks(&[], &grid),
            Err(Error::Assembly(_))
        ));
    }

    #[test]
    fn crop_to_multiple_centers() {
        let v = VideoVolume::from_fn(10, 9, 1, |x, y, _| (x + 10 * y) as f64 / 100.0).unwrap();
        let c = v.crop_to_multiple(4, 4).unwrap();
        assert_eq!((c.width(), c.height()), (8, 8));
        assert_eq!(c.get(0, 0, 0), v.get(1, 0, 0));
    }

    #[test]
    fn out_of_domain_pixels_rejected() {
        assert!(VideoVolume::new(1, 1, 1, vec![1.5]).is_err());
        assert!(VideoVolume::new(0, 1, 1, vec![]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn vectorize_round_trips(x0 in 0usize..5, y0 in 0usize..5, f0 in 0usize..4,
                                     w in 1usize..5, h in 1usize..5, t in 1usize..5, seed in any::<u64>()) {
                let v = random_volume(9, 9, 8, seed);
                let dims = BlockDims::new(w, h, t);
                let b = vectorize_block(&v, x0, y0, f0, dims).unwrap();
                let arr = unvectorize_block(&b).unwrap();
                for ((n, r, c), val) in arr.indexed_iter() {
                    prop_assert_eq!(*val, v.get(x0 + c, y0 + r, f0 + n));
                }
            }

            #[test]
            fn assembly_weights_sum_to_one(wx in 1usize..5, hy in 1usize..5, groups in 1usize..3) {
                let dims = BlockDims::new(4, 2, 2);
                let grid = PatchGrid::new(2 * (wx + 1), hy + 1, 2 * groups, dims).unwrap();
                let blocks: Vec<_> = grid.origins().iter()
                    .map(|_| VideoBlock::new(dims, vec![1.0; dims.len()]).unwrap()).collect();
                let out = assemble_overlapping_blocks(&blocks, &grid).unwrap();
                prop_assert!(out.data().iter().all(|&v| v == 1.0));
            }
        }
    }
}
