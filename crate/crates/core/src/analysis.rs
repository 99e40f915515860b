//! Mask diagnostics: temporal run lengths, the spatial-by-time image and
//! the shadow-weight histogram table.

use std::fmt::Write as _;

use crate::sensing::MaskSubBlock;
use crate::{Error, Result};

/// Mean temporal run lengths over every spatial position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunLengthStats {
    /// Mean length of runs of 1s, or 0 when there are none.
    pub mean_ones: f64,
    /// Mean length of runs of 0s, or 0 when there are none.
    pub mean_zeros: f64,
    pub runs_ones: usize,
    pub runs_zeros: usize,
}

/// Splits each pixel's bit sequence along time into maximal runs.
pub fn run_length_stats(mask: &MaskSubBlock) -> Result<RunLengthStats> {
    let d = mask.dims();
    if d.is_empty() {
        return Err(Error::InvalidInput("empty mask".into()));
    }
    let (mut len1, mut len0, mut n1, mut n0) = (0usize, 0usize, 0usize, 0usize);
    for row in 0..d.height {
        for col in 0..d.width {
            let mut n = 0;
            while n < d.frames {
                let v = mask.bit(col, row, n);
                let start = n;
                while n < d.frames && mask.bit(col, row, n) == v {
                    n += 1;
                }
                if v == 1 {
                    len1 += n - start;
                    n1 += 1;
                } else {
                    len0 += n - start;
                    n0 += 1;
                }
            }
        }
    }
    let mean = |len: usize, n: usize| if n == 0 { 0.0 } else { len as f64 / n as f64 };
    Ok(RunLengthStats {
        mean_ones: mean(len1, n1),
        mean_zeros: mean(len0, n0),
        runs_ones: n1,
        runs_zeros: n0,
    })
}

/// Image with one row per spatial position (row-major inside the sub-block)
/// and one column per time step; open bits are 255.
///
/// Returns `(width, height, pixels)` with `width = t`, `height = w_s * h_s`.
pub fn mask_image(mask: &MaskSubBlock) -> (usize, usize, Vec<u8>) {
    let d = mask.dims();
    let rows = d.spatial();
    let mut px = vec![0u8; rows * d.frames];
    for r in 0..rows {
        let (row, col) = (r / d.width, r % d.width);
        for n in 0..d.frames {
            px[r * d.frames + n] = 255 * mask.bit(col, row, n);
        }
    }
    (d.frames, rows, px)
}

/// `bin_lo,bin_hi,count` rows for equal bins over [-1, 1].
pub fn histogram_csv(counts: &[usize]) -> String {
    let mut s = String::from("bin_lo,bin_hi,count\n");
    let n = counts.len() as f64;
    for (i, c) in counts.iter().enumerate() {
        let lo = -1.0 + 2.0 * i as f64 / n;
        let hi = -1.0 + 2.0 * (i + 1) as f64 / n;
        let _ = writeln!(s, "{lo},{hi},{c}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::sample_bernoulli_mask;
    use crate::volume::BlockDims;

    fn one_pixel(bits: Vec<u8>) -> MaskSubBlock {
        MaskSubBlock::from_bits(BlockDims::new(1, 1, bits.len()), bits).unwrap()
    }

    #[test]
    fn alternating_runs_have_length_one() {
        let s = run_length_stats(&one_pixel((0..16).map(|n| (n % 2) as u8).collect())).unwrap();
        assert_eq!(s.mean_ones, 1.0);
        assert_eq!(s.mean_zeros, 1.0);
        assert_eq!((s.runs_ones, s.runs_zeros), (8, 8));
    }

    #[test]
    fn constant_row_is_one_run() {
        let s = run_length_stats(&one_pixel(vec![1; 16])).unwrap();
        assert_eq!(s.mean_ones, 16.0);
        assert_eq!(s.runs_zeros, 0);
        assert_eq!(s.mean_zeros, 0.0);
    }

    #[test]
    fn random_mask_matches_scan_oracle() {
        let m = sample_bernoulli_mask(BlockDims::new(4, 4, 16), 0.4, 21).unwrap();
        let d = m.dims();
        // Count run starts: a run begins at n = 0 or where the bit changes.
        let (mut ones, mut zeros, mut c1, mut c0) = (0usize, 0usize, 0usize, 0usize);
        for j in 0..d.spatial() {
            for n in 0..d.frames {
                let v = m.bits()[n * d.spatial() + j];
                if v == 1 { ones += 1 } else { zeros += 1 }
                if n == 0 || m.bits()[(n - 1) * d.spatial() + j] != v {
                    if v == 1 { c1 += 1 } else { c0 += 1 }
                }
            }
        }
        let s = run_length_stats(&m).unwrap();
        assert_eq!((s.runs_ones, s.runs_zeros), (c1, c0));
        assert!((s.mean_ones - ones as f64 / c1 as f64).abs() < 1e-15);
        assert!((s.mean_zeros - zeros as f64 / c0 as f64).abs() < 1e-15);
    }

    #[test]
    fn image_index_mapping() {
        let m = sample_bernoulli_mask(BlockDims::new(4, 4, 16), 0.5, 2).unwrap();
        let (w, h, px) = mask_image(&m);
        assert_eq!((w, h), (16, 16));
        for r in 0..16 {
            for c in 0..16 {
                // spatial position r in raster order, time c
                assert_eq!(px[r * 16 + c], 255 * m.bits()[c * 16 + r]);
            }
        }
    }

    #[test]
    fn histogram_table() {
        let csv = histogram_csv(&[1, 2, 3, 4]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "bin_lo,bin_hi,count");
        assert_eq!(lines[1], "-1,-0.5,1");
        assert_eq!(lines[4], "0.5,1,4");
    }
}
