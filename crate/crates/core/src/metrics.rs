//! PSNR and SSIM, per frame and averaged over a clip.

use crate::volume::VideoVolume;
use crate::{Error, Result};

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Borrowed single-channel image, row-major.
#[derive(Clone, Copy, Debug)]
pub struct Frame<'a> {
    pub width: usize,
    pub height: usize,
    pub data: &'a [f64],
}

impl<'a> Frame<'a> {
    pub fn new(width: usize, height: usize, data: &'a [f64]) -> Result<Self> {
        if data.len() != width * height || data.is_empty() {
            return Err(Error::LengthMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }
}

fn check_same(a: &Frame, b: &Frame) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

pub fn mse(reference: &Frame, test: &Frame) -> Result<f64> {
    check_same(reference, test)?;
    Ok(reference
        .data
        .iter()
        .zip(test.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / reference.data.len() as f64)
}

/// `10 log10(peak^2 / MSE)` in dB; identical frames give `f64::INFINITY`.
pub fn psnr(reference: &Frame, test: &Frame, peak: f64) -> Result<f64> {
    let m = mse(reference, test)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / m).log10())
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable valid-mode Gaussian filter.
fn filter_valid(img: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            let src = &img[y * w + x..y * w + x + SSIM_WINDOW];
            rows[y * ow + x] = src.iter().zip(k).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut s = 0.0;
            for (j, kv) in k.iter().enumerate() {
                s += kv * rows[(y + j) * ow + x];
            }
            out[y * ow + x] = s;
        }
    }
    out
}

/// Mean SSIM over every fully contained 11x11 Gaussian window (sigma 1.5),
/// `K1 = 0.01`, `K2 = 0.03`, dynamic range 1.
pub fn ssim(reference: &Frame, test: &Frame) -> Result<f64> {
    check_same(reference, test)?;
    let (w, h) = (reference.width, reference.height);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Geometry(format!(
            "SSIM needs frames of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    let k = gaussian_kernel();
    let a = reference.data;
    let b = test.data;
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mu_a = filter_valid(a, w, h, &k);
    let mu_b = filter_valid(b, w, h, &k);
    let e_aa = filter_valid(&aa, w, h, &k);
    let e_bb = filter_valid(&bb, w, h, &k);
    let e_ab = filter_valid(&ab, w, h, &k);
    let n = mu_a.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
            / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / n as f64)
}

/// Per-frame PSNR (peak 1) and SSIM with their means.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameCurves {
    pub psnr: Vec<f64>,
    pub ssim: Vec<f64>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

impl FrameCurves {
    pub fn len(&self) -> usize {
        self.psnr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psnr.is_empty()
    }
}

pub fn per_frame_curves(reference: &VideoVolume, recon: &VideoVolume) -> Result<FrameCurves> {
    if (reference.width(), reference.height(), reference.frames())
        != (recon.width(), recon.height(), recon.frames())
    {
        return Err(Error::DimensionMismatch(format!(
            "reference {}x{}x{} vs reconstruction {}x{}x{}",
            reference.width(),
            reference.height(),
            reference.frames(),
            recon.width(),
            recon.height(),
            recon.frames()
        )));
    }
    let (w, h) = (reference.width(), reference.height());
    let mut p = Vec::with_capacity(reference.frames());
    let mut s = Vec::with_capacity(reference.frames());
    for f in 0..reference.frames() {
        let a = Frame::new(w, h, reference.frame(f))?;
        let b = Frame::new(w, h, recon.frame(f))?;
        p.push(psnr(&a, &b, 1.0)?);
        s.push(ssim(&a, &b)?);
    }
    let mean_psnr = p.iter().sum::<f64>() / p.len() as f64;
    let mean_ssim = s.iter().sum::<f64>() / s.len() as f64;
    Ok(FrameCurves {
        psnr: p,
        ssim: s,
        mean_psnr,
        mean_ssim,
    })
}
