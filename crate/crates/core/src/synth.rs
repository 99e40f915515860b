//! Synthetic grayscale videos standing in for natural footage.
//!
//! Output is quantized to 8-bit levels so it survives an RGV1 round trip
//! unchanged.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::volume::VideoVolume;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthKind {
    /// Constant-intensity squares translating over a flat background.
    MovingSquares,
    /// Smooth sinusoidal texture translating with a fixed velocity.
    DriftTexture,
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moving-squares" => Ok(Self::MovingSquares),
            "drift-texture" => Ok(Self::DriftTexture),
            other => Err(Error::InvalidParameter(format!(
                "unknown synthetic kind {other:?} (moving-squares | drift-texture)"
            ))),
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MovingSquares => "moving-squares",
            Self::DriftTexture => "drift-texture",
        })
    }
}

pub fn generate(kind: SynthKind, width: usize, height: usize, frames: usize, seed: u64) -> Result<VideoVolume> {
    match kind {
        SynthKind::MovingSquares => moving_squares(width, height, frames, seed),
        SynthKind::DriftTexture => drift_texture(width, height, frames, seed),
    }
}

fn quantize(v: VideoVolume) -> Result<VideoVolume> {
    VideoVolume::from_u8(v.width(), v.height(), v.frames(), &v.to_u8())
}

struct Square {
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    side: f64,
    level: f64,
}

/// Squares move by whole pixels (positions are floored), so every frame is
/// exactly piecewise constant.
pub fn moving_squares(width: usize, height: usize, frames: usize, seed: u64) -> Result<VideoVolume> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let background: f64 = rng.random_range(0.05..0.35);
    let count = 2 + (width * height / 1024).min(6);
    let min_side = (width.min(height) as f64 / 6.0).max(2.0);
    let max_side = (width.min(height) as f64 / 2.5).max(min_side + 1.0);
    let squares: Vec<Square> = (0..count)
        .map(|_| Square {
            x: rng.random_range(0.0..width as f64),
            y: rng.random_range(0.0..height as f64),
            vx: rng.random_range(-1.0..1.0),
            vy: rng.random_range(-1.0..1.0),
            side: rng.random_range(min_side..max_side).floor(),
            level: rng.random_range(0.45..0.95),
        })
        .collect();
    let v = VideoVolume::from_fn(width, height, frames, |x, y, n| {
        let mut value = background;
        for s in &squares {
            let sx = (s.x + s.vx * n as f64).floor();
            let sy = (s.y + s.vy * n as f64).floor();
            let (xf, yf) = (x as f64, y as f64);
            if xf >= sx && xf < sx + s.side && yf >= sy && yf < sy + s.side {
                value = s.level;
            }
        }
        value
    })?;
    quantize(v)
}

pub fn drift_texture(width: usize, height: usize, frames: usize, seed: u64) -> Result<VideoVolume> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vx: f64 = rng.random_range(-0.8..0.8);
    let vy: f64 = rng.random_range(-0.8..0.8);
    // (kx, ky, phase, amplitude); wavelengths between 6 and 24 pixels
    let waves: Vec<(f64, f64, f64, f64)> = (0..5)
        .map(|_| {
            let lambda: f64 = rng.random_range(6.0..24.0);
            let theta: f64 = rng.random_range(0.0..PI);
            let k = 2.0 * PI / lambda;
            (
                k * theta.cos(),
                k * theta.sin(),
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.5..1.0),
            )
        })
        .collect();
    let norm: f64 = waves.iter().map(|w| w.3).sum();
    let v = VideoVolume::from_fn(width, height, frames, |x, y, n| {
        let px = x as f64 - vx * n as f64;
        let py = y as f64 - vy * n as f64;
        let s: f64 = waves.iter().map(|&(kx, ky, ph, a)| a * (kx * px + ky * py + ph).sin()).sum();
        0.5 + 0.45 * s / norm
    })?;
    quantize(v)
}
