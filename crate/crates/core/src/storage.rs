//! On-disk formats: RGV1/RGF1 videos, BMK1/BMR1 masks, MDL1 checkpoints,
//! the training CSV log, SVG curves and PGM images.
//!
//! Every multi-byte integer is little-endian and every binary file starts
//! with a four-byte ASCII magic.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::decoder::{DecoderParams, DenseLayer};
use crate::encoder::EncoderParams;
use crate::sensing::{CodedFrame, MaskSubBlock};
use crate::trainer::{EpochLog, SgdState, TrainingState};
use crate::volume::{BlockDims, VideoVolume};
use crate::{Error, Result};

pub const MAGIC_VIDEO: &[u8; 4] = b"RGV1";
pub const MAGIC_FRAMES: &[u8; 4] = b"RGF1";
pub const MAGIC_MASK_BITS: &[u8; 4] = b"BMK1";
pub const MAGIC_MASK_SHADOW: &[u8; 4] = b"BMR1";
pub const MAGIC_MODEL: &[u8; 4] = b"MDL1";
pub const MODEL_VERSION: u32 = 1;
pub const LOG_HEADER: &str = "epoch,train_mse,val_mse,enc_lr,dec_lr,nnz_pct,flips";

/// Sequential little-endian reader over a byte slice.
struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated payload: need {n} bytes at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let m = self.take(4)?;
        if m != expected {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(m),
                String::from_utf8_lossy(expected)
            )));
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn dim(&mut self) -> Result<usize> {
        let v = self.u32()? as usize;
        if v == 0 {
            return Err(Error::Format("zero dimension".into()));
        }
        Ok(v)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn push_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn push_f64s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn header(magic: &[u8; 4], dims: [usize; 3], payload: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 + payload);
    out.extend_from_slice(magic);
    for d in dims {
        push_u32(&mut out, d)?;
    }
    Ok(out)
}

fn read_dims(r: &mut Reader) -> Result<(usize, usize, usize)> {
    Ok((r.dim()?, r.dim()?, r.dim()?))
}

// ---------------------------------------------------------------- videos

pub fn encode_video(volume: &VideoVolume) -> Result<Vec<u8>> {
    let px = volume.to_u8();
    let mut out = header(MAGIC_VIDEO, [volume.width(), volume.height(), volume.frames()], px.len())?;
    out.extend_from_slice(&px);
    Ok(out)
}

pub fn decode_video(bytes: &[u8]) -> Result<VideoVolume> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC_VIDEO)?;
    let (w, h, t) = read_dims(&mut r)?;
    let px = r.take(w * h * t)?;
    r.finish()?;
    VideoVolume::from_u8(w, h, t, px)
}

pub fn write_video(path: impl AsRef<Path>, volume: &VideoVolume) -> Result<()> {
    Ok(fs::write(path, encode_video(volume)?)?)
}

pub fn read_video(path: impl AsRef<Path>) -> Result<VideoVolume> {
    decode_video(&fs::read(path)?)
}

/// Stack of same-sized single-channel float frames.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameStack {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub data: Vec<f32>,
}

impl FrameStack {
    pub fn from_coded(coded: &[CodedFrame]) -> Result<Self> {
        let first = coded
            .first()
            .ok_or_else(|| Error::InvalidInput("no coded frames".into()))?;
        let (w, h) = (first.width(), first.height());
        let mut data = Vec::with_capacity(w * h * coded.len());
        for c in coded {
            if (c.width(), c.height()) != (w, h) {
                return Err(Error::DimensionMismatch("coded frames differ in size".into()));
            }
            data.extend(c.data().iter().map(|&v| v as f32));
        }
        Ok(Self {
            width: w,
            height: h,
            frames: coded.len(),
            data,
        })
    }

    pub fn to_coded(&self) -> Result<Vec<CodedFrame>> {
        let n = self.width * self.height;
        self.data
            .chunks_exact(n)
            .map(|c| CodedFrame::new(self.width, self.height, c.iter().map(|&v| v as f64).collect()))
            .collect()
    }
}

pub fn encode_frames(stack: &FrameStack) -> Result<Vec<u8>> {
    if stack.width * stack.height * stack.frames == 0 {
        return Err(Error::Format("zero dimension".into()));
    }
    if stack.data.len() != stack.width * stack.height * stack.frames {
        return Err(Error::LengthMismatch {
            expected: stack.width * stack.height * stack.frames,
            actual: stack.data.len(),
        });
    }
    let mut out = header(MAGIC_FRAMES, [stack.width, stack.height, stack.frames], 4 * stack.data.len())?;
    for v in &stack.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_frames(bytes: &[u8]) -> Result<FrameStack> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC_FRAMES)?;
    let (w, h, t) = read_dims(&mut r)?;
    let data = r.f32s(w * h * t)?;
    r.finish()?;
    Ok(FrameStack {
        width: w,
        height: h,
        frames: t,
        data,
    })
}

pub fn write_frames(path: impl AsRef<Path>, stack: &FrameStack) -> Result<()> {
    Ok(fs::write(path, encode_frames(stack)?)?)
}

pub fn read_frames(path: impl AsRef<Path>) -> Result<FrameStack> {
    decode_frames(&fs::read(path)?)
}

// ----------------------------------------------------------------- masks

pub fn encode_mask_bits(mask: &MaskSubBlock) -> Result<Vec<u8>> {
    let d = mask.dims();
    let mut out = header(MAGIC_MASK_BITS, [d.width, d.height, d.frames], d.len())?;
    out.extend_from_slice(mask.bits());
    Ok(out)
}

pub fn encode_mask_shadow(mask: &MaskSubBlock) -> Result<Vec<u8>> {
    let d = mask.dims();
    let shadow = mask
        .shadow()
        .ok_or_else(|| Error::InvalidInput("mask has no shadow weights".into()))?;
    let mut out = header(MAGIC_MASK_SHADOW, [d.width, d.height, d.frames], 8 * d.len())?;
    push_f64s(&mut out, shadow.iter().copied());
    Ok(out)
}

/// Reads either mask format, choosing by magic.
pub fn decode_mask(bytes: &[u8]) -> Result<MaskSubBlock> {
    let mut r = Reader::new(bytes);
    let magic = r.take(4)?;
    let (w, h, t) = read_dims(&mut r)?;
    let dims = BlockDims::new(w, h, t);
    let mask = if magic == MAGIC_MASK_BITS {
        MaskSubBlock::from_bits(dims, r.take(dims.len())?.to_vec())?
    } else if magic == MAGIC_MASK_SHADOW {
        MaskSubBlock::from_shadow(dims, r.f64s(dims.len())?)?
    } else {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected BMK1 or BMR1",
            String::from_utf8_lossy(magic)
        )));
    };
    r.finish()?;
    Ok(mask)
}

/// Writes BMR1 when shadow weights are present, BMK1 otherwise.
pub fn write_mask(path: impl AsRef<Path>, mask: &MaskSubBlock) -> Result<()> {
    let bytes = if mask.shadow().is_some() {
        encode_mask_shadow(mask)?
    } else {
        encode_mask_bits(mask)?
    };
    Ok(fs::write(path, bytes)?)
}

pub fn write_mask_bits(path: impl AsRef<Path>, mask: &MaskSubBlock) -> Result<()> {
    Ok(fs::write(path, encode_mask_bits(mask)?)?)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<MaskSubBlock> {
    decode_mask(&fs::read(path)?)
}

/// Accepts BMK1, BMR1 or an MDL1 checkpoint and returns its mask.
pub fn read_any_mask(path: impl AsRef<Path>) -> Result<MaskSubBlock> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(MAGIC_MODEL) {
        return Ok(decode_model(&bytes)?.encoder.to_mask());
    }
    decode_mask(&bytes)
}

// ----------------------------------------------------------- checkpoints

/// Contents of an MDL1 file. `resume` is present when momentum buffers were saved.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
    pub resume: Option<ResumeState>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResumeState {
    pub velocity: SgdState,
    pub epochs_done: usize,
}

impl Checkpoint {
    pub fn from_state(state: &TrainingState) -> Self {
        Self {
            encoder: state.encoder.clone(),
            decoder: state.decoder.clone(),
            resume: Some(ResumeState {
                velocity: state.velocity.clone(),
                epochs_done: state.epochs_done,
            }),
        }
    }

    pub fn into_state(self) -> Result<TrainingState> {
        let resume = self
            .resume
            .ok_or_else(|| Error::InvalidInput("checkpoint has no resume section".into()))?;
        Ok(TrainingState {
            encoder: self.encoder,
            decoder: self.decoder,
            velocity: resume.velocity,
            epochs_done: resume.epochs_done,
        })
    }
}

/// Serializes a checkpoint.
///
/// The resume section is the flag byte, a u32 epoch count, the encoder
/// momentum in shared-vector order, then each decoder layer's weight and
/// bias momentum in layer order.
pub fn encode_model(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let enc = &ckpt.encoder;
    let dec = &ckpt.decoder;
    let block = enc.block_dims();
    if block.width != block.height {
        return Err(Error::Format("MDL1 stores square blocks only".into()));
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC_MODEL);
    push_u32(&mut out, MODEL_VERSION as usize)?;
    push_u32(&mut out, block.spatial())?;
    push_u32(&mut out, block.len())?;
    push_u32(&mut out, dec.hidden_layers())?;
    push_u32(&mut out, block.frames)?;
    push_f64s(&mut out, enc.shadow_shared_order());
    for layer in dec.layers() {
        push_u32(&mut out, layer.outputs())?;
        push_u32(&mut out, layer.inputs())?;
        push_f64s(&mut out, layer.weights.iter().copied());
        push_f64s(&mut out, layer.bias.iter().copied());
    }
    match &ckpt.resume {
        None => out.push(0),
        Some(rs) => {
            out.push(1);
            push_u32(&mut out, rs.epochs_done)?;
            if rs.velocity.encoder.len() != enc.shadow().len() || rs.velocity.decoder.len() != dec.layers().len() {
                return Err(Error::DimensionMismatch("momentum buffers do not match parameters".into()));
            }
            push_f64s(&mut out, reorder_shared(enc.sub_dims(), &rs.velocity.encoder));
            for (v, l) in rs.velocity.decoder.iter().zip(dec.layers()) {
                if v.weights.dim() != l.weights.dim() || v.bias.len() != l.bias.len() {
                    return Err(Error::DimensionMismatch("momentum buffers do not match parameters".into()));
                }
                push_f64s(&mut out, v.weights.iter().copied());
                push_f64s(&mut out, v.bias.iter().copied());
            }
        }
    }
    Ok(out)
}

/// Spatial-then-temporal buffer to shared-vector order.
fn reorder_shared(d: BlockDims, buf: &[f64]) -> Vec<f64> {
    let s = d.spatial();
    let mut out = Vec::with_capacity(buf.len());
    for j in 0..s {
        for n in 0..d.frames {
            out.push(buf[n * s + j]);
        }
    }
    out
}

fn reorder_spatial(d: BlockDims, shared: &[f64]) -> Vec<f64> {
    let s = d.spatial();
    let mut out = vec![0.0; shared.len()];
    for j in 0..s {
        for n in 0..d.frames {
            out[n * s + j] = shared[j * d.frames + n];
        }
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC_MODEL)?;
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported MDL1 version {version}")));
    }
    let m_p = r.dim()?;
    let n_p = r.dim()?;
    let k = r.dim()?;
    let t = r.dim()?;
    let side = (m_p as f64).sqrt().round() as usize;
    if side * side != m_p || !side.is_multiple_of(2) || m_p * t != n_p {
        return Err(Error::Format(format!(
            "inconsistent shape M_p={m_p} N_p={n_p} t={t}"
        )));
    }
    let sub = BlockDims::new(side / 2, side / 2, t);
    let shared = r.f64s(sub.len())?;
    let encoder = EncoderParams::from_shared_order(sub, &shared)?;
    let mut layers = Vec::with_capacity(k + 1);
    let mut prev = m_p;
    for i in 0..=k {
        let rows = r.dim()?;
        let cols = r.dim()?;
        if cols != prev || (i == k && rows != n_p) {
            return Err(Error::Format(format!(
                "layer {i} is {rows}x{cols}, inconsistent with the header"
            )));
        }
        let w = r.f64s(rows * cols)?;
        let b = r.f64s(rows)?;
        layers.push(DenseLayer {
            weights: Array2::from_shape_vec((rows, cols), w).expect("length checked"),
            bias: Array1::from_vec(b),
        });
        prev = rows;
    }
    let decoder = DecoderParams::from_layers(layers)?;
    let resume = match r.u8()? {
        0 => None,
        1 => {
            let epochs_done = r.u32()? as usize;
            let enc_v = reorder_spatial(sub, &r.f64s(sub.len())?);
            let mut dec_v = Vec::with_capacity(decoder.layers().len());
            for l in decoder.layers() {
                let (rows, cols) = l.weights.dim();
                let w = r.f64s(rows * cols)?;
                let b = r.f64s(rows)?;
                dec_v.push(DenseLayer {
                    weights: Array2::from_shape_vec((rows, cols), w).expect("length checked"),
                    bias: Array1::from_vec(b),
                });
            }
            Some(ResumeState {
                velocity: SgdState {
                    encoder: enc_v,
                    decoder: dec_v,
                },
                epochs_done,
            })
        }
        f => return Err(Error::Format(format!("bad resume flag {f}"))),
    };
    r.finish()?;
    Ok(Checkpoint {
        encoder,
        decoder,
        resume,
    })
}

pub fn write_model(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    Ok(fs::write(path, encode_model(ckpt)?)?)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<Checkpoint> {
    decode_model(&fs::read(path)?)
}

// ------------------------------------------------------------------ text

/// Shortest round-trip decimal; non-finite values as `inf`, `-inf`, `nan`.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

pub fn parse_real(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Format(format!("not a number: {s:?}")))
}

pub fn encode_log(rows: &[EpochLog]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.epoch,
            format_real(r.train_mse),
            format_real(r.val_mse),
            format_real(r.enc_lr),
            format_real(r.dec_lr),
            format_real(r.nnz_pct),
            r.flips
        );
    }
    out
}

pub fn decode_log(text: &str) -> Result<Vec<EpochLog>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == LOG_HEADER => {}
        other => return Err(Error::Format(format!("unexpected log header {other:?}"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(Error::Format(format!("log line {}: expected 7 fields", i + 2)));
        }
        let int = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Format(format!("log line {}: bad integer {s:?}", i + 2)))
        };
        rows.push(EpochLog {
            epoch: int(f[0])?,
            train_mse: parse_real(f[1])?,
            val_mse: parse_real(f[2])?,
            enc_lr: parse_real(f[3])?,
            dec_lr: parse_real(f[4])?,
            nnz_pct: parse_real(f[5])?,
            flips: int(f[6])?,
        });
    }
    Ok(rows)
}

pub fn write_log(path: impl AsRef<Path>, rows: &[EpochLog]) -> Result<()> {
    Ok(fs::write(path, encode_log(rows))?)
}

pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<EpochLog>> {
    decode_log(&fs::read_to_string(path)?)
}

/// One named polyline for [`render_svg`].
#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// One panel: a title and the series drawn in it.
#[derive(Clone, Debug)]
pub struct Panel {
    pub title: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

/// Stacked line-plot panels with per-panel autoscaled axes.
pub fn render_svg(panels: &[Panel]) -> String {
    const W: f64 = 640.0;
    const PH: f64 = 220.0;
    const ML: f64 = 70.0;
    const MR: f64 = 20.0;
    const MT: f64 = 28.0;
    const MB: f64 = 30.0;
    let height = PH * panels.len().max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (pi, panel) in panels.iter().enumerate() {
        let top = pi as f64 * PH;
        let tf = |v: f64| if panel.log_y { v.log10() } else { v };
        let pts: Vec<(f64, f64)> = panel
            .series
            .iter()
            .flat_map(|se| se.points.iter().copied())
            .filter(|&(x, y)| x.is_finite() && tf(y).is_finite())
            .map(|(x, y)| (x, tf(y)))
            .collect();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(x, y) in &pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if pts.is_empty() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            y1 = y0 + 1.0;
        }
        let px = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
        let py = |y: f64| top + MT + (1.0 - (y - y0) / (y1 - y0)) * (PH - MT - MB);
        let _ = writeln!(
            s,
            r#"<text x="{ML}" y="{:.1}" font-weight="bold">{}</text>"#,
            top + 16.0,
            escape(&panel.title)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{ML}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#888"/>"##,
            top + MT,
            W - ML - MR,
            PH - MT - MB
        );
        let label = |v: f64| if panel.log_y { format!("{:.3e}", 10f64.powf(v)) } else { format!("{v:.4}") };
        let _ = writeln!(s, r#"<text x="4" y="{:.1}">{}</text>"#, py(y1) + 4.0, label(y1));
        let _ = writeln!(s, r#"<text x="4" y="{:.1}">{}</text>"#, py(y0), label(y0));
        let _ = writeln!(s, r#"<text x="{ML}" y="{:.1}">{x0}</text>"#, top + PH - 12.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{x1}</text>"#,
            W - MR,
            top + PH - 12.0
        );
        for (si, se) in panel.series.iter().enumerate() {
            let color = PALETTE[si % PALETTE.len()];
            let path: Vec<String> = se
                .points
                .iter()
                .filter(|&&(x, y)| x.is_finite() && tf(y).is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(tf(y))))
                .collect();
            if !path.is_empty() {
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    path.join(" ")
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" fill="{color}" text-anchor="end">{}</text>"#,
                W - MR - 4.0,
                top + MT + 14.0 + 13.0 * si as f64,
                escape(&se.name)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Loss, mask-density and flip panels from a training log.
pub fn log_panels(rows: &[EpochLog]) -> Vec<Panel> {
    let pts = |f: fn(&EpochLog) -> f64| rows.iter().map(|r| (r.epoch as f64, f(r))).collect::<Vec<_>>();
    vec![
        Panel {
            title: "MSE".into(),
            log_y: true,
            series: vec![
                Series {
                    name: "train".into(),
                    points: pts(|r| r.train_mse),
                },
                Series {
                    name: "validation".into(),
                    points: pts(|r| r.val_mse),
                },
            ],
        },
        Panel {
            title: "nonzero mask entries (%)".into(),
            log_y: false,
            series: vec![Series {
                name: "nnz %".into(),
                points: pts(|r| r.nnz_pct),
            }],
        },
        Panel {
            title: "bit flips per epoch".into(),
            log_y: false,
            series: vec![Series {
                name: "flips".into(),
                points: pts(|r| r.flips as f64),
            }],
        },
    ]
}

/// Binary PGM (P5, maxval 255).
pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(Error::LengthMismatch {
            expected: width * height,
            actual: pixels.len(),
        });
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    Ok(out)
}

/// Parses a P5 file with maxval 255 and single-space/newline separators.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(Error::Format("expected P5 with maxval 255".into()));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PGM size {s:?}")));
    let (w, h) = (parse(&fields[1])?, parse(&fields[2])?);
    let px = bytes
        .get(pos..)
        .filter(|p| p.len() == w * h)
        .ok_or_else(|| Error::Format("PGM payload size mismatch".into()))?;
    Ok((w, h, px.to_vec()))
}

pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    Ok(fs::write(path, encode_pgm(width, height, pixels)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::{init_decoder, DecoderShape};
    use crate::sensing::sample_bernoulli_mask;
    use proptest::prelude::*;

    fn toy_state() -> TrainingState {
        let mask = sample_bernoulli_mask(BlockDims::new(2, 2, 4), 0.5, 3).unwrap();
        let encoder = EncoderParams::from_mask(&mask);
        let decoder = init_decoder(DecoderShape::full(16, 64, 2), 4).unwrap();
        let mut velocity = SgdState::zeros(&encoder, &decoder);
        for (i, v) in velocity.encoder.iter_mut().enumerate() {
            *v = i as f64 * 0.25 - 1.0;
        }
        velocity.decoder[1].bias[3] = 7.5;
        TrainingState {
            encoder,
            decoder,
            velocity,
            epochs_done: 11,
        }
    }

    #[test]
    fn video_header_math() {
        let v = VideoVolume::new(2, 2, 1, vec![0.0, 1.0, 0.5, 0.25]).unwrap();
        let bytes = encode_video(&v).unwrap();
        assert_eq!(bytes.len(), 16 + 4);
    }

    #[test]
    fn video_matches_golden_bytes() {
        let v = VideoVolume::from_u8(3, 1, 2, &[0, 10, 255, 1, 2, 3]).unwrap();
        let mut golden = b"RGV1".to_vec();
        golden.extend_from_slice(&[3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        golden.extend_from_slice(&[0, 10, 255, 1, 2, 3]);
        assert_eq!(encode_video(&v).unwrap(), golden);
        assert_eq!(decode_video(&golden).unwrap(), v);
    }

    #[test]
    fn video_errors() {
        let v = VideoVolume::zeros(2, 2, 2).unwrap();
        let mut bytes = encode_video(&v).unwrap();
        assert!(matches!(decode_video(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
        bytes[0] = b'X';
        assert!(matches!(decode_video(&bytes), Err(Error::Format(_))));
        let mut zero = b"RGV1".to_vec();
        zero.extend_from_slice(&[0; 12]);
        assert!(matches!(decode_video(&zero), Err(Error::Format(_))));
    }

    #[test]
    fn frames_round_trip_and_layout() {
        let c = vec![
            CodedFrame::new(2, 1, vec![1.5, 16.0]).unwrap(),
            CodedFrame::new(2, 1, vec![0.0, 3.25]).unwrap(),
        ];
        let stack = FrameStack::from_coded(&c).unwrap();
        let bytes = encode_frames(&stack).unwrap();
        assert_eq!(bytes.len(), 16 + 16);
        assert_eq!(&bytes[16..20], &1.5f32.to_le_bytes());
        let back = decode_frames(&bytes).unwrap();
        assert_eq!(back, stack);
        assert_eq!(back.to_coded().unwrap(), c);
    }

    #[test]
    fn mask_file_sizes_and_round_trip() {
        let m = sample_bernoulli_mask(BlockDims::new(4, 4, 16), 0.4, 9).unwrap();
        let bits = encode_mask_bits(&m).unwrap();
        assert_eq!(bits.len(), 16 + 256);
        let back = decode_mask(&bits).unwrap();
        assert_eq!(back.bits(), m.bits());
        let shadow = encode_mask_shadow(&m).unwrap();
        assert_eq!(shadow.len(), 16 + 8 * 256);
        let back = decode_mask(&shadow).unwrap();
        assert_eq!(back, m);
        let mut bad = bits.clone();
        bad[3] = b'2';
        assert!(decode_mask(&bad).is_err());
    }

    #[test]
    fn model_round_trip_bitwise() {
        let st = toy_state();
        let ckpt = Checkpoint::from_state(&st);
        let bytes = encode_model(&ckpt).unwrap();
        let back = decode_model(&bytes).unwrap();
        assert_eq!(encode_model(&back).unwrap(), bytes);
        assert_eq!(back.encoder.shadow(), st.encoder.shadow());
        assert_eq!(back.encoder.bits(), st.encoder.bits());
        assert_eq!(back.decoder.layers(), st.decoder.layers());
        let rs = back.resume.unwrap();
        assert_eq!(rs.velocity, st.velocity);
        assert_eq!(rs.epochs_done, 11);
    }

    #[test]
    fn model_without_resume_and_header() {
        let st = toy_state();
        let ckpt = Checkpoint {
            encoder: st.encoder.clone(),
            decoder: st.decoder.clone(),
            resume: None,
        };
        let bytes = encode_model(&ckpt).unwrap();
        assert_eq!(&bytes[..4], b"MDL1");
        let words: Vec<u32> = bytes[4..24]
            .chunks(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(words, vec![1, 16, 64, 2, 4]);
        assert_eq!(*bytes.last().unwrap(), 0);
        let shared = st.encoder.shadow_shared_order();
        assert_eq!(&bytes[24..32], &shared[0].to_le_bytes());
        assert!(decode_model(&bytes).unwrap().resume.is_none());
    }

    #[test]
    fn model_rejects_bad_version_and_shape() {
        let bytes = encode_model(&Checkpoint::from_state(&toy_state())).unwrap();
        let mut v = bytes.clone();
        v[4] = 2;
        assert!(matches!(decode_model(&v), Err(Error::Format(_))));
        let mut s = bytes.clone();
        s[12] = 65;
        assert!(matches!(decode_model(&s), Err(Error::Format(_))));
        let mut flag = bytes.clone();
        let idx = flag.len() - 1 - 4 - 8 * (16 + (64 * 16 + 64) + 2 * (64 * 64 + 64));
        flag[idx] = 2;
        assert!(decode_model(&flag).is_err());
    }

    #[test]
    fn reads_mask_from_model() {
        let st = toy_state();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.mdl");
        write_model(&p, &Checkpoint::from_state(&st)).unwrap();
        assert_eq!(read_any_mask(&p).unwrap().bits(), st.encoder.to_mask().bits());
    }

    #[test]
    fn log_header_and_special_values() {
        let rows = vec![
            EpochLog {
                epoch: 0,
                train_mse: 0.125,
                val_mse: f64::NAN,
                enc_lr: 0.1,
                dec_lr: 1e-3,
                nnz_pct: 40.0,
                flips: 3,
            },
            EpochLog {
                epoch: 1,
                train_mse: f64::INFINITY,
                val_mse: 1.0 / 3.0,
                enc_lr: 0.0,
                dec_lr: 1e-4,
                nnz_pct: 39.0625,
                flips: 0,
            },
        ];
        let text = encode_log(&rows);
        assert_eq!(text.lines().next().unwrap(), "epoch,train_mse,val_mse,enc_lr,dec_lr,nnz_pct,flips");
        assert!(text.contains(",nan,") && text.contains(",inf,"));
        let back = decode_log(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert!(back[0].val_mse.is_nan());
        assert_eq!(back[1], rows[1]);
        assert_eq!(encode_log(&back), text);
        assert!(decode_log("epoch,x\n").is_err());
    }

    #[test]
    fn pgm_round_trip() {
        let px: Vec<u8> = (0..12).collect();
        let bytes = encode_pgm(4, 3, &px).unwrap();
        assert!(bytes.starts_with(b"P5\n4 3\n255\n"));
        assert_eq!(decode_pgm(&bytes).unwrap(), (4, 3, px));
    }

    #[test]
    fn svg_is_well_formed() {
        let rows: Vec<EpochLog> = (0..5)
            .map(|e| EpochLog {
                epoch: e,
                train_mse: 1.0 / (e + 1) as f64,
                val_mse: f64::NAN,
                enc_lr: 0.0,
                dec_lr: 0.0,
                nnz_pct: 50.0,
                flips: 5 - e,
            })
            .collect();
        let svg = render_svg(&log_panels(&rows));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 3);
    }

    proptest! {
        #[test]
        fn video_round_trip(w in 1usize..6, h in 1usize..6, t in 1usize..4, seed in any::<u64>()) {
            let n = w * h * t;
            let px: Vec<u8> = (0..n).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 13) as u8).collect();
            let v = VideoVolume::from_u8(w, h, t, &px).unwrap();
            let back = decode_video(&encode_video(&v).unwrap()).unwrap();
            prop_assert_eq!(back.to_u8(), px);
        }

        #[test]
        fn frames_round_trip(vals in proptest::collection::vec(0.0f32..16.0, 1..40)) {
            let stack = FrameStack { width: vals.len(), height: 1, frames: 1, data: vals };
            prop_assert_eq!(decode_frames(&encode_frames(&stack).unwrap()).unwrap(), stack);
        }

        #[test]
        fn corrupted_magic_rejected(byte in 0usize..4, val in any::<u8>()) {
            let v = VideoVolume::zeros(2, 2, 1).unwrap();
            let mut bytes = encode_video(&v).unwrap();
            prop_assume!(bytes[byte] != val);
            bytes[byte] = val;
            prop_assert!(decode_video(&bytes).is_err());
        }

        #[test]
        fn real_format_round_trip(v in any::<f64>()) {
            let back = parse_real(&format_real(v)).unwrap();
            prop_assert!(back == v || (v.is_nan() && back.is_nan()));
        }
    }
}
