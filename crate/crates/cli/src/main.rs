use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use vcs_core::analysis::{histogram_csv, mask_image, run_length_stats};
use vcs_core::decoder::{init_decoder, DecoderShape};
use vcs_core::encoder::EncoderParams;
use vcs_core::pipeline::{block_for, evaluate, measure_video, reconstruct_decoder, reconstruct_lasso, reconstruct_tv, Method};
use vcs_core::sensing::sample_bernoulli_mask;
use vcs_core::solvers::{SolverConfig, TvConfig};
use vcs_core::storage::{
    format_real, log_panels, read_any_mask, read_frames, read_log, read_model, read_video, render_svg, write_frames,
    write_log, write_mask, write_model, write_pgm, write_video, Checkpoint, FrameStack,
};
use vcs_core::synth::{generate, SynthKind};
use vcs_core::trainer::{select_decoder_lr, BlockSet, TrainConfig, Trainer, DEC_LR_GRID};
use vcs_core::volume::{extract_training_blocks, BlockDims, VideoVolume};

#[derive(Parser)]
#[command(name = "vcs", version, about = "Temporal video compressive sensing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic RGV1 video.
    GenSynth(GenSynthArgs),
    /// Write a random Bernoulli mask (BMR1, with shadow weights).
    GenMask(GenMaskArgs),
    /// Train an encoder mask and decoder; writes an MDL1 checkpoint and a CSV log.
    Train(TrainArgs),
    /// Simulate coded frames of a video through a mask.
    Measure(MeasureArgs),
    /// Recover a video from coded frames.
    Reconstruct(ReconstructArgs),
    /// Per-frame PSNR and SSIM of a reconstruction.
    Eval(EvalArgs),
    /// Mask histogram, density, run lengths and image.
    AnalyzeMask(AnalyzeArgs),
    /// Plot a training log as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenSynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 32)]
    frames: usize,
    /// moving-squares | drift-texture
    #[arg(long, default_value = "moving-squares")]
    kind: SynthKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct Geometry {
    /// Sub-block width and height; blocks are twice this size.
    #[arg(long, default_value_t = 4)]
    sub: usize,
    /// Frames per exposure.
    #[arg(long, default_value_t = 16)]
    t: usize,
}

impl Geometry {
    fn sub_dims(&self) -> BlockDims {
        BlockDims::new(self.sub, self.sub, self.t)
    }
}

#[derive(Args)]
struct GenMaskArgs {
    #[arg(long)]
    out: PathBuf,
    /// Percentage of open entries.
    #[arg(long, default_value_t = 40.0)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    geometry: Geometry,
}

#[derive(Args)]
struct TrainArgs {
    /// RGV1 file or directory of .rgv files.
    #[arg(long)]
    data: PathBuf,
    /// Validation RGV1 file or directory.
    #[arg(long)]
    val: Option<PathBuf>,
    /// Initial percentage of open mask entries.
    #[arg(long, default_value_t = 40.0)]
    mask_init: f64,
    #[arg(long, default_value_t = 480)]
    epochs: usize,
    #[arg(long, default_value_t = 200)]
    batch: usize,
    /// Base decoder learning rate; chosen from a validation grid when omitted.
    #[arg(long)]
    dec_lr: Option<f64>,
    /// Base encoder learning rate; ten times the decoder rate when omitted.
    #[arg(long)]
    enc_lr: Option<f64>,
    /// Epochs per candidate in the learning-rate grid search.
    #[arg(long, default_value_t = 3)]
    lr_probe_epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    log: PathBuf,
    /// Keep the initial mask fixed and train only the decoder.
    #[arg(long)]
    freeze_mask: bool,
    /// Bitwise-reproducible training (the trainer is sequential, so always on).
    #[arg(long)]
    deterministic: bool,
    /// Continue from an MDL1 checkpoint that has a resume section.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    blocks: usize,
    #[arg(long, default_value_t = 1_000)]
    val_blocks: usize,
    /// Decoder hidden layers.
    #[arg(long, default_value_t = 4)]
    layers: usize,
    /// Decoder hidden width; the block size when omitted.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    quiet: bool,
    #[command(flatten)]
    geometry: Geometry,
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(long)]
    data: PathBuf,
    /// BMK1, BMR1 or MDL1 file.
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    coded: PathBuf,
    /// BMK1, BMR1 or MDL1 file; optional for the decoder method.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// decoder | tv | lasso
    #[arg(long)]
    method: Method,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Regularization weight for tv and lasso.
    #[arg(long)]
    lambda: Option<f64>,
    /// Iteration cap for tv and lasso.
    #[arg(long)]
    iters: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    recon: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 32)]
    frames: usize,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// MDL1 checkpoint (or a BMK1/BMR1 mask).
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out_prefix: String,
    #[arg(long, default_value_t = 20)]
    bins: usize,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenSynth(a) => gen_synth(a),
        Command::GenMask(a) => gen_mask(a),
        Command::Train(a) => train(a),
        Command::Measure(a) => measure(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Eval(a) => eval(a),
        Command::AnalyzeMask(a) => analyze_mask(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn gen_synth(a: GenSynthArgs) -> Result<()> {
    let v = generate(a.kind, a.width, a.height, a.frames, a.seed)?;
    write_video(&a.out, &v).with_context(|| format!("writing {}", a.out.display()))?;
    info!("{} {}x{}x{} -> {}", a.kind, a.width, a.height, a.frames, a.out.display());
    Ok(())
}

fn percent_to_prob(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 100.0) {
        bail!("mask percentage must be in (0, 100), got {p}");
    }
    Ok(p / 100.0)
}

fn gen_mask(a: GenMaskArgs) -> Result<()> {
    let mask = sample_bernoulli_mask(a.geometry.sub_dims(), percent_to_prob(a.p)?, a.seed)?;
    let enc = EncoderParams::from_mask(&mask);
    write_mask(&a.out, &enc.to_mask())?;
    Ok(())
}

/// A single RGV1 file, or every `.rgv` file in a directory in name order.
fn load_videos(path: &Path) -> Result<Vec<VideoVolume>> {
    let files = if path.is_dir() {
        let mut f: Vec<PathBuf> = fs::read_dir(path)
            .with_context(|| format!("reading {}", path.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "rgv"))
            .collect();
        f.sort();
        if f.is_empty() {
            bail!("no .rgv files in {}", path.display());
        }
        f
    } else {
        vec![path.to_path_buf()]
    };
    files
        .iter()
        .map(|f| read_video(f).with_context(|| format!("reading {}", f.display())))
        .collect()
}

fn train(a: TrainArgs) -> Result<()> {
    let sub = a.geometry.sub_dims();
    let block = block_for(sub);
    let videos = load_videos(&a.data)?;
    let train_set = BlockSet::from_blocks(&extract_training_blocks(&videos, a.blocks, block, a.seed.wrapping_add(2))?)?;
    let val_set = match &a.val {
        Some(v) => {
            let vids = load_videos(v)?;
            BlockSet::from_blocks(&extract_training_blocks(&vids, a.val_blocks, block, a.seed.wrapping_add(3))?)?
        }
        None => BlockSet::from_blocks(&[])?,
    };
    info!("{} training blocks, {} validation blocks", train_set.len(), val_set.len());

    let prior_state = match &a.resume {
        Some(p) => Some(read_model(p)?.into_state().with_context(|| format!("resuming from {}", p.display()))?),
        None => None,
    };
    let (encoder, decoder) = match &prior_state {
        Some(st) => (st.encoder.clone(), st.decoder.clone()),
        None => {
            let mask = sample_bernoulli_mask(sub, percent_to_prob(a.mask_init)?, a.seed)?;
            let shape = DecoderShape {
                inputs: block.spatial(),
                hidden_width: a.hidden.unwrap_or(block.len()),
                hidden_layers: a.layers,
                outputs: block.len(),
            };
            (EncoderParams::from_mask(&mask), init_decoder(shape, a.seed.wrapping_add(1))?)
        }
    };

    let mut cfg = TrainConfig::new(a.dec_lr.unwrap_or(DEC_LR_GRID[0]));
    cfg.epochs = a.epochs;
    cfg.batch = a.batch;
    cfg.seed = a.seed;
    cfg.train_mask = !a.freeze_mask;
    cfg.deterministic = a.deterministic;
    cfg.progress = !a.quiet;
    if a.dec_lr.is_none() {
        let (lr, scores) =
            select_decoder_lr(&train_set, &val_set, &cfg, &encoder, &decoder, &DEC_LR_GRID, a.lr_probe_epochs)
                .context("decoder learning-rate search (pass --dec-lr or --val)")?;
        for (c, v) in &scores {
            info!("lr {c:e}: validation MSE {}", format_real(*v));
        }
        info!("selected decoder learning rate {lr:e}");
        cfg.dec_lr0 = lr;
    }
    cfg.enc_lr0 = a.enc_lr.unwrap_or(10.0 * cfg.dec_lr0);

    let mut logs = Vec::new();
    let mut trainer = match prior_state {
        Some(st) => {
            // Keep the rows already logged for the completed epochs.
            if a.log.exists() {
                logs = read_log(&a.log)?;
                logs.retain(|r| r.epoch < st.epochs_done);
            }
            Trainer::resume(cfg, st)?
        }
        None => Trainer::new(cfg, encoder, decoder)?,
    };
    logs.extend(trainer.run(&train_set, &val_set)?);
    write_log(&a.log, &logs)?;
    write_model(&a.out, &Checkpoint::from_state(trainer.state()))?;
    if let Some(last) = logs.last() {
        info!(
            "epoch {}: train MSE {}, validation MSE {}, nonzero {:.1}%",
            last.epoch,
            format_real(last.train_mse),
            format_real(last.val_mse),
            last.nnz_pct
        );
    }
    Ok(())
}

fn measure(a: MeasureArgs) -> Result<()> {
    let video = read_video(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let mask = read_any_mask(&a.mask).with_context(|| format!("reading {}", a.mask.display()))?;
    let (cropped, coded) = measure_video(&video, &mask)?;
    if (cropped.width(), cropped.height()) != (video.width(), video.height()) {
        warn!(
            "cropped {}x{} to {}x{} to fit the mask tiling",
            video.width(),
            video.height(),
            cropped.width(),
            cropped.height()
        );
    }
    let dropped = video.frames() % mask.dims().frames;
    if dropped > 0 {
        warn!("dropped {dropped} trailing frames that do not fill an exposure");
    }
    write_frames(&a.out, &FrameStack::from_coded(&coded)?)?;
    info!("{} coded frames -> {}", coded.len(), a.out.display());
    Ok(())
}

fn reconstruct(a: ReconstructArgs) -> Result<()> {
    let coded = read_frames(&a.coded)
        .with_context(|| format!("reading {}", a.coded.display()))?
        .to_coded()?;
    let mask = match &a.mask {
        Some(p) => Some(read_any_mask(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let recon = match a.method {
        Method::Decoder => {
            let path = a.model.as_ref().context("--method decoder needs --model")?;
            let ckpt = read_model(path).with_context(|| format!("reading {}", path.display()))?;
            if let Some(m) = &mask {
                if m.bits() != ckpt.encoder.to_mask().bits() {
                    warn!("--mask differs from the mask stored in the model");
                }
            }
            reconstruct_decoder(&coded, &ckpt.decoder, ckpt.encoder.block_dims(), 256)?
        }
        Method::Tv => {
            let m = mask.context("--method tv needs --mask")?;
            let mut cfg = TvConfig::default();
            if let Some(l) = a.lambda {
                cfg.solver.lambda = l;
            }
            if let Some(i) = a.iters {
                cfg.solver.max_iters = i;
            }
            reconstruct_tv(&coded, &m, &cfg)?
        }
        Method::Lasso => {
            let m = mask.context("--method lasso needs --mask")?;
            let mut cfg = SolverConfig::lasso_default();
            if let Some(l) = a.lambda {
                cfg.lambda = l;
            }
            if let Some(i) = a.iters {
                cfg.max_iters = i;
            }
            reconstruct_lasso(&coded, &m, &cfg)?
        }
    };
    write_video(&a.out, &recon)?;
    info!(
        "{} reconstruction {}x{}x{} -> {}",
        a.method,
        recon.width(),
        recon.height(),
        recon.frames(),
        a.out.display()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let reference = read_video(&a.reference).with_context(|| format!("reading {}", a.reference.display()))?;
    let recon = read_video(&a.recon).with_context(|| format!("reading {}", a.recon.display()))?;
    let curves = evaluate(&reference, &recon, a.frames)?;
    let mut csv = String::from("frame,psnr,ssim\n");
    for (i, (p, s)) in curves.psnr.iter().zip(&curves.ssim).enumerate() {
        let _ = writeln!(csv, "{i},{},{}", format_real(*p), format_real(*s));
    }
    let _ = writeln!(csv, "mean,{},{}", format_real(curves.mean_psnr), format_real(curves.mean_ssim));
    fs::write(&a.out, csv)?;
    println!(
        "{} frames: mean PSNR {} dB, mean SSIM {}",
        curves.len(),
        format_real(curves.mean_psnr),
        format_real(curves.mean_ssim)
    );
    Ok(())
}

fn analyze_mask(a: AnalyzeArgs) -> Result<()> {
    let mask = read_any_mask(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let prefix = &a.out_prefix;
    let mut summary = String::new();
    if let Some(shadow) = mask.shadow() {
        let counts = vcs_core::encoder::histogram_unit_interval(shadow, a.bins)?;
        fs::write(format!("{prefix}_hist.csv"), histogram_csv(&counts))?;
    } else {
        warn!("mask has no shadow weights; skipping the histogram");
    }
    let (w, h, px) = mask_image(&mask);
    write_pgm(format!("{prefix}_mask.pgm"), w, h, &px)?;
    let runs = run_length_stats(&mask)?;
    let _ = writeln!(summary, "nonzero_pct,{}", format_real(100.0 * mask.nonzero_fraction()));
    let _ = writeln!(summary, "mean_run_ones,{}", format_real(runs.mean_ones));
    let _ = writeln!(summary, "mean_run_zeros,{}", format_real(runs.mean_zeros));
    let _ = writeln!(summary, "runs_ones,{}", runs.runs_ones);
    let _ = writeln!(summary, "runs_zeros,{}", runs.runs_zeros);
    fs::write(format!("{prefix}_stats.csv"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn plot(a: PlotArgs) -> Result<()> {
    let rows = read_log(&a.log).with_context(|| format!("reading {}", a.log.display()))?;
    fs::write(&a.out, render_svg(&log_panels(&rows)))?;
    Ok(())
}
