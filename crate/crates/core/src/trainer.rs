//! Joint end-to-end training of the binary encoder and the MLP decoder.
//!
//! Every step runs the encoder with binarized weights, the decoder with real
//! weights, backpropagates the block MSE through both, clips the joint
//! gradient norm, and applies momentum SGD with a separate learning rate per
//! component. Shadow weights are clipped to `[-1, 1]` after each update.

use ndarray::{s, Array2, ArrayView2, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::decoder::{DecoderGrads, DecoderParams, DenseLayer};
use crate::encoder::EncoderParams;
use crate::volume::VideoBlock;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub momentum: f64,
    pub clip_threshold: f64,
    pub dec_lr0: f64,
    pub enc_lr0: f64,
    pub seed: u64,
    /// When false the encoder keeps its initial bits and only the decoder learns.
    pub train_mask: bool,
    /// Fixed-order reductions and a single RNG stream. The trainer runs
    /// sequentially, so this always holds; the flag is recorded for callers.
    pub deterministic: bool,
    /// Print one progress line per epoch to standard error.
    pub progress: bool,
}

impl TrainConfig {
    /// Defaults with the encoder rate set to ten times `dec_lr0`.
    pub fn new(dec_lr0: f64) -> Self {
        Self {
            epochs: 480,
            batch: 200,
            momentum: 0.9,
            clip_threshold: 0.1,
            dec_lr0,
            enc_lr0: 10.0 * dec_lr0,
            seed: 0,
            train_mask: true,
            deterministic: true,
            progress: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::InvalidParameter("epochs and batch must be positive".into()));
        }
        if !(self.dec_lr0 > 0.0 && self.enc_lr0 > 0.0) {
            return Err(Error::InvalidParameter("learning rates must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParameter(format!(
                "momentum {} outside [0, 1)",
                self.momentum
            )));
        }
        if !(self.clip_threshold > 0.0) {
            return Err(Error::InvalidParameter("clip threshold must be positive".into()));
        }
        Ok(())
    }
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub enc_lr: f64,
    pub dec_lr: f64,
    pub nnz_pct: f64,
    pub flips: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    Encoder,
    Decoder,
}

/// Encoder: halved every 10 epochs. Decoder: divided by 10 from epoch 400 on.
pub fn lr_schedule(component: Component, epoch: usize, base: f64) -> f64 {
    match component {
        Component::Encoder => base / 2f64.powi((epoch / 10).min(i32::MAX as usize) as i32),
        Component::Decoder if epoch < 400 => base,
        Component::Decoder => base / 10.0,
    }
}

/// `(1/N) sum_i ||pred_i - target_i||^2` over the `N` rows, with its gradient.
pub fn mse_loss(pred: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<(f64, Array2<f64>)> {
    if pred.dim() != target.dim() {
        return Err(Error::DimensionMismatch(format!(
            "prediction {:?} vs target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let n = pred.nrows();
    if n == 0 {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let diff = &pred - &target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n as f64;
    let grad = diff * (2.0 / n as f64);
    Ok((loss, grad))
}

/// Gradients of every trainable parameter for one step.
#[derive(Clone, Debug)]
pub struct Gradients {
    /// Shadow-weight gradient; `None` when the mask is frozen.
    pub encoder: Option<Vec<f64>>,
    pub decoder: DecoderGrads,
}

impl Gradients {
    pub fn global_norm(&self) -> f64 {
        let enc: f64 = self.encoder.iter().flatten().map(|g| g * g).sum();
        let dec: f64 = self
            .decoder
            .iter()
            .map(|l| l.weights.iter().chain(&l.bias).map(|g| g * g).sum::<f64>())
            .sum();
        (enc + dec).sqrt()
    }

    fn scale(&mut self, factor: f64) {
        for g in self.encoder.iter_mut().flatten() {
            *g *= factor;
        }
        for l in &mut self.decoder {
            l.weights *= factor;
            l.bias *= factor;
        }
    }
}

/// Rescales all gradients jointly so their L2 norm is at most `threshold`.
/// Returns the norm before clipping.
pub fn clip_gradients(grads: &mut Gradients, threshold: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > threshold {
        grads.scale(threshold / norm);
    }
    norm
}

/// Momentum buffers for every trainable parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct SgdState {
    pub encoder: Vec<f64>,
    pub decoder: Vec<DenseLayer>,
}

impl SgdState {
    pub fn zeros(enc: &EncoderParams, dec: &DecoderParams) -> Self {
        Self {
            encoder: vec![0.0; enc.shadow().len()],
            decoder: dec
                .layers()
                .iter()
                .map(|l| DenseLayer::zeros(l.outputs(), l.inputs()))
                .collect(),
        }
    }

    fn matches(&self, enc: &EncoderParams, dec: &DecoderParams) -> bool {
        self.encoder.len() == enc.shadow().len()
            && self.decoder.len() == dec.layers().len()
            && self
                .decoder
                .iter()
                .zip(dec.layers())
                .all(|(v, l)| v.weights.dim() == l.weights.dim() && v.bias.len() == l.bias.len())
    }
}

/// `v <- momentum * v - lr * grad; param <- param + v`, elementwise.
pub fn momentum_update(param: &mut [f64], grad: &[f64], velocity: &mut [f64], lr: f64, momentum: f64) {
    for ((p, &g), v) in param.iter_mut().zip(grad).zip(velocity.iter_mut()) {
        *v = momentum * *v - lr * g;
        *p += *v;
    }
}

/// One momentum-SGD update of both components. A missing encoder gradient
/// leaves the encoder untouched.
pub fn sgd_step(
    enc: &mut EncoderParams,
    dec: &mut DecoderParams,
    grads: &Gradients,
    state: &mut SgdState,
    enc_lr: f64,
    dec_lr: f64,
    momentum: f64,
) -> Result<()> {
    if !state.matches(enc, dec) || grads.decoder.len() != dec.layers().len() {
        return Err(Error::DimensionMismatch("optimizer state does not match parameters".into()));
    }
    for (g, l) in grads.decoder.iter().zip(dec.layers()) {
        if g.weights.dim() != l.weights.dim() || g.bias.len() != l.bias.len() {
            return Err(Error::DimensionMismatch("decoder gradient shape".into()));
        }
    }
    if let Some(g) = &grads.encoder {
        if g.len() != enc.shadow().len() {
            return Err(Error::LengthMismatch {
                expected: enc.shadow().len(),
                actual: g.len(),
            });
        }
        let v = &mut state.encoder;
        enc.update_shadow(|w| momentum_update(w, g, v, enc_lr, momentum));
    }
    for ((layer, g), v) in dec
        .layers_mut()
        .iter_mut()
        .zip(&grads.decoder)
        .zip(&mut state.decoder)
    {
        Zip::from(&mut layer.weights)
            .and(&g.weights)
            .and(&mut v.weights)
            .for_each(|p, &g, v| {
                *v = momentum * *v - dec_lr * g;
                *p += *v;
            });
        Zip::from(&mut layer.bias)
            .and(&g.bias)
            .and(&mut v.bias)
            .for_each(|p, &g, v| {
                *v = momentum * *v - dec_lr * g;
                *p += *v;
            });
    }
    Ok(())
}

/// Row-stacked block vectors.
#[derive(Clone, Debug)]
pub struct BlockSet {
    data: Array2<f64>,
}

impl BlockSet {
    pub fn from_blocks(blocks: &[VideoBlock]) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Ok(Self {
                data: Array2::zeros((0, 0)),
            });
        };
        let dims = first.dims();
        let mut flat = Vec::with_capacity(blocks.len() * dims.len());
        for b in blocks {
            if b.dims() != dims {
                return Err(Error::DimensionMismatch("blocks of different sizes".into()));
            }
            flat.extend_from_slice(b.as_slice());
        }
        let data = Array2::from_shape_vec((blocks.len(), dims.len()), flat)
            .expect("lengths checked above");
        Ok(Self { data })
    }

    pub fn from_array(data: Array2<f64>) -> Self {
        Self { data }
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    fn gather(&self, rows: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((rows.len(), self.data.ncols()));
        for (dst, &r) in out.outer_iter_mut().zip(rows) {
            let mut dst = dst;
            dst.assign(&self.data.row(r));
        }
        out
    }
}

/// Encoder-decoder forward pass for a batch of block vectors.
pub fn reconstruct_batch(enc: &EncoderParams, dec: &DecoderParams, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let (y, _) = enc.forward_batch(x)?;
    Ok(dec.forward(y.view())?.0)
}

/// Mean of `||f(g(x)) - x||^2` over a block set, using the binarized mask.
pub fn evaluate_mse(enc: &EncoderParams, dec: &DecoderParams, set: &BlockSet, batch: usize) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::InvalidInput("empty evaluation set".into()));
    }
    let batch = batch.max(1);
    let mut total = 0.0;
    let mut start = 0;
    while start < set.len() {
        let end = (start + batch).min(set.len());
        let x = set.data.slice(s![start..end, ..]);
        let out = reconstruct_batch(enc, dec, x)?;
        total += (&out - &x).iter().map(|d| d * d).sum::<f64>();
        start = end;
    }
    Ok(total / set.len() as f64)
}

/// Parameters plus everything needed to continue training bit-for-bit.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingState {
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
    pub velocity: SgdState,
    pub epochs_done: usize,
}

/// Epoch-by-epoch training driver.
///
/// Mini-batches come from a per-epoch shuffle derived from `(seed, epoch)`,
/// so a trainer rebuilt from a [`TrainingState`] continues exactly where the
/// original left off.
#[derive(Debug)]
pub struct Trainer {
    cfg: TrainConfig,
    state: TrainingState,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, encoder: EncoderParams, decoder: DecoderParams) -> Result<Self> {
        cfg.validate()?;
        check_compatible(&encoder, &decoder)?;
        let velocity = SgdState::zeros(&encoder, &decoder);
        Ok(Self {
            cfg,
            state: TrainingState {
                encoder,
                decoder,
                velocity,
                epochs_done: 0,
            },
        })
    }

    pub fn resume(cfg: TrainConfig, state: TrainingState) -> Result<Self> {
        cfg.validate()?;
        check_compatible(&state.encoder, &state.decoder)?;
        if !state.velocity.matches(&state.encoder, &state.decoder) {
            return Err(Error::DimensionMismatch("momentum buffers do not match parameters".into()));
        }
        Ok(Self { cfg, state })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn state(&self) -> &TrainingState {
        &self.state
    }

    pub fn into_state(self) -> TrainingState {
        self.state
    }

    pub fn epochs_done(&self) -> usize {
        self.state.epochs_done
    }

    /// Runs one epoch and returns its log row.
    pub fn run_epoch(&mut self, train: &BlockSet, val: &BlockSet) -> Result<EpochLog> {
        if train.is_empty() {
            return Err(Error::InvalidInput("empty training set".into()));
        }
        let n_p = self.state.encoder.block_dims().len();
        if train.data.ncols() != n_p || (!val.is_empty() && val.data.ncols() != n_p) {
            return Err(Error::DimensionMismatch(format!(
                "training blocks must have {n_p} samples"
            )));
        }
        let epoch = self.state.epochs_done;
        let enc_lr = lr_schedule(Component::Encoder, epoch, self.cfg.enc_lr0);
        let dec_lr = lr_schedule(Component::Decoder, epoch, self.cfg.dec_lr0);
        let start_bits = self.state.encoder.bits().to_vec();

        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        for (step, rows) in order.chunks(self.cfg.batch).enumerate() {
            let x = train.gather(rows);
            let loss = self.step(x.view(), enc_lr, dec_lr).map_err(|e| match e {
                Error::Diverged { loss, .. } => Error::Diverged { epoch, step, loss },
                other => other,
            })?;
            loss_sum += loss * rows.len() as f64;
        }
        let train_mse = loss_sum / train.len() as f64;
        let val_mse = if val.is_empty() {
            f64::NAN
        } else {
            evaluate_mse(&self.state.encoder, &self.state.decoder, val, self.cfg.batch)?
        };
        let stats = self.state.encoder.mask_stats(&start_bits)?;
        self.state.epochs_done += 1;
        let log = EpochLog {
            epoch,
            train_mse,
            val_mse,
            enc_lr: if self.cfg.train_mask { enc_lr } else { 0.0 },
            dec_lr,
            nnz_pct: stats.nonzero_pct,
            flips: stats.flips,
        };
        if self.cfg.progress {
            eprintln!(
                "epoch {:>4}  train {:.6}  val {:.6}  nnz {:5.1}%  flips {}",
                log.epoch, log.train_mse, log.val_mse, log.nnz_pct, log.flips
            );
        }
        Ok(log)
    }

    /// Runs epochs until `cfg.epochs` have been completed in total.
    pub fn run(&mut self, train: &BlockSet, val: &BlockSet) -> Result<Vec<EpochLog>> {
        self.run_until(train, val, self.cfg.epochs)
    }

    /// Runs epochs until `epochs_done == until` (capped at `cfg.epochs`).
    pub fn run_until(&mut self, train: &BlockSet, val: &BlockSet, until: usize) -> Result<Vec<EpochLog>> {
        let until = until.min(self.cfg.epochs);
        let mut logs = Vec::new();
        while self.state.epochs_done < until {
            logs.push(self.run_epoch(train, val)?);
        }
        Ok(logs)
    }

    fn step(&mut self, x: ArrayView2<f64>, enc_lr: f64, dec_lr: f64) -> Result<f64> {
        let st = &mut self.state;
        let (y, enc_cache) = st.encoder.forward_batch(x)?;
        let (out, dec_cache) = st.decoder.forward(y.view())?;
        let (loss, grad_out) = mse_loss(out.view(), x)?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch: 0,
                step: 0,
                loss,
            });
        }
        let (dec_grads, grad_y) = st.decoder.backward(grad_out.view(), &dec_cache)?;
        let enc_grads = if self.cfg.train_mask {
            Some(st.encoder.backward_batch(grad_y.view(), x, &enc_cache)?)
        } else {
            None
        };
        let mut grads = Gradients {
            encoder: enc_grads,
            decoder: dec_grads,
        };
        clip_gradients(&mut grads, self.cfg.clip_threshold);
        sgd_step(
            &mut st.encoder,
            &mut st.decoder,
            &grads,
            &mut st.velocity,
            enc_lr,
            dec_lr,
            self.cfg.momentum,
        )?;
        Ok(loss)
    }
}

fn check_compatible(enc: &EncoderParams, dec: &DecoderParams) -> Result<()> {
    let b = enc.block_dims();
    if dec.inputs() != b.spatial() || dec.outputs() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "decoder maps {} -> {}, encoder block needs {} -> {}",
            dec.inputs(),
            dec.outputs(),
            b.spatial(),
            b.len()
        )));
    }
    Ok(())
}

/// Trains from scratch and returns the final parameters with one log row per epoch.
pub fn train(
    train_blocks: &[VideoBlock],
    val_blocks: &[VideoBlock],
    cfg: &TrainConfig,
    encoder: EncoderParams,
    decoder: DecoderParams,
) -> Result<(EncoderParams, DecoderParams, Vec<EpochLog>)> {
    if train_blocks.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    let train_set = BlockSet::from_blocks(train_blocks)?;
    let val_set = BlockSet::from_blocks(val_blocks)?;
    let mut trainer = Trainer::new(cfg.clone(), encoder, decoder)?;
    let logs = trainer.run(&train_set, &val_set)?;
    let st = trainer.into_state();
    Ok((st.encoder, st.decoder, logs))
}

/// Learning-rate candidates searched when no decoder rate is given.
pub const DEC_LR_GRID: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Picks the base decoder rate with the lowest validation MSE after
/// `probe_epochs` epochs of training from the same initialization.
///
/// The encoder rate is kept at ten times each candidate. Candidates that
/// diverge are skipped. Returns the chosen rate and every `(rate, val_mse)`.
pub fn select_decoder_lr(
    train: &BlockSet,
    val: &BlockSet,
    cfg: &TrainConfig,
    encoder: &EncoderParams,
    decoder: &DecoderParams,
    grid: &[f64],
    probe_epochs: usize,
) -> Result<(f64, Vec<(f64, f64)>)> {
    if val.is_empty() {
        return Err(Error::InvalidInput("learning-rate search needs validation blocks".into()));
    }
    let mut scores = Vec::with_capacity(grid.len());
    for &lr in grid {
        let mut probe = cfg.clone();
        probe.dec_lr0 = lr;
        probe.enc_lr0 = 10.0 * lr;
        probe.epochs = probe_epochs.max(1);
        probe.progress = false;
        let mut t = Trainer::new(probe, encoder.clone(), decoder.clone())?;
        match t.run(train, val) {
            Ok(logs) => {
                let v = logs.last().map(|l| l.val_mse).unwrap_or(f64::INFINITY);
                scores.push((lr, if v.is_finite() { v } else { f64::INFINITY }));
            }
            Err(Error::Diverged { .. }) => scores.push((lr, f64::INFINITY)),
            Err(e) => return Err(e),
        }
    }
    let best = scores
        .iter()
        .copied()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::Numeric("every learning-rate candidate diverged".into()))?;
    Ok((best.0, scores))
}
