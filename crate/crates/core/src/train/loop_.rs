//! The optimization loop: seeded shuffling, online augmentation, target
//! encoding, Adam updates, per-epoch validation and checkpointing.

use super::loss::{tape_grasp_loss, LossConfig};
use super::{mix_seed, TrainConfig, TrainError};
use crate::data::{
    assemble_input, augment, AugmentSpec, InputSpec, SampleRecord, Split, SplitMode,
};
use crate::eval::{evaluate_records, MatchCriteria};
use crate::grasp::{encode_grasp_maps, DecodeConfig, GaussianEncoderConfig, GraspMaps};
use crate::net::{save_checkpoint, CheckpointMeta, Network, NetworkConfig, NetworkPredictor};
use crate::nn::{Adam, AdamConfig, Tape};
use ndarray::{Array4, ArrayD, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

/// Everything the training loop needs besides the network and data.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub train: TrainConfig,
    pub loss: LossConfig,
    pub encoder: GaussianEncoderConfig,
    pub input: InputSpec,
    /// Online augmentation; `None` trains on the assembled inputs as-is.
    pub augment: Option<AugmentSpec>,
    pub criteria: MatchCriteria,
    pub decode: DecodeConfig,
    pub split_mode: SplitMode,
    pub out_dir: PathBuf,
    /// Keep an `epoch_NNNN` checkpoint every this many epochs (the final
    /// epoch is always kept).
    pub checkpoint_every: usize,
    /// Stop once validation accuracy reaches this value.
    pub stop_at_val_accuracy: Option<f64>,
    pub quiet: bool,
}

impl TrainOptions {
    pub fn new(out_dir: PathBuf) -> Self {
        Self {
            train: TrainConfig::default(),
            loss: LossConfig::default(),
            encoder: GaussianEncoderConfig::default(),
            input: InputSpec::default(),
            augment: None,
            criteria: MatchCriteria::default(),
            decode: DecodeConfig::default(),
            split_mode: SplitMode::ImageWise,
            out_dir,
            checkpoint_every: 1,
            stop_at_val_accuracy: None,
            quiet: false,
        }
    }

    fn meta(&self, cfg: NetworkConfig) -> CheckpointMeta {
        CheckpointMeta::new(cfg, self.input, self.encoder, self.decode)
    }
}

/// One line of the append-only metric log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub wall_time_s: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub epochs_run: usize,
    pub metrics: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub best_checkpoint: PathBuf,
    pub last_checkpoint: PathBuf,
}

fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Trains the network in place, writing per-epoch checkpoints, a
/// best-by-validation checkpoint and an append-only metric log under
/// `opts.out_dir`. Fully deterministic for a fixed seed.
pub fn train(
    net: &mut Network<f32>,
    records: &[SampleRecord],
    split: &Split,
    opts: &TrainOptions,
) -> Result<TrainOutcome, TrainError> {
    opts.train.validate()?;
    opts.loss.validate()?;
    opts.input.validate().map_err(TrainError::Data)?;
    opts.encoder.validate().map_err(TrainError::Grasp)?;
    if let Some(aug) = &opts.augment {
        aug.validate().map_err(TrainError::Data)?;
    }
    if split.train_ids.is_empty() {
        return Err(TrainError::EmptySplit);
    }
    let by_id: HashMap<&str, &SampleRecord> = records
        .iter()
        .map(|r| (r.sample_id.as_str(), r))
        .collect();
    for id in split.train_ids.iter().chain(&split.test_ids) {
        if !by_id.contains_key(id.as_str()) {
            return Err(TrainError::UnknownSample(id.clone()));
        }
    }

    let ckpt_root = opts.out_dir.join("checkpoints");
    std::fs::create_dir_all(&ckpt_root).map_err(io_err(&ckpt_root))?;
    let meta = opts.meta(*net.config());

    let initial = ckpt_root.join("epoch_0000");
    save_checkpoint(&initial, net, &meta)?;
    let mut last_checkpoint = initial.clone();
    let mut best_checkpoint = initial;
    let mut best_epoch = 0usize;
    let mut best_val = f64::NEG_INFINITY;

    let metrics_path = opts.out_dir.join("metrics.jsonl");
    let mut metrics_file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&metrics_path)
        .map_err(io_err(&metrics_path))?;

    let mut adam = {
        let shapes: Vec<&ArrayD<f32>> = net.params().values().collect();
        Adam::<f32>::new(
            AdamConfig::with_learning_rate(opts.train.learning_rate),
            &shapes,
        )
    };

    let mut metrics = Vec::new();
    let mut epochs_run = 0usize;
    for epoch in 1..=opts.train.epochs {
        let t0 = Instant::now();
        let mut ids = split.train_ids.clone();
        let mut shuffle_rng =
            ChaCha12Rng::seed_from_u64(mix_seed(opts.train.seed, epoch as u64, "shuffle"));
        ids.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        let mut sample_count = 0usize;
        for (batch_idx, chunk) in ids.chunks(opts.train.batch_size).enumerate() {
            let (x, targets) = prepare_batch(chunk, &by_id, opts, epoch)?;
            let batch_elems = x.dim().0 * x.dim().2 * x.dim().3;

            let mut tape = Tape::<f32>::new();
            let (nodes, stat_updates) = net.forward_train(&mut tape, x)?;
            let loss_node = tape_grasp_loss(&mut tape, &nodes.heads, &targets, &opts.loss)?;
            let loss = tape.scalar(loss_node) as f64;
            if !loss.is_finite() {
                let dump = opts.out_dir.join("nonfinite_batch.json");
                let _ = std::fs::write(
                    &dump,
                    serde_json::to_string_pretty(&serde_json::json!({
                        "epoch": epoch,
                        "batch": batch_idx,
                        "sample_ids": chunk,
                    }))
                    .unwrap_or_default(),
                );
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                    sample_ids: chunk.to_vec(),
                });
            }
            let mut grads = tape.backward(loss_node);
            let mut grad_by_name: HashMap<&str, ArrayD<f32>> = HashMap::new();
            for (name, node) in &nodes.params {
                if let Some(g) = grads.take(*node) {
                    grad_by_name.insert(name.as_str(), g);
                }
            }
            // deterministic order: the BTreeMap key order on both sides
            let grad_vec: Vec<ArrayD<f32>> = net
                .params()
                .iter()
                .map(|(name, value)| {
                    grad_by_name
                        .remove(name.as_str())
                        .unwrap_or_else(|| ArrayD::zeros(value.raw_dim()))
                })
                .collect();
            let grad_refs: Vec<&ArrayD<f32>> = grad_vec.iter().collect();
            let mut param_refs: Vec<&mut ArrayD<f32>> =
                net.params_mut().values_mut().collect();
            adam.step(&mut param_refs, &grad_refs);
            net.apply_stat_updates(&stat_updates, batch_elems);

            loss_sum += loss * chunk.len() as f64;
            sample_count += chunk.len();
        }
        let train_loss = loss_sum / sample_count.max(1) as f64;

        let val_accuracy = if split.test_ids.is_empty() {
            f64::NAN
        } else {
            let predictor = NetworkPredictor {
                net,
                w_max: opts.encoder.w_max,
                decode: opts.decode,
                top_k: opts.criteria.top_k,
            };
            evaluate_records(
                &predictor,
                records,
                &split.test_ids,
                &opts.input,
                &opts.criteria,
                opts.split_mode,
            )?
            .accuracy
        };

        epochs_run = epoch;
        let reached_target = opts
            .stop_at_val_accuracy
            .map(|t| val_accuracy >= t)
            .unwrap_or(false);
        let keep_epoch = opts.checkpoint_every > 0 && epoch % opts.checkpoint_every == 0;
        if keep_epoch || epoch == opts.train.epochs || reached_target {
            let path = ckpt_root.join(format!("epoch_{epoch:04}"));
            save_checkpoint(&path, net, &meta)?;
            last_checkpoint = path;
        }
        if val_accuracy.is_finite() && val_accuracy > best_val {
            best_val = val_accuracy;
            best_epoch = epoch;
            best_checkpoint = ckpt_root.join("best");
            save_checkpoint(&best_checkpoint, net, &meta)?;
        }

        let line = EpochMetrics {
            epoch,
            train_loss,
            val_accuracy,
            wall_time_s: t0.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_string(&line).expect("metrics serialize");
        text.push('\n');
        metrics_file
            .write_all(text.as_bytes())
            .and_then(|_| metrics_file.flush())
            .map_err(io_err(&metrics_path))?;
        if !opts.quiet {
            println!(
                "epoch {epoch:4}  loss {train_loss:.6}  val_acc {val_accuracy:.4}  {:.1}s",
                line.wall_time_s
            );
        }
        metrics.push(line);
        if reached_target {
            break;
        }
    }

    Ok(TrainOutcome {
        epochs_run,
        metrics,
        best_epoch,
        best_val_accuracy: if best_val.is_finite() { best_val } else { 0.0 },
        best_checkpoint,
        last_checkpoint,
    })
}

/// Assembles, optionally augments and encodes one batch.
fn prepare_batch(
    chunk: &[String],
    by_id: &HashMap<&str, &SampleRecord>,
    opts: &TrainOptions,
    epoch: usize,
) -> Result<(Array4<f32>, Vec<GraspMaps>), TrainError> {
    let size = opts.input.size;
    let mut x = Array4::<f32>::zeros((
        chunk.len(),
        opts.input.channels.channels(),
        size,
        size,
    ));
    let mut targets = Vec::with_capacity(chunk.len());
    for (i, id) in chunk.iter().enumerate() {
        let rec = by_id[id.as_str()];
        let (mut image, mut rects) = assemble_input(rec, &opts.input)?;
        if let Some(aug) = &opts.augment {
            let sample_seed = mix_seed(
                opts.train.seed.wrapping_mul(0x9e37_79b9).wrapping_add(aug.seed),
                epoch as u64,
                id,
            );
            let mut rng = ChaCha12Rng::seed_from_u64(sample_seed);
            let (image2, rects2) = augment(&image, &rects, aug, &mut rng)?;
            image = image2;
            rects = rects2;
        }
        targets.push(encode_grasp_maps(&rects, &opts.encoder, (size, size))?);
        x.index_axis_mut(Axis(0), i).assign(&image);
    }
    Ok((x, targets))
}

/// One row of the Gaussian scale-factor sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub t: f64,
    pub accuracy: f64,
    /// Published object-wise accuracy where the sweep source reports one
    /// (T = 16).
    pub reference: Option<f64>,
}

/// Trains and evaluates one model per Gaussian scale factor T, returning
/// rows sorted by T.
pub fn sweep_scale_factor(
    net_cfg: NetworkConfig,
    records: &[SampleRecord],
    split: &Split,
    base: &TrainOptions,
    values: &[f64],
) -> Result<Vec<SweepRow>, TrainError> {
    if values.is_empty() {
        return Err(TrainError::BadTrainConfig(
            "scale-factor sweep needs at least one value".into(),
        ));
    }
    let mut ts: Vec<f64> = values.to_vec();
    ts.sort_by(|a, b| a.partial_cmp(b).expect("finite scale factors"));
    ts.dedup();
    let mut rows = Vec::with_capacity(ts.len());
    for t in ts {
        let mut opts = base.clone();
        opts.encoder.t_x = t;
        opts.encoder.t_y = t;
        opts.out_dir = base.out_dir.join(format!("sweep_t{t:02.0}"));
        std::fs::create_dir_all(&opts.out_dir).map_err(io_err(&opts.out_dir))?;
        let mut net = Network::<f32>::new(net_cfg, opts.train.seed)?;
        let outcome = train(&mut net, records, split, &opts)?;
        rows.push(SweepRow {
            t,
            accuracy: outcome.best_val_accuracy,
            reference: (t == 16.0).then_some(97.8),
        });
    }
    Ok(rows)
}
