//! Deterministic SGD training over the joint 40-class objective.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mnist::config::Config;
use crate::mnist::data::LabeledSample;
use crate::nn::checkpoint;
use crate::nn::model::Model;
use crate::nn::tensor::Tensor;

pub struct TrainOutcome {
    /// Mean loss per epoch, in order.
    pub loss_curve: Vec<f64>,
    pub checkpoints: Vec<PathBuf>,
}

/// Gradient sum over a slice of samples, accumulated in sample order.
fn grad_sum(
    model: &Model,
    samples: &[&LabeledSample],
) -> Result<(f64, Option<Vec<Tensor>>)> {
    let mut loss_sum = 0.0;
    let mut acc: Option<Vec<Tensor>> = None;
    for s in samples {
        let (loss, grads) = model.backward(&s.image, &s.joint_label())?;
        loss_sum += loss;
        match &mut acc {
            None => acc = Some(grads),
            Some(a) => {
                for (av, gv) in a.iter_mut().zip(&grads) {
                    for (x, y) in av.data_mut().iter_mut().zip(gv.data()) {
                        *x += y;
                    }
                }
            }
        }
    }
    Ok((loss_sum, acc))
}

/// One batch's mean loss and mean gradients. With `threads > 1` the batch
/// is split into contiguous chunks processed in parallel; chunk partial
/// sums are combined in chunk order, so results are deterministic for a
/// fixed thread count.
fn batch_grads(
    model: &Model,
    batch: &[&LabeledSample],
    threads: usize,
) -> Result<(f64, Vec<Tensor>)> {
    let threads = threads.max(1).min(batch.len());
    let (loss_sum, acc) = if threads == 1 {
        grad_sum(model, batch)?
    } else {
        let chunk = batch.len().div_ceil(threads);
        let partials: Vec<Result<(f64, Option<Vec<Tensor>>)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .chunks(chunk)
                .map(|part| scope.spawn(move || grad_sum(model, part)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        let mut loss_sum = 0.0;
        let mut acc: Option<Vec<Tensor>> = None;
        for p in partials {
            let (l, g) = p?;
            loss_sum += l;
            match (&mut acc, g) {
                (None, g) => acc = g,
                (Some(a), Some(g)) => {
                    for (av, gv) in a.iter_mut().zip(&g) {
                        for (x, y) in av.data_mut().iter_mut().zip(gv.data()) {
                            *x += y;
                        }
                    }
                }
                (Some(_), None) => {}
            }
        }
        (loss_sum, acc)
    };
    let mut grads = acc.ok_or_else(|| Error::Training("empty batch".into()))?;
    let scale = 1.0 / batch.len() as f64;
    for g in &mut grads {
        for v in g.data_mut() {
            *v *= scale;
        }
    }
    Ok((loss_sum * scale, grads))
}

/// Runs `cfg.epochs` epochs of minibatch SGD. Checkpoints are written per
/// epoch when `out_dir` is given; on divergence the last good checkpoint
/// stays on disk and the error reports it.
pub fn train(
    model: &mut Model,
    dataset: &[LabeledSample],
    cfg: &Config,
    out_dir: Option<&Path>,
    threads: usize,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::Training("empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let mut checkpoints = Vec::new();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch_idx in order.chunks(cfg.batch) {
            let batch: Vec<&LabeledSample> = batch_idx.iter().map(|&i| &dataset[i]).collect();
            let (loss, grads) = batch_grads(model, &batch, threads)?;
            if !loss.is_finite() {
                let last = checkpoints.last().cloned();
                return Err(Error::Training(format!(
                    "loss became non-finite in epoch {epoch}; last good checkpoint: {}",
                    last.map(|p: PathBuf| p.display().to_string())
                        .unwrap_or_else(|| "none".into())
                )));
            }
            model.sgd_step(&grads, cfg.lr)?;
            epoch_loss += loss;
            batches += 1;
        }
        let mean = epoch_loss / batches as f64;
        loss_curve.push(mean);
        progress(epoch, mean);
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("epoch{epoch}.ckpt"));
            checkpoint::save(model, &cfg.render(), &path)?;
            checkpoints.push(path);
        }
    }
    Ok(TrainOutcome {
        loss_curve,
        checkpoints,
    })
}
