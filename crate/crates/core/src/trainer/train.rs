use rand_chacha::ChaCha8Rng;

use super::sampler::{augment_flip, split_train_monitor, TrainMonitorSplit};
use super::{derive_rng, Sgd, TrainConfig};
use crate::architectures::Model;
use crate::data::ImageDataset;
use crate::error::{Error, Result};
use crate::tensor_core::{CenterState, Graph, NormMode};

const FLIP_STREAM: u64 = 0x464c_4950;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    /// Sample-weighted mean objective over the epoch's batches.
    pub train_loss: f64,
    /// Monitor-set accuracy in eval mode; NaN when the monitor set is empty.
    pub monitor_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub metrics: Vec<EpochMetrics>,
    pub split: TrainMonitorSplit,
    pub centers: Option<CenterState<f32>>,
}

/// `epoch\tlr\ttrain_loss\tmonitor_acc` lines, with a header.
pub fn format_metrics_log(metrics: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch\tlr\ttrain_loss\tmonitor_acc\n");
    for m in metrics {
        out.push_str(&format!("{}\t{}\t{:.6}\t{:.6}\n", m.epoch, m.lr, m.train_loss, m.monitor_acc));
    }
    out
}

/// Fraction of `indices` whose arg-max logit matches the label. Runs in
/// whatever normalization mode the model is in.
pub fn accuracy(model: &mut Model<f32>, data: &ImageDataset, indices: &[usize], chunk: usize) -> Result<f64> {
    if indices.is_empty() {
        return Ok(f64::NAN);
    }
    let mut correct = 0usize;
    for part in indices.chunks(chunk.max(1)) {
        let (images, labels) = data.batch(part);
        let logits = model.logits(&images)?;
        for (row, &label) in logits.rows().zip(&labels) {
            let best = row
                .iter()
                .enumerate()
                .fold((0, f32::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
                .0;
            correct += usize::from(best == label);
        }
    }
    Ok(correct as f64 / indices.len() as f64)
}

/// Runs the full recipe on `data`: split off a monitor set, then one pass over
/// the training part per epoch with the scheduled rate. `on_epoch` sees each
/// epoch's metrics as soon as they are available.
pub fn train(
    model: &mut Model<f32>,
    data: &ImageDataset,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome> {
    config.validate()?;
    if config.schedule.total_epochs == 0 {
        return Err(Error::Usage("nothing to train: epochs is 0".into()));
    }
    let spec = model.spec().clone();
    if data.shape() != spec.input_shape {
        return Err(Error::shape("train", format!("dataset images {:?} vs model input {:?}", data.shape(), spec.input_shape)));
    }
    if let Some(&bad) = data.labels().iter().find(|&&l| l >= spec.num_classes) {
        return Err(Error::Invalid(format!("label {bad} outside the {} classifier outputs", spec.num_classes)));
    }
    let seed = config.sampler.seed;
    let split = split_train_monitor(data.labels(), config.train_fraction, seed)?;
    if split.train.len() < 2 {
        return Err(Error::Invalid("fewer than two training samples".into()));
    }
    let mut centers = spec
        .center_loss
        .map(|cl| CenterState::<f32>::with_rates(spec.num_classes, spec.feature_dim, cl.alpha, cl.lambda));
    let mut sgd = Sgd::<f32>::new(config.optimizer);
    let mut flip_rng: ChaCha8Rng = derive_rng(seed, FLIP_STREAM);
    let mut metrics = Vec::with_capacity(config.schedule.total_epochs);

    for epoch in 1..=config.schedule.total_epochs {
        let lr = config.schedule.lr_at_epoch(epoch)?;
        model.set_mode(NormMode::Train);
        let mut loss_sum = 0.0;
        for (batch_index, positions) in config.sampler.epoch_batches(split.train.len(), epoch).iter().enumerate() {
            let indices: Vec<usize> = positions.iter().map(|&p| split.train[p]).collect();
            let (mut images, labels) = data.batch(&indices);
            augment_flip(&mut images, config.sampler.flip_prob, &mut flip_rng)?;

            let mut graph = Graph::new();
            let x = graph.input(images);
            let pass = model.forward(&mut graph, x, true)?;
            let logits = pass.logits.ok_or_else(|| Error::Invalid("architecture has no classifier head".into()))?;
            let mut loss = graph.cross_entropy(logits, &labels)?;
            if let Some(state) = &centers {
                let cl = graph.center_loss(pass.features, &labels, state)?;
                loss = graph.add(loss, cl)?;
            }
            let value = graph.value(loss).item() as f64;
            if !value.is_finite() {
                return Err(Error::Divergence { epoch, batch: batch_index, loss: value });
            }
            loss_sum += value * labels.len() as f64;
            graph.backward(loss)?;
            let grads: Vec<Option<&[f32]>> = pass.params.iter().map(|&p| graph.grad(p)).collect();
            sgd.step(&mut model.params_mut(), &grads, lr)?;
            if let Some(state) = &mut centers {
                state.update(graph.value(pass.features), &labels)?;
            }
        }
        model.set_mode(NormMode::Eval);
        let monitor_acc = accuracy(model, data, &split.monitor, config.eval_batch)?;
        let m = EpochMetrics { epoch, lr, train_loss: loss_sum / split.train.len() as f64, monitor_acc };
        on_epoch(&m);
        metrics.push(m);
    }
    Ok(TrainOutcome { metrics, split, centers })
}
