//! Boolean error backpropagation.
//!
//! One batch update walks the layers from last to first. For each layer:
//!
//! 1. *weight phase* — per weight row, collect candidate masks from the
//!    sensitivity of the row activation to weight flips (fixing masks from
//!    samples in error, protecting masks from correct samples), project them
//!    to a difference mask `Dʷ`, and apply `W' = W ⊕ Dʷ`;
//! 2. recompute the errors `E'` with `W'` and the *old* biases;
//! 3. *bias phase* — flip the bias bits every sample still gets wrong:
//!    `Dᵇ = ∧ₖ E'ₖ`, `B' = B ⊕ Dᵇ`, leaving residuals `E'' = E' ∧ ¬Dᵇ`;
//! 4. *input phase* — per sample, project the sensitivity to input flips
//!    into a mask `Dˣ` that would fix the residuals; `Dˣ` becomes the error
//!    signal handed to the preceding layer. The first layer skips this step
//!    (its inputs are data).
//!
//! The general mode assembles per-row projection instances from expanded
//! positive rows and whole negative rows and solves them exactly or
//! greedily. The specialized mode keeps only single-flip sensitivities, so
//! projection collapses to a column-wise union-minus-union; a retain-one
//! policy then thins multi-bit masks to protect later sensitivity rows.
//!
//! Every random choice is drawn from streams derived from the config seed
//! and the (epoch, batch, layer, row/sample) coordinates, so parallel row
//! and sample loops are bit-identical to serial execution.

use crate::bits::{words, BitMatrix, BitVector, Rng};
use crate::layers::{row_activation, Layer, Model};
use crate::projection::{
    project_exact, project_greedy, retain_one, ProjectionProblem, DEFAULT_EXACT_LIMIT,
};
use crate::sensitivity::specialized_row_into;
use crate::{Error, Result};
use rayon::prelude::*;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    General,
    Specialized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectionStrategy {
    Exact,
    Greedy,
    /// Exact when the candidate count fits the exact limit, greedy beyond.
    Auto,
}

/// Where the retain-one thinning applies in specialized mode. The general
/// mode never thins masks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RetainOnePolicy {
    Off,
    /// Input masks `Dˣ` only.
    Dx,
    /// Input masks and weight rows `Dʷᵢ`.
    DxAndDw,
}

impl RetainOnePolicy {
    fn thins_dx(self) -> bool {
        matches!(self, RetainOnePolicy::Dx | RetainOnePolicy::DxAndDw)
    }

    fn thins_dw(self) -> bool {
        matches!(self, RetainOnePolicy::DxAndDw)
    }
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub mode: Mode,
    pub projection: ProjectionStrategy,
    pub exact_limit: usize,
    pub retain_one: RetainOnePolicy,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Specialized,
            projection: ProjectionStrategy::Auto,
            exact_limit: DEFAULT_EXACT_LIMIT,
            retain_one: RetainOnePolicy::DxAndDw,
            batch_size: 32,
            epochs: 1,
            seed: 0,
            shuffle: true,
        }
    }
}

/// One training batch: inputs and their expected outputs.
#[derive(Clone, Debug)]
pub struct Batch {
    inputs: Vec<BitVector>,
    targets: Vec<BitVector>,
}

impl Batch {
    pub fn new(inputs: Vec<BitVector>, targets: Vec<BitVector>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if inputs.len() != targets.len() {
            return Err(Error::LengthMismatch {
                left: inputs.len(),
                right: targets.len(),
            });
        }
        check_uniform(&inputs)?;
        check_uniform(&targets)?;
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    /// Always false; construction rejects empty batches.
    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[BitVector] {
        &self.inputs
    }

    pub fn targets(&self) -> &[BitVector] {
        &self.targets
    }
}

/// A full training or evaluation corpus, optionally carrying class labels
/// for accuracy reporting.
#[derive(Clone, Debug)]
pub struct Dataset {
    inputs: Vec<BitVector>,
    targets: Vec<BitVector>,
    labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(inputs: Vec<BitVector>, targets: Vec<BitVector>) -> Result<Self> {
        Self::build(inputs, targets, None)
    }

    pub fn with_labels(
        inputs: Vec<BitVector>,
        targets: Vec<BitVector>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if labels.len() != inputs.len() {
            return Err(Error::LengthMismatch {
                left: inputs.len(),
                right: labels.len(),
            });
        }
        Self::build(inputs, targets, Some(labels))
    }

    fn build(
        inputs: Vec<BitVector>,
        targets: Vec<BitVector>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if inputs.len() != targets.len() {
            return Err(Error::LengthMismatch {
                left: inputs.len(),
                right: targets.len(),
            });
        }
        check_uniform(&inputs)?;
        check_uniform(&targets)?;
        Ok(Self {
            inputs,
            targets,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    /// Always false; construction rejects empty datasets.
    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[BitVector] {
        &self.inputs
    }

    pub fn targets(&self) -> &[BitVector] {
        &self.targets
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn input_width(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn output_width(&self) -> usize {
        self.targets[0].len()
    }

    /// First `n` samples (at least one, at most all).
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.clamp(1, self.len());
        Self {
            inputs: self.inputs[..n].to_vec(),
            targets: self.targets[..n].to_vec(),
            labels: self.labels.as_ref().map(|ls| ls[..n].to_vec()),
        }
    }
}

fn check_uniform(rows: &[BitVector]) -> Result<()> {
    let width = rows[0].len();
    for r in rows {
        if r.len() != width {
            return Err(Error::LengthMismatch {
                left: width,
                right: r.len(),
            });
        }
    }
    Ok(())
}

/// Maps a raw model output to a class id.
pub trait Decoder: Sync {
    fn decode(&self, output: &BitVector) -> usize;
}

/// Outcome of one layer's update within a batch. Errors are total Hamming
/// weights over the batch at this layer's output, before any update and
/// after the weight and bias phases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerUpdateReport {
    pub weight_flips: usize,
    pub bias_flips: usize,
    pub errors_before: usize,
    pub errors_after: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalMetrics {
    /// Total wrong output bits over samples × output width.
    pub hamming_error_rate: f64,
    /// Fraction of samples whose decoded class matches the label; present
    /// only when the dataset has labels and a decoder is supplied.
    pub accuracy: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub hamming_error_rate: f64,
    pub accuracy: Option<f64>,
    pub weight_flips: usize,
    pub bias_flips: usize,
    pub seconds: f64,
}

/// Per-sample output errors `Eₖ = Yₖ ⊕ Yᵉₖ`.
pub fn output_errors(outputs: &[BitVector], targets: &[BitVector]) -> Result<Vec<BitVector>> {
    if outputs.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: outputs.len(),
            right: targets.len(),
        });
    }
    outputs
        .iter()
        .zip(targets)
        .map(|(y, t)| {
            if y.len() != t.len() {
                return Err(Error::LengthMismatch {
                    left: y.len(),
                    right: t.len(),
                });
            }
            Ok(y.xor(t))
        })
        .collect()
}

/// Computes the general-mode difference mask for one projection instance.
///
/// `units` yields, per unit (sample for the weight phase, output row for the
/// input phase), the error bit and the word slices of the flip argument row
/// `a` and the fixed row `b`. Dead units contribute one-hot expansions of
/// `b` (positive block first), live units whole active-conjunct rows `a ∧ b`
/// (negative block after), each block in unit order.
fn general_mask<'a>(
    cols: usize,
    units: impl Iterator<Item = (bool, &'a [u64], &'a [u64])>,
    cfg: &TrainConfig,
) -> Result<BitVector> {
    let mut c_pos = Vec::new();
    let mut c_neg = Vec::new();
    let mut i_pos = Vec::new();
    let mut i_neg = Vec::new();
    for (err, a, b) in units {
        if words::and_any(a, b) {
            let mut row = BitVector::zeros(cols);
            row.and_or_assign_words(a, b);
            if err {
                i_neg.push(row);
            } else {
                c_neg.push(row);
            }
        } else {
            let mut row = BitVector::zeros(cols);
            row.or_assign_words(b);
            let dst = if err { &mut i_pos } else { &mut c_pos };
            for bit in row.iter_ones() {
                dst.push(BitVector::unit(cols, bit));
            }
        }
    }
    c_pos.append(&mut c_neg);
    i_pos.append(&mut i_neg);
    let problem = ProjectionProblem::from_rows(cols, &c_pos, &i_pos)?;
    let mask = match cfg.projection {
        ProjectionStrategy::Exact => project_exact(&problem, cfg.exact_limit)?.0,
        ProjectionStrategy::Greedy => project_greedy(&problem).0,
        ProjectionStrategy::Auto => {
            if problem.candidate_count() <= cfg.exact_limit {
                project_exact(&problem, cfg.exact_limit)?.0
            } else {
                project_greedy(&problem).0
            }
        }
    };
    Ok(mask)
}

/// Computes the specialized-mode difference mask for one instance: the
/// union of single-flip fixing rows minus the union of protecting rows.
fn specialized_mask<'a>(
    cols: usize,
    units: impl Iterator<Item = (bool, &'a [u64], &'a [u64])>,
) -> BitVector {
    let mut fix = BitVector::zeros(cols);
    let mut spoil = BitVector::zeros(cols);
    let mut row = BitVector::zeros(cols);
    for (err, a, b) in units {
        row.words_mut().fill(0);
        if !specialized_row_into(&mut row, a, b) {
            continue;
        }
        if err {
            fix.or_assign(&row);
        } else {
            spoil.or_assign(&row);
        }
    }
    fix.and_not_assign(&spoil);
    fix
}

fn check_phase_shapes(layer: &Layer, inputs: &[BitVector], errors: &[BitVector]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if inputs.len() != errors.len() {
        return Err(Error::LengthMismatch {
            left: inputs.len(),
            right: errors.len(),
        });
    }
    for x in inputs {
        if x.len() != layer.input_width() {
            return Err(Error::WidthMismatch {
                layer: 0,
                expected: layer.input_width(),
                found: x.len(),
            });
        }
    }
    for e in errors {
        if e.len() != layer.output_width() {
            return Err(Error::WidthMismatch {
                layer: 0,
                expected: layer.output_width(),
                found: e.len(),
            });
        }
    }
    Ok(())
}

/// Weight update: per weight row i, project the fixing masks gathered from
/// samples with `E_{k,i} = 1` against the protecting masks from samples
/// with `E_{k,i} = 0`, then apply `W' = W ⊕ Dʷ`. Returns `(W', Dʷ)`.
///
/// Rows are processed in parallel on streams derived per row index.
pub fn weight_phase(
    layer: &Layer,
    inputs: &[BitVector],
    errors: &[BitVector],
    cfg: &TrainConfig,
    rng: &Rng,
) -> Result<(BitMatrix, BitMatrix)> {
    check_phase_shapes(layer, inputs, errors)?;
    let w = layer.weights();
    let (m, n) = (w.rows(), w.cols());

    let dw_rows: Vec<BitVector> = (0..m)
        .into_par_iter()
        .map(|i| -> Result<BitVector> {
            let units = inputs
                .iter()
                .enumerate()
                .map(|(k, x)| (errors[k].get(i), w.row_words(i), x.words()));
            match cfg.mode {
                Mode::Specialized => {
                    let mut mask = specialized_mask(n, units);
                    if cfg.retain_one.thins_dw() {
                        mask = retain_one(&mask, &mut rng.derive(i as u64));
                    }
                    Ok(mask)
                }
                Mode::General => general_mask(n, units, cfg),
            }
        })
        .collect::<Result<_>>()?;

    let dw = BitMatrix::from_rows(n, &dw_rows)?;
    Ok((w.xor(&dw), dw))
}

/// Bias update: flip the bits every sample still gets wrong.
/// Returns `(B', Dᵇ, E'')` with `Dᵇ = ∧ₖ E'ₖ` and `E''ₖ = E'ₖ ∧ ¬Dᵇ`.
pub fn bias_phase(
    biases: &BitVector,
    errors: &[BitVector],
) -> Result<(BitVector, BitVector, Vec<BitVector>)> {
    if errors.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut db = BitVector::ones(biases.len());
    for e in errors {
        if e.len() != biases.len() {
            return Err(Error::LengthMismatch {
                left: biases.len(),
                right: e.len(),
            });
        }
        db.and_assign(e);
    }
    let residual = errors.iter().map(|e| e.and_not(&db)).collect();
    Ok((biases.xor(&db), db, residual))
}

/// Input update: per sample k, project the sensitivity of the (already
/// updated) layer to input flips into a mask `Dˣₖ` fixing the residual
/// errors, which becomes the previous layer's error signal.
///
/// Samples are processed in parallel on streams derived per sample index.
pub fn input_phase(
    layer: &Layer,
    inputs: &[BitVector],
    residual_errors: &[BitVector],
    cfg: &TrainConfig,
    rng: &Rng,
) -> Result<Vec<BitVector>> {
    check_phase_shapes(layer, inputs, residual_errors)?;
    let w = layer.weights();
    let (m, n) = (w.rows(), w.cols());

    (0..inputs.len())
        .into_par_iter()
        .map(|k| -> Result<BitVector> {
            let x = &inputs[k];
            let err = &residual_errors[k];
            let units = (0..m).map(|i| (err.get(i), x.words(), w.row_words(i)));
            match cfg.mode {
                Mode::Specialized => {
                    let mut mask = specialized_mask(n, units);
                    if cfg.retain_one.thins_dx() {
                        mask = retain_one(&mask, &mut rng.derive(k as u64));
                    }
                    Ok(mask)
                }
                Mode::General => general_mask(n, units, cfg),
            }
        })
        .collect()
}

/// One full layer update: weight phase, error recomputation with the new
/// weights and the old biases, bias phase, then (except for the first
/// layer, whose inputs are immutable data) the input phase.
pub fn backward_layer(
    layer: &Layer,
    inputs: &[BitVector],
    errors: &[BitVector],
    cfg: &TrainConfig,
    rng: &Rng,
    is_first: bool,
) -> Result<(Layer, Vec<BitVector>, LayerUpdateReport)> {
    check_phase_shapes(layer, inputs, errors)?;
    let errors_before: usize = errors.iter().map(BitVector::count_ones).sum();

    // The implied target of each sample is its current output XOR the
    // incoming error mask; for the last layer that is the dataset target.
    let implied_targets: Vec<BitVector> = inputs
        .par_iter()
        .zip(errors.par_iter())
        .map(|(x, e)| -> Result<BitVector> {
            let z = row_activation(x, layer.weights())?;
            Ok(z.xor(layer.biases()).xor(e))
        })
        .collect::<Result<_>>()?;

    let (w_new, dw) = weight_phase(layer, inputs, errors, cfg, &rng.derive(0))?;

    // E' is measured with W' but the old biases; the bias phase then fixes
    // exactly the errors common to the whole batch.
    let recomputed_errors: Vec<BitVector> = inputs
        .par_iter()
        .zip(implied_targets.par_iter())
        .map(|(x, target)| -> Result<BitVector> {
            let z = row_activation(x, &w_new)?;
            Ok(z.xor(layer.biases()).xor(target))
        })
        .collect::<Result<_>>()?;

    let (b_new, db, residual) = bias_phase(layer.biases(), &recomputed_errors)?;
    let updated = Layer::new(w_new, b_new)?;

    let dx = if is_first {
        vec![BitVector::zeros(layer.input_width()); inputs.len()]
    } else {
        input_phase(&updated, inputs, &residual, cfg, &rng.derive(1))?
    };

    let report = LayerUpdateReport {
        weight_flips: dw.count_ones(),
        bias_flips: db.count_ones(),
        errors_before,
        errors_after: residual.iter().map(BitVector::count_ones).sum(),
    };
    Ok((updated, dx, report))
}

/// One batch step over the whole model: forward with traces, then layer
/// updates from the last layer back to the first, each layer consuming the
/// inputs recorded during the forward pass and the error masks emitted by
/// its successor. Reports are returned in layer order.
pub fn train_batch(
    model: &mut Model,
    batch: &Batch,
    cfg: &TrainConfig,
    rng: &Rng,
) -> Result<Vec<LayerUpdateReport>> {
    let layer_count = model.layer_count();
    if layer_count == 0 {
        return Err(Error::EmptyModel);
    }

    let traces: Vec<_> = batch
        .inputs()
        .par_iter()
        .map(|x| model.forward_traced(x))
        .collect::<Result<_>>()?;
    let mut layer_inputs: Vec<Vec<BitVector>> = (0..layer_count)
        .map(|l| traces.iter().map(|t| t.steps()[l].input.clone()).collect())
        .collect();
    let outputs: Vec<BitVector> = traces.iter().map(|t| t.output().clone()).collect();
    drop(traces);

    let mut errors = output_errors(&outputs, batch.targets())?;
    let mut reports = Vec::with_capacity(layer_count);
    for index in (0..layer_count).rev() {
        let inputs = std::mem::take(&mut layer_inputs[index]);
        let (updated, dx, report) = backward_layer(
            &model.layers()[index],
            &inputs,
            &errors,
            cfg,
            &rng.derive(index as u64),
            index == 0,
        )?;
        model.set_layer(index, updated);
        errors = dx;
        reports.push(report);
    }
    reports.reverse();
    Ok(reports)
}

/// Epoch driver: shuffles (seeded) when configured, partitions the dataset
/// into batches, updates per batch, and reports per-epoch metrics measured
/// on the training data after the epoch's updates. The `progress` callback
/// sees the model after each epoch, e.g. to evaluate a held-out split.
///
/// The entire run is a pure function of the model, the dataset order, and
/// `cfg.seed`.
pub fn fit(
    model: &mut Model,
    data: &Dataset,
    cfg: &TrainConfig,
    decoder: Option<&dyn Decoder>,
    mut progress: impl FnMut(&Model, &EpochReport),
) -> Result<Vec<EpochReport>> {
    let root = Rng::new(cfg.seed, 2);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let epoch_rng = root.derive(epoch as u64);
        let mut order: Vec<usize> = (0..data.len()).collect();
        if cfg.shuffle {
            epoch_rng.derive(0).shuffle(&mut order);
        }

        let mut weight_flips = 0;
        let mut bias_flips = 0;
        for (batch_index, chunk) in order.chunks(cfg.batch_size.max(1)).enumerate() {
            let batch = Batch::new(
                chunk.iter().map(|&s| data.inputs()[s].clone()).collect(),
                chunk.iter().map(|&s| data.targets()[s].clone()).collect(),
            )?;
            let reports = train_batch(model, &batch, cfg, &epoch_rng.derive(1 + batch_index as u64))?;
            weight_flips += reports.iter().map(|r| r.weight_flips).sum::<usize>();
            bias_flips += reports.iter().map(|r| r.bias_flips).sum::<usize>();
        }

        let metrics = evaluate(model, data, decoder)?;
        let report = EpochReport {
            epoch,
            hamming_error_rate: metrics.hamming_error_rate,
            accuracy: metrics.accuracy,
            weight_flips,
            bias_flips,
            seconds: started.elapsed().as_secs_f64(),
        };
        progress(model, &report);
        history.push(report);
    }
    Ok(history)
}

/// Mean output Hamming error rate, plus classification accuracy when the
/// dataset carries labels and a decoder is supplied.
pub fn evaluate(
    model: &Model,
    data: &Dataset,
    decoder: Option<&dyn Decoder>,
) -> Result<EvalMetrics> {
    let out_width = model.output_width()?;
    let per_sample: Vec<(usize, bool)> = (0..data.len())
        .into_par_iter()
        .map(|k| -> Result<(usize, bool)> {
            let y = model.infer(&data.inputs()[k])?;
            let target = &data.targets()[k];
            if y.len() != target.len() {
                return Err(Error::LengthMismatch {
                    left: y.len(),
                    right: target.len(),
                });
            }
            let wrong_bits = y.xor(target).count_ones();
            let correct = match (decoder, data.labels()) {
                (Some(d), Some(labels)) => d.decode(&y) == labels[k],
                _ => false,
            };
            Ok((wrong_bits, correct))
        })
        .collect::<Result<_>>()?;

    let total_wrong: usize = per_sample.iter().map(|(w, _)| w).sum();
    let hamming_error_rate = total_wrong as f64 / (data.len() * out_width) as f64;
    let accuracy = match (decoder, data.labels()) {
        (Some(_), Some(_)) => {
            Some(per_sample.iter().filter(|(_, c)| *c).count() as f64 / data.len() as f64)
        }
        _ => None,
    };
    Ok(EvalMetrics {
        hamming_error_rate,
        accuracy,
    })
}
