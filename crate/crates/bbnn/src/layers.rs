//! The composite gate, row activation, and fully connected models.
//!
//! A layer is a weight matrix `W` (one row per output gate) together with a
//! bias vector `B`. Inference is `Y = A(X, W) ⊕ B`, where the row activation
//! `A` reduces each row of `X ∧ W` with OR. Weight rows are stored
//! contiguously so a gate's inputs are scanned word by word.

use crate::bits::{broadcast_shape, words, BitMatrix, BitVector, Operand, Rng};
use crate::{Error, Result};

/// The composite gate: `(∨_j x_j ∧ w_j) ⊕ b`.
pub fn gate_eval(x: &BitVector, w: &BitVector, b: bool) -> Result<bool> {
    if x.len() != w.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: w.len(),
        });
    }
    Ok(words::and_any(x.words(), w.words()) ^ b)
}

/// Row activation: `Z_i = ∨_j X_ij ∧ W_ij` after broadcasting either side
/// from a single row. The inner loop is a word-wise AND with an any-nonzero
/// early exit, which is bit-for-bit the definitional reduction.
pub fn row_activation<'a>(
    x: impl Into<Operand<'a>>,
    w: impl Into<Operand<'a>>,
) -> Result<BitVector> {
    let (x, w) = (x.into(), w.into());
    let (rows, _) = broadcast_shape(&x, &w)?;
    let mut z = BitVector::zeros(rows);
    for i in 0..rows {
        if words::and_any(x.row_words(i), w.row_words(i)) {
            z.set(i, true);
        }
    }
    Ok(z)
}

/// One fully connected layer: weights `W` (m×n) and biases `B` (1×m).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layer {
    weights: BitMatrix,
    biases: BitVector,
}

impl Layer {
    pub fn new(weights: BitMatrix, biases: BitVector) -> Result<Self> {
        if biases.len() != weights.rows() {
            return Err(Error::LengthMismatch {
                left: weights.rows(),
                right: biases.len(),
            });
        }
        Ok(Self { weights, biases })
    }

    pub fn weights(&self) -> &BitMatrix {
        &self.weights
    }

    pub fn biases(&self) -> &BitVector {
        &self.biases
    }

    pub fn input_width(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_width(&self) -> usize {
        self.weights.rows()
    }

    /// Returns the activation `Z = A(X, W)` and the output `Y = Z ⊕ B`.
    pub fn forward(&self, x: &BitVector) -> Result<(BitVector, BitVector)> {
        if x.len() != self.input_width() {
            return Err(Error::WidthMismatch {
                layer: 0,
                expected: self.input_width(),
                found: x.len(),
            });
        }
        let z = row_activation(x, &self.weights)?;
        let y = z.xor(&self.biases);
        Ok((z, y))
    }
}

/// An ordered chain of layers; each layer's output width feeds the next
/// layer's input width.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Model {
    layers: Vec<Layer>,
}

impl Model {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_width() != pair[1].input_width() {
                return Err(Error::WidthMismatch {
                    layer: i + 1,
                    expected: pair[0].output_width(),
                    found: pair[1].input_width(),
                });
            }
        }
        Ok(Self { layers })
    }

    /// Fresh model over the interface widths `[n_0, n_1, ..., n_L]`: layer i
    /// has shape `n_{i+1} × n_i`. Weights are drawn with density `1/n_i`
    /// (about one active conjunct per gate, keeping initial activations
    /// balanced) and biases start at zero.
    pub fn random(widths: &[usize], rng: &mut Rng) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::EmptyModel);
        }
        let layers = widths
            .windows(2)
            .map(|w| {
                let (n, m) = (w[0], w[1]);
                let density = 1.0 / n.max(1) as f64;
                Layer::new(BitMatrix::random(rng, m, n, density), BitVector::zeros(m))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn input_width(&self) -> Result<usize> {
        self.layers.first().map(Layer::input_width).ok_or(Error::EmptyModel)
    }

    pub fn output_width(&self) -> Result<usize> {
        self.layers.last().map(Layer::output_width).ok_or(Error::EmptyModel)
    }

    /// Interface widths `[n_0, ..., n_L]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.layers.len() + 1);
        if let Some(first) = self.layers.first() {
            out.push(first.input_width());
        }
        out.extend(self.layers.iter().map(Layer::output_width));
        out
    }

    /// Plain inference without recording intermediates.
    pub fn infer(&self, x: &BitVector) -> Result<BitVector> {
        if self.layers.is_empty() {
            return Err(Error::EmptyModel);
        }
        let mut value = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let (_, y) = layer.forward(&value).map_err(|e| at_layer(e, i))?;
            value = y;
        }
        Ok(value)
    }

    /// Forward pass recording every layer's input, activation, and output,
    /// as required by training.
    pub fn forward_traced(&self, x: &BitVector) -> Result<ForwardTrace> {
        if self.layers.is_empty() {
            return Err(Error::EmptyModel);
        }
        let mut steps = Vec::with_capacity(self.layers.len());
        let mut value = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let (z, y) = layer.forward(&value).map_err(|e| at_layer(e, i))?;
            steps.push(TraceStep {
                input: value,
                activation: z,
                output: y.clone(),
            });
            value = y;
        }
        Ok(ForwardTrace { steps })
    }

    /// Swap in an updated layer of identical shape.
    pub(crate) fn set_layer(&mut self, index: usize, layer: Layer) {
        debug_assert_eq!(self.layers[index].input_width(), layer.input_width());
        debug_assert_eq!(self.layers[index].output_width(), layer.output_width());
        self.layers[index] = layer;
    }
}

fn at_layer(e: Error, layer: usize) -> Error {
    match e {
        Error::WidthMismatch { expected, found, .. } => Error::WidthMismatch {
            layer,
            expected,
            found,
        },
        other => other,
    }
}

/// Per-layer record of one forward pass: input `X`, activation `Z`,
/// output `Y`. The output of step i is the input of step i+1.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    steps: Vec<TraceStep>,
}

#[derive(Clone, Debug)]
pub struct TraceStep {
    pub input: BitVector,
    pub activation: BitVector,
    pub output: BitVector,
}

impl ForwardTrace {
    pub fn steps(&self) -> &[TraceStep] {
        &self.steps
    }

    pub fn output(&self) -> &BitVector {
        &self.steps.last().expect("trace is never empty").output
    }
}
