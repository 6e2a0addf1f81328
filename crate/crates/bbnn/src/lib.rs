//! Bit-packed Boolean neural networks trained without any numerics.
//!
//! A neuron here is the composite gate `y = (∨_j x_j ∧ w_j) ⊕ b`: an
//! AND-OR aggregation over the inputs followed by an XOR bias that can
//! invert the result. Stacking rows of such gates gives fully connected
//! layers over plain Boolean vectors, and the whole forward pass reduces
//! to word-parallel AND/OR/XOR on packed 64-bit words.
//!
//! Training is Boolean as well. Instead of gradients, the library computes
//! *activation sensitivities* (which single-bit flips of an argument can
//! change a gate's aggregation output) and resolves the per-row choice of
//! flips through *error projection*: pick as many candidate fixing masks as
//! possible whose OR does not fully cover any mask protecting a correct
//! output. Difference masks produced this way update weights and biases and
//! propagate backwards as the previous layer's error signal.
//!
//! Module map:
//!
//! - [`bits`]: packed [`BitVector`]/[`BitMatrix`] storage, elementwise
//!   algebra, and the deterministic counter-based [`Rng`].
//! - [`layers`]: the gate, row activation, layers and models, forward traces.
//! - [`sensitivity`]: positive/negative/specialized activation sensitivity
//!   and selection expansion.
//! - [`projection`]: exact, greedy, and specialized error projection.
//! - [`training`]: the backpropagation phases, batch/epoch drivers, and
//!   evaluation metrics.
//! - [`dataio`]: IDX image ingestion, thermometer/label encodings,
//!   checkpoints, and synthetic teacher data.
//! - [`oracle`]: deliberately naive reference implementations used to
//!   cross-check the packed kernels.

pub mod bits;
pub mod dataio;
pub mod layers;
pub mod oracle;
pub mod projection;
pub mod sensitivity;
pub mod training;

pub use bits::{BitMatrix, BitOp, BitVector, Rng};
pub use layers::{gate_eval, row_activation, ForwardTrace, Layer, Model};

use thiserror::Error;

/// Errors raised by the in-memory compute modules.
///
/// File-format and I/O failures have their own type, [`dataio::DataError`].
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("shape mismatch: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    ShapeMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("column count mismatch: {left} vs {right}")]
    ColumnMismatch { left: usize, right: usize },
    #[error("bit matrix capacity overflow: {rows} rows x {cols} cols")]
    CapacityOverflow { rows: usize, cols: usize },
    #[error("layer {layer} expects input width {expected}, got {found}")]
    WidthMismatch {
        layer: usize,
        expected: usize,
        found: usize,
    },
    #[error("model has no layers")]
    EmptyModel,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("class {class} out of range for {classes} classes")]
    ClassOutOfRange { class: usize, classes: usize },
    #[error("projection instance has {rows} candidate rows, exceeding exact limit {limit}")]
    ProjectionTooLarge { rows: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
