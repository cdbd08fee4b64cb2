//! Simulated data-parallel SGD with 1-bit gradient quantization and error
//! feedback, plus automatic minibatch-size selection.

mod quant;
mod train;

pub use quant::{aggregate, bits_per_entry, quantize, QuantizedGradient, DENSE_BITS_PER_ENTRY, SCALE_BITS_PER_COLUMN};
pub use train::{
    auto_minibatch, plain_sgd, sim_train, AutoMinibatch, LeastSquares, SgdConfig, SimReport, TraceRow, Trainer,
    DIVERGENCE_LOSS, PROBE_TOLERANCE, PROBE_UPDATES,
};
