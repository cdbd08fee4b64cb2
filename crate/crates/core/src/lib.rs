//! Sequence-training statistics and decoding back-end tools for
//! conversational speech recognition.
//!
//! - [`senone_lm`]: mixed-history senone language model from frame alignments.
//! - [`den_graph`]: transition counting and denominator acceptor compilation.
//! - [`forward_backward`]: alpha-beta posteriors, MMI objective and gradients.
//! - [`nbest`]: N-best lists, LM score interpolation, score-weight tuning.
//! - [`confnet`]: confusion networks, system combination, greedy selection.
//! - [`scoring`]: word alignment and word error rate.
//! - [`onebit_sgd`]: simulated data-parallel SGD with 1-bit gradients.
//! - [`synth`] and [`pipeline`]: synthetic corpora and the end-to-end run.

pub mod confnet;
pub mod den_graph;
pub mod error;
pub mod forward_backward;
pub mod nbest;
pub mod onebit_sgd;
pub mod pipeline;
pub mod scoring;
pub mod senone_lm;
pub mod synth;

pub use error::{Error, Result};
