//! Alpha-beta recursions over a [`DenominatorFsa`].
//!
//! Labels live on arcs: every frame consumes exactly one arc, and the arc's
//! senone selects the column of the score matrix. Alpha and beta are stored
//! with `T + 1` rows; row `t` is the boundary before frame `t`, so
//! `alpha[0]` is the start indicator and `beta[T]` holds the final weights.
//!
//! The functions here work in the log domain and are the reference path.
//! [`ScaledKernel`] is the fast linear-domain path with per-frame rescaling.

mod bench;
mod mmi;
mod scaled;

use std::io::{BufRead, Read, Write};

use ndarray::Array2;

use crate::den_graph::DenominatorFsa;
use crate::error::{Error, Result};

pub use bench::{bench_throughput, BenchReport, Kernel};
pub use mmi::{
    batch_stats, ce_regularize, mmi_stats, utterance_stats, BatchStats, MmiConfig, MmiStats, NumeratorChain,
    DEFAULT_CE_LAMBDA,
};
pub use scaled::ScaledKernel;

/// `T x S` matrix of per-frame senone log-scores (natural log).
#[derive(Debug, Clone, PartialEq)]
pub struct LogLikes(Array2<f64>);

impl LogLikes {
    pub fn new(scores: Array2<f64>) -> Result<Self> {
        if scores.nrows() == 0 {
            return Err(Error::Shape("log-likelihood matrix has no frames".into()));
        }
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("log-likelihoods"));
        }
        Ok(LogLikes(scores.as_standard_layout().into_owned()))
    }

    pub fn frames(&self) -> usize {
        self.0.nrows()
    }

    pub fn senones(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn row(&self, t: usize) -> &[f64] {
        self.0.row(t).to_slice().expect("standard layout")
    }

    /// Binary layout: `T` and `S` as little-endian u64, then `T*S`
    /// little-endian f64 values in row-major order.
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        write_matrix(w, &self.0)
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        LogLikes::new(read_matrix(r)?)
    }

    /// Text layout: a `T S` header line followed by one row per line.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::parse("loglikes header", "empty file"))??;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse("loglikes header", format!("bad dimension '{t}'"))))
            .collect::<Result<_>>()?;
        let [frames, senones] = dims[..] else {
            return Err(Error::parse("loglikes header", "expected 'T S'"));
        };
        let mut data = Vec::with_capacity(frames * senones);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let before = data.len();
            for tok in line.split_whitespace() {
                data.push(
                    tok.parse::<f64>()
                        .map_err(|_| Error::parse(format!("loglikes line {}", i + 2), format!("bad value '{tok}'")))?,
                );
            }
            if data.len() - before != senones {
                return Err(Error::parse(format!("loglikes line {}", i + 2), "wrong row width"));
            }
        }
        let m = Array2::from_shape_vec((frames, senones), data)
            .map_err(|_| Error::parse("loglikes", "row count does not match header"))?;
        LogLikes::new(m)
    }
}

/// Writes any f64 matrix in the binary score layout (used for gradients too).
pub fn write_matrix<W: Write>(mut w: W, m: &Array2<f64>) -> Result<()> {
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(m.len() * 8);
    for v in m.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<Array2<f64>> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != rows * cols * 8 {
        return Err(Error::parse("matrix", format!("expected {} bytes of data, found {}", rows * cols * 8, bytes.len())));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Shape(e.to_string()))
}

/// Denominator forward-backward output.
#[derive(Debug, Clone, PartialEq)]
pub struct FbResult {
    pub log_total: f64,
    /// `T x S` per-frame senone posteriors.
    pub gamma: Array2<f64>,
}

pub(crate) fn check_labels(fsa: &DenominatorFsa, x: &LogLikes) -> Result<()> {
    let bound = fsa.label_bound();
    if bound > x.senones() {
        let label = fsa.arcs().iter().map(|a| a.senone).max().unwrap_or(0);
        return Err(Error::LabelOutOfRange {
            label,
            columns: x.senones(),
        });
    }
    Ok(())
}

/// `log(sum(exp(v)))`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-domain forward pass; returns a `(T+1) x states` matrix.
pub fn forward(fsa: &DenominatorFsa, x: &LogLikes) -> Result<Array2<f64>> {
    check_labels(fsa, x)?;
    let frames = x.frames();
    let n = fsa.num_states();
    let arcs = fsa.arcs();
    let mut alpha = Array2::from_elem((frames + 1, n), f64::NEG_INFINITY);
    alpha[[0, fsa.start() as usize]] = 0.0;
    let mut terms = Vec::new();
    for t in 0..frames {
        let scores = x.row(t);
        for dst in 0..n {
            terms.clear();
            for &i in fsa.incoming(dst as u32) {
                let a = &arcs[i as usize];
                let prev = alpha[[t, a.src as usize]];
                if prev > f64::NEG_INFINITY {
                    terms.push(prev + a.log_weight + scores[a.senone as usize]);
                }
            }
            alpha[[t + 1, dst]] = log_sum_exp(&terms);
        }
    }
    Ok(alpha)
}

/// Log-domain backward pass; returns a `(T+1) x states` matrix.
pub fn backward(fsa: &DenominatorFsa, x: &LogLikes) -> Result<Array2<f64>> {
    check_labels(fsa, x)?;
    let frames = x.frames();
    let n = fsa.num_states();
    let mut beta = Array2::from_elem((frames + 1, n), f64::NEG_INFINITY);
    for s in 0..n {
        beta[[frames, s]] = fsa.final_log_weight(s as u32);
    }
    let mut terms = Vec::new();
    for t in (0..frames).rev() {
        let scores = x.row(t);
        for src in 0..n {
            terms.clear();
            for a in fsa.outgoing(src as u32) {
                let next = beta[[t + 1, a.dst as usize]];
                if next > f64::NEG_INFINITY {
                    terms.push(a.log_weight + scores[a.senone as usize] + next);
                }
            }
            beta[[t, src]] = log_sum_exp(&terms);
        }
    }
    Ok(beta)
}

/// Total log weight read off the last alpha row and the final weights.
pub fn log_total_from_alpha(fsa: &DenominatorFsa, alpha: &Array2<f64>) -> f64 {
    let last = alpha.nrows() - 1;
    let terms: Vec<f64> = (0..fsa.num_states())
        .map(|s| alpha[[last, s]] + fsa.final_log_weight(s as u32))
        .collect();
    log_sum_exp(&terms)
}

/// Per-frame senone posteriors from log-domain alpha and beta.
pub fn posteriors(fsa: &DenominatorFsa, x: &LogLikes, alpha: &Array2<f64>, beta: &Array2<f64>) -> Result<FbResult> {
    let frames = x.frames();
    let n = fsa.num_states();
    if alpha.dim() != (frames + 1, n) || beta.dim() != (frames + 1, n) {
        return Err(Error::Shape(format!(
            "alpha {:?} / beta {:?} for {frames} frames and {n} states",
            alpha.dim(),
            beta.dim()
        )));
    }
    check_labels(fsa, x)?;
    let log_total = log_total_from_alpha(fsa, alpha);
    if log_total == f64::NEG_INFINITY {
        return Err(Error::NoPath { frames });
    }
    let mut gamma = Array2::zeros((frames, x.senones()));
    for t in 0..frames {
        let scores = x.row(t);
        for a in fsa.arcs() {
            let v = alpha[[t, a.src as usize]] + a.log_weight + scores[a.senone as usize] + beta[[t + 1, a.dst as usize]]
                - log_total;
            if v > f64::NEG_INFINITY {
                gamma[[t, a.senone as usize]] += v.exp();
            }
        }
    }
    Ok(FbResult { log_total, gamma })
}

/// Forward, backward and posteriors in the log domain.
pub fn forward_backward(fsa: &DenominatorFsa, x: &LogLikes) -> Result<FbResult> {
    let alpha = forward(fsa, x)?;
    let beta = backward(fsa, x)?;
    posteriors(fsa, x, &alpha, &beta)
}
