use ndarray::{Array2, Axis};
use rayon::prelude::*;

use super::{forward_backward, FbResult, Kernel, LogLikes, ScaledKernel};
use crate::den_graph::{DenominatorFsa, TransitionModel};
use crate::error::{Error, Result};
use crate::senone_lm::{AlignedUtterance, SenoneId};

pub const DEFAULT_CE_LAMBDA: f64 = 0.1;

/// Numerator path fixed to a forced alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct NumeratorChain {
    pub senones: Vec<SenoneId>,
    /// Log HMM transition weight of the aligned path (self-loop on repeated
    /// frames, exit on label changes); zero for a likelihood-only numerator.
    pub log_transition: f64,
}

impl NumeratorChain {
    pub fn new(ali: &AlignedUtterance, tm: Option<&TransitionModel>) -> Result<Self> {
        if ali.frames.is_empty() {
            return Err(Error::EmptyAlignment);
        }
        let mut log_transition = 0.0;
        if let Some(tm) = tm {
            for w in ali.frames.windows(2) {
                let p = if w[0] == w[1] { tm.self_loop(w[0])? } else { tm.exit(w[0])? };
                log_transition += p.ln();
            }
        }
        Ok(NumeratorChain {
            senones: ali.frames.clone(),
            log_transition,
        })
    }

    pub fn frames(&self) -> usize {
        self.senones.len()
    }

    fn check(&self, x: &LogLikes) -> Result<()> {
        if self.senones.len() != x.frames() {
            return Err(Error::Shape(format!(
                "alignment has {} frames, scores have {}",
                self.senones.len(),
                x.frames()
            )));
        }
        if let Some(&s) = self.senones.iter().find(|&&s| s as usize >= x.senones()) {
            return Err(Error::LabelOutOfRange {
                label: s,
                columns: x.senones(),
            });
        }
        Ok(())
    }

    /// One-hot `T x S` posterior matrix.
    pub fn posteriors(&self, num_senones: usize) -> Result<Array2<f64>> {
        let mut m = Array2::zeros((self.senones.len(), num_senones));
        for (t, &s) in self.senones.iter().enumerate() {
            if s as usize >= num_senones {
                return Err(Error::LabelOutOfRange {
                    label: s,
                    columns: num_senones,
                });
            }
            m[[t, s as usize]] = 1.0;
        }
        Ok(m)
    }

    pub fn log_prob(&self, x: &LogLikes) -> Result<f64> {
        self.check(x)?;
        let scores: f64 = self.senones.iter().enumerate().map(|(t, &s)| x.row(t)[s as usize]).sum();
        Ok(scores + self.log_transition)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmiStats {
    /// Numerator minus denominator log score (plus the weighted
    /// cross-entropy term once regularized).
    pub objective: f64,
    /// Derivative of the objective with respect to each input score.
    pub grad: Array2<f64>,
    pub frames: usize,
}

pub fn mmi_stats(num: &NumeratorChain, den: &FbResult, x: &LogLikes) -> Result<MmiStats> {
    num.check(x)?;
    if den.gamma.dim() != x.matrix().dim() {
        return Err(Error::Shape(format!(
            "denominator posteriors {:?} vs scores {:?}",
            den.gamma.dim(),
            x.matrix().dim()
        )));
    }
    let mut grad = -&den.gamma;
    for (t, &s) in num.senones.iter().enumerate() {
        grad[[t, s as usize]] += 1.0;
    }
    Ok(MmiStats {
        objective: num.log_prob(x)? - den.log_total,
        grad,
        frames: x.frames(),
    })
}

/// Adds `lambda` times the frame cross-entropy of a row-wise softmax of `x`
/// against the alignment.
pub fn ce_regularize(mut stats: MmiStats, num: &NumeratorChain, x: &LogLikes, lambda: f64) -> Result<MmiStats> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("cross-entropy weight {lambda} must be non-negative")));
    }
    num.check(x)?;
    if stats.grad.dim() != x.matrix().dim() {
        return Err(Error::Shape("gradient and score shapes differ".into()));
    }
    if lambda == 0.0 {
        return Ok(stats);
    }
    let mut ce = 0.0;
    for (t, (mut grad_row, &target)) in stats.grad.axis_iter_mut(Axis(0)).zip(&num.senones).enumerate() {
        let row = x.row(t);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for (g, &v) in grad_row.iter_mut().zip(row) {
            *g -= lambda * (v - log_norm).exp();
        }
        grad_row[target as usize] += lambda;
        ce += row[target as usize] - log_norm;
    }
    stats.objective += lambda * ce;
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmiConfig {
    pub ce_lambda: f64,
    /// Include HMM transition weights in the numerator score.
    pub numerator_transitions: bool,
    pub kernel: Kernel,
}

impl Default for MmiConfig {
    fn default() -> Self {
        MmiConfig {
            ce_lambda: DEFAULT_CE_LAMBDA,
            numerator_transitions: true,
            kernel: Kernel::Scaled,
        }
    }
}

fn denominator(fsa: &DenominatorFsa, kernel: Option<&ScaledKernel>, x: &LogLikes) -> Result<FbResult> {
    match kernel {
        Some(k) => k.run(fsa, x),
        None => forward_backward(fsa, x),
    }
}

/// MMI statistics for one utterance, cross-entropy regularized.
pub fn utterance_stats(
    fsa: &DenominatorFsa,
    tm: &TransitionModel,
    ali: &AlignedUtterance,
    x: &LogLikes,
    cfg: &MmiConfig,
) -> Result<MmiStats> {
    let kernel = match cfg.kernel {
        Kernel::Scaled => Some(ScaledKernel::new(fsa)),
        Kernel::LogDomain => None,
    };
    stats_with(fsa, kernel.as_ref(), tm, ali, x, cfg)
}

fn stats_with(
    fsa: &DenominatorFsa,
    kernel: Option<&ScaledKernel>,
    tm: &TransitionModel,
    ali: &AlignedUtterance,
    x: &LogLikes,
    cfg: &MmiConfig,
) -> Result<MmiStats> {
    let num = NumeratorChain::new(ali, cfg.numerator_transitions.then_some(tm))?;
    let den = denominator(fsa, kernel, x)?;
    let stats = mmi_stats(&num, &den, x)?;
    ce_regularize(stats, &num, x, cfg.ce_lambda)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub per_utterance: Vec<MmiStats>,
    pub objective: f64,
    pub frames: usize,
}

/// Statistics for a batch of utterances. Utterances are processed in
/// parallel; totals are reduced in input order so the result does not
/// depend on scheduling.
pub fn batch_stats(
    fsa: &DenominatorFsa,
    tm: &TransitionModel,
    batch: &[(AlignedUtterance, LogLikes)],
    cfg: &MmiConfig,
) -> Result<BatchStats> {
    let kernel = match cfg.kernel {
        Kernel::Scaled => Some(ScaledKernel::new(fsa)),
        Kernel::LogDomain => None,
    };
    let per_utterance: Vec<MmiStats> = batch
        .par_iter()
        .map(|(ali, x)| stats_with(fsa, kernel.as_ref(), tm, ali, x, cfg))
        .collect::<Result<_>>()?;
    let mut objective = 0.0;
    let mut frames = 0;
    for s in &per_utterance {
        objective += s.objective;
        frames += s.frames;
    }
    Ok(BatchStats {
        per_utterance,
        objective,
        frames,
    })
}
