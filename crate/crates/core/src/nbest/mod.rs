//! N-best lists and LM rescoring.
//!
//! Score files carry log10 values; everything in memory is natural log.
//! Per-word LM streams (neural LMs in either direction, N-gram) are
//! interpolated in the linear domain per word, summed over words, and the
//! forward and backward directions are added. OOV words are left out of the
//! interpolated product when a vocabulary is configured; the weighted OOV
//! count in [`total_score`] accounts for them instead.

mod io;
mod ngram;
mod optimize;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{attach_stream, read_nbest, write_nbest, write_stream};
pub use ngram::WittenBellLm;
pub use optimize::{dev_errors, optimize_weights, OptimizeOptions};

/// Weights used by the three-way word-level interpolation of two neural LMs
/// with an N-gram LM.
pub const RNN_RNN_NGRAM_WEIGHTS: [f64; 3] = [0.375, 0.375, 0.25];

const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub words: Vec<String>,
    pub am_score: f64,
    pub ng_score: f64,
    pub pron_score: f64,
    pub oov_count: usize,
    /// Per-stream natural-log word probabilities, `words.len() + 1` entries
    /// each (end token last).
    pub word_probs: BTreeMap<String, Vec<f64>>,
}

impl Hypothesis {
    pub fn new(words: Vec<String>, am_score: f64, ng_score: f64, pron_score: f64, oov_count: usize) -> Result<Self> {
        if oov_count > words.len() {
            return Err(Error::InvalidArgument(format!(
                "oov count {oov_count} exceeds {} words",
                words.len()
            )));
        }
        if ![am_score, ng_score, pron_score].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("hypothesis scores"));
        }
        Ok(Hypothesis {
            words,
            am_score,
            ng_score,
            pron_score,
            oov_count,
            word_probs: BTreeMap::new(),
        })
    }

    pub fn set_stream(&mut self, name: impl Into<String>, ln_probs: Vec<f64>) -> Result<()> {
        if ln_probs.len() != self.words.len() + 1 {
            return Err(Error::Shape(format!(
                "stream has {} entries for {} words (expected words + 1)",
                ln_probs.len(),
                self.words.len()
            )));
        }
        self.word_probs.insert(name.into(), ln_probs);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NBestList {
    pub utt_id: String,
    pub hyps: Vec<Hypothesis>,
}

impl NBestList {
    pub fn new(utt_id: impl Into<String>, hyps: Vec<Hypothesis>) -> Result<Self> {
        if hyps.is_empty() {
            return Err(Error::Empty("N-best list"));
        }
        Ok(NBestList {
            utt_id: utt_id.into(),
            hyps,
        })
    }
}

/// Log-linear score weights. The acoustic weight is the reference scale and
/// stays at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    #[serde(default = "one")]
    pub am: f64,
    pub lm: f64,
    pub pron: f64,
    pub oov_penalty: f64,
    pub word_insertion_penalty: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights {
            am: 1.0,
            lm: 1.0,
            pron: 0.0,
            oov_penalty: 0.0,
            word_insertion_penalty: 0.0,
        }
    }
}

/// Named streams with simplex interpolation weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamMix {
    pub streams: Vec<String>,
    pub weights: Vec<f64>,
}

impl StreamMix {
    pub fn new<S: Into<String>>(streams: impl IntoIterator<Item = S>, weights: Vec<f64>) -> Result<Self> {
        let mix = StreamMix {
            streams: streams.into_iter().map(Into::into).collect(),
            weights,
        };
        mix.validate()?;
        Ok(mix)
    }

    pub fn validate(&self) -> Result<()> {
        if self.streams.is_empty() || self.streams.len() != self.weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} streams with {} weights",
                self.streams.len(),
                self.weights.len()
            )));
        }
        check_simplex(&self.weights)
    }
}

fn check_simplex(weights: &[f64]) -> Result<()> {
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidArgument(format!("weights {weights:?} are not on the simplex")));
    }
    Ok(())
}

/// How the LM score of a hypothesis is formed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LmPipeline {
    pub forward: Option<StreamMix>,
    pub backward: Option<StreamMix>,
    /// Words outside this set are skipped in the interpolated product.
    #[serde(default)]
    pub vocab: Option<BTreeSet<String>>,
}

impl LmPipeline {
    /// N-gram score from the N-best header only.
    pub fn ngram_only() -> Self {
        LmPipeline::default()
    }

    pub fn streams(&self) -> impl Iterator<Item = &str> {
        self.forward
            .iter()
            .chain(self.backward.iter())
            .flat_map(|m| m.streams.iter().map(String::as_str))
    }
}

/// Per-position linear interpolation `ln(sum_i w_i exp(p_i))`.
pub fn interpolate(streams: &[&[f64]], weights: &[f64]) -> Result<Vec<f64>> {
    if streams.is_empty() || streams.len() != weights.len() {
        return Err(Error::InvalidArgument("stream/weight count mismatch".into()));
    }
    check_simplex(weights)?;
    let len = streams[0].len();
    if streams.iter().any(|s| s.len() != len) {
        return Err(Error::Shape("streams have different lengths".into()));
    }
    Ok((0..len)
        .map(|i| {
            let p: f64 = streams.iter().zip(weights).map(|(s, w)| w * s[i].exp()).sum();
            p.ln()
        })
        .collect())
}

fn stream<'a>(hyp: &'a Hypothesis, name: &str, utt_id: &str, index: usize) -> Result<&'a [f64]> {
    hyp.word_probs
        .get(name)
        .map(Vec::as_slice)
        .ok_or_else(|| Error::MissingStream {
            stream: name.to_string(),
            utt_id: utt_id.to_string(),
            hyp: index,
        })
}

/// Interpolated natural-log probability of every word plus the end token.
pub fn interpolate_word_probs(hyp: &Hypothesis, mix: &StreamMix) -> Result<Vec<f64>> {
    let streams: Vec<&[f64]> = mix
        .streams
        .iter()
        .map(|n| stream(hyp, n, "?", 0))
        .collect::<Result<_>>()?;
    interpolate(&streams, &mix.weights)
}

/// Forward and backward sentence log probabilities are added.
pub fn combine_directions(forward: f64, backward: f64) -> f64 {
    forward + backward
}

fn direction_score(
    hyp: &Hypothesis,
    mix: &StreamMix,
    vocab: Option<&BTreeSet<String>>,
    utt_id: &str,
    index: usize,
) -> Result<f64> {
    let streams: Vec<&[f64]> = mix
        .streams
        .iter()
        .map(|n| stream(hyp, n, utt_id, index))
        .collect::<Result<_>>()?;
    let probs = interpolate(&streams, &mix.weights)?;
    let n = hyp.words.len();
    Ok(probs
        .iter()
        .enumerate()
        .filter(|&(i, _)| i == n || vocab.is_none_or(|v| v.contains(&hyp.words[i])))
        .map(|(_, p)| p)
        .sum())
}

/// LM score of one hypothesis under `pipeline`: the N-gram header score when
/// no streams are configured, otherwise the sum over configured directions
/// of interpolated sentence log probabilities.
pub fn lm_score(hyp: &Hypothesis, pipeline: &LmPipeline, utt_id: &str, index: usize) -> Result<f64> {
    let vocab = pipeline.vocab.as_ref();
    let fwd = pipeline
        .forward
        .as_ref()
        .map(|m| direction_score(hyp, m, vocab, utt_id, index))
        .transpose()?;
    let bwd = pipeline
        .backward
        .as_ref()
        .map(|m| direction_score(hyp, m, vocab, utt_id, index))
        .transpose()?;
    Ok(match (fwd, bwd) {
        (None, None) => hyp.ng_score,
        (Some(f), None) => f,
        (None, Some(b)) => b,
        (Some(f), Some(b)) => combine_directions(f, b),
    })
}

pub fn total_score(hyp: &Hypothesis, w: &ScoreWeights, lm_score: f64) -> f64 {
    w.am * hyp.am_score
        + w.lm * lm_score
        + w.pron * hyp.pron_score
        + w.oov_penalty * hyp.oov_count as f64
        + w.word_insertion_penalty * hyp.words.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub hyp: Hypothesis,
    pub lm_score: f64,
    pub total: f64,
    pub original_rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RescoredList {
    pub utt_id: String,
    /// Sorted by total score, best first.
    pub entries: Vec<Scored>,
}

impl RescoredList {
    pub fn best(&self) -> &Scored {
        &self.entries[0]
    }

    pub fn totals(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.total).collect()
    }

    pub fn into_nbest(self) -> NBestList {
        NBestList {
            utt_id: self.utt_id,
            hyps: self.entries.into_iter().map(|e| e.hyp).collect(),
        }
    }
}

/// Re-ranks by total score, best first; equal totals keep their original order.
pub fn rescore(list: &NBestList, weights: &ScoreWeights, pipeline: &LmPipeline) -> Result<RescoredList> {
    let mut entries: Vec<Scored> = list
        .hyps
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let lm = lm_score(h, pipeline, &list.utt_id, i)?;
            Ok(Scored {
                hyp: h.clone(),
                lm_score: lm,
                total: total_score(h, weights, lm),
                original_rank: i,
            })
        })
        .collect::<Result<_>>()?;
    entries.sort_by(|a, b| b.total.total_cmp(&a.total));
    Ok(RescoredList {
        utt_id: list.utt_id.clone(),
        entries,
    })
}
