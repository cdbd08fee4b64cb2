use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lm_score, LmPipeline, NBestList, ScoreWeights};
use crate::error::{Error, Result};
use crate::scoring::{count_errors, ErrorCounts};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub passes: usize,
    pub start: ScoreWeights,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            passes: 3,
            start: ScoreWeights::default(),
        }
    }
}

struct Candidate {
    feats: [f64; 5],
    errors: ErrorCounts,
}

struct Prepared {
    lists: Vec<Vec<Candidate>>,
}

fn features(w: &ScoreWeights) -> [f64; 5] {
    [w.lm, w.pron, w.oov_penalty, w.word_insertion_penalty, w.am]
}

fn set(w: &mut ScoreWeights, k: usize, v: f64) {
    match k {
        0 => w.lm = v,
        1 => w.pron = v,
        2 => w.oov_penalty = v,
        _ => w.word_insertion_penalty = v,
    }
}

impl Prepared {
    fn new(dev: &[(NBestList, Vec<String>)], pipeline: &LmPipeline) -> Result<Self> {
        let lists = dev
            .par_iter()
            .map(|(list, reference)| {
                list.hyps
                    .iter()
                    .enumerate()
                    .map(|(i, h)| {
                        Ok(Candidate {
                            feats: [
                                lm_score(h, pipeline, &list.utt_id, i)?,
                                h.pron_score,
                                h.oov_count as f64,
                                h.words.len() as f64,
                                h.am_score,
                            ],
                            errors: count_errors(reference, &h.words),
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Prepared { lists })
    }

    fn errors(&self, w: &ScoreWeights) -> ErrorCounts {
        let coef = features(w);
        let mut total = ErrorCounts::default();
        for list in &self.lists {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (i, c) in list.iter().enumerate() {
                let s: f64 = c.feats.iter().zip(&coef).map(|(f, w)| f * w).sum();
                if s > best_score {
                    best = i;
                    best_score = s;
                }
            }
            total += list[best].errors;
        }
        total
    }
}

/// 1-best error counts over `dev` under `weights`.
pub fn dev_errors(dev: &[(NBestList, Vec<String>)], weights: &ScoreWeights, pipeline: &LmPipeline) -> Result<ErrorCounts> {
    Ok(Prepared::new(dev, pipeline)?.errors(weights))
}

fn coarse_grid() -> Vec<f64> {
    let mut g = vec![0.0];
    for e in -12..=8 {
        let v = 10f64.powf(e as f64 / 4.0);
        g.push(v);
        g.push(-v);
    }
    g
}

fn grid(current: f64, pass: usize) -> Vec<f64> {
    let mut g = coarse_grid();
    g.push(current);
    if pass > 0 && current != 0.0 {
        let step = 4.0 * (1u32 << pass) as f64;
        g.extend((-4..=4).map(|e| current * 10f64.powf(e as f64 / step)));
    }
    g
}

fn better(a: (usize, f64), b: (usize, f64)) -> bool {
    let key = |(e, v): (usize, f64)| (e, v.abs(), v < 0.0);
    let (ka, kb) = (key(a), key(b));
    ka.0 < kb.0 || (ka.0 == kb.0 && (ka.1 < kb.1 || (ka.1 == kb.1 && !ka.2 && kb.2)))
}

/// Coordinate grid search for the weights minimizing 1-best word errors on
/// `dev`. Components are scanned in the order lm, pron, oov, wip; the
/// acoustic weight stays at 1. Each scan takes the lowest-error candidate,
/// preferring smaller magnitude and then positive sign on ties. The current
/// value is always a candidate, so errors never increase.
pub fn optimize_weights(
    dev: &[(NBestList, Vec<String>)],
    pipeline: &LmPipeline,
    opts: &OptimizeOptions,
) -> Result<ScoreWeights> {
    if dev.is_empty() {
        return Err(Error::Empty("dev set"));
    }
    let prep = Prepared::new(dev, pipeline)?;
    let mut w = ScoreWeights { am: 1.0, ..opts.start };
    if !features(&w).iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("start weights"));
    }
    for pass in 0..opts.passes {
        for k in 0..4 {
            let current = features(&w)[k];
            let cands = grid(current, pass);
            let errs: Vec<usize> = cands
                .par_iter()
                .map(|&v| {
                    let mut trial = w;
                    set(&mut trial, k, v);
                    prep.errors(&trial).errors()
                })
                .collect();
            let mut best = (prep.errors(&w).errors(), current);
            for (&v, &e) in cands.iter().zip(&errs) {
                if better((e, v), best) {
                    best = (e, v);
                }
            }
            set(&mut w, k, best.1);
        }
    }
    Ok(w)
}
