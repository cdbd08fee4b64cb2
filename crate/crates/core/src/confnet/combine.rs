use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{finish_slot, io, null_prob, weighted_align, ConfusionNetwork, Slot, Step, NULL_WORD, SUM_TOL};
use crate::error::{Error, Result};
use crate::scoring::{count_errors, ErrorCounts, Transcripts};

const EM_TOL: f64 = 1e-6;
const EM_MAX_ITERS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSet {
    pub members: Vec<String>,
    pub weights: Vec<f64>,
}

impl SystemSet {
    pub fn new(members: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if members.len() != weights.len() || members.is_empty() {
            return Err(Error::InvalidArgument(format!("{} members with {} weights", members.len(), weights.len())));
        }
        if members.iter().collect::<BTreeSet<_>>().len() != members.len() {
            return Err(Error::InvalidArgument("duplicate system in set".into()));
        }
        check_weights(&weights)?;
        Ok(SystemSet { members, weights })
    }
}

fn check_weights(w: &[f64]) -> Result<()> {
    let sum: f64 = w.iter().sum();
    if w.is_empty() || w.iter().any(|v| !(*v >= 0.0)) || (sum - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidArgument(format!("system weights {w:?} are not on the simplex")));
    }
    Ok(())
}

fn overlap(a: &Slot, b: &Slot) -> f64 {
    a.iter().map(|(w, p)| p.min(b.get(w).copied().unwrap_or(0.0))).sum()
}

/// Systems with positive weight, heaviest first, then by serialized network.
fn canonical_order(cns: &[&ConfusionNetwork], weights: &[f64]) -> Vec<usize> {
    let keys: Vec<String> = cns.iter().map(|cn| io::to_string(cn)).collect();
    let mut order: Vec<usize> = (0..cns.len()).filter(|&k| weights[k] > 0.0).collect();
    order.sort_by(|&a, &b| {
        weights[b]
            .total_cmp(&weights[a])
            .then_with(|| keys[a].cmp(&keys[b]))
            .then(a.cmp(&b))
    });
    order
}

/// Incremental slot alignment. Returns, per combined slot, each system's
/// distribution (`None` where the system has no slot, i.e. NULL).
fn align_systems(cns: &[&ConfusionNetwork], weights: &[f64], order: &[usize]) -> Vec<Vec<Option<Slot>>> {
    let n = cns.len();
    let mut acc: Vec<Slot> = Vec::new();
    let mut cols: Vec<Vec<Option<Slot>>> = Vec::new();
    let mut total = 0.0;
    for (pos, &k) in order.iter().enumerate() {
        let w = weights[k];
        let b = &cns[k].slots;
        let scaled = |s: &Slot| -> Slot { s.iter().map(|(x, p)| (x.clone(), w * p)).collect() };
        let column = |s: &Slot| {
            let mut c = vec![None; n];
            c[k] = Some(s.clone());
            c
        };
        if pos == 0 {
            acc = b.iter().map(scaled).collect();
            cols = b.iter().map(column).collect();
            total = w;
            continue;
        }
        let norm: Vec<Slot> = acc.iter().map(|s| s.iter().map(|(x, p)| (x.clone(), p / total)).collect()).collect();
        let steps = weighted_align(
            norm.len(),
            b.len(),
            |i, j| 1.0 - overlap(&norm[i], &b[j]),
            |i| 1.0 - null_prob(&norm[i]),
            |j| 1.0 - null_prob(&b[j]),
        );
        let mut new_acc = Vec::with_capacity(steps.len());
        let mut new_cols = Vec::with_capacity(steps.len());
        let mut old = std::mem::take(&mut acc).into_iter().zip(std::mem::take(&mut cols));
        for step in steps {
            match step {
                Step::Both(_, j) => {
                    let (mut s, mut c) = old.next().unwrap();
                    for (x, p) in &b[j] {
                        *s.entry(x.clone()).or_default() += w * p;
                    }
                    c[k] = Some(b[j].clone());
                    new_acc.push(s);
                    new_cols.push(c);
                }
                Step::OnlyA(_) => {
                    let (mut s, c) = old.next().unwrap();
                    *s.entry(NULL_WORD.to_string()).or_default() += w;
                    new_acc.push(s);
                    new_cols.push(c);
                }
                Step::OnlyB(j) => {
                    let mut s = scaled(&b[j]);
                    *s.entry(NULL_WORD.to_string()).or_default() += total;
                    new_acc.push(s);
                    new_cols.push(column(&b[j]));
                }
            }
        }
        acc = new_acc;
        cols = new_cols;
        total += w;
    }
    cols
}

/// Weighted vote over aligned columns, summed in `order`.
fn mix(col: &[Option<Slot>], weights: &[f64], order: &[usize]) -> Slot {
    let mut s = Slot::new();
    for &k in order {
        match &col[k] {
            Some(d) => {
                for (x, p) in d {
                    *s.entry(x.clone()).or_default() += weights[k] * p;
                }
            }
            None => *s.entry(NULL_WORD.to_string()).or_default() += weights[k],
        }
    }
    s
}

fn check_utt(cns: &[&ConfusionNetwork]) -> Result<()> {
    match cns.split_first() {
        None => Err(Error::Empty("system set")),
        Some((first, rest)) => match rest.iter().find(|c| c.utt_id != first.utt_id) {
            Some(c) => Err(Error::InvalidArgument(format!(
                "networks for different utterances: {} and {}",
                first.utt_id, c.utt_id
            ))),
            None => Ok(()),
        },
    }
}

/// Posterior voting. Networks are aligned incrementally, heaviest system
/// first (slot-vs-slot cost `1 - sum_w min(p, q)`), and each combined slot
/// is the weighted sum of the systems' slot distributions. The result does
/// not depend on the order of the (network, weight) pairs.
pub fn combine(cns: &[&ConfusionNetwork], weights: &[f64]) -> Result<ConfusionNetwork> {
    check_utt(cns)?;
    if weights.len() != cns.len() {
        return Err(Error::InvalidArgument(format!("{} networks with {} weights", cns.len(), weights.len())));
    }
    check_weights(weights)?;
    let order = canonical_order(cns, weights);
    let slots = align_systems(cns, weights, &order)
        .iter()
        .filter_map(|col| finish_slot(mix(col, weights, &order)))
        .collect();
    Ok(ConfusionNetwork {
        utt_id: cns[0].utt_id.clone(),
        slots,
    })
}

fn gather<'a>(systems: &[&'a BTreeMap<String, ConfusionNetwork>], utt: &str) -> Result<Vec<&'a ConfusionNetwork>> {
    systems
        .iter()
        .map(|s| s.get(utt).ok_or_else(|| Error::MissingUtterance(utt.to_string())))
        .collect()
}

/// Word errors of the combined decode over every reference utterance.
pub fn dev_errors(
    systems: &[&BTreeMap<String, ConfusionNetwork>],
    weights: &[f64],
    refs: &Transcripts,
) -> Result<ErrorCounts> {
    let per_utt: Vec<ErrorCounts> = refs
        .par_iter()
        .map(|(utt, reference)| {
            let cn = combine(&gather(systems, utt)?, weights)?;
            Ok(count_errors(reference, &super::decode_cn(&cn)))
        })
        .collect::<Result<_>>()?;
    let mut total = ErrorCounts::default();
    for c in per_utt {
        total += c;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmResult {
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// Observation log-likelihood before the first and after every update.
    pub log_likelihood: Vec<f64>,
}

/// Per-slot reference observations, one probability per system.
fn observations(systems: &[&BTreeMap<String, ConfusionNetwork>], refs: &Transcripts) -> Result<Vec<Vec<f64>>> {
    let k = systems.len();
    let uniform = vec![1.0 / k as f64; k];
    let per_utt: Vec<Vec<Vec<f64>>> = refs
        .par_iter()
        .map(|(utt, reference)| {
            let cns = gather(systems, utt)?;
            check_utt(&cns)?;
            let order = canonical_order(&cns, &uniform);
            let cols = align_systems(&cns, &uniform, &order);
            let (cols, slots): (Vec<_>, Vec<_>) = cols
                .into_iter()
                .filter_map(|c| finish_slot(mix(&c, &uniform, &order)).map(|s| (c, s)))
                .unzip();
            let p = |s: &Slot, w: &str| s.get(w).copied().unwrap_or(0.0);
            let steps = weighted_align(
                slots.len(),
                reference.len(),
                |i, j| 1.0 - p(&slots[i], &reference[j]),
                |i| 1.0 - null_prob(&slots[i]),
                |_| 1.0,
            );
            let obs = steps
                .into_iter()
                .filter_map(|step| {
                    let (i, word) = match step {
                        Step::Both(i, j) => (i, reference[j].as_str()),
                        Step::OnlyA(i) => (i, NULL_WORD),
                        Step::OnlyB(_) => return None,
                    };
                    let probs: Vec<f64> = cols[i]
                        .iter()
                        .map(|d| match d {
                            Some(d) => p(d, word),
                            None => f64::from(u8::from(word == NULL_WORD)),
                        })
                        .collect();
                    probs.iter().any(|&v| v > 0.0).then_some(probs)
                })
                .collect();
            Ok(obs)
        })
        .collect::<Result<_>>()?;
    Ok(per_utt.into_iter().flatten().collect())
}

fn log_likelihood(obs: &[Vec<f64>], w: &[f64]) -> f64 {
    obs.iter()
        .map(|p| p.iter().zip(w).map(|(p, w)| p * w).sum::<f64>().ln())
        .sum()
}

/// Mixture weights over systems by EM. The alignment is fixed by combining
/// with uniform weights; the reference is aligned to that network and every
/// slot yields an observation (the reference word, or NULL for an unmatched
/// slot) with per-system probabilities `p_k`. The updates maximize
/// `sum log sum_k w_k p_k`.
pub fn em_weights(systems: &[&BTreeMap<String, ConfusionNetwork>], refs: &Transcripts) -> Result<EmResult> {
    if systems.is_empty() {
        return Err(Error::Empty("system set"));
    }
    let obs = observations(systems, refs)?;
    if obs.is_empty() {
        return Err(Error::Empty("slots with reference coverage"));
    }
    let k = systems.len();
    let mut w = vec![1.0 / k as f64; k];
    let mut trace = vec![log_likelihood(&obs, &w)];
    let mut iterations = 0;
    while iterations < EM_MAX_ITERS {
        let mut resp = vec![0.0; k];
        for p in &obs {
            let z: f64 = p.iter().zip(&w).map(|(p, w)| p * w).sum();
            for (r, (p, w)) in resp.iter_mut().zip(p.iter().zip(&w)) {
                *r += p * w / z;
            }
        }
        let n = obs.len() as f64;
        let next: Vec<f64> = resp.iter().map(|r| r / n).collect();
        let delta = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        w = next;
        iterations += 1;
        trace.push(log_likelihood(&obs, &w));
        debug_assert!(trace[iterations] >= trace[iterations - 1] - 1e-9 * trace[iterations - 1].abs().max(1.0));
        if delta < EM_TOL {
            break;
        }
    }
    Ok(EmResult {
        weights: w,
        iterations,
        log_likelihood: trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub members: Vec<String>,
    pub weights: Vec<f64>,
    pub errors: ErrorCounts,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyResult {
    pub set: SystemSet,
    pub errors: ErrorCounts,
    pub best_single: ErrorCounts,
    /// Best trial of every round, accepted or not.
    pub steps: Vec<GreedyStep>,
}

/// Greedy forward selection. Starts from the lowest-error single system;
/// each round tries every remaining candidate with EM weights smoothed
/// towards the previous weights, `mu * w_em + (1 - mu) * [w_prev, 0]`, and
/// keeps the best trial if it strictly lowers dev errors.
pub fn greedy_select(
    candidates: &[(String, BTreeMap<String, ConfusionNetwork>)],
    refs: &Transcripts,
    mu: f64,
) -> Result<GreedyResult> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate systems"));
    }
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidArgument(format!("smoothing {mu} outside [0, 1]")));
    }
    if candidates.iter().map(|(n, _)| n).collect::<BTreeSet<_>>().len() != candidates.len() {
        return Err(Error::InvalidArgument("duplicate candidate name".into()));
    }
    let singles: Vec<ErrorCounts> = candidates
        .par_iter()
        .map(|(_, cns)| dev_errors(&[cns], &[1.0], refs))
        .collect::<Result<_>>()?;
    let seed = (0..candidates.len())
        .min_by_key(|&i| (singles[i].errors(), i))
        .unwrap();
    let best_single = singles[seed];
    let mut chosen = vec![seed];
    let mut weights = vec![1.0];
    let mut errors = best_single;
    let mut steps = vec![GreedyStep {
        members: vec![candidates[seed].0.clone()],
        weights: weights.clone(),
        errors,
        accepted: true,
    }];
    loop {
        let remaining: Vec<usize> = (0..candidates.len()).filter(|i| !chosen.contains(i)).collect();
        if remaining.is_empty() {
            break;
        }
        let trials: Vec<(Vec<f64>, ErrorCounts)> = remaining
            .par_iter()
            .map(|&c| {
                let idx: Vec<usize> = chosen.iter().copied().chain([c]).collect();
                let systems: Vec<&BTreeMap<String, ConfusionNetwork>> = idx.iter().map(|&i| &candidates[i].1).collect();
                let em = em_weights(&systems, refs)?;
                let w: Vec<f64> = em
                    .weights
                    .iter()
                    .zip(weights.iter().chain([&0.0]))
                    .map(|(e, p)| mu * e + (1.0 - mu) * p)
                    .collect();
                let e = dev_errors(&systems, &w, refs)?;
                Ok((w, e))
            })
            .collect::<Result<_>>()?;
        let best = (0..trials.len())
            .min_by_key(|&t| (trials[t].1.errors(), remaining[t]))
            .unwrap();
        let (w, e) = trials[best].clone();
        let accepted = e.errors() < errors.errors();
        let members = chosen
            .iter()
            .chain([&remaining[best]])
            .map(|&i| candidates[i].0.clone())
            .collect();
        steps.push(GreedyStep { members, weights: w.clone(), errors: e, accepted });
        if !accepted {
            break;
        }
        chosen.push(remaining[best]);
        weights = w;
        errors = e;
    }
    let set = SystemSet::new(chosen.iter().map(|&i| candidates[i].0.clone()).collect(), weights)?;
    Ok(GreedyResult {
        set,
        errors,
        best_single,
        steps,
    })
}
