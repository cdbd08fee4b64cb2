//! Confusion networks built from rescored N-best lists, posterior-voting
//! system combination, EM system weights and greedy system selection.

mod combine;
mod io;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nbest::RescoredList;

pub use combine::{combine, dev_errors, em_weights, greedy_select, EmResult, GreedyResult, GreedyStep, SystemSet};
pub use io::{read_cns, write_cns};

/// Spelling of the empty word in slots and files.
pub const NULL_WORD: &str = "*DELETE*";
pub const DEFAULT_POSTERIOR_SCALE: f64 = 0.1;
pub const DEFAULT_SMOOTHING: f64 = 0.5;

const SUM_TOL: f64 = 1e-9;

pub type Slot = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionNetwork {
    pub utt_id: String,
    pub slots: Vec<Slot>,
}

impl ConfusionNetwork {
    /// Checks that every slot sums to one and is not a pure NULL slot.
    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.slots.iter().enumerate() {
            let sum: f64 = s.values().sum();
            if (sum - 1.0).abs() > SUM_TOL || s.values().any(|p| !(*p >= 0.0)) {
                return Err(Error::InvalidArgument(format!("{} slot {i} sums to {sum}", self.utt_id)));
            }
            if s.keys().all(|w| w == NULL_WORD) {
                return Err(Error::InvalidArgument(format!("{} slot {i} holds only NULL", self.utt_id)));
            }
        }
        Ok(())
    }

    pub fn prob(&self, slot: usize, word: &str) -> f64 {
        self.slots[slot].get(word).copied().unwrap_or(0.0)
    }
}

pub(crate) fn null_prob(slot: &Slot) -> f64 {
    slot.get(NULL_WORD).copied().unwrap_or(0.0)
}

/// Normalizes a slot and drops zero entries; `None` for pure-NULL slots.
pub(crate) fn finish_slot(mut slot: Slot) -> Option<Slot> {
    slot.retain(|_, p| *p > 0.0);
    let sum: f64 = slot.values().sum();
    if sum <= 0.0 || slot.keys().all(|w| w == NULL_WORD) {
        return None;
    }
    for p in slot.values_mut() {
        *p /= sum;
    }
    Some(slot)
}

/// Softmax of `scale * total`.
pub fn hyp_posteriors(totals: &[f64], scale: f64) -> Result<Vec<f64>> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!("posterior scale {scale} must be positive")));
    }
    if totals.is_empty() {
        return Err(Error::Empty("hypothesis scores"));
    }
    let max = totals.iter().map(|t| scale * t).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NonFinite("hypothesis scores"));
    }
    let e: Vec<f64> = totals.iter().map(|t| (scale * t - max).exp()).collect();
    let z: f64 = e.iter().sum();
    Ok(e.into_iter().map(|v| v / z).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Step {
    Both(usize, usize),
    OnlyA(usize),
    OnlyB(usize),
}

/// Minimum-cost alignment of two sequences. On equal cost the backtrace
/// prefers a pairing, then skipping an `a` item, then skipping a `b` item.
pub(crate) fn weighted_align(
    n: usize,
    m: usize,
    pair: impl Fn(usize, usize) -> f64,
    only_a: impl Fn(usize) -> f64,
    only_b: impl Fn(usize) -> f64,
) -> Vec<Step> {
    const EPS: f64 = 1e-12;
    let w = m + 1;
    let mut d = vec![0.0f64; (n + 1) * w];
    for j in 1..=m {
        d[j] = d[j - 1] + only_b(j - 1);
    }
    for i in 1..=n {
        d[i * w] = d[(i - 1) * w] + only_a(i - 1);
        for j in 1..=m {
            let p = d[(i - 1) * w + j - 1] + pair(i - 1, j - 1);
            let a = d[(i - 1) * w + j] + only_a(i - 1);
            let b = d[i * w + j - 1] + only_b(j - 1);
            d[i * w + j] = p.min(a).min(b);
        }
    }
    let mut steps = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 && (d[(i - 1) * w + j - 1] + pair(i - 1, j - 1) - here).abs() <= EPS {
            steps.push(Step::Both(i - 1, j - 1));
            i -= 1;
            j -= 1;
        } else if i > 0 && (j == 0 || (d[(i - 1) * w + j] + only_a(i - 1) - here).abs() <= EPS) {
            steps.push(Step::OnlyA(i - 1));
            i -= 1;
        } else {
            steps.push(Step::OnlyB(j - 1));
            j -= 1;
        }
    }
    steps.reverse();
    steps
}

/// Builds a network from hypotheses in the given order with their
/// posteriors. The first hypothesis seeds the slots; each later one is
/// aligned to the current network (word-vs-slot cost `1 - P(word)`, skipping
/// a slot `1 - P(NULL)`, a new slot 1) and its posterior added.
pub fn build_cn_from<S: AsRef<str>>(utt_id: &str, hyps: &[(&[S], f64)]) -> Result<ConfusionNetwork> {
    let Some(((first, p0), rest)) = hyps.split_first() else {
        return Err(Error::Empty("N-best list"));
    };
    if hyps.iter().any(|(_, p)| !(*p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidArgument("hypothesis posteriors must be finite and non-negative".into()));
    }
    // raw word masses; NULL mass is implicit as `mass - sum`
    let mut slots: Vec<Slot> = first
        .iter()
        .map(|w| Slot::from([(w.as_ref().to_string(), *p0)]))
        .collect();
    let mut mass = *p0;
    for (words, p) in rest {
        let prob = |s: &Slot, w: &str| {
            if mass > 0.0 {
                s.get(w).copied().unwrap_or(0.0) / mass
            } else {
                0.0
            }
        };
        let null = |s: &Slot| {
            if mass > 0.0 {
                (1.0 - s.values().sum::<f64>() / mass).max(0.0)
            } else {
                1.0
            }
        };
        let steps = weighted_align(
            slots.len(),
            words.len(),
            |i, j| 1.0 - prob(&slots[i], words[j].as_ref()),
            |i| 1.0 - null(&slots[i]),
            |_| 1.0,
        );
        let mut next = Vec::with_capacity(steps.len());
        let mut old = std::mem::take(&mut slots).into_iter();
        for step in steps {
            match step {
                Step::Both(_, j) => {
                    let mut s = old.next().unwrap();
                    *s.entry(words[j].as_ref().to_string()).or_default() += p;
                    next.push(s);
                }
                Step::OnlyA(_) => next.push(old.next().unwrap()),
                Step::OnlyB(j) => next.push(Slot::from([(words[j].as_ref().to_string(), *p)])),
            }
        }
        slots = next;
        mass += p;
    }
    if mass <= 0.0 {
        return Err(Error::InvalidArgument("hypothesis posteriors sum to zero".into()));
    }
    let slots = slots
        .into_iter()
        .filter_map(|mut s| {
            let null = mass - s.values().sum::<f64>();
            if null > 0.0 {
                s.insert(NULL_WORD.to_string(), null);
            }
            finish_slot(s)
        })
        .collect();
    Ok(ConfusionNetwork {
        utt_id: utt_id.to_string(),
        slots,
    })
}

/// Network for a rescored list, hypotheses weighted by `hyp_posteriors`.
pub fn build_cn(list: &RescoredList, scale: f64) -> Result<ConfusionNetwork> {
    let post = hyp_posteriors(&list.totals(), scale)?;
    let hyps: Vec<(&[String], f64)> = list
        .entries
        .iter()
        .zip(&post)
        .map(|(e, &p)| (e.hyp.words.as_slice(), p))
        .collect();
    build_cn_from(&list.utt_id, &hyps)
}

/// Highest-posterior entry per slot, lexicographically first on ties; NULL
/// emits nothing.
pub fn decode_cn(cn: &ConfusionNetwork) -> Vec<String> {
    cn.slots
        .iter()
        .filter_map(|s| {
            let mut best: Option<(&String, f64)> = None;
            for (w, &p) in s {
                if best.is_none_or(|(_, bp)| p > bp) {
                    best = Some((w, p));
                }
            }
            best.map(|(w, _)| w).filter(|w| *w != NULL_WORD).cloned()
        })
        .collect()
}
