use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

#[derive(Debug, Clone, Default)]
struct Context {
    total: u64,
    successors: HashMap<String, u64>,
}

/// Interpolated Witten–Bell N-gram model over a closed vocabulary (training
/// words plus `</s>` and `<unk>`), bottoming out in the uniform distribution.
#[derive(Debug, Clone)]
pub struct WittenBellLm {
    order: usize,
    vocab: BTreeSet<String>,
    contexts: HashMap<Vec<String>, Context>,
}

impl WittenBellLm {
    pub fn train<S: AsRef<str>>(sentences: &[Vec<S>], order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("N-gram order must be at least 1".into()));
        }
        if sentences.is_empty() {
            return Err(Error::Empty("N-gram training text"));
        }
        let mut vocab: BTreeSet<String> = [EOS, UNK].iter().map(|s| s.to_string()).collect();
        let mut contexts: HashMap<Vec<String>, Context> = HashMap::new();
        for s in sentences {
            let mut toks: Vec<String> = vec![BOS.to_string(); order - 1];
            toks.extend(s.iter().map(|w| w.as_ref().to_string()));
            toks.push(EOS.to_string());
            for i in order - 1..toks.len() {
                vocab.insert(toks[i].clone());
                for n in 0..order {
                    let ctx = toks[i - n..i].to_vec();
                    let c = contexts.entry(ctx).or_default();
                    c.total += 1;
                    *c.successors.entry(toks[i].clone()).or_default() += 1;
                }
            }
        }
        Ok(WittenBellLm { order, vocab, contexts })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Predictable tokens (includes `</s>` and `<unk>`).
    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    fn map<'a>(&self, w: &'a str) -> &'a str {
        if self.vocab.contains(w) {
            w
        } else {
            UNK
        }
    }

    /// `P(word | context)` where `context` holds the most recent words last.
    pub fn prob(&self, context: &[String], word: &str) -> f64 {
        let word = self.map(word);
        let keep = context.len().min(self.order - 1);
        let ctx: Vec<String> = context[context.len() - keep..]
            .iter()
            .map(|w| if w == BOS { w.clone() } else { self.map(w).to_string() })
            .collect();
        let mut p = 1.0 / self.vocab.len() as f64;
        for n in 0..=ctx.len() {
            if let Some(c) = self.contexts.get(&ctx[ctx.len() - n..]) {
                let types = c.successors.len() as f64;
                let count = c.successors.get(word).copied().unwrap_or(0) as f64;
                p = (count + types * p) / (c.total as f64 + types);
            }
        }
        p
    }

    /// Natural-log probability of each word and then of `</s>`.
    pub fn word_log_probs<S: AsRef<str>>(&self, words: &[S]) -> Vec<f64> {
        let mut hist: Vec<String> = vec![BOS.to_string(); self.order - 1];
        let mut out = Vec::with_capacity(words.len() + 1);
        for w in words.iter().map(AsRef::as_ref).chain(std::iter::once(EOS)) {
            out.push(self.prob(&hist, w).ln());
            hist.push(w.to_string());
        }
        out
    }

    pub fn sentence_log_prob<S: AsRef<str>>(&self, words: &[S]) -> f64 {
        self.word_log_probs(words).iter().sum()
    }
}
