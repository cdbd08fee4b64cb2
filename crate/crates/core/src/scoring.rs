//! Word alignment and word error rate.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Match { reference: usize, hypothesis: usize },
    Substitution { reference: usize, hypothesis: usize },
    Deletion { reference: usize },
    Insertion { hypothesis: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub reference_words: usize,
}

impl ErrorCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// `None` when there are no reference words.
    pub fn wer(&self) -> Option<f64> {
        (self.reference_words > 0).then(|| self.errors() as f64 / self.reference_words as f64)
    }
}

impl AddAssign for ErrorCounts {
    fn add_assign(&mut self, o: Self) {
        self.substitutions += o.substitutions;
        self.deletions += o.deletions;
        self.insertions += o.insertions;
        self.reference_words += o.reference_words;
    }
}

/// Minimum edit distance alignment with unit costs. Among optimal scripts,
/// the backtrace prefers substitution/match, then deletion, then insertion.
pub fn align_words<S: AsRef<str>, T: AsRef<str>>(reference: &[S], hypothesis: &[T]) -> Vec<EditOp> {
    let (n, m) = (reference.len(), hypothesis.len());
    let width = m + 1;
    let mut d = vec![0usize; (n + 1) * width];
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        d[i * width] = i;
        for j in 1..=m {
            let sub = d[(i - 1) * width + j - 1] + usize::from(reference[i - 1].as_ref() != hypothesis[j - 1].as_ref());
            let del = d[(i - 1) * width + j] + 1;
            let ins = d[i * width + j - 1] + 1;
            d[i * width + j] = sub.min(del).min(ins);
        }
    }
    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * width + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1].as_ref() == hypothesis[j - 1].as_ref();
            if d[(i - 1) * width + j - 1] + usize::from(!same) == here {
                ops.push(if same {
                    EditOp::Match { reference: i - 1, hypothesis: j - 1 }
                } else {
                    EditOp::Substitution { reference: i - 1, hypothesis: j - 1 }
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * width + j] + 1 == here {
            ops.push(EditOp::Deletion { reference: i - 1 });
            i -= 1;
        } else {
            ops.push(EditOp::Insertion { hypothesis: j - 1 });
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

pub fn count_errors<S: AsRef<str>, T: AsRef<str>>(reference: &[S], hypothesis: &[T]) -> ErrorCounts {
    let mut c = ErrorCounts {
        reference_words: reference.len(),
        ..Default::default()
    };
    for op in align_words(reference, hypothesis) {
        match op {
            EditOp::Match { .. } => {}
            EditOp::Substitution { .. } => c.substitutions += 1,
            EditOp::Deletion { .. } => c.deletions += 1,
            EditOp::Insertion { .. } => c.insertions += 1,
        }
    }
    c
}

pub fn edit_distance<S: AsRef<str>, T: AsRef<str>>(reference: &[S], hypothesis: &[T]) -> usize {
    count_errors(reference, hypothesis).errors()
}

pub type Transcripts = BTreeMap<String, Vec<String>>;

/// Sums error counts over utterances; every reference utterance must have
/// a hypothesis and vice versa.
pub fn corpus_wer(refs: &Transcripts, hyps: &Transcripts) -> Result<ErrorCounts> {
    if let Some(extra) = hyps.keys().find(|k| !refs.contains_key(*k)) {
        return Err(Error::MissingUtterance(format!("{extra} (no reference)")));
    }
    let mut total = ErrorCounts::default();
    for (utt, r) in refs {
        let h = hyps.get(utt).ok_or_else(|| Error::MissingUtterance(utt.clone()))?;
        total += count_errors(r, h);
    }
    Ok(total)
}

/// Transcript file: `utt_id w1 w2 ...` per line, whitespace tokenized.
pub fn read_transcripts<R: BufRead>(reader: R) -> Result<Transcripts> {
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let mut toks = line.split_whitespace();
        let Some(utt) = toks.next() else { continue };
        if out.insert(utt.to_string(), toks.map(str::to_string).collect()).is_some() {
            return Err(Error::parse(format!("transcript line {}", i + 1), format!("duplicate utterance {utt}")));
        }
    }
    Ok(out)
}

pub fn write_transcripts<W: std::io::Write>(mut w: W, t: &Transcripts) -> Result<()> {
    for (utt, words) in t {
        if words.is_empty() {
            writeln!(w, "{utt}")?;
        } else {
            writeln!(w, "{utt} {}", words.join(" "))?;
        }
    }
    Ok(())
}

pub fn tokenize(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}
