//! N-best and stream files. Scores are log10 on disk.
//!
//! N-best: a header `utt_id N` followed by `N` lines `am ng pron oov w1 .. wn`.
//! Stream: one line `utt_id hyp_index p1 .. p(n+1)` per hypothesis.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::str::FromStr;

use super::{Hypothesis, NBestList};
use crate::error::{Error, Result};

const LN10: f64 = std::f64::consts::LN_10;

fn num<T: FromStr>(tok: Option<&str>, what: &str, loc: &dyn Fn() -> String) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::parse(loc(), format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::parse(loc(), format!("bad {what} {tok:?}")))
}

fn log10_to_ln(v: f64) -> f64 {
    v * LN10
}

fn ln_to_log10(v: f64) -> f64 {
    v / LN10
}

fn snap(v: f64) -> f64 {
    log10_to_ln(ln_to_log10(v))
}

impl Hypothesis {
    /// Rounds every score to the nearby value that a write and read through
    /// the log10 text formats reproduces bit for bit.
    pub fn snap_to_file_grid(&mut self) {
        for v in [&mut self.am_score, &mut self.ng_score, &mut self.pron_score] {
            *v = snap(*v);
        }
        for v in self.word_probs.values_mut().flatten() {
            *v = snap(*v);
        }
    }
}

pub fn read_nbest<R: BufRead>(reader: R) -> Result<Vec<NBestList>> {
    let mut lines = reader
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()));
    let mut out = Vec::new();
    while let Some((i, header)) = lines.next() {
        let header = header?;
        let loc = || format!("n-best line {}", i + 1);
        let mut toks = header.split_whitespace();
        let utt_id = toks.next().unwrap().to_string();
        let n: usize = num(toks.next(), "hypothesis count", &loc)?;
        if toks.next().is_some() {
            return Err(Error::parse(loc(), "trailing tokens after header"));
        }
        let mut hyps = Vec::with_capacity(n);
        for k in 0..n {
            let (j, line) = lines
                .next()
                .ok_or_else(|| Error::parse(loc(), format!("{utt_id}: expected {n} hypotheses, got {k}")))?;
            let line = line?;
            let loc = || format!("n-best line {}", j + 1);
            let mut toks = line.split_whitespace();
            let am: f64 = num(toks.next(), "am score", &loc)?;
            let ng: f64 = num(toks.next(), "ngram score", &loc)?;
            let pron: f64 = num(toks.next(), "pronunciation score", &loc)?;
            let oov: usize = num(toks.next(), "oov count", &loc)?;
            let words = toks.map(str::to_string).collect();
            hyps.push(
                Hypothesis::new(words, log10_to_ln(am), log10_to_ln(ng), log10_to_ln(pron), oov)
                    .map_err(|e| Error::parse(loc(), e.to_string()))?,
            );
        }
        out.push(NBestList::new(utt_id, hyps).map_err(|e| Error::parse(loc(), e.to_string()))?);
    }
    Ok(out)
}

pub fn write_nbest<W: Write>(mut w: W, lists: &[NBestList]) -> Result<()> {
    for list in lists {
        writeln!(w, "{} {}", list.utt_id, list.hyps.len())?;
        for h in &list.hyps {
            write!(
                w,
                "{} {} {} {}",
                ln_to_log10(h.am_score),
                ln_to_log10(h.ng_score),
                ln_to_log10(h.pron_score),
                h.oov_count
            )?;
            for word in &h.words {
                write!(w, " {word}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Writes stream `name` of every hypothesis.
pub fn write_stream<W: Write>(mut w: W, lists: &[NBestList], name: &str) -> Result<()> {
    for list in lists {
        for (i, h) in list.hyps.iter().enumerate() {
            let probs = h.word_probs.get(name).ok_or_else(|| Error::MissingStream {
                stream: name.to_string(),
                utt_id: list.utt_id.clone(),
                hyp: i,
            })?;
            write!(w, "{} {i}", list.utt_id)?;
            for p in probs {
                write!(w, " {}", ln_to_log10(*p))?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Reads a stream file into `lists` under `name`. Every hypothesis must be
/// covered exactly once.
pub fn attach_stream<R: BufRead>(lists: &mut [NBestList], name: &str, reader: R) -> Result<()> {
    let index: HashMap<&str, usize> = lists.iter().enumerate().map(|(i, l)| (l.utt_id.as_str(), i)).collect();
    let mut values: Vec<Vec<Option<Vec<f64>>>> = lists.iter().map(|l| vec![None; l.hyps.len()]).collect();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let loc = || format!("{name} stream line {}", i + 1);
        let mut toks = line.split_whitespace();
        let Some(utt) = toks.next() else { continue };
        let &li = index
            .get(utt)
            .ok_or_else(|| Error::parse(loc(), format!("unknown utterance {utt}")))?;
        let hi: usize = num(toks.next(), "hypothesis index", &loc)?;
        let slot = values[li]
            .get_mut(hi)
            .ok_or_else(|| Error::parse(loc(), format!("hypothesis {hi} out of range")))?;
        if slot.is_some() {
            return Err(Error::parse(loc(), format!("duplicate entry for {utt} {hi}")));
        }
        let probs = toks
            .map(|t| {
                t.parse::<f64>()
                    .map(log10_to_ln)
                    .map_err(|_| Error::parse(loc(), format!("bad probability {t:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        *slot = Some(probs);
    }
    for (list, vals) in lists.iter_mut().zip(values) {
        for (hi, (h, v)) in list.hyps.iter_mut().zip(vals).enumerate() {
            let v = v.ok_or_else(|| Error::MissingStream {
                stream: name.to_string(),
                utt_id: list.utt_id.clone(),
                hyp: hi,
            })?;
            h.set_stream(name, v)?;
        }
    }
    Ok(())
}
