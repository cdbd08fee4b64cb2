//! CN files: `utt_id num_slots`, then one line per slot of `word:posterior`
//! pairs, NULL spelled `*DELETE*`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::{ConfusionNetwork, Slot};
use crate::error::{Error, Result};

pub(crate) fn to_string(cn: &ConfusionNetwork) -> String {
    let mut s = format!("{} {}\n", cn.utt_id, cn.slots.len());
    for slot in &cn.slots {
        let line: Vec<String> = slot.iter().map(|(w, p)| format!("{w}:{p}")).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

pub fn write_cns<W: Write>(mut w: W, cns: &[ConfusionNetwork]) -> Result<()> {
    for cn in cns {
        w.write_all(to_string(cn).as_bytes())?;
    }
    Ok(())
}

pub fn read_cns<R: BufRead>(reader: R) -> Result<Vec<ConfusionNetwork>> {
    let mut lines = reader.lines().enumerate();
    let mut out = Vec::new();
    while let Some((i, header)) = lines.next() {
        let header = header?;
        if header.trim().is_empty() {
            continue;
        }
        let loc = |i: usize| format!("confusion network line {}", i + 1);
        let mut toks = header.split_whitespace();
        let utt_id = toks.next().unwrap().to_string();
        let n: usize = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(loc(i), "expected `utt_id num_slots`"))?;
        let mut slots = Vec::with_capacity(n);
        for k in 0..n {
            let (j, line) = lines
                .next()
                .ok_or_else(|| Error::parse(loc(i), format!("{utt_id}: expected {n} slots, got {k}")))?;
            let mut slot = Slot::new();
            for tok in line?.split_whitespace() {
                let (w, p) = tok
                    .rsplit_once(':')
                    .ok_or_else(|| Error::parse(loc(j), format!("expected word:posterior, got {tok:?}")))?;
                let p: f64 = p
                    .parse()
                    .map_err(|_| Error::parse(loc(j), format!("bad posterior in {tok:?}")))?;
                if slot.insert(w.to_string(), p).is_some() {
                    return Err(Error::parse(loc(j), format!("duplicate word {w}")));
                }
            }
            slots.push(slot);
        }
        let cn = ConfusionNetwork { utt_id, slots };
        cn.validate().map_err(|e| Error::parse(loc(i), e.to_string()))?;
        out.push(cn);
    }
    Ok(out)
}
