//! Denominator acceptor compilation.
//!
//! Graph states are the histories of a [`MixedHistoryLm`] (each emitting
//! state is entered only through arcs labeled with the last senone of its
//! history) plus a non-emitting start state. Frame-level duration comes from
//! per-senone self-loops counted from the alignments; leaving a state costs
//! `1 - self_loop` times the LM probability of the next senone.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::senone_lm::{AlignedUtterance, HistoryState, Inventory, MixedHistoryLm, SenoneId, Successor};

/// Self-loop probability for senones that never have a successor frame.
pub const DEFAULT_SELF_LOOP: f64 = 0.5;

/// Outgoing mass tolerance used by [`validate`].
pub const STOCHASTIC_TOL: f64 = 1e-10;

/// Per-senone HMM self-loop probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    self_loop: BTreeMap<SenoneId, f64>,
}

impl TransitionModel {
    pub fn from_self_loops(self_loop: BTreeMap<SenoneId, f64>) -> Result<Self> {
        if let Some((s, p)) = self_loop.iter().find(|(_, p)| !(0.0..1.0).contains(*p)) {
            return Err(Error::InvalidArgument(format!("self-loop {p} for senone {s} outside [0,1)")));
        }
        Ok(TransitionModel { self_loop })
    }

    pub fn self_loop(&self, s: SenoneId) -> Result<f64> {
        self.self_loop.get(&s).copied().ok_or(Error::NoTransitionStats(s))
    }

    pub fn exit(&self, s: SenoneId) -> Result<f64> {
        Ok(1.0 - self.self_loop(s)?)
    }

    pub fn senones(&self) -> impl Iterator<Item = SenoneId> + '_ {
        self.self_loop.keys().copied()
    }

    /// One `senone self_loop` line per senone.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for (s, p) in &self.self_loop {
            writeln!(w, "{s} {p}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let loc = || format!("transition line {}", i + 1);
            let mut it = line.split_whitespace();
            let s: SenoneId = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::parse(loc(), "bad senone"))?;
            let p: f64 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::parse(loc(), "bad probability"))?;
            map.insert(s, p);
        }
        TransitionModel::from_self_loops(map)
    }
}

/// Counts `self_loop(s) = #(s followed by s) / #(s followed by any frame)`.
///
/// A senone seen only on utterance-final frames gets [`DEFAULT_SELF_LOOP`].
/// A senone that is never seen leaving its own run is treated as if the
/// utterance end were one exit observation, keeping the estimate below 1.
pub fn count_transitions(corpora: &[AlignedUtterance]) -> Result<TransitionModel> {
    if corpora.is_empty() {
        return Err(Error::Empty("training corpus"));
    }
    // (self-loop count, successor-frame count)
    let mut counts: BTreeMap<SenoneId, (u64, u64)> = BTreeMap::new();
    for utt in corpora {
        for w in utt.frames.windows(2) {
            let e = counts.entry(w[0]).or_default();
            e.1 += 1;
            if w[1] == w[0] {
                e.0 += 1;
            }
        }
        if let Some(&last) = utt.frames.last() {
            counts.entry(last).or_default();
        }
    }
    let self_loop = counts
        .into_iter()
        .map(|(s, (stay, total))| {
            let p = if total == 0 {
                DEFAULT_SELF_LOOP
            } else if stay == total {
                stay as f64 / (total + 1) as f64
            } else {
                stay as f64 / total as f64
            };
            (s, p)
        })
        .collect();
    Ok(TransitionModel { self_loop })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub src: u32,
    pub dst: u32,
    pub senone: SenoneId,
    pub log_weight: f64,
}

/// Sparse frame-level acceptor. Arcs are stored grouped by source state
/// (sorted by `(src, senone, dst)`), with a second index grouped by
/// destination for gather-style recursions.
#[derive(Debug, Clone, PartialEq)]
pub struct DenominatorFsa {
    num_states: usize,
    start: u32,
    arcs: Vec<Arc>,
    out_offsets: Vec<usize>,
    in_arcs: Vec<u32>,
    in_offsets: Vec<usize>,
    finals: Vec<f64>,
}

impl DenominatorFsa {
    /// `finals` holds natural-log final weights, `-inf` for non-final states.
    pub fn new(num_states: usize, start: u32, mut arcs: Vec<Arc>, finals: Vec<f64>) -> Result<Self> {
        if num_states == 0 || start as usize >= num_states {
            return Err(Error::InvalidArgument(format!("start {start} invalid for {num_states} states")));
        }
        if finals.len() != num_states {
            return Err(Error::Shape(format!("{} final weights for {num_states} states", finals.len())));
        }
        if let Some(a) = arcs
            .iter()
            .find(|a| a.src as usize >= num_states || a.dst as usize >= num_states)
        {
            return Err(Error::InvalidArgument(format!("arc {}->{} out of range", a.src, a.dst)));
        }
        if arcs.iter().any(|a| a.log_weight.is_nan()) || finals.iter().any(|f| f.is_nan()) {
            return Err(Error::NonFinite("graph weights"));
        }
        arcs.sort_by(|a, b| (a.src, a.senone, a.dst).cmp(&(b.src, b.senone, b.dst)));

        let mut out_offsets = vec![0usize; num_states + 1];
        for a in &arcs {
            out_offsets[a.src as usize + 1] += 1;
        }
        for i in 0..num_states {
            out_offsets[i + 1] += out_offsets[i];
        }
        let mut in_arcs: Vec<u32> = (0..arcs.len() as u32).collect();
        in_arcs.sort_by_key(|&i| (arcs[i as usize].dst, i));
        let mut in_offsets = vec![0usize; num_states + 1];
        for a in &arcs {
            in_offsets[a.dst as usize + 1] += 1;
        }
        for i in 0..num_states {
            in_offsets[i + 1] += in_offsets[i];
        }
        Ok(DenominatorFsa {
            num_states,
            start,
            arcs,
            out_offsets,
            in_arcs,
            in_offsets,
            finals,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn start(&self) -> u32 {
        self.start
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn outgoing(&self, state: u32) -> &[Arc] {
        let s = state as usize;
        &self.arcs[self.out_offsets[s]..self.out_offsets[s + 1]]
    }

    /// Indices into [`arcs`](Self::arcs) of the arcs entering `state`.
    pub fn incoming(&self, state: u32) -> &[u32] {
        let s = state as usize;
        &self.in_arcs[self.in_offsets[s]..self.in_offsets[s + 1]]
    }

    pub fn final_log_weight(&self, state: u32) -> f64 {
        self.finals[state as usize]
    }

    pub fn finals(&self) -> &[f64] {
        &self.finals
    }

    /// Largest arc label plus one, i.e. the minimum score-matrix width.
    pub fn label_bound(&self) -> usize {
        self.arcs.iter().map(|a| a.senone as usize + 1).max().unwrap_or(0)
    }

    /// Label shared by all arcs entering `state`, if that label is unique.
    pub fn state_senone(&self, state: u32) -> Option<SenoneId> {
        let mut labels = self.incoming(state).iter().map(|&i| self.arcs[i as usize].senone);
        let first = labels.next()?;
        labels.all(|l| l == first).then_some(first)
    }

    /// Graph file: `states N start S`, then `src dst senone logweight` arc
    /// lines, then `final state logweight` lines.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "states {} start {}", self.num_states, self.start)?;
        for a in &self.arcs {
            writeln!(w, "{} {} {} {:.16e}", a.src, a.dst, a.senone, a.log_weight)?;
        }
        for (s, &f) in self.finals.iter().enumerate() {
            if f > f64::NEG_INFINITY {
                writeln!(w, "final {s} {f:.16e}")?;
            }
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (num_states, start) = match lines.next() {
            Some((_, line)) => {
                let line = line?;
                let f: Vec<&str> = line.split_whitespace().collect();
                match f.as_slice() {
                    ["states", n, "start", s] => (
                        n.parse::<usize>().map_err(|_| Error::parse("graph header", "bad state count"))?,
                        s.parse::<u32>().map_err(|_| Error::parse("graph header", "bad start state"))?,
                    ),
                    _ => return Err(Error::parse("graph header", format!("unexpected '{line}'"))),
                }
            }
            None => return Err(Error::parse("graph header", "empty file")),
        };
        let mut arcs = Vec::new();
        let mut finals = vec![f64::NEG_INFINITY; num_states];
        for (i, line) in lines {
            let line = line?;
            let loc = || format!("graph line {}", i + 1);
            let f: Vec<&str> = line.split_whitespace().collect();
            let num = |t: &str| t.parse::<u32>().map_err(|_| Error::parse(loc(), format!("bad integer '{t}'")));
            let real = |t: &str| t.parse::<f64>().map_err(|_| Error::parse(loc(), format!("bad weight '{t}'")));
            match f.as_slice() {
                [] => continue,
                ["final", s, w] => {
                    let s = num(s)? as usize;
                    if s >= num_states {
                        return Err(Error::parse(loc(), "final state out of range"));
                    }
                    finals[s] = real(w)?;
                }
                [src, dst, senone, w] => arcs.push(Arc {
                    src: num(src)?,
                    dst: num(dst)?,
                    senone: num(senone)?,
                    log_weight: real(w)?,
                }),
                _ => return Err(Error::parse(loc(), format!("unexpected '{line}'"))),
            }
        }
        DenominatorFsa::new(num_states, start, arcs, finals)
    }
}

/// Builds the acceptor from the LM and transition model. State 0 is the
/// start state; emitting states are numbered in breadth-first order.
pub fn compile(lm: &MixedHistoryLm, tm: &TransitionModel, inv: &Inventory) -> Result<DenominatorFsa> {
    if lm.num_histories() == 0 {
        return Err(Error::Empty("language model"));
    }
    let begin = HistoryState::begin();
    let mut ids: HashMap<HistoryState, u32> = HashMap::new();
    let mut order: Vec<HistoryState> = Vec::new();
    let mut queue = VecDeque::new();
    ids.insert(begin.clone(), 0);
    order.push(begin.clone());
    queue.push_back(begin);

    let mut arcs = Vec::new();
    let mut finals = Vec::new();
    let mut dangling = Vec::new();

    while let Some(h) = queue.pop_front() {
        let src = ids[&h];
        let row = match lm.row(&h) {
            Some(row) => row,
            None => {
                dangling.push(h.to_string());
                finals.push(f64::NEG_INFINITY);
                continue;
            }
        };
        let exit = match h.last_senone() {
            Some(s) => {
                let stay = tm.self_loop(s)?;
                if stay > 0.0 {
                    arcs.push(Arc { src, dst: src, senone: s, log_weight: stay.ln() });
                }
                1.0 - stay
            }
            None => 1.0,
        };
        let mut final_weight = f64::NEG_INFINITY;
        for (succ, _, p) in row.iter() {
            match succ {
                Successor::End => final_weight = (exit * p).ln(),
                Successor::Senone(s) => {
                    let next = h.advance(s, inv, lm.max_history())?;
                    let dst = match ids.get(&next) {
                        Some(&d) => d,
                        None => {
                            let d = order.len() as u32;
                            ids.insert(next.clone(), d);
                            order.push(next.clone());
                            queue.push_back(next);
                            d
                        }
                    };
                    arcs.push(Arc { src, dst, senone: s, log_weight: (exit * p).ln() });
                }
            }
        }
        finals.push(final_weight);
    }
    if !dangling.is_empty() {
        return Err(Error::DanglingHistories(dangling));
    }
    DenominatorFsa::new(order.len(), 0, arcs, finals)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Finding {
    /// Outgoing arc mass plus final weight differs from 1.
    Stochasticity { state: u32, mass: f64 },
    Unreachable { state: u32 },
    /// No path from this state reaches a final state.
    DeadEnd { state: u32 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.findings.is_empty()
    }
}

pub fn validate(fsa: &DenominatorFsa) -> ValidationReport {
    let n = fsa.num_states();
    let mut findings = Vec::new();
    for s in 0..n as u32 {
        let final_mass = fsa.final_log_weight(s).exp();
        let mass: f64 = fsa.outgoing(s).iter().map(|a| a.log_weight.exp()).sum::<f64>() + final_mass;
        if (mass - 1.0).abs() > STOCHASTIC_TOL {
            findings.push(Finding::Stochasticity { state: s, mass });
        }
    }

    let mut reached = vec![false; n];
    let mut stack = vec![fsa.start()];
    reached[fsa.start() as usize] = true;
    while let Some(s) = stack.pop() {
        for a in fsa.outgoing(s) {
            if !reached[a.dst as usize] {
                reached[a.dst as usize] = true;
                stack.push(a.dst);
            }
        }
    }

    let mut live = vec![false; n];
    let mut stack: Vec<u32> = (0..n as u32)
        .filter(|&s| fsa.final_log_weight(s) > f64::NEG_INFINITY)
        .collect();
    for &s in &stack {
        live[s as usize] = true;
    }
    while let Some(s) = stack.pop() {
        for &i in fsa.incoming(s) {
            let src = fsa.arcs()[i as usize].src;
            if !live[src as usize] {
                live[src as usize] = true;
                stack.push(src);
            }
        }
    }

    for s in 0..n {
        if !reached[s] {
            findings.push(Finding::Unreachable { state: s as u32 });
        }
        if !live[s] {
            findings.push(Finding::DeadEnd { state: s as u32 });
        }
    }
    ValidationReport { findings }
}
