//! Mixed-history senone language model.
//!
//! Frame-level senone alignments are run-compressed, then every senone is
//! predicted from a history made of the previous phone and the senones
//! already emitted inside the current phone. The model is a plain
//! maximum-likelihood table over those histories, with an explicit
//! end-of-utterance successor so that sequences terminate with
//! well-defined probability.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};

pub type PhoneId = u32;
pub type SenoneId = u32;

/// Maps every senone to its phone and its HMM state position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inventory {
    num_phones: usize,
    senone_phone: Vec<PhoneId>,
    senone_position: Vec<u32>,
}

impl Inventory {
    /// Build from `(phone, position)` entries indexed by senone id.
    pub fn new(entries: Vec<(PhoneId, u32)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("inventory"));
        }
        let num_phones = entries.iter().map(|&(p, _)| p as usize + 1).max().unwrap_or(0);
        let (senone_phone, senone_position) = entries.into_iter().unzip();
        Ok(Inventory {
            num_phones,
            senone_phone,
            senone_position,
        })
    }

    /// Build from `(senone, phone, position)` triples in any order. Senone ids
    /// must be dense from zero.
    pub fn from_triples(triples: &[(SenoneId, PhoneId, u32)]) -> Result<Self> {
        let mut slots: Vec<Option<(PhoneId, u32)>> = vec![None; triples.len()];
        for &(s, p, pos) in triples {
            let slot = slots.get_mut(s as usize).ok_or_else(|| {
                Error::InvalidArgument(format!("senone id {s} is not dense (have {} senones)", triples.len()))
            })?;
            if slot.is_some() {
                return Err(Error::InvalidArgument(format!("senone {s} listed twice")));
            }
            *slot = Some((p, pos));
        }
        Inventory::new(slots.into_iter().map(|e| e.expect("dense ids checked above")).collect())
    }

    pub fn num_senones(&self) -> usize {
        self.senone_phone.len()
    }

    pub fn num_phones(&self) -> usize {
        self.num_phones
    }

    pub fn phone(&self, s: SenoneId) -> Result<PhoneId> {
        self.senone_phone.get(s as usize).copied().ok_or(Error::UnknownSenone(s))
    }

    pub fn position(&self, s: SenoneId) -> Result<u32> {
        self.senone_position.get(s as usize).copied().ok_or(Error::UnknownSenone(s))
    }

    pub fn contains(&self, s: SenoneId) -> bool {
        (s as usize) < self.senone_phone.len()
    }

    /// Inventory file: one `senone_id phone_id position` line per senone.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut triples = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::parse(format!("inventory line {}", lineno + 1), "expected 3 fields"));
            }
            let num = |i: usize| -> Result<u32> {
                fields[i]
                    .parse()
                    .map_err(|_| Error::parse(format!("inventory line {}", lineno + 1), format!("bad integer '{}'", fields[i])))
            };
            triples.push((num(0)?, num(1)?, num(2)?));
        }
        Inventory::from_triples(&triples)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for s in 0..self.num_senones() {
            writeln!(w, "{} {} {}", s, self.senone_phone[s], self.senone_position[s])?;
        }
        Ok(())
    }

    /// True when `next` cannot continue the phone that `last` belongs to:
    /// either the phone changes or the HMM position fails to increase.
    pub fn starts_new_phone(&self, last: Option<SenoneId>, next: SenoneId) -> Result<bool> {
        let next_phone = self.phone(next)?;
        let next_pos = self.position(next)?;
        Ok(match last {
            None => true,
            Some(l) => self.phone(l)? != next_phone || next_pos <= self.position(l)?,
        })
    }
}

/// One utterance of frame-level senone labels (one label per 10 ms frame).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedUtterance {
    pub utt_id: String,
    pub frames: Vec<SenoneId>,
}

impl AlignedUtterance {
    pub fn new(utt_id: impl Into<String>, frames: Vec<SenoneId>, inv: &Inventory) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptyAlignment);
        }
        if let Some(&bad) = frames.iter().find(|&&s| !inv.contains(s)) {
            return Err(Error::UnknownSenone(bad));
        }
        Ok(AlignedUtterance {
            utt_id: utt_id.into(),
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Reads an alignment file: `utt_id<TAB>phone:senone:position ...` per line.
/// Every token is checked against the inventory.
pub fn read_alignments<R: BufRead>(reader: R, inv: &Inventory) -> Result<Vec<AlignedUtterance>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let loc = || format!("alignment line {}", lineno + 1);
        let (utt_id, rest) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(loc(), "missing TAB after utterance id"))?;
        let mut frames = Vec::new();
        for tok in rest.split_whitespace() {
            let parts: Vec<&str> = tok.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::parse(loc(), format!("bad token '{tok}'")));
            }
            let nums: Vec<u32> = parts
                .iter()
                .map(|p| p.parse::<u32>().map_err(|_| Error::parse(loc(), format!("bad token '{tok}'"))))
                .collect::<Result<_>>()?;
            let (phone, senone, pos) = (nums[0], nums[1], nums[2]);
            if inv.phone(senone)? != phone || inv.position(senone)? != pos {
                return Err(Error::parse(loc(), format!("token '{tok}' disagrees with inventory")));
            }
            frames.push(senone);
        }
        out.push(AlignedUtterance::new(utt_id, frames, inv)?);
    }
    Ok(out)
}

pub fn write_alignments<W: Write>(mut w: W, utts: &[AlignedUtterance], inv: &Inventory) -> Result<()> {
    for u in utts {
        write!(w, "{}\t", u.utt_id)?;
        for (i, &s) in u.frames.iter().enumerate() {
            if i > 0 {
                write!(w, " ")?;
            }
            write!(w, "{}:{}:{}", inv.phone(s)?, s, inv.position(s)?)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Conditioning context: previous phone (or utterance begin) and the senones
/// already emitted in the current phone.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HistoryState {
    pub prev_phone: Option<PhoneId>,
    pub current_senones: Vec<SenoneId>,
}

impl HistoryState {
    pub fn begin() -> Self {
        HistoryState {
            prev_phone: None,
            current_senones: Vec::new(),
        }
    }

    pub fn last_senone(&self) -> Option<SenoneId> {
        self.current_senones.last().copied()
    }

    /// History after emitting `next`. `max_len` caps how many in-phone
    /// senones are kept (most recent ones win); `None` keeps them all.
    pub fn advance(&self, next: SenoneId, inv: &Inventory, max_len: Option<usize>) -> Result<HistoryState> {
        let last = self.last_senone();
        let mut h = if inv.starts_new_phone(last, next)? {
            let prev_phone = match last {
                Some(l) => Some(inv.phone(l)?),
                None => self.prev_phone,
            };
            HistoryState {
                prev_phone,
                current_senones: vec![next],
            }
        } else {
            let mut current_senones = self.current_senones.clone();
            current_senones.push(next);
            HistoryState {
                prev_phone: self.prev_phone,
                current_senones,
            }
        };
        if let Some(cap) = max_len {
            let excess = h.current_senones.len().saturating_sub(cap);
            h.current_senones.drain(..excess);
        }
        Ok(h)
    }
}

impl fmt::Display for HistoryState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.prev_phone {
            Some(p) => write!(f, "{p}|")?,
            None => write!(f, "<s>|")?,
        }
        for (i, s) in self.current_senones.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Next symbol predicted by the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Successor {
    Senone(SenoneId),
    End,
}

impl fmt::Display for Successor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Successor::Senone(s) => write!(f, "{s}"),
            Successor::End => write!(f, "</s>"),
        }
    }
}

/// Deletes adjacent duplicates: `[a,a,b,b,b,a]` becomes `[a,b,a]`.
pub fn compress_runs(frames: &[SenoneId]) -> Result<Vec<SenoneId>> {
    if frames.is_empty() {
        return Err(Error::EmptyAlignment);
    }
    let mut out = frames.to_vec();
    out.dedup();
    Ok(out)
}

/// One `(history, next senone)` event per senone of a compressed sequence.
pub fn extract_events(compressed: &[SenoneId], inv: &Inventory) -> Result<Vec<(HistoryState, SenoneId)>> {
    extract_events_capped(compressed, inv, None)
}

pub fn extract_events_capped(
    compressed: &[SenoneId],
    inv: &Inventory,
    max_len: Option<usize>,
) -> Result<Vec<(HistoryState, SenoneId)>> {
    let mut h = HistoryState::begin();
    let mut events = Vec::with_capacity(compressed.len());
    for &s in compressed {
        let next = h.advance(s, inv, max_len)?;
        events.push((std::mem::replace(&mut h, next), s));
    }
    Ok(events)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LmRow {
    total: u64,
    counts: BTreeMap<Successor, u64>,
}

impl LmRow {
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, s: Successor) -> u64 {
        self.counts.get(&s).copied().unwrap_or(0)
    }

    pub fn prob(&self, s: Successor) -> f64 {
        self.count(s) as f64 / self.total as f64
    }

    /// `(successor, count, probability)` in successor order.
    pub fn iter(&self) -> impl Iterator<Item = (Successor, u64, f64)> + '_ {
        self.counts
            .iter()
            .map(move |(&s, &c)| (s, c, c as f64 / self.total as f64))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EstimateOptions {
    /// Cap on the number of in-phone senones kept in a history. `None`
    /// keeps the full mixed history.
    pub max_history: Option<usize>,
}

/// Unsmoothed maximum-likelihood table `P(successor | history)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedHistoryLm {
    rows: BTreeMap<HistoryState, LmRow>,
    max_history: Option<usize>,
}

impl MixedHistoryLm {
    pub fn estimate(corpora: &[AlignedUtterance], inv: &Inventory) -> Result<Self> {
        Self::estimate_with(corpora, inv, EstimateOptions::default())
    }

    pub fn estimate_with(corpora: &[AlignedUtterance], inv: &Inventory, opts: EstimateOptions) -> Result<Self> {
        if corpora.is_empty() {
            return Err(Error::Empty("training corpus"));
        }
        if opts.max_history == Some(0) {
            return Err(Error::InvalidArgument("max_history must be at least 1".into()));
        }
        let per_utt: Vec<(Vec<(HistoryState, SenoneId)>, HistoryState)> = corpora
            .par_iter()
            .map(|u| {
                let compressed = compress_runs(&u.frames)?;
                let events = extract_events_capped(&compressed, inv, opts.max_history)?;
                let (h, s) = events.last().expect("compressed sequence is non-empty");
                let final_history = h.advance(*s, inv, opts.max_history)?;
                Ok((events, final_history))
            })
            .collect::<Result<_>>()?;

        let mut rows: BTreeMap<HistoryState, LmRow> = BTreeMap::new();
        let mut bump = |h: HistoryState, s: Successor| {
            let row = rows.entry(h).or_default();
            row.total += 1;
            *row.counts.entry(s).or_insert(0) += 1;
        };
        for (events, final_history) in per_utt {
            for (h, s) in events {
                bump(h, Successor::Senone(s));
            }
            bump(final_history, Successor::End);
        }
        Ok(MixedHistoryLm {
            rows,
            max_history: opts.max_history,
        })
    }

    /// Builds a model directly from successor counts.
    pub fn from_counts(
        counts: BTreeMap<HistoryState, BTreeMap<Successor, u64>>,
        max_history: Option<usize>,
    ) -> Result<Self> {
        let mut rows = BTreeMap::new();
        for (h, succ) in counts {
            let succ: BTreeMap<Successor, u64> = succ.into_iter().filter(|&(_, c)| c > 0).collect();
            let total: u64 = succ.values().sum();
            if total == 0 {
                return Err(Error::InvalidArgument(format!("history {h} has no successor counts")));
            }
            rows.insert(h, LmRow { total, counts: succ });
        }
        Ok(MixedHistoryLm { rows, max_history })
    }

    pub fn max_history(&self) -> Option<usize> {
        self.max_history
    }

    pub fn num_histories(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, h: &HistoryState) -> Option<&LmRow> {
        self.rows.get(h)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&HistoryState, &LmRow)> {
        self.rows.iter()
    }

    pub fn prob(&self, h: &HistoryState, s: Successor) -> Result<f64> {
        self.rows
            .get(h)
            .map(|row| row.prob(s))
            .ok_or_else(|| Error::UnseenHistory(h.to_string()))
    }

    /// Probability of a whole compressed senone sequence including its
    /// termination. Returns 0 when any history along the way is unseen.
    pub fn sequence_prob(&self, compressed: &[SenoneId], inv: &Inventory) -> Result<f64> {
        let mut h = HistoryState::begin();
        let mut p = 1.0;
        for &s in compressed {
            match self.rows.get(&h) {
                Some(row) => p *= row.prob(Successor::Senone(s)),
                None => return Ok(0.0),
            }
            h = h.advance(s, inv, self.max_history)?;
        }
        Ok(match self.rows.get(&h) {
            Some(row) => p * row.prob(Successor::End),
            None => 0.0,
        })
    }

    /// Text dump, one `history<TAB>next<TAB>prob<TAB>count` line per entry,
    /// sorted lexicographically by line.
    pub fn dump<W: Write>(&self, mut w: W) -> Result<()> {
        let mut lines: Vec<String> = self
            .rows
            .iter()
            .flat_map(|(h, row)| row.iter().map(move |(s, c, p)| format!("{h}\t{s}\t{p}\t{c}")))
            .collect();
        lines.sort();
        for line in lines {
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    /// Two phones with three positions each: a = {0,1,2}, b = {3,4,5}.
    fn two_phone_inventory() -> Inventory {
        Inventory::new(vec![(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn compress_examples() {
        assert_eq!(compress_runs(&[7, 7, 8, 8, 8, 7]).unwrap(), vec![7, 8, 7]);
        assert_eq!(compress_runs(&[3]).unwrap(), vec![3]);
        assert!(matches!(compress_runs(&[]), Err(Error::EmptyAlignment)));
    }

    #[test]
    fn compress_matches_scanner() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let frames: Vec<u32> = (0..1000).map(|_| rng.random_range(0..3)).collect();
        let mut expected = vec![frames[0]];
        for w in frames.windows(2) {
            if w[1] != w[0] {
                expected.push(w[1]);
            }
        }
        assert_eq!(compress_runs(&frames).unwrap(), expected);
    }

    #[test]
    fn sample_sequence_histories() {
        // s, eh, t with positions 2,3,4 mapped to 0,1,2
        let inv = Inventory::new(vec![
            (0, 0), (0, 1), (0, 2), // s_s2.1288 s_s3.1061 s_s4.1096
            (1, 0), (1, 1), (1, 2), // eh_s2.527 eh_s3.128 eh_s4.66
            (2, 0), (2, 1), (2, 2), // t_s2.729 t_s3.572 t_s4.748
        ])
        .unwrap();
        let seq: Vec<u32> = (0..9).collect();
        let events = extract_events(&seq, &inv).unwrap();
        // the event predicting the senone after eh_s4.66 (t_s2.729)
        assert_eq!(
            events[6].0,
            HistoryState { prev_phone: Some(0), current_senones: vec![3, 4, 5] }
        );
        // the event predicting the senone after t_s2.729
        assert_eq!(
            events[7].0,
            HistoryState { prev_phone: Some(1), current_senones: vec![6] }
        );
        assert_eq!(events[0].0, HistoryState::begin());
    }

    #[test]
    fn single_event() {
        let inv = two_phone_inventory();
        let events = extract_events(&[0], &inv).unwrap();
        assert_eq!(events, vec![(HistoryState::begin(), 0)]);
    }

    #[test]
    fn repeated_phone_splits_on_position() {
        let inv = two_phone_inventory();
        // a a: positions 0,1,2,0,1 -> boundary before the second 0
        let events = extract_events(&[0, 1, 2, 0, 1], &inv).unwrap();
        assert_eq!(events[3].0.current_senones, vec![0, 1, 2]);
        assert_eq!(events[4].0, HistoryState { prev_phone: Some(0), current_senones: vec![0] });
    }

    #[test]
    fn unknown_senone() {
        let inv = two_phone_inventory();
        assert!(matches!(extract_events(&[0, 9], &inv), Err(Error::UnknownSenone(9))));
        assert!(AlignedUtterance::new("u", vec![], &inv).is_err());
    }

    #[test]
    fn estimate_count_ratios() {
        let inv = two_phone_inventory();
        let one = vec![AlignedUtterance::new("u1", vec![0, 0, 1, 1], &inv).unwrap()];
        let lm = MixedHistoryLm::estimate(&one, &inv).unwrap();
        let h = HistoryState { prev_phone: None, current_senones: vec![0] };
        assert_eq!(lm.prob(&h, Successor::Senone(1)).unwrap(), 1.0);

        let two = vec![
            AlignedUtterance::new("u1", vec![0, 1], &inv).unwrap(),
            AlignedUtterance::new("u2", vec![0, 3], &inv).unwrap(),
        ];
        let lm = MixedHistoryLm::estimate(&two, &inv).unwrap();
        assert_eq!(lm.prob(&h, Successor::Senone(1)).unwrap(), 0.5);
        assert_eq!(lm.prob(&h, Successor::Senone(3)).unwrap(), 0.5);
        // unseen successor under a seen history
        assert_eq!(lm.prob(&h, Successor::Senone(2)).unwrap(), 0.0);
        let unseen = HistoryState { prev_phone: Some(1), current_senones: vec![5] };
        assert!(matches!(lm.prob(&unseen, Successor::End), Err(Error::UnseenHistory(_))));
    }

    #[test]
    fn history_cap() {
        let inv = two_phone_inventory();
        let utts = vec![AlignedUtterance::new("u", vec![0, 1, 2, 3], &inv).unwrap()];
        let lm = MixedHistoryLm::estimate_with(&utts, &inv, EstimateOptions { max_history: Some(1) }).unwrap();
        let h = HistoryState { prev_phone: None, current_senones: vec![2] };
        assert_eq!(lm.prob(&h, Successor::Senone(3)).unwrap(), 1.0);
        assert!(MixedHistoryLm::estimate_with(&utts, &inv, EstimateOptions { max_history: Some(0) }).is_err());
    }

    fn random_corpus(seed: u64, n: usize, inv: &Inventory) -> Vec<AlignedUtterance> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let len = rng.random_range(1..30);
                let frames = (0..len).map(|_| rng.random_range(0..inv.num_senones() as u32)).collect();
                AlignedUtterance::new(format!("u{i}"), frames, inv).unwrap()
            })
            .collect()
    }

    #[test]
    fn estimate_matches_counting_oracle() {
        let inv = two_phone_inventory();
        let corpus = random_corpus(5, 50, &inv);
        let lm = MixedHistoryLm::estimate(&corpus, &inv).unwrap();

        // Oracle: walk each utterance with an explicit boundary rule.
        let mut counts: HashMap<(Option<u32>, Vec<u32>), HashMap<Option<u32>, u64>> = HashMap::new();
        for u in &corpus {
            let mut seq = u.frames.clone();
            seq.dedup();
            let (mut prev, mut cur): (Option<u32>, Vec<u32>) = (None, vec![]);
            for &s in &seq {
                *counts.entry((prev, cur.clone())).or_default().entry(Some(s)).or_default() += 1;
                let phone = s / 3;
                match cur.last() {
                    Some(&l) if l / 3 == phone && s % 3 > l % 3 => cur.push(s),
                    Some(&l) => {
                        prev = Some(l / 3);
                        cur = vec![s];
                    }
                    None => cur = vec![s],
                }
            }
            *counts.entry((prev, cur)).or_default().entry(None).or_default() += 1;
        }
        assert_eq!(counts.len(), lm.num_histories());
        for ((prev, cur), succ) in counts {
            let total: u64 = succ.values().sum();
            let h = HistoryState { prev_phone: prev, current_senones: cur };
            let row = lm.row(&h).expect("oracle history present");
            let mut row_sum = 0.0;
            for (s, c) in succ {
                let key = s.map(Successor::Senone).unwrap_or(Successor::End);
                assert_eq!(row.count(key), c);
                assert_eq!(row.prob(key), c as f64 / total as f64);
            }
            for (_, _, p) in row.iter() {
                row_sum += p;
            }
            assert!((row_sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn dump_is_sorted() {
        let inv = two_phone_inventory();
        let corpus = random_corpus(9, 10, &inv);
        let lm = MixedHistoryLm::estimate(&corpus, &inv).unwrap();
        let mut buf = Vec::new();
        lm.dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let mut sorted = lines.clone();
        sorted.sort();
        assert_eq!(lines, sorted);
        assert!(lines.iter().all(|l| l.split('\t').count() == 4));
    }

    #[test]
    fn alignment_file_round_trip() {
        let inv = two_phone_inventory();
        let corpus = random_corpus(2, 5, &inv);
        let mut buf = Vec::new();
        write_alignments(&mut buf, &corpus, &inv).unwrap();
        assert_eq!(read_alignments(buf.as_slice(), &inv).unwrap(), corpus);
        let mut ibuf = Vec::new();
        inv.write(&mut ibuf).unwrap();
        assert_eq!(Inventory::read(ibuf.as_slice()).unwrap(), inv);
        assert!(read_alignments("u\t1:0:0".as_bytes(), &inv).is_err());
    }

    proptest! {
        #[test]
        fn compress_idempotent(frames in prop::collection::vec(0u32..4, 1..60)) {
            let once = compress_runs(&frames).unwrap();
            prop_assert_eq!(compress_runs(&once).unwrap(), once.clone());
            prop_assert!(once.windows(2).all(|w| w[0] != w[1]));
        }

        #[test]
        fn events_reproduce_sequence(frames in prop::collection::vec(0u32..6, 1..60)) {
            let inv = two_phone_inventory();
            let c = compress_runs(&frames).unwrap();
            let events = extract_events(&c, &inv).unwrap();
            let next: Vec<u32> = events.iter().map(|(_, s)| *s).collect();
            prop_assert_eq!(next, c);
        }

        #[test]
        fn estimate_permutation_invariant(seed in 0u64..1000) {
            let inv = two_phone_inventory();
            let corpus = random_corpus(seed, 12, &inv);
            let mut rev = corpus.clone();
            rev.reverse();
            prop_assert_eq!(
                MixedHistoryLm::estimate(&corpus, &inv).unwrap(),
                MixedHistoryLm::estimate(&rev, &inv).unwrap()
            );
        }
    }
}
