//! Deterministic synthetic corpora: a senone inventory with frame
//! alignments and noisy log-likelihoods, plus a word-level task with
//! references, per-system N-best lists and LM score streams.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::den_graph::{compile, count_transitions, DenominatorFsa, TransitionModel};
use crate::error::{Error, Result};
use crate::forward_backward::LogLikes;
use crate::nbest::{write_nbest, write_stream, Hypothesis, NBestList, WittenBellLm};
use crate::scoring::{write_transcripts, Transcripts};
use crate::senone_lm::{write_alignments, AlignedUtterance, Inventory, MixedHistoryLm};

pub const FORWARD_STREAMS: [&str; 3] = ["rnn1", "rnn2", "ngram"];
pub const BACKWARD_STREAMS: [&str; 3] = ["bwd_rnn1", "bwd_rnn2", "bwd_ngram"];

/// Log probability the neural streams give a word outside their vocabulary.
const OOV_LOG_PROB: f64 = -6.9;
/// Acoustic margins of the competitors over the reference choice.
const SUB_MARGIN: f64 = 2.0;
const DEL_MARGIN: f64 = 4.0;
const INS_MARGIN: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub num_phones: usize,
    pub senones_per_phone: usize,
    pub num_utts: usize,
    pub frames_per_utt: usize,
    /// Standard deviation of the noise on frame log-likelihoods.
    pub acoustic_noise: f64,
    pub vocab_size: usize,
    /// Rare words left out of the neural-LM vocabulary.
    pub oov_words: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub lm_training_sentences: usize,
    /// Standard deviation of the true bigram log-weights.
    pub lm_sharpness: f64,
    pub ngram_order: usize,
    pub nbest: usize,
    pub systems: usize,
    /// Standard deviation of the noise on per-position acoustic scores.
    pub am_noise: f64,
    /// Fraction of true bigram entries each neural stream knows.
    pub stream_coverage: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            num_phones: 10,
            senones_per_phone: 3,
            num_utts: 600,
            frames_per_utt: 80,
            acoustic_noise: 1.0,
            vocab_size: 40,
            oov_words: 4,
            min_words: 4,
            max_words: 12,
            lm_training_sentences: 300,
            lm_sharpness: 3.5,
            ngram_order: 2,
            nbest: 20,
            systems: 3,
            am_noise: 2.0,
            stream_coverage: 0.25,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let sizes = [
            ("num_phones", self.num_phones),
            ("senones_per_phone", self.senones_per_phone),
            ("num_utts", self.num_utts),
            ("frames_per_utt", self.frames_per_utt),
            ("min_words", self.min_words),
            ("lm_training_sentences", self.lm_training_sentences),
            ("ngram_order", self.ngram_order),
            ("nbest", self.nbest),
            ("systems", self.systems),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
        }
        if self.max_words < self.min_words || self.vocab_size < 2 || self.oov_words >= self.vocab_size {
            return Err(Error::InvalidArgument("inconsistent word-level sizes".into()));
        }
        let noises = [self.acoustic_noise, self.am_noise, self.stream_coverage, self.lm_sharpness];
        if noises.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || self.stream_coverage > 1.0 {
            return Err(Error::InvalidArgument("noise levels must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub inventory: Inventory,
    pub alignments: Vec<AlignedUtterance>,
    pub loglikes: Vec<LogLikes>,
    pub references: Transcripts,
    /// Neural-LM vocabulary; words outside it count as OOV.
    pub vocab: BTreeSet<String>,
    pub systems: Vec<(String, Vec<NBestList>)>,
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

fn utt_id(i: usize) -> String {
    format!("utt{i:04}")
}

fn word(i: usize) -> String {
    format!("w{i:02}")
}

/// Left-to-right phones with random state durations; senone `p * n + k` is
/// state `k` of phone `p`.
fn acoustic(cfg: &SynthConfig) -> Result<(Inventory, Vec<AlignedUtterance>, Vec<LogLikes>)> {
    let n = cfg.senones_per_phone;
    let entries: Vec<(u32, u32)> = (0..cfg.num_phones)
        .flat_map(|p| (0..n).map(move |k| (p as u32, k as u32)))
        .collect();
    let inv = Inventory::new(entries)?;
    let senones = inv.num_senones();
    let mut r = rng(cfg.seed, 0);
    let mut alis = Vec::with_capacity(cfg.num_utts);
    let mut lls = Vec::with_capacity(cfg.num_utts);
    for u in 0..cfg.num_utts {
        let mut frames = Vec::with_capacity(cfg.frames_per_utt);
        while frames.len() < cfg.frames_per_utt {
            let p = r.random_range(0..cfg.num_phones);
            for k in 0..n {
                let dur = r.random_range(1..=4);
                frames.extend(std::iter::repeat_n((p * n + k) as u32, dur));
            }
        }
        frames.truncate(cfg.frames_per_utt);
        let mut x = Array2::from_shape_fn((frames.len(), senones), |_| cfg.acoustic_noise * normal(&mut r));
        for (t, &s) in frames.iter().enumerate() {
            x[(t, s as usize)] += 2.0;
        }
        lls.push(LogLikes::new(x)?);
        alis.push(AlignedUtterance::new(utt_id(u), frames, &inv)?);
    }
    Ok((inv, alis, lls))
}

/// Bigram word model; row `0` is the sentence start, row `i + 1` follows
/// word `i`. Column `vocab_size` is the end of sentence.
struct TrueLm {
    probs: Vec<Vec<f64>>,
}

impl TrueLm {
    fn new(cfg: &SynthConfig, r: &mut ChaCha8Rng) -> Self {
        let v = cfg.vocab_size;
        let probs = (0..=v)
            .map(|_| {
                let mut row: Vec<f64> = (0..=v)
                    .map(|j| {
                        let rare = if j < v && j >= v - cfg.oov_words { 0.05 } else { 1.0 };
                        rare * (cfg.lm_sharpness * normal(r)).exp()
                    })
                    .collect();
                let z: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= z);
                row
            })
            .collect();
        TrueLm { probs }
    }

    /// A model that knows each entry with probability `coverage` and is
    /// flat elsewhere; rows renormalized.
    fn partial(&self, coverage: f64, r: &mut ChaCha8Rng) -> Self {
        let probs = self
            .probs
            .iter()
            .map(|row| {
                let flat = 1.0 / row.len() as f64;
                let mut row: Vec<f64> = row.iter().map(|&p| if r.random_bool(coverage) { p } else { flat }).collect();
                let z: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= z);
                row
            })
            .collect();
        TrueLm { probs }
    }

    fn sample(&self, len: usize, r: &mut ChaCha8Rng) -> Vec<usize> {
        let v = self.probs.len() - 1;
        let mut prev = 0;
        (0..len)
            .map(|_| {
                let row = &self.probs[prev][..v];
                let z: f64 = row.iter().sum();
                let mut u = r.random::<f64>() * z;
                let mut w = v - 1;
                for (j, p) in row.iter().enumerate() {
                    if u < *p {
                        w = j;
                        break;
                    }
                    u -= p;
                }
                prev = w + 1;
                w
            })
            .collect()
    }

    /// Natural-log probability of each word and then of the end token.
    fn word_log_probs(&self, words: &[usize]) -> Vec<f64> {
        let v = self.probs.len() - 1;
        let mut prev = 0;
        let mut out: Vec<f64> = words
            .iter()
            .map(|&w| {
                let p = self.probs[prev][w].ln();
                prev = w + 1;
                p
            })
            .collect();
        out.push(self.probs[prev][v].ln());
        out
    }
}

/// Acoustic options at one reference position or gap: `(word, score)`,
/// `None` for the empty choice.
type Options = Vec<(Option<usize>, f64)>;

/// Per-position competitors for one system: at each word the reference, a
/// confusable word and a deletion; at each gap nothing or an inserted word.
/// Competing words never occur in the reference.
fn lattice(reference: &[usize], vocab: usize, noise: f64, r: &mut ChaCha8Rng) -> Vec<Options> {
    let mut other = || loop {
        let w = r.random_range(0..vocab);
        if !reference.contains(&w) {
            break w;
        }
    };
    let mut raw: Vec<Options> = Vec::with_capacity(2 * reference.len() + 1);
    raw.push(vec![(None, 0.0), (Some(other()), -INS_MARGIN)]);
    for &w in reference {
        raw.push(vec![(Some(w), 0.0), (Some(other()), -SUB_MARGIN), (None, -DEL_MARGIN)]);
        raw.push(vec![(None, 0.0), (Some(other()), -INS_MARGIN)]);
    }
    raw.into_iter()
        .map(|opts| opts.into_iter().map(|(w, m)| (w, m + noise * normal(r))).collect())
        .collect()
}

fn argmax(opts: &Options) -> usize {
    (0..opts.len()).fold(0, |b, i| if opts[i].1 > opts[b].1 { i } else { b })
}

fn sample_choice(opts: &Options, r: &mut ChaCha8Rng) -> usize {
    let top = opts[argmax(opts)].1;
    let weights: Vec<f64> = opts.iter().map(|o| (o.1 - top).exp()).collect();
    let mut u = r.random::<f64>() * weights.iter().sum::<f64>();
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    opts.len() - 1
}

/// Viterbi path first, then distinct samples from the per-position
/// posteriors. Returns word sequences with their acoustic scores.
fn nbest_from_lattice(lat: &[Options], n: usize, r: &mut ChaCha8Rng) -> Vec<(Vec<usize>, f64)> {
    let render = |choice: &[usize]| -> (Vec<usize>, f64) {
        let words = lat.iter().zip(choice).filter_map(|(o, &c)| o[c].0).collect();
        let score = lat.iter().zip(choice).map(|(o, &c)| o[c].1).sum();
        (words, score)
    };
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    let best: Vec<usize> = lat.iter().map(argmax).collect();
    let mut attempts = 0;
    let mut choice = best;
    loop {
        if seen.insert(choice.clone()) {
            let h = render(&choice);
            if !out.iter().any(|(w, _): &(Vec<usize>, f64)| *w == h.0) {
                out.push(h);
            }
        }
        if out.len() >= n || attempts >= 20 * n {
            break;
        }
        attempts += 1;
        choice = lat.iter().map(|o| sample_choice(o, r)).collect();
    }
    out
}

/// Per-word stream values; positions holding a word outside the vocabulary
/// get a fixed floor.
fn stream_values(lm: &TrueLm, words: &[usize], in_vocab: &dyn Fn(usize) -> bool) -> Vec<f64> {
    let mut out = lm.word_log_probs(words);
    for (i, &w) in words.iter().enumerate() {
        if !in_vocab(w) {
            out[i] = OOV_LOG_PROB;
        }
    }
    out
}

/// Generates the whole corpus; identical configurations give identical
/// corpora.
pub fn synth_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let (inventory, alignments, loglikes) = acoustic(cfg)?;
    let v = cfg.vocab_size;
    let in_vocab = |w: usize| w < v - cfg.oov_words;
    let vocab: BTreeSet<String> = (0..v).filter(|&w| in_vocab(w)).map(word).collect();

    let mut lm_rng = rng(cfg.seed, 1);
    let truth = TrueLm::new(cfg, &mut lm_rng);
    let text: Vec<Vec<String>> = (0..cfg.lm_training_sentences)
        .map(|_| {
            let len = lm_rng.random_range(cfg.min_words..=cfg.max_words);
            truth.sample(len, &mut lm_rng).into_iter().map(word).collect()
        })
        .collect();
    let reversed: Vec<Vec<String>> = text.iter().map(|s| s.iter().rev().cloned().collect()).collect();
    let fwd_ngram = WittenBellLm::train(&text, cfg.ngram_order)?;
    let bwd_ngram = WittenBellLm::train(&reversed, cfg.ngram_order)?;

    let mut ref_rng = rng(cfg.seed, 2);
    let refs: Vec<Vec<usize>> = (0..cfg.num_utts)
        .map(|_| {
            let len = ref_rng.random_range(cfg.min_words..=cfg.max_words);
            truth.sample(len, &mut ref_rng)
        })
        .collect();
    let references: Transcripts = refs
        .iter()
        .enumerate()
        .map(|(u, r)| (utt_id(u), r.iter().copied().map(word).collect()))
        .collect();

    let neural: Vec<(&str, TrueLm)> = ["rnn1", "rnn2", "bwd_rnn1", "bwd_rnn2"]
        .into_iter()
        .enumerate()
        .map(|(k, name)| (name, truth.partial(cfg.stream_coverage, &mut rng(cfg.seed, 300 + k as u64))))
        .collect();
    let mut pron_rng = rng(cfg.seed, 4);
    let pron_lp: Vec<f64> = (0..v).map(|_| -(0.5 * normal(&mut pron_rng)).abs()).collect();
    let mut systems = Vec::with_capacity(cfg.systems);
    for s in 0..cfg.systems {
        let mut hyp_rng = rng(cfg.seed, 100 + s as u64);
        let mut sample_rng = rng(cfg.seed, 200 + s as u64);
        let mut lists = Vec::with_capacity(cfg.num_utts);
        for (u, reference) in refs.iter().enumerate() {
            let lat = lattice(reference, v, cfg.am_noise, &mut hyp_rng);
            let seqs = nbest_from_lattice(&lat, cfg.nbest, &mut sample_rng);
            let mut hyps = Vec::with_capacity(seqs.len());
            for (seq, am) in &seqs {
                let words: Vec<String> = seq.iter().copied().map(word).collect();
                let pron = seq.iter().map(|&w| pron_lp[w]).sum();
                let ng: Vec<f64> = fwd_ngram.word_log_probs(&words);
                let mut bng: Vec<f64> = bwd_ngram.word_log_probs(&words.iter().rev().collect::<Vec<_>>());
                let end = bng.pop().unwrap();
                bng.reverse();
                bng.push(end);
                let oov = seq.iter().filter(|&&w| !in_vocab(w)).count();
                let mut h = Hypothesis::new(words, *am, ng.iter().sum(), pron, oov)?;
                for (name, lm) in &neural {
                    h.set_stream(*name, stream_values(lm, seq, &in_vocab))?;
                }
                h.set_stream("ngram", ng)?;
                h.set_stream("bwd_ngram", bng)?;
                h.snap_to_file_grid();
                hyps.push(h);
            }
            // first-pass order: acoustic score
            hyps.sort_by(|a, b| b.am_score.total_cmp(&a.am_score));
            lists.push(NBestList::new(utt_id(u), hyps)?);
        }
        systems.push((format!("sys{s}"), lists));
    }
    Ok(SynthCorpus {
        inventory,
        alignments,
        loglikes,
        references,
        vocab,
        systems,
    })
}

/// Sizes of the forward-backward benchmark workload: a sparse phone bigram
/// over a few active phones of a large inventory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub seed: u64,
    pub num_phones: usize,
    pub senones_per_phone: usize,
    pub active_phones: usize,
    /// Successor phones per active phone.
    pub fanout: usize,
    /// Phone tokens in the alignment corpus the graph is estimated from.
    pub training_phones: usize,
    pub utterances: usize,
    pub frames_per_utt: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            seed: 7,
            num_phones: 3000,
            senones_per_phone: 3,
            active_phones: 50,
            fanout: 20,
            training_phones: 200_000,
            utterances: 10,
            frames_per_utt: 1000,
        }
    }
}

pub struct BenchWorkload {
    pub inventory: Inventory,
    pub transitions: TransitionModel,
    pub graph: DenominatorFsa,
}

/// Estimates and compiles the benchmark graph.
pub fn bench_workload(cfg: &BenchConfig) -> Result<BenchWorkload> {
    let sizes = [cfg.num_phones, cfg.senones_per_phone, cfg.active_phones, cfg.fanout, cfg.training_phones];
    if sizes.contains(&0) || cfg.active_phones > cfg.num_phones || cfg.fanout >= cfg.active_phones {
        return Err(Error::InvalidArgument("inconsistent benchmark sizes".into()));
    }
    let n = cfg.senones_per_phone;
    let entries: Vec<(u32, u32)> = (0..cfg.num_phones)
        .flat_map(|p| (0..n).map(move |k| (p as u32, k as u32)))
        .collect();
    let inventory = Inventory::new(entries)?;
    let mut r = rng(cfg.seed, 10);
    let mut phones: Vec<usize> = (0..cfg.num_phones).collect();
    let (active, _) = phones.partial_shuffle(&mut r, cfg.active_phones);
    let active = active.to_vec();
    let successors: Vec<Vec<usize>> = (0..active.len())
        .map(|i| {
            let mut others: Vec<usize> = (0..active.len()).filter(|&j| j != i).collect();
            others.partial_shuffle(&mut r, cfg.fanout).0.to_vec()
        })
        .collect();
    let per_utt = 200;
    let mut alignments = Vec::new();
    let mut cur = 0;
    for u in 0..cfg.training_phones.div_ceil(per_utt) {
        let mut frames = Vec::new();
        for _ in 0..per_utt {
            let p = active[cur];
            for k in 0..n {
                let dur = r.random_range(1..=4);
                frames.extend(std::iter::repeat_n((p * n + k) as u32, dur));
            }
            cur = successors[cur][r.random_range(0..cfg.fanout)];
        }
        alignments.push(AlignedUtterance::new(format!("bench{u:05}"), frames, &inventory)?);
    }
    let lm = MixedHistoryLm::estimate(&alignments, &inventory)?;
    let transitions = count_transitions(&alignments)?;
    let graph = compile(&lm, &transitions, &inventory)?;
    Ok(BenchWorkload { inventory, transitions, graph })
}

/// Standard-normal scores for benchmark utterance `index`.
pub fn bench_loglikes(cfg: &BenchConfig, senones: usize, index: usize) -> Result<LogLikes> {
    let mut r = rng(cfg.seed, 1000 + index as u64);
    LogLikes::new(Array2::from_shape_fn((cfg.frames_per_utt, senones), |_| normal(&mut r)))
}

/// Locations of a corpus on disk, relative to a base directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPaths {
    pub inventory: PathBuf,
    pub alignments: PathBuf,
    /// Directory of `<utt_id>.ll` binary log-likelihood matrices.
    pub loglikes: PathBuf,
    pub references: PathBuf,
    #[serde(default)]
    pub vocab: Option<PathBuf>,
    pub systems: Vec<SystemPaths>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemPaths {
    pub name: String,
    pub nbest: PathBuf,
    #[serde(default)]
    pub streams: BTreeMap<String, PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

impl SynthCorpus {
    /// Writes every artifact under `dir` and returns their relative paths.
    pub fn write_to(&self, dir: &Path) -> Result<DataPaths> {
        let paths = DataPaths {
            inventory: "inventory.txt".into(),
            alignments: "alignments.txt".into(),
            loglikes: "loglikes".into(),
            references: "refs.txt".into(),
            vocab: Some("vocab.txt".into()),
            systems: self
                .systems
                .iter()
                .map(|(name, _)| SystemPaths {
                    name: name.clone(),
                    nbest: format!("systems/{name}/nbest.txt").into(),
                    streams: FORWARD_STREAMS
                        .iter()
                        .chain(&BACKWARD_STREAMS)
                        .map(|s| (s.to_string(), format!("systems/{name}/{s}.txt").into()))
                        .collect(),
                })
                .collect(),
        };
        self.inventory.write(create(&dir.join(&paths.inventory))?)?;
        write_alignments(create(&dir.join(&paths.alignments))?, &self.alignments, &self.inventory)?;
        fs::create_dir_all(dir.join(&paths.loglikes))?;
        for (ali, x) in self.alignments.iter().zip(&self.loglikes) {
            let mut w = create(&dir.join(&paths.loglikes).join(format!("{}.ll", ali.utt_id)))?;
            x.write_binary(&mut w)?;
            w.flush()?;
        }
        write_transcripts(create(&dir.join(&paths.references))?, &self.references)?;
        let mut w = create(&dir.join(paths.vocab.as_ref().unwrap()))?;
        for v in &self.vocab {
            writeln!(w, "{v}")?;
        }
        w.flush()?;
        for ((_, lists), sp) in self.systems.iter().zip(&paths.systems) {
            let mut w = create(&dir.join(&sp.nbest))?;
            write_nbest(&mut w, lists)?;
            w.flush()?;
            for (stream, path) in &sp.streams {
                let mut w = create(&dir.join(path))?;
                write_stream(&mut w, lists, stream)?;
                w.flush()?;
            }
        }
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{count_errors, ErrorCounts};

    fn small() -> SynthConfig {
        SynthConfig { num_utts: 12, nbest: 8, lm_training_sentences: 60, ..Default::default() }
    }

    fn first_pass_errors(c: &SynthCorpus, system: usize) -> ErrorCounts {
        let mut e = ErrorCounts::default();
        for l in &c.systems[system].1 {
            e += count_errors(&c.references[&l.utt_id], &l.hyps[0].words);
        }
        e
    }

    #[test]
    fn deterministic() {
        assert_eq!(synth_corpus(&small()).unwrap(), synth_corpus(&small()).unwrap());
        assert_ne!(
            synth_corpus(&small()).unwrap(),
            synth_corpus(&SynthConfig { seed: 8, ..small() }).unwrap()
        );
    }

    #[test]
    fn shapes() {
        let c = synth_corpus(&small()).unwrap();
        assert_eq!(c.alignments.len(), 12);
        assert!(c.alignments.iter().all(|a| a.len() == 80));
        assert_eq!(c.loglikes[0].senones(), 30);
        assert_eq!(c.systems.len(), 3);
        for (_, lists) in &c.systems {
            for l in lists {
                assert!(l.hyps.len() <= 8);
                for h in &l.hyps {
                    assert_eq!(h.word_probs.len(), 6);
                    assert!(h.word_probs.values().all(|p| p.len() == h.words.len() + 1));
                    assert_eq!(h.oov_count, h.words.iter().filter(|w| !c.vocab.contains(*w)).count());
                }
                assert!(l.hyps.windows(2).all(|w| w[0].am_score >= w[1].am_score));
            }
        }
    }

    #[test]
    fn noise_free_first_pass_is_correct() {
        let c = synth_corpus(&SynthConfig { am_noise: 0.0, ..small() }).unwrap();
        for s in 0..3 {
            assert_eq!(first_pass_errors(&c, s).errors(), 0);
        }
    }

    #[test]
    fn noise_sweep_is_monotone() {
        let mut last = 0;
        for noise in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let c = synth_corpus(&SynthConfig { am_noise: noise, ..small() }).unwrap();
            let e = first_pass_errors(&c, 0).errors();
            assert!(e >= last, "noise {noise}: {e} < {last}");
            last = e;
        }
        assert!(last > 0);
    }

    #[test]
    fn frame_argmax_without_noise() {
        let c = synth_corpus(&SynthConfig { acoustic_noise: 0.0, ..small() }).unwrap();
        for (a, x) in c.alignments.iter().zip(&c.loglikes) {
            for (t, &s) in a.frames.iter().enumerate() {
                let row = x.row(t);
                let best = (0..row.len()).max_by(|&i, &j| row[i].total_cmp(&row[j])).unwrap();
                assert_eq!(best as u32, s);
            }
        }
    }

    #[test]
    fn bench_workload_meets_sizes() {
        let cfg = BenchConfig::default();
        let w = bench_workload(&cfg).unwrap();
        assert_eq!(w.inventory.num_senones(), 9000);
        assert!(w.graph.num_states() >= 2000, "{} states", w.graph.num_states());
        assert!(w.graph.num_arcs() >= 20000, "{} arcs", w.graph.num_arcs());
        assert!(crate::den_graph::validate(&w.graph).is_ok());
        let small = BenchConfig { frames_per_utt: 5, ..cfg.clone() };
        let x = bench_loglikes(&small, 9000, 0).unwrap();
        assert_eq!((x.frames(), x.senones()), (5, 9000));
        assert_eq!(x, bench_loglikes(&small, 9000, 0).unwrap());
        assert!(bench_workload(&BenchConfig { fanout: 50, ..cfg }).is_err());
    }

    #[test]
    fn rejects_bad_config() {
        assert!(synth_corpus(&SynthConfig { num_utts: 0, ..small() }).is_err());
        assert!(synth_corpus(&SynthConfig { am_noise: -1.0, ..small() }).is_err());
        assert!(synth_corpus(&SynthConfig { oov_words: 40, ..small() }).is_err());
        assert!(synth_corpus(&SynthConfig { stream_coverage: 1.5, ..small() }).is_err());
    }
}
