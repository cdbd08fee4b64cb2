//! End-to-end run: senone LM, denominator graph and LFMMI statistics on the
//! acoustic side; rescoring, confusion networks and greedy combination on
//! the word side. Produces a deterministic, timing-free report.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::confnet::{build_cn, greedy_select, ConfusionNetwork, DEFAULT_POSTERIOR_SCALE, DEFAULT_SMOOTHING};
use crate::den_graph::{compile, count_transitions, validate};
use crate::error::{Error, Result};
use crate::forward_backward::{batch_stats, Kernel, LogLikes, MmiConfig, DEFAULT_CE_LAMBDA};
use crate::nbest::{
    attach_stream, optimize_weights, read_nbest, rescore, LmPipeline, NBestList, OptimizeOptions, ScoreWeights,
    StreamMix, RNN_RNN_NGRAM_WEIGHTS,
};
use crate::scoring::{count_errors, read_transcripts, ErrorCounts, Transcripts};
use crate::senone_lm::{read_alignments, AlignedUtterance, EstimateOptions, Inventory, MixedHistoryLm};
use crate::synth::{synth_corpus, DataPaths, SynthConfig, SynthCorpus, BACKWARD_STREAMS, FORWARD_STREAMS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seed of the synthetic corpus (overrides `synth.seed`).
    pub seed: u64,
    pub ce_lambda: f64,
    pub numerator_transitions: bool,
    pub kernel: Kernel,
    pub max_history: Option<usize>,
    pub posterior_scale: f64,
    pub smoothing: f64,
    /// Tune score weights on the dev lists before rescoring.
    pub tune_weights: bool,
    /// Skip out-of-vocabulary words in the neural-LM product.
    pub use_vocab: bool,
    pub forward: Option<StreamMix>,
    pub backward: Option<StreamMix>,
    /// Generate the corpus in memory; mutually exclusive with `data`.
    pub synth: Option<SynthConfig>,
    /// Read the corpus from files, relative to the config's directory.
    pub data: Option<DataPaths>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: SynthConfig::default().seed,
            ce_lambda: DEFAULT_CE_LAMBDA,
            numerator_transitions: true,
            kernel: Kernel::Scaled,
            max_history: None,
            posterior_scale: DEFAULT_POSTERIOR_SCALE,
            smoothing: DEFAULT_SMOOTHING,
            tune_weights: true,
            use_vocab: true,
            forward: Some(StreamMix {
                streams: FORWARD_STREAMS.iter().map(|s| s.to_string()).collect(),
                weights: RNN_RNN_NGRAM_WEIGHTS.to_vec(),
            }),
            backward: Some(StreamMix {
                streams: BACKWARD_STREAMS.iter().map(|s| s.to_string()).collect(),
                weights: RNN_RNN_NGRAM_WEIGHTS.to_vec(),
            }),
            synth: Some(SynthConfig::default()),
            data: None,
        }
    }
}

impl PipelineConfig {
    /// Checks knobs and, for file input, that every referenced file exists
    /// under `base`.
    pub fn validate(&self, base: &Path) -> Result<()> {
        for mix in self.forward.iter().chain(&self.backward) {
            mix.validate()?;
        }
        if !(self.ce_lambda >= 0.0) || !(self.posterior_scale > 0.0) || !(0.0..=1.0).contains(&self.smoothing) {
            return Err(Error::InvalidArgument("ce_lambda, posterior_scale or smoothing out of range".into()));
        }
        match (&self.synth, &self.data) {
            (Some(_), None) => Ok(()),
            (None, Some(d)) => {
                let mut paths = vec![&d.inventory, &d.alignments, &d.loglikes, &d.references];
                paths.extend(&d.vocab);
                for s in &d.systems {
                    paths.push(&s.nbest);
                    paths.extend(s.streams.values());
                }
                match paths.into_iter().find(|p| !base.join(p).exists()) {
                    Some(p) => Err(Error::InvalidArgument(format!("missing file {}", base.join(p).display()))),
                    None => Ok(()),
                }
            }
            _ => Err(Error::InvalidArgument("exactly one of `synth` and `data` must be given".into())),
        }
    }

    fn lm_pipeline(&self, vocab: Option<&BTreeSet<String>>) -> LmPipeline {
        LmPipeline {
            forward: self.forward.clone(),
            backward: self.backward.clone(),
            vocab: if self.use_vocab { vocab.cloned() } else { None },
        }
    }
}

fn open(base: &Path, p: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(base.join(p))?))
}

/// Reads a corpus described by `paths` relative to `base`.
pub fn load_corpus(paths: &DataPaths, base: &Path) -> Result<SynthCorpus> {
    let inventory = Inventory::read(open(base, &paths.inventory)?)?;
    let alignments = read_alignments(open(base, &paths.alignments)?, &inventory)?;
    let loglikes = alignments
        .iter()
        .map(|a| LogLikes::read_binary(open(base, &paths.loglikes.join(format!("{}.ll", a.utt_id)))?))
        .collect::<Result<Vec<_>>>()?;
    let references = read_transcripts(open(base, &paths.references)?)?;
    let vocab = match &paths.vocab {
        Some(v) => open(base, v)?
            .lines()
            .map(|l| l.map(|l| l.trim().to_string()))
            .filter(|l| l.as_ref().map_or(true, |l| !l.is_empty()))
            .collect::<std::io::Result<BTreeSet<String>>>()?,
        None => BTreeSet::new(),
    };
    let mut systems = Vec::with_capacity(paths.systems.len());
    for s in &paths.systems {
        let mut lists = read_nbest(open(base, &s.nbest)?)?;
        for (name, p) in &s.streams {
            attach_stream(&mut lists, name, open(base, p)?)?;
        }
        systems.push((s.name.clone(), lists));
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

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WerReport {
    pub errors: usize,
    pub reference_words: usize,
    pub wer: f64,
}

impl From<ErrorCounts> for WerReport {
    fn from(c: ErrorCounts) -> Self {
        WerReport {
            errors: c.errors(),
            reference_words: c.reference_words,
            wer: c.wer().unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcousticReport {
    pub utterances: usize,
    pub frames: usize,
    pub senones: usize,
    pub lm_histories: usize,
    pub graph_states: usize,
    pub graph_arcs: usize,
    pub graph_valid: bool,
    pub objective: f64,
    pub objective_per_frame: f64,
    /// Largest absolute gradient row sum (zero up to rounding).
    pub max_grad_row_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    pub name: String,
    pub weights: ScoreWeights,
    pub first_pass: WerReport,
    pub rescored: WerReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationReport {
    pub members: Vec<String>,
    pub weights: Vec<f64>,
    pub best_single: WerReport,
    pub combined: WerReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub acoustic: AcousticReport,
    pub systems: Vec<SystemReport>,
    pub combination: CombinationReport,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

fn acoustic_stage(cfg: &PipelineConfig, corpus: &SynthCorpus) -> Result<AcousticReport> {
    let lm = MixedHistoryLm::estimate_with(
        &corpus.alignments,
        &corpus.inventory,
        EstimateOptions { max_history: cfg.max_history },
    )
    .map_err(Error::at("build-lm"))?;
    let tm = count_transitions(&corpus.alignments).map_err(Error::at("compile-graph"))?;
    let fsa = compile(&lm, &tm, &corpus.inventory).map_err(Error::at("compile-graph"))?;
    let batch: Vec<(AlignedUtterance, LogLikes)> = corpus
        .alignments
        .iter()
        .cloned()
        .zip(corpus.loglikes.iter().cloned())
        .collect();
    let mmi = MmiConfig {
        ce_lambda: cfg.ce_lambda,
        numerator_transitions: cfg.numerator_transitions,
        kernel: cfg.kernel,
    };
    let stats = batch_stats(&fsa, &tm, &batch, &mmi).map_err(Error::at("lfmmi-stats"))?;
    let max_grad_row_sum = stats
        .per_utterance
        .iter()
        .flat_map(|s| s.grad.rows().into_iter().map(|r| r.sum().abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    Ok(AcousticReport {
        utterances: batch.len(),
        frames: stats.frames,
        senones: corpus.inventory.num_senones(),
        lm_histories: lm.num_histories(),
        graph_states: fsa.num_states(),
        graph_arcs: fsa.num_arcs(),
        graph_valid: validate(&fsa).is_ok(),
        objective: stats.objective,
        objective_per_frame: stats.objective / stats.frames.max(1) as f64,
        max_grad_row_sum,
    })
}

fn first_best_errors<'a>(refs: &Transcripts, best: impl Iterator<Item = (&'a str, &'a [String])>) -> Result<ErrorCounts> {
    let mut e = ErrorCounts::default();
    for (utt, words) in best {
        let r = refs.get(utt).ok_or_else(|| Error::MissingUtterance(utt.to_string()))?;
        e += count_errors(r, words);
    }
    Ok(e)
}

/// Tunes weights (optionally) on the lists themselves, then rescores.
/// Returns the weights, first-pass and rescored 1-best errors, and the
/// rescored lists.
pub fn rescore_system(
    lists: &[NBestList],
    refs: &Transcripts,
    lm: &LmPipeline,
    tuning: Option<&OptimizeOptions>,
) -> Result<(ScoreWeights, ErrorCounts, ErrorCounts, Vec<crate::nbest::RescoredList>)> {
    let dev: Vec<(NBestList, Vec<String>)> = lists
        .iter()
        .map(|l| {
            let r = refs.get(&l.utt_id).ok_or_else(|| Error::MissingUtterance(l.utt_id.clone()))?;
            Ok((l.clone(), r.clone()))
        })
        .collect::<Result<_>>()?;
    let weights = match tuning {
        Some(opts) => optimize_weights(&dev, lm, opts)?,
        None => ScoreWeights::default(),
    };
    let first = first_best_errors(refs, lists.iter().map(|l| (l.utt_id.as_str(), l.hyps[0].words.as_slice())))?;
    let rescored = lists
        .iter()
        .map(|l| rescore(l, &weights, lm))
        .collect::<Result<Vec<_>>>()?;
    let after = first_best_errors(
        refs,
        rescored.iter().map(|r| (r.utt_id.as_str(), r.best().hyp.words.as_slice())),
    )?;
    Ok((weights, first, after, rescored))
}

pub fn run_on(cfg: &PipelineConfig, corpus: &SynthCorpus) -> Result<Report> {
    let acoustic = acoustic_stage(cfg, corpus)?;
    let lm = cfg.lm_pipeline(Some(&corpus.vocab).filter(|v| !v.is_empty()));
    let tuning = cfg.tune_weights.then(OptimizeOptions::default);
    let mut systems = Vec::new();
    let mut candidates: Vec<(String, BTreeMap<String, ConfusionNetwork>)> = Vec::new();
    for (name, lists) in &corpus.systems {
        let (weights, first, after, rescored) =
            rescore_system(lists, &corpus.references, &lm, tuning.as_ref()).map_err(Error::at("rescore"))?;
        let cns = rescored
            .iter()
            .map(|r| Ok((r.utt_id.clone(), build_cn(r, cfg.posterior_scale)?)))
            .collect::<Result<BTreeMap<_, _>>>()
            .map_err(Error::at("build-cn"))?;
        systems.push(SystemReport {
            name: name.clone(),
            weights,
            first_pass: first.into(),
            rescored: after.into(),
        });
        candidates.push((name.clone(), cns));
    }
    let greedy = greedy_select(&candidates, &corpus.references, cfg.smoothing).map_err(Error::at("combine"))?;
    Ok(Report {
        acoustic,
        systems,
        combination: CombinationReport {
            members: greedy.set.members,
            weights: greedy.set.weights,
            best_single: greedy.best_single.into(),
            combined: greedy.errors.into(),
        },
    })
}

/// Validates the configuration, obtains the corpus and runs every stage.
/// Errors carry the name of the failing stage.
pub fn run_pipeline(cfg: &PipelineConfig, base: &Path) -> Result<Report> {
    cfg.validate(base).map_err(Error::at("config"))?;
    let corpus = match (&cfg.synth, &cfg.data) {
        (Some(s), _) => synth_corpus(&SynthConfig { seed: cfg.seed, ..s.clone() }).map_err(Error::at("synth"))?,
        (None, Some(d)) => load_corpus(d, base).map_err(Error::at("load"))?,
        (None, None) => unreachable!(),
    };
    run_on(cfg, &corpus)
}

/// Writes the corpus for `cfg` (which must use `synth`) under `dir`, plus a
/// file-based copy of the configuration as `pipeline.json`.
pub fn export_synth(cfg: &PipelineConfig, dir: &Path) -> Result<PipelineConfig> {
    let s = cfg
        .synth
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("configuration has no synth section".into()))?;
    let corpus = synth_corpus(&SynthConfig { seed: cfg.seed, ..s.clone() })?;
    fs::create_dir_all(dir)?;
    let data = corpus.write_to(dir)?;
    let file_cfg = PipelineConfig {
        synth: None,
        data: Some(data),
        ..cfg.clone()
    };
    fs::write(dir.join("pipeline.json"), serde_json::to_string_pretty(&file_cfg)? + "\n")?;
    Ok(file_cfg)
}
