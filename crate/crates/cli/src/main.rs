//! `convrec`: command-line front end for the sequence-training and
//! decoding back-end tools.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use convrec::confnet::{
    build_cn, decode_cn, em_weights, greedy_select, read_cns, write_cns, ConfusionNetwork, DEFAULT_POSTERIOR_SCALE,
    DEFAULT_SMOOTHING,
};
use convrec::den_graph::{compile, count_transitions, validate, DenominatorFsa, TransitionModel};
use convrec::forward_backward::{
    bench_throughput, utterance_stats, write_matrix, Kernel, LogLikes, MmiConfig, DEFAULT_CE_LAMBDA,
};
use convrec::nbest::{
    attach_stream, dev_errors, optimize_weights, read_nbest, rescore, write_nbest, LmPipeline, NBestList,
    OptimizeOptions, RescoredList, ScoreWeights, StreamMix,
};
use convrec::onebit_sgd::{sim_train, LeastSquares, SgdConfig};
use convrec::pipeline::{export_synth, run_pipeline, PipelineConfig};
use convrec::scoring::{corpus_wer, read_transcripts, write_transcripts, Transcripts};
use convrec::senone_lm::{read_alignments, AlignedUtterance, EstimateOptions, Inventory, MixedHistoryLm};
use convrec::synth::{bench_loglikes, bench_workload, BenchConfig};

#[derive(Parser)]
#[command(name = "convrec", version, about = "LFMMI statistics, N-best rescoring and system combination")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Estimate the mixed-history senone LM and write its dump.
    BuildLm(BuildLm),
    /// Count transitions and compile the denominator graph.
    CompileGraph(CompileGraph),
    /// LFMMI objective and gradients for aligned utterances.
    LfmmiStats(LfmmiStats),
    /// Time forward-backward on a synthetic benchmark workload.
    BenchFb(BenchFb),
    /// Rescore N-best lists and write 1-best transcripts.
    Rescore(Rescore),
    /// Tune score weights for minimum 1-best word errors.
    OptimizeWeights(OptimizeWeights),
    /// Build confusion networks from rescored N-best lists.
    BuildCn(BuildCn),
    /// Combine confusion-network systems.
    Combine(Combine),
    /// Word error rate of a hypothesis file.
    Score(Score),
    /// Simulated data-parallel SGD with 1-bit gradients.
    SgdSim(SgdSim),
    /// Write a synthetic corpus and a file-based pipeline config.
    Synth(Synth),
    /// Run the end-to-end pipeline.
    Pipeline(Pipeline),
}

impl Cmd {
    fn stage(&self) -> &'static str {
        match self {
            Cmd::BuildLm(_) => "build-lm",
            Cmd::CompileGraph(_) => "compile-graph",
            Cmd::LfmmiStats(_) => "lfmmi-stats",
            Cmd::BenchFb(_) => "bench-fb",
            Cmd::Rescore(_) => "rescore",
            Cmd::OptimizeWeights(_) => "optimize-weights",
            Cmd::BuildCn(_) => "build-cn",
            Cmd::Combine(_) => "combine",
            Cmd::Score(_) => "score",
            Cmd::SgdSim(_) => "sgd-sim",
            Cmd::Synth(_) => "synth",
            Cmd::Pipeline(_) => "pipeline",
        }
    }

    fn run(self) -> Result<()> {
        match self {
            Cmd::BuildLm(a) => a.run(),
            Cmd::CompileGraph(a) => a.run(),
            Cmd::LfmmiStats(a) => a.run(),
            Cmd::BenchFb(a) => a.run(),
            Cmd::Rescore(a) => a.run(),
            Cmd::OptimizeWeights(a) => a.run(),
            Cmd::BuildCn(a) => a.run(),
            Cmd::Combine(a) => a.run(),
            Cmd::Score(a) => a.run(),
            Cmd::SgdSim(a) => a.run(),
            Cmd::Synth(a) => a.run(),
            Cmd::Pipeline(a) => a.run(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stage = cli.cmd.stage();
    match cli.cmd.run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{stage}: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn open(p: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(p).with_context(|| format!("open {}", p.display()))?))
}

fn create(p: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("create {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(p).with_context(|| format!("create {}", p.display()))?))
}

/// Runs `f` on a writer for `out`, or on stdout when absent.
fn with_output(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(p) => {
            let mut w = create(p)?;
            f(&mut w)?;
            w.flush().with_context(|| format!("write {}", p.display()))
        }
        None => {
            let mut w = io::stdout().lock();
            f(&mut w)?;
            Ok(w.flush()?)
        }
    }
}

fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    with_output(out, |w| Ok(writeln!(w, "{text}")?))
}

#[derive(Args)]
struct AlignmentInput {
    /// Senone inventory: `senone_id phone_id position` per line.
    #[arg(long)]
    inventory: PathBuf,
    /// Frame alignments: `utt_id<TAB>phone:senone:position ...` per line.
    #[arg(long)]
    ali: PathBuf,
}

impl AlignmentInput {
    fn load(&self) -> Result<(Inventory, Vec<AlignedUtterance>)> {
        let inv = Inventory::read(open(&self.inventory)?).context("read inventory")?;
        let ali = read_alignments(open(&self.ali)?, &inv).context("read alignments")?;
        Ok((inv, ali))
    }
}

#[derive(Args)]
struct BuildLm {
    #[command(flatten)]
    input: AlignmentInput,
    /// Cap on in-phone senones kept in a history.
    #[arg(long)]
    max_history: Option<usize>,
    /// Dump destination (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl BuildLm {
    fn run(self) -> Result<()> {
        let (inv, ali) = self.input.load()?;
        let lm = MixedHistoryLm::estimate_with(&ali, &inv, EstimateOptions { max_history: self.max_history })?;
        with_output(self.out.as_deref(), |w| Ok(lm.dump(w)?))
    }
}

#[derive(Args)]
struct CompileGraph {
    #[command(flatten)]
    input: AlignmentInput,
    #[arg(long)]
    max_history: Option<usize>,
    /// Graph destination.
    #[arg(long)]
    out: PathBuf,
    /// Also write the estimated self-loop probabilities here.
    #[arg(long)]
    transitions: Option<PathBuf>,
}

impl CompileGraph {
    fn run(self) -> Result<()> {
        let (inv, ali) = self.input.load()?;
        let lm = MixedHistoryLm::estimate_with(&ali, &inv, EstimateOptions { max_history: self.max_history })?;
        let tm = count_transitions(&ali)?;
        let fsa = compile(&lm, &tm, &inv)?;
        let report = validate(&fsa);
        ensure!(report.is_ok(), "compiled graph failed validation: {:?}", report.findings);
        with_output(Some(&self.out), |w| Ok(fsa.write(w)?))?;
        if let Some(p) = &self.transitions {
            with_output(Some(p), |w| Ok(tm.write(w)?))?;
        }
        println!("states {} arcs {}", fsa.num_states(), fsa.num_arcs());
        Ok(())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Scaled,
    LogDomain,
}

impl From<KernelArg> for Kernel {
    fn from(k: KernelArg) -> Kernel {
        match k {
            KernelArg::Scaled => Kernel::Scaled,
            KernelArg::LogDomain => Kernel::LogDomain,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Args)]
struct LfmmiStats {
    /// Denominator graph.
    #[arg(long)]
    graph: PathBuf,
    /// Self-loop probabilities for the numerator chain.
    #[arg(long)]
    transitions: PathBuf,
    #[command(flatten)]
    input: AlignmentInput,
    /// Binary score matrix, or a directory of `<utt_id>.ll` matrices.
    #[arg(long)]
    loglikes: PathBuf,
    /// Cross-entropy regularization weight.
    #[arg(long, default_value_t = DEFAULT_CE_LAMBDA)]
    lambda: f64,
    #[arg(long, value_enum, default_value = "scaled")]
    kernel: KernelArg,
    /// Score the numerator by likelihoods only, without transition weights.
    #[arg(long)]
    likelihood_only: bool,
    /// Utterance to use with a single score matrix (default: the only one).
    #[arg(long)]
    utt: Option<String>,
    /// Gradient matrix, or a directory of `<utt_id>.grad` for directory input.
    #[arg(long)]
    out: PathBuf,
}

impl LfmmiStats {
    fn run(self) -> Result<()> {
        let fsa = DenominatorFsa::read(open(&self.graph)?).context("read graph")?;
        let tm = TransitionModel::read(open(&self.transitions)?).context("read transitions")?;
        let (_, ali) = self.input.load()?;
        let cfg = MmiConfig {
            ce_lambda: self.lambda,
            numerator_transitions: !self.likelihood_only,
            kernel: self.kernel.into(),
        };
        let jobs: Vec<(&AlignedUtterance, PathBuf, PathBuf)> = if self.loglikes.is_dir() {
            ali.iter()
                .map(|a| {
                    let x = self.loglikes.join(format!("{}.ll", a.utt_id));
                    (a, x, self.out.join(format!("{}.grad", a.utt_id)))
                })
                .collect()
        } else {
            let a = match &self.utt {
                Some(u) => ali.iter().find(|a| &a.utt_id == u).with_context(|| format!("no alignment for {u}"))?,
                None if ali.len() == 1 => &ali[0],
                None => bail!("{} utterances in alignments; pick one with --utt", ali.len()),
            };
            vec![(a, self.loglikes.clone(), self.out.clone())]
        };
        let mut total = 0.0;
        let mut frames = 0;
        for (a, xp, gp) in jobs {
            let x = LogLikes::read_binary(open(&xp)?).with_context(|| format!("read {}", xp.display()))?;
            let stats = utterance_stats(&fsa, &tm, a, &x, &cfg).with_context(|| a.utt_id.clone())?;
            with_output(Some(&gp), |w| Ok(write_matrix(w, &stats.grad)?))?;
            println!("{} objective {} frames {}", a.utt_id, stats.objective, stats.frames);
            total += stats.objective;
            frames += stats.frames;
        }
        println!("total objective {total} frames {frames}");
        Ok(())
    }
}

#[derive(Args)]
struct BenchFb {
    #[arg(long, value_enum, default_value = "scaled")]
    kernel: KernelArg,
    /// Use this graph instead of the synthetic workload graph.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value_t = BenchConfig::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = BenchConfig::default().num_phones)]
    num_phones: usize,
    #[arg(long, default_value_t = BenchConfig::default().active_phones)]
    active_phones: usize,
    #[arg(long, default_value_t = BenchConfig::default().fanout)]
    fanout: usize,
    #[arg(long, default_value_t = 2)]
    utterances: usize,
    #[arg(long, default_value_t = BenchConfig::default().frames_per_utt)]
    frames: usize,
    /// Times the batch is repeated.
    #[arg(long, default_value_t = 5)]
    passes: usize,
    /// JSON report destination (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl BenchFb {
    fn run(self) -> Result<()> {
        let cfg = BenchConfig {
            seed: self.seed,
            num_phones: self.num_phones,
            active_phones: self.active_phones,
            fanout: self.fanout,
            utterances: self.utterances,
            frames_per_utt: self.frames,
            ..BenchConfig::default()
        };
        let fsa = match &self.graph {
            Some(p) => DenominatorFsa::read(open(p)?).context("read graph")?,
            None => bench_workload(&cfg)?.graph,
        };
        let batch = (0..cfg.utterances)
            .map(|i| bench_loglikes(&cfg, fsa.label_bound(), i))
            .collect::<convrec::Result<Vec<_>>>()?;
        let report = bench_throughput(&fsa, &batch, self.kernel.into(), self.passes)?;
        write_json(self.out.as_deref(), &report)
    }
}

/// Score weights and LM stream mixes, as written by `optimize-weights`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RescoreSettings {
    weights: ScoreWeights,
    forward: Option<StreamMix>,
    backward: Option<StreamMix>,
}

fn parse_stream(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), path.into())),
        _ => Err(format!("expected NAME=PATH, got '{s}'")),
    }
}

#[derive(Args)]
struct NBestInput {
    /// N-best file.
    #[arg(long)]
    nbest: PathBuf,
    /// LM stream file, `name=path`; repeatable.
    #[arg(long = "stream", value_parser = parse_stream)]
    streams: Vec<(String, PathBuf)>,
    /// Words outside this list (one per line) are skipped in stream products.
    #[arg(long)]
    vocab: Option<PathBuf>,
}

impl NBestInput {
    fn load(&self) -> Result<Vec<NBestList>> {
        let mut lists = read_nbest(open(&self.nbest)?).context("read N-best lists")?;
        for (name, p) in &self.streams {
            attach_stream(&mut lists, name, open(p)?).with_context(|| format!("attach stream {name}"))?;
        }
        Ok(lists)
    }

    fn pipeline(&self, s: &RescoreSettings) -> Result<LmPipeline> {
        let vocab = match &self.vocab {
            Some(p) => {
                let mut v = BTreeSet::new();
                for line in open(p)?.lines() {
                    v.extend(line?.split_whitespace().map(str::to_string));
                }
                Some(v)
            }
            None => None,
        };
        Ok(LmPipeline {
            forward: s.forward.clone(),
            backward: s.backward.clone(),
            vocab,
        })
    }
}

fn read_settings(p: Option<&Path>) -> Result<RescoreSettings> {
    match p {
        Some(p) => serde_json::from_reader(open(p)?).with_context(|| format!("parse {}", p.display())),
        None => Ok(RescoreSettings::default()),
    }
}

fn rescore_all(lists: &[NBestList], s: &RescoreSettings, lm: &LmPipeline) -> Result<Vec<RescoredList>> {
    Ok(lists.iter().map(|l| rescore(l, &s.weights, lm)).collect::<convrec::Result<_>>()?)
}

#[derive(Args)]
struct Rescore {
    #[command(flatten)]
    input: NBestInput,
    /// Weights and stream mixes (JSON); N-gram header scores if omitted.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// 1-best transcripts (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the re-ranked N-best lists.
    #[arg(long)]
    nbest_out: Option<PathBuf>,
}

impl Rescore {
    fn run(self) -> Result<()> {
        let settings = read_settings(self.weights.as_deref())?;
        let lm = self.input.pipeline(&settings)?;
        let rescored = rescore_all(&self.input.load()?, &settings, &lm)?;
        let best: Transcripts = rescored
            .iter()
            .map(|r| (r.utt_id.clone(), r.best().hyp.words.clone()))
            .collect();
        with_output(self.out.as_deref(), |w| Ok(write_transcripts(w, &best)?))?;
        if let Some(p) = &self.nbest_out {
            let lists: Vec<NBestList> = rescored.into_iter().map(RescoredList::into_nbest).collect();
            with_output(Some(p), |w| Ok(write_nbest(w, &lists)?))?;
        }
        Ok(())
    }
}

#[derive(Args)]
struct OptimizeWeights {
    #[command(flatten)]
    input: NBestInput,
    /// Reference transcripts.
    #[arg(long)]
    refs: PathBuf,
    /// Starting weights and the stream mixes to tune under.
    #[arg(long)]
    settings: Option<PathBuf>,
    /// Coordinate-search passes.
    #[arg(long, default_value_t = OptimizeOptions::default().passes)]
    passes: usize,
    /// Tuned settings (JSON).
    #[arg(long)]
    out: PathBuf,
}

impl OptimizeWeights {
    fn run(self) -> Result<()> {
        let settings = read_settings(self.settings.as_deref())?;
        let lm = self.input.pipeline(&settings)?;
        let refs = read_transcripts(open(&self.refs)?).context("read references")?;
        let dev: Vec<(NBestList, Vec<String>)> = self
            .input
            .load()?
            .into_iter()
            .map(|l| {
                let r = refs.get(&l.utt_id).with_context(|| format!("no reference for {}", l.utt_id))?.clone();
                Ok((l, r))
            })
            .collect::<Result<_>>()?;
        let before = dev_errors(&dev, &settings.weights, &lm)?;
        let opts = OptimizeOptions {
            passes: self.passes,
            start: settings.weights,
        };
        let weights = optimize_weights(&dev, &lm, &opts)?;
        let after = dev_errors(&dev, &weights, &lm)?;
        println!("errors {} -> {} of {} words", before.errors(), after.errors(), after.reference_words);
        write_json(Some(&self.out), &RescoreSettings { weights, ..settings })
    }
}

#[derive(Args)]
struct BuildCn {
    #[command(flatten)]
    input: NBestInput,
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Scale applied to total scores before normalizing to posteriors.
    #[arg(long, default_value_t = DEFAULT_POSTERIOR_SCALE)]
    scale: f64,
    /// Confusion networks destination.
    #[arg(long)]
    out: PathBuf,
}

impl BuildCn {
    fn run(self) -> Result<()> {
        let settings = read_settings(self.weights.as_deref())?;
        let lm = self.input.pipeline(&settings)?;
        let cns = rescore_all(&self.input.load()?, &settings, &lm)?
            .iter()
            .map(|r| build_cn(r, self.scale))
            .collect::<convrec::Result<Vec<_>>>()?;
        with_output(Some(&self.out), |w| Ok(write_cns(w, &cns)?))
    }
}

#[derive(Args)]
struct Combine {
    /// Confusion-network files, one per system; named by file stem.
    #[arg(long, num_args = 1.., required = true)]
    systems: Vec<PathBuf>,
    /// Dev references for weight estimation and selection.
    #[arg(long)]
    refs: PathBuf,
    /// Greedy forward selection instead of combining every system.
    #[arg(long)]
    greedy: bool,
    /// Weight smoothing towards the previous set during greedy selection.
    #[arg(long, default_value_t = DEFAULT_SMOOTHING)]
    smoothing: f64,
    /// Result (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Also write the combined 1-best transcripts.
    #[arg(long)]
    hyp_out: Option<PathBuf>,
}

#[derive(Serialize)]
struct CombineAll {
    members: Vec<String>,
    weights: Vec<f64>,
    em_iterations: usize,
    errors: convrec::scoring::ErrorCounts,
}

type System = (String, BTreeMap<String, ConfusionNetwork>);

fn read_system(p: &Path) -> Result<System> {
    let name = p
        .file_stem()
        .and_then(|s| s.to_str())
        .with_context(|| format!("no system name in {}", p.display()))?
        .to_string();
    let cns = read_cns(open(p)?).with_context(|| format!("read {}", p.display()))?;
    Ok((name, cns.into_iter().map(|c| (c.utt_id.clone(), c)).collect()))
}

impl Combine {
    fn run(self) -> Result<()> {
        let systems: Vec<System> = self.systems.iter().map(|p| read_system(p)).collect::<Result<_>>()?;
        let refs = read_transcripts(open(&self.refs)?).context("read references")?;
        let (members, weights) = if self.greedy {
            let result = greedy_select(&systems, &refs, self.smoothing)?;
            println!(
                "best single {} errors, combined {} errors of {} words",
                result.best_single.errors(),
                result.errors.errors(),
                result.errors.reference_words
            );
            write_json(Some(&self.out), &result)?;
            (result.set.members, result.set.weights)
        } else {
            let maps: Vec<_> = systems.iter().map(|(_, m)| m).collect();
            let em = em_weights(&maps, &refs)?;
            let errors = convrec::confnet::dev_errors(&maps, &em.weights, &refs)?;
            println!("combined {} errors of {} words", errors.errors(), errors.reference_words);
            let result = CombineAll {
                members: systems.iter().map(|(n, _)| n.clone()).collect(),
                weights: em.weights,
                em_iterations: em.iterations,
                errors,
            };
            write_json(Some(&self.out), &result)?;
            (result.members, result.weights)
        };
        if let Some(p) = &self.hyp_out {
            let chosen: Vec<&BTreeMap<String, ConfusionNetwork>> = members
                .iter()
                .map(|m| &systems.iter().find(|(n, _)| n == m).expect("selected system exists").1)
                .collect();
            let hyps: Transcripts = refs
                .keys()
                .map(|utt| {
                    let cns: Vec<&ConfusionNetwork> = chosen
                        .iter()
                        .map(|s| s.get(utt).with_context(|| format!("no network for {utt}")))
                        .collect::<Result<_>>()?;
                    Ok((utt.clone(), decode_cn(&convrec::confnet::combine(&cns, &weights)?)))
                })
                .collect::<Result<_>>()?;
            with_output(Some(p), |w| Ok(write_transcripts(w, &hyps)?))?;
        }
        Ok(())
    }
}

#[derive(Args)]
struct Score {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    hyp: PathBuf,
}

impl Score {
    fn run(self) -> Result<()> {
        let refs = read_transcripts(open(&self.reference)?).context("read references")?;
        let hyps = read_transcripts(open(&self.hyp)?).context("read hypotheses")?;
        let e = corpus_wer(&refs, &hyps)?;
        let wer = e.wer().context("no reference words")?;
        println!(
            "WER {:.2}% S {} D {} I {} N {}",
            100.0 * wer,
            e.substitutions,
            e.deletions,
            e.insertions,
            e.reference_words
        );
        Ok(())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Problem {
    /// Linear least squares on generated data.
    Lsq,
}

#[derive(Args)]
struct SgdSim {
    #[arg(long, default_value_t = SgdConfig::default().workers)]
    workers: usize,
    #[arg(long, value_enum, default_value = "lsq")]
    problem: Problem,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 2048)]
    samples: usize,
    /// Label noise standard deviation.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, value_enum, default_value = "on")]
    quantize: Switch,
    #[arg(long, value_enum, default_value = "on")]
    error_feedback: Switch,
    /// Samples per update, summed over workers.
    #[arg(long, default_value_t = SgdConfig::default().minibatch)]
    minibatch: usize,
    #[arg(long, default_value_t = SgdConfig::default().lr)]
    lr: f64,
    /// Re-select the minibatch size every this many steps (0 disables).
    #[arg(long, default_value_t = 0)]
    auto_every: usize,
    #[arg(long, default_value_t = SgdConfig::default().seed)]
    seed: u64,
    /// Trace CSV: step, loss, bytes_exchanged, minibatch_size.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct SgdSummary {
    final_loss: f64,
    bytes_exchanged: u64,
    dense_bytes: u64,
    bandwidth_ratio: f64,
    bits_per_entry: f64,
}

impl SgdSim {
    fn run(self) -> Result<()> {
        let problem = match self.problem {
            Problem::Lsq => LeastSquares::generate(self.dim, self.samples, self.noise, self.seed)?,
        };
        let cfg = SgdConfig {
            workers: self.workers,
            minibatch: self.minibatch,
            lr: self.lr,
            quantize: self.quantize.on(),
            error_feedback: self.error_feedback.on(),
            seed: self.seed,
            auto_every: self.auto_every,
        };
        let report = sim_train(&problem, cfg, self.steps)?;
        let mut w = csv::Writer::from_writer(create(&self.out)?);
        for row in &report.trace {
            w.serialize(row)?;
        }
        w.flush().with_context(|| format!("write {}", self.out.display()))?;
        write_json(
            None,
            &SgdSummary {
                final_loss: report.final_loss,
                bytes_exchanged: report.bytes_exchanged,
                dense_bytes: report.dense_bytes,
                bandwidth_ratio: report.bandwidth_ratio,
                bits_per_entry: report.bits_per_entry,
            },
        )
    }
}

/// Reads a pipeline configuration: JSON for `.json`, TOML otherwise.
fn read_config(p: Option<&Path>, seed: Option<u64>) -> Result<(PipelineConfig, PathBuf)> {
    let (mut cfg, base) = match p {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("read {}", p.display()))?;
            let cfg: PipelineConfig = if p.extension().is_some_and(|e| e == "json") {
                serde_json::from_str(&text).with_context(|| format!("parse {}", p.display()))?
            } else {
                toml::from_str(&text).with_context(|| format!("parse {}", p.display()))?
            };
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (cfg, base)
        }
        None => (PipelineConfig::default(), PathBuf::from(".")),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok((cfg, base))
}

#[derive(Args)]
struct Synth {
    /// Pipeline configuration with a `synth` section (defaults if omitted).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

impl Synth {
    fn run(self) -> Result<()> {
        let (cfg, _) = read_config(self.config.as_deref(), self.seed)?;
        export_synth(&cfg, &self.out)?;
        println!("{}", self.out.join("pipeline.json").display());
        Ok(())
    }
}

#[derive(Args)]
struct Pipeline {
    /// Configuration file, TOML or `.json` (built-in synthetic defaults if omitted).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report destination (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Pipeline {
    fn run(self) -> Result<()> {
        let (cfg, base) = read_config(self.config.as_deref(), self.seed)?;
        let report = run_pipeline(&cfg, if base.as_os_str().is_empty() { Path::new(".") } else { &base })?;
        let json = report.to_json()?;
        with_output(self.out.as_deref(), |w| Ok(write!(w, "{json}")?))
    }
}
