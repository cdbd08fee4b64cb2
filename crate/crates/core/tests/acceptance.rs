use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use convrec::confnet::{build_cn, build_cn_from, combine, greedy_select, ConfusionNetwork};
use convrec::den_graph::{compile, count_transitions, Arc, DenominatorFsa};
use convrec::forward_backward::{
    batch_stats, bench_throughput, ce_regularize, forward_backward, mmi_stats, utterance_stats, Kernel, LogLikes,
    MmiConfig, NumeratorChain, ScaledKernel,
};
use convrec::nbest::{
    combine_directions, interpolate_word_probs, lm_score, rescore, Hypothesis, LmPipeline, OptimizeOptions,
    ScoreWeights, StreamMix, RNN_RNN_NGRAM_WEIGHTS,
};
use convrec::onebit_sgd::{bits_per_entry, quantize, sim_train, LeastSquares, SgdConfig};
use convrec::pipeline::{rescore_system, run_pipeline, PipelineConfig};
use convrec::scoring::Transcripts;
use convrec::senone_lm::{extract_events, AlignedUtterance, HistoryState, Inventory, MixedHistoryLm};
use convrec::synth::{bench_loglikes, bench_workload, synth_corpus, BenchConfig, SynthConfig, SynthCorpus};
use ndarray::Array2;
use num::{BigInt, BigRational, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1.0)
}

fn random_graph(r: &mut ChaCha8Rng, senones: usize) -> DenominatorFsa {
    let n = r.random_range(1..=12);
    let mut arcs = Vec::new();
    for src in 0..n {
        for _ in 0..r.random_range(1..=3) {
            arcs.push(Arc {
                src: src as u32,
                dst: r.random_range(0..n) as u32,
                senone: r.random_range(0..senones) as u32,
                log_weight: normal(r),
            });
        }
    }
    let mut finals: Vec<f64> = (0..n)
        .map(|_| if r.random_bool(0.5) { normal(r) } else { f64::NEG_INFINITY })
        .collect();
    let f = r.random_range(0..n);
    finals[f] = normal(r);
    DenominatorFsa::new(n, 0, arcs, finals).unwrap()
}

/// Path weights by explicit enumeration: `(log weight, senone sequence)`.
fn enumerate_paths(fsa: &DenominatorFsa, x: &LogLikes) -> Vec<(f64, Vec<u32>)> {
    fn walk(fsa: &DenominatorFsa, x: &LogLikes, state: u32, t: usize, w: f64, labels: &mut Vec<u32>, out: &mut Vec<(f64, Vec<u32>)>) {
        if t == x.frames() {
            let f = fsa.final_log_weight(state);
            if f > f64::NEG_INFINITY {
                out.push((w + f, labels.clone()));
            }
            return;
        }
        for a in fsa.outgoing(state) {
            labels.push(a.senone);
            walk(fsa, x, a.dst, t + 1, w + a.log_weight + x.row(t)[a.senone as usize], labels, out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    walk(fsa, x, fsa.start(), 0, 0.0, &mut Vec::new(), &mut out);
    out
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut r = ChaCha8Rng::seed_from_u64(101);
    let senones = 5;
    let mut graphs = 0;
    let mut worst: f64 = 0.0;
    while graphs < 100 {
        let fsa = random_graph(&mut r, senones);
        let frames = r.random_range(1..=6);
        let x = LogLikes::new(Array2::from_shape_fn((frames, senones), |_| normal(&mut r))).unwrap();
        let paths = enumerate_paths(&fsa, &x);
        if paths.is_empty() {
            continue;
        }
        graphs += 1;
        let max = paths.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = paths.iter().map(|p| (p.0 - max).exp()).sum();
        let log_total = max + z.ln();
        let mut gamma = Array2::<f64>::zeros((frames, senones));
        for (w, labels) in &paths {
            let p = (w - log_total).exp();
            for (t, &s) in labels.iter().enumerate() {
                gamma[(t, s as usize)] += p;
            }
        }
        for (name, fb) in [
            ("log-domain", forward_backward(&fsa, &x).map_err(err)?),
            ("scaled", ScaledKernel::new(&fsa).run(&fsa, &x).map_err(err)?),
        ] {
            ensure!(
                close(fb.log_total, log_total, 1e-9),
                "graph {graphs} {name}: log_total {} vs {}",
                fb.log_total,
                log_total
            );
            for (a, b) in fb.gamma.iter().zip(gamma.iter()) {
                worst = worst.max((a - b).abs());
                ensure!(close(*a, *b, 1e-9), "graph {graphs} {name}: posterior {a} vs {b}");
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.2} s");
    Ok(format!("{graphs} graphs match enumeration (max posterior diff {worst:.1e}) in {secs:.2} s"))
}

fn small_acoustic(seed: u64, utts: usize) -> (SynthCorpus, DenominatorFsa, convrec::den_graph::TransitionModel) {
    let cfg = SynthConfig {
        seed,
        num_phones: 4,
        num_utts: utts,
        frames_per_utt: 30,
        lm_training_sentences: 20,
        ..Default::default()
    };
    let c = synth_corpus(&cfg).unwrap();
    let lm = MixedHistoryLm::estimate(&c.alignments, &c.inventory).unwrap();
    let tm = count_transitions(&c.alignments).unwrap();
    let fsa = compile(&lm, &tm, &c.inventory).unwrap();
    (c, fsa, tm)
}

fn criterion_2() -> Outcome {
    let (c, fsa, tm) = small_acoustic(21, 20);
    let cfg = MmiConfig { kernel: Kernel::LogDomain, ..Default::default() };
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for i in 0..20 {
        let mut r = ChaCha8Rng::seed_from_u64(200 + i as u64);
        let frames = &c.alignments[i].frames[..8];
        let ali = AlignedUtterance::new(format!("g{i}"), frames.to_vec(), &c.inventory).map_err(err)?;
        let s = c.inventory.num_senones();
        let x = Array2::from_shape_fn((frames.len(), s), |_| normal(&mut r));
        let objective = |m: &Array2<f64>| -> Result<f64, String> {
            let ll = LogLikes::new(m.clone()).map_err(err)?;
            Ok(utterance_stats(&fsa, &tm, &ali, &ll, &cfg).map_err(err)?.objective)
        };
        let stats = utterance_stats(&fsa, &tm, &ali, &LogLikes::new(x.clone()).map_err(err)?, &cfg).map_err(err)?;
        for t in 0..x.nrows() {
            for k in 0..s {
                let mut hi = x.clone();
                hi[(t, k)] += h;
                let mut lo = x.clone();
                lo[(t, k)] -= h;
                let fd = (objective(&hi)? - objective(&lo)?) / (2.0 * h);
                let g = stats.grad[(t, k)];
                if g.abs() > 1e-6 {
                    let rel = (fd - g).abs() / g.abs();
                    worst = worst.max(rel);
                    ensure!(rel <= 1e-4, "instance {i} ({t},{k}): analytic {g} vs numeric {fd}");
                    checked += 1;
                } else {
                    ensure!((fd - g).abs() <= 1e-8, "instance {i} ({t},{k}): analytic {g} vs numeric {fd}");
                }
            }
        }
    }
    Ok(format!("20 instances, {checked} entries, max relative error {worst:.1e}"))
}

fn synth_cns(c: &SynthCorpus) -> Result<Vec<(String, BTreeMap<String, ConfusionNetwork>)>, String> {
    let lm = LmPipeline::ngram_only();
    c.systems
        .iter()
        .map(|(name, lists)| {
            let cns = lists
                .iter()
                .map(|l| {
                    let r = rescore(l, &ScoreWeights::default(), &lm).map_err(err)?;
                    Ok((l.utt_id.clone(), build_cn(&r, 0.1).map_err(err)?))
                })
                .collect::<Result<_, String>>()?;
            Ok((name.clone(), cns))
        })
        .collect()
}

fn criterion_3() -> Outcome {
    let (c, fsa, tm) = small_acoustic(31, 30);
    let lm = MixedHistoryLm::estimate(&c.alignments, &c.inventory).map_err(err)?;
    let mut worst_gamma: f64 = 0.0;
    let mut worst_grad: f64 = 0.0;
    let batch: Vec<(AlignedUtterance, LogLikes)> = c.alignments.iter().cloned().zip(c.loglikes.iter().cloned()).collect();
    for kernel in [Kernel::LogDomain, Kernel::Scaled] {
        for lambda in [0.0, 0.1] {
            let cfg = MmiConfig { kernel, ce_lambda: lambda, ..Default::default() };
            let stats = batch_stats(&fsa, &tm, &batch, &cfg).map_err(err)?;
            for st in &stats.per_utterance {
                for row in st.grad.rows() {
                    worst_grad = worst_grad.max(row.sum().abs());
                }
            }
        }
    }
    for (ali, x) in &batch {
        let fb = forward_backward(&fsa, x).map_err(err)?;
        let fs = ScaledKernel::new(&fsa).run(&fsa, x).map_err(err)?;
        for g in [&fb.gamma, &fs.gamma] {
            for row in g.rows() {
                worst_gamma = worst_gamma.max((row.sum() - 1.0).abs());
            }
        }
        let num = NumeratorChain::new(ali, Some(&tm)).map_err(err)?;
        let st = ce_regularize(mmi_stats(&num, &fb, x).map_err(err)?, &num, x, 0.1).map_err(err)?;
        for row in st.grad.rows() {
            worst_grad = worst_grad.max(row.sum().abs());
        }
    }
    ensure!(worst_gamma <= 1e-8, "gamma row sum off by {worst_gamma:e}");
    ensure!(worst_grad <= 1e-8, "gradient row sum off by {worst_grad:e}");

    let mut worst_lm: f64 = 0.0;
    for (_, row) in lm.rows() {
        let s: f64 = row.iter().map(|(_, _, p)| p).sum();
        worst_lm = worst_lm.max((s - 1.0).abs());
    }
    ensure!(worst_lm <= 1e-10, "LM row sum off by {worst_lm:e}");
    let mut worst_state: f64 = 0.0;
    for s in 0..fsa.num_states() as u32 {
        let out: f64 = fsa.outgoing(s).iter().map(|a| a.log_weight.exp()).sum::<f64>() + fsa.final_log_weight(s).exp();
        worst_state = worst_state.max((out - 1.0).abs());
    }
    ensure!(worst_state <= 1e-10, "state mass off by {worst_state:e}");

    let systems = synth_cns(&c)?;
    let mut worst_slot: f64 = 0.0;
    let mut slots = 0;
    let mut check = |cn: &ConfusionNetwork| {
        for slot in &cn.slots {
            worst_slot = worst_slot.max((slot.values().sum::<f64>() - 1.0).abs());
            slots += 1;
        }
    };
    for (utt, _) in &c.references {
        let per: Vec<&ConfusionNetwork> = systems.iter().map(|(_, m)| &m[utt]).collect();
        per.iter().for_each(|cn| check(cn));
        check(&combine(&per, &[0.5, 0.3, 0.2]).map_err(err)?);
    }
    ensure!(worst_slot <= 1e-9, "CN slot sum off by {worst_slot:e}");
    Ok(format!(
        "gamma {worst_gamma:.1e}, grad {worst_grad:.1e}, {} LM rows {worst_lm:.1e}, {} states {worst_state:.1e}, {slots} CN slots {worst_slot:.1e}",
        lm.num_histories(),
        fsa.num_states()
    ))
}

fn criterion_4() -> Outcome {
    // phones s = 0, eh = 1, t = 2; HMM states 2..4 keep their numbers
    let named = [
        (1288, 0, 2), (1061, 0, 3), (1096, 0, 4),
        (527, 1, 2), (128, 1, 3), (66, 1, 4),
        (729, 2, 2), (572, 2, 3), (748, 2, 4),
    ];
    let mut entries = vec![(3u32, 0u32); 1289];
    for &(s, p, pos) in &named {
        entries[s] = (p, pos);
    }
    let inv = Inventory::new(entries).map_err(err)?;
    let seq: Vec<u32> = named.iter().map(|&(s, _, _)| s as u32).collect();
    let events = extract_events(&seq, &inv).map_err(err)?;
    let after_eh4 = HistoryState { prev_phone: Some(0), current_senones: vec![527, 128, 66] };
    let after_t2 = HistoryState { prev_phone: Some(1), current_senones: vec![729] };
    ensure!(events[6] == (after_eh4.clone(), 729), "history before t_s2.729 is {:?}", events[6]);
    ensure!(events[7] == (after_t2.clone(), 572), "history after t_s2.729 is {:?}", events[7]);
    let ali = AlignedUtterance::new("sample", seq.iter().flat_map(|&s| [s, s]).collect(), &inv).map_err(err)?;
    let lm = MixedHistoryLm::estimate(&[ali], &inv).map_err(err)?;
    ensure!(lm.row(&after_eh4).is_some() && lm.row(&after_t2).is_some(), "histories missing from the LM");
    Ok(format!("(s, eh_s2.527, eh_s3.128, eh_s4.66) and (eh, t_s2.729) reproduced; {} histories", lm.num_histories()))
}

fn rational(k: u32) -> BigRational {
    BigRational::new(BigInt::from(k), BigInt::from(1024))
}

fn criterion_5() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(51);
    let names = ["rnn1", "rnn2", "ngram"];
    let mix = StreamMix::new(names, RNN_RNN_NGRAM_WEIGHTS.to_vec()).map_err(err)?;
    let bmix = StreamMix::new(["bwd_rnn1", "bwd_rnn2", "bwd_ngram"], RNN_RNN_NGRAM_WEIGHTS.to_vec()).map_err(err)?;
    let w = [
        BigRational::new(3.into(), 8.into()),
        BigRational::new(3.into(), 8.into()),
        BigRational::new(1.into(), 4.into()),
    ];
    let mut worst: f64 = 0.0;
    for h in 0..200 {
        let n = r.random_range(1..10);
        let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let mut hyp = Hypothesis::new(words, 0.0, 0.0, 0.0, 0).map_err(err)?;
        let mut exact: Vec<Vec<u32>> = Vec::new();
        for name in names.iter().chain(&["bwd_rnn1", "bwd_rnn2", "bwd_ngram"]) {
            let ks: Vec<u32> = (0..=n).map(|_| r.random_range(1..1024)).collect();
            hyp.set_stream(*name, ks.iter().map(|&k| (k as f64 / 1024.0).ln()).collect()).map_err(err)?;
            exact.push(ks);
        }
        let got = interpolate_word_probs(&hyp, &mix).map_err(err)?;
        for (i, g) in got.iter().enumerate() {
            let p: BigRational = (0..3).map(|s| &w[s] * rational(exact[s][i])).sum();
            let want = p.to_f64().ok_or("rational out of range")?.ln();
            worst = worst.max((g - want).abs());
            ensure!((g - want).abs() <= 1e-12, "hyp {h} word {i}: {g} vs {want}");
        }
        let fwd = lm_score(&hyp, &LmPipeline { forward: Some(mix.clone()), backward: None, vocab: None }, "u", h).map_err(err)?;
        let bwd = lm_score(&hyp, &LmPipeline { forward: None, backward: Some(bmix.clone()), vocab: None }, "u", h).map_err(err)?;
        let both = lm_score(&hyp, &LmPipeline { forward: Some(mix.clone()), backward: Some(bmix.clone()), vocab: None }, "u", h)
            .map_err(err)?;
        ensure!(both == fwd + bwd && both == combine_directions(fwd, bwd), "hyp {h}: {both} != {fwd} + {bwd}");
    }
    Ok(format!("200 hypotheses, max deviation from exact rational mix {worst:.1e}; direction sums exact"))
}

fn criterion_6() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(61);
    let mut refs = Transcripts::new();
    let mut systems: Vec<(String, BTreeMap<String, ConfusionNetwork>)> =
        (0..3).map(|k| (format!("sys{k}"), BTreeMap::new())).collect();
    for u in 0..30 {
        let utt = format!("u{u:02}");
        let words: Vec<String> = (0..6).map(|_| format!("w{}", r.random_range(0..20))).collect();
        for (k, (_, cns)) in systems.iter_mut().enumerate() {
            let hyp: Vec<String> = words
                .iter()
                .enumerate()
                .map(|(i, w)| if (i + u) % 3 == k && r.random_bool(0.8) { format!("err{k}") } else { w.clone() })
                .collect();
            let alt = words.clone();
            cns.insert(utt.clone(), build_cn_from(&utt, &[(hyp.as_slice(), 0.55), (alt.as_slice(), 0.45)]).map_err(err)?);
        }
        refs.insert(utt, words);
    }
    let res = greedy_select(&systems, &refs, 0.5).map_err(err)?;
    ensure!(
        res.errors.errors() <= res.best_single.errors(),
        "combined {} > best single {}",
        res.errors.errors(),
        res.best_single.errors()
    );

    let c = synth_corpus(&SynthConfig { num_utts: 40, ..Default::default() }).map_err(err)?;
    let mut networks = 0;
    for (_, cns) in synth_cns(&c)? {
        for cn in cns.values() {
            let one = combine(&[cn], &[1.0]).map_err(err)?;
            ensure!(one.slots.len() == cn.slots.len(), "{}: slot count changed", cn.utt_id);
            for (a, b) in one.slots.iter().zip(&cn.slots) {
                ensure!(a.keys().eq(b.keys()), "{}: words changed", cn.utt_id);
                ensure!(a.values().zip(b.values()).all(|(x, y)| (x - y).abs() <= 1e-12), "{}: mass changed", cn.utt_id);
            }
            networks += 1;
        }
    }
    Ok(format!(
        "greedy {:?} errors {} <= best single {}; singleton combine is the identity on {networks} networks",
        res.set.members,
        res.errors.errors(),
        res.best_single.errors()
    ))
}

fn criterion_7() -> Outcome {
    let c = synth_corpus(&SynthConfig::default()).map_err(err)?;
    let vocab = Some(c.vocab.clone());
    let mix = |s: &[&str], w: &[f64]| StreamMix::new(s.iter().copied(), w.to_vec()).map_err(err);
    let configs = [
        ("rnn1+ngram", LmPipeline { forward: Some(mix(&["rnn1", "ngram"], &[0.75, 0.25])?), backward: None, vocab: vocab.clone() }),
        (
            "rnn1+rnn2+ngram",
            LmPipeline { forward: Some(mix(&["rnn1", "rnn2", "ngram"], &RNN_RNN_NGRAM_WEIGHTS)?), backward: None, vocab: vocab.clone() },
        ),
        (
            "+backward",
            LmPipeline {
                forward: Some(mix(&["rnn1", "rnn2", "ngram"], &RNN_RNN_NGRAM_WEIGHTS)?),
                backward: Some(mix(&["bwd_rnn1", "bwd_rnn2", "bwd_ngram"], &RNN_RNN_NGRAM_WEIGHTS)?),
                vocab: vocab.clone(),
            },
        ),
    ];
    let mut totals = vec![0usize; configs.len()];
    let mut words = 0;
    let mut detail = Vec::new();
    for (name, lists) in &c.systems {
        let mut opts = OptimizeOptions::default();
        let mut errs = Vec::new();
        for (i, (_, lm)) in configs.iter().enumerate() {
            let (w, first, after, _) = rescore_system(lists, &c.references, lm, Some(&opts)).map_err(err)?;
            if i == 0 {
                errs.push(first.errors());
                words += first.reference_words;
            }
            opts.start = w;
            totals[i] += after.errors();
            errs.push(after.errors());
        }
        ensure!(errs[1..].windows(2).all(|p| p[1] <= p[0]), "{name}: errors {errs:?} not monotone");
        detail.push(format!("{name} {errs:?}"));
    }
    ensure!(totals.windows(2).all(|p| p[1] <= p[0]), "pooled errors {totals:?} not monotone");
    let wer: Vec<String> = totals.iter().map(|e| format!("{:.2}%", 100.0 * *e as f64 / words as f64)).collect();
    Ok(format!(
        "WER {}; errors per system (first pass, then each configuration) {}",
        configs.iter().zip(&wer).map(|(c, w)| format!("{} {w}", c.0)).collect::<Vec<_>>().join(", "),
        detail.join(", ")
    ))
}

fn criterion_8() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(81);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (rows, cols) = (r.random_range(1..=64), r.random_range(1..=8));
        let scale = 10f64.powf(r.random_range(-3.0..3.0));
        let g = Array2::from_shape_fn((rows, cols), |_| scale * normal(&mut r));
        let res = Array2::from_shape_fn((rows, cols), |_| 0.1 * scale * normal(&mut r));
        let (q, new_res) = quantize(&g, &res).map_err(err)?;
        let back = q.dequantize() + &new_res;
        for (a, b) in back.iter().zip((&g + &res).iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure!(worst <= 1e-12, "bookkeeping error {worst:e}");
    let p = LeastSquares::generate(64, 2048, 0.1, 3).map_err(err)?;
    let q = sim_train(&p, SgdConfig::default(), 2000).map_err(err)?;
    let d = sim_train(&p, SgdConfig { quantize: false, ..Default::default() }, 2000).map_err(err)?;
    let rel = (q.final_loss - d.final_loss).abs() / d.final_loss;
    ensure!(rel <= 0.01, "quantized {} vs dense {} ({rel:.2e})", q.final_loss, d.final_loss);
    let expected = bits_per_entry(64) / 32.0;
    ensure!((q.bandwidth_ratio - expected).abs() < 1e-12, "ratio {} vs {expected}", q.bandwidth_ratio);
    Ok(format!(
        "bookkeeping max error {worst:.1e} over 1000 matrices; K=4 loss {:.6} vs dense {:.6} ({:.2e} relative); bandwidth ratio {:.4} = 1/32 + {:.4} scale overhead",
        q.final_loss,
        d.final_loss,
        rel,
        q.bandwidth_ratio,
        q.bandwidth_ratio - 1.0 / 32.0
    ))
}

fn criterion_9() -> Outcome {
    let cfg = BenchConfig::default();
    let w = bench_workload(&cfg).map_err(err)?;
    let senones = w.inventory.num_senones();
    let batch: Vec<LogLikes> = (0..2).map(|i| bench_loglikes(&cfg, senones, i)).collect::<Result<_, _>>().map_err(err)?;
    let passes = cfg.utterances * cfg.frames_per_utt / (2 * cfg.frames_per_utt);
    let rep = bench_throughput(&w.graph, &batch, Kernel::Scaled, passes).map_err(err)?;
    ensure!(rep.states >= 2000 && rep.arcs >= 20000, "graph too small: {} states, {} arcs", rep.states, rep.arcs);
    ensure!(rep.senones == 9000 && rep.frames >= 10000, "workload too small: {} senones, {} frames", rep.senones, rep.frames);
    ensure!(rep.seconds <= 10.0, "{} frames took {:.2} s", rep.frames, rep.seconds);
    Ok(format!(
        "{} states, {} arcs, {} senones, {} frames in {:.2} s ({:.0}x real time)",
        rep.states, rep.arcs, rep.senones, rep.frames, rep.seconds, rep.real_time_factor
    ))
}

fn criterion_10() -> Outcome {
    let cfg = PipelineConfig::default();
    let mut outputs = Vec::new();
    let mut times = Vec::new();
    for _ in 0..2 {
        let start = Instant::now();
        let report = run_pipeline(&cfg, Path::new(".")).map_err(err)?;
        times.push(start.elapsed().as_secs_f64());
        outputs.push(report.to_json().map_err(err)?);
    }
    ensure!(outputs[0] == outputs[1], "reports differ between runs");
    ensure!(times.iter().all(|&t| t < 60.0), "run times {times:?}");
    Ok(format!(
        "identical {}-byte reports; runs took {:.2} s and {:.2} s",
        outputs[0].len(),
        times[0],
        times[1]
    ))
}

fn main() -> ExitCode {
    let criteria: [(usize, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, f) in criteria {
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        match std::panic::catch_unwind(f) {
            Ok(Ok(msg)) => println!("criterion {n}: PASS {msg}"),
            Ok(Err(msg)) => {
                failed += 1;
                println!("criterion {n}: FAIL {msg}");
            }
            Err(_) => {
                failed += 1;
                println!("criterion {n}: FAIL panicked");
            }
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
