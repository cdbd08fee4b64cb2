use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quant::{aggregate, bits_per_entry, quantize, DENSE_BITS_PER_ENTRY};
use crate::error::{Error, Result};

pub const DIVERGENCE_LOSS: f64 = 1e6;
pub const PROBE_UPDATES: usize = 200;
pub const PROBE_TOLERANCE: f64 = 0.01;

/// `0.5 * mean (a_i . x - b_i)^2` over a fixed Gaussian design.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    a: Array2<f64>,
    b: Array1<f64>,
}

impl LeastSquares {
    pub fn new(a: Array2<f64>, b: Array1<f64>) -> Result<Self> {
        if a.nrows() != b.len() || a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::Shape(format!("design {:?} with {} targets", a.dim(), b.len())));
        }
        Ok(LeastSquares { a, b })
    }

    /// Standard normal design and true parameters, targets with Gaussian
    /// noise of standard deviation `noise`.
    pub fn generate(dim: usize, samples: usize, noise: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_simple_fn((samples, dim), || rng.sample::<f64, _>(StandardNormal));
        let x = Array1::from_shape_simple_fn(dim, || rng.sample::<f64, _>(StandardNormal));
        let b = a.dot(&x) + Array1::from_shape_simple_fn(samples, || noise * rng.sample::<f64, _>(StandardNormal));
        LeastSquares::new(a, b)
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn samples(&self) -> usize {
        self.a.nrows()
    }

    /// First `n` samples.
    pub fn head(&self, n: usize) -> Result<Self> {
        let n = n.min(self.samples());
        LeastSquares::new(self.a.slice(ndarray::s![..n, ..]).to_owned(), self.b.slice(ndarray::s![..n]).to_owned())
    }

    pub fn loss(&self, x: &Array2<f64>) -> f64 {
        let r = self.a.dot(&x.column(0)) - &self.b;
        0.5 * r.dot(&r) / self.samples() as f64
    }

    /// Sum over `idx` of per-sample gradients, shape `(dim, 1)`.
    pub fn grad_sum(&self, x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
        let mut g = Array2::zeros((self.dim(), 1));
        for &i in idx {
            let row = self.a.row(i);
            let r = row.dot(&x.column(0)) - self.b[i];
            g.column_mut(0).scaled_add(r, &row);
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub workers: usize,
    /// Samples per update, summed over workers.
    pub minibatch: usize,
    /// Per-sample learning rate; the update is `lr * sum of gradients`.
    pub lr: f64,
    pub quantize: bool,
    pub error_feedback: bool,
    pub seed: u64,
    /// Re-run minibatch selection every this many steps (0 disables).
    #[serde(default)]
    pub auto_every: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            workers: 4,
            minibatch: 64,
            lr: 5e-4,
            quantize: true,
            error_feedback: true,
            seed: 7,
            auto_every: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub loss: f64,
    pub bytes_exchanged: u64,
    pub minibatch_size: usize,
}

#[derive(Debug, Clone)]
struct Worker {
    params: Array2<f64>,
    residual: Array2<f64>,
    rng: ChaCha8Rng,
    shard: Vec<usize>,
}

/// Workers with replicas, residuals and round-robin data shards.
#[derive(Debug, Clone)]
pub struct Trainer<'a> {
    problem: &'a LeastSquares,
    cfg: SgdConfig,
    workers: Vec<Worker>,
    step: usize,
    bytes: u64,
    dense_bytes: u64,
}

fn worker_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

fn shards(samples: usize, workers: usize) -> Vec<Vec<usize>> {
    (0..workers).map(|k| (k..samples).step_by(workers).collect()).collect()
}

impl<'a> Trainer<'a> {
    pub fn new(problem: &'a LeastSquares, cfg: SgdConfig) -> Result<Self> {
        if cfg.workers == 0 || cfg.minibatch == 0 {
            return Err(Error::InvalidArgument("workers and minibatch must be positive".into()));
        }
        if problem.samples() < cfg.workers {
            return Err(Error::InvalidArgument(format!(
                "{} samples cannot fill {} shards",
                problem.samples(),
                cfg.workers
            )));
        }
        if !(cfg.lr > 0.0) || !cfg.lr.is_finite() {
            return Err(Error::InvalidArgument(format!("learning rate {}", cfg.lr)));
        }
        let zeros = Array2::zeros((problem.dim(), 1));
        let workers = shards(problem.samples(), cfg.workers)
            .into_iter()
            .enumerate()
            .map(|(k, shard)| Worker {
                params: zeros.clone(),
                residual: zeros.clone(),
                rng: worker_rng(cfg.seed, k),
                shard,
            })
            .collect();
        Ok(Trainer {
            problem,
            cfg,
            workers,
            step: 0,
            bytes: 0,
            dense_bytes: 0,
        })
    }

    /// Same replicas, residuals and random state on a different data set.
    pub fn with_problem<'b>(&self, problem: &'b LeastSquares) -> Result<Trainer<'b>> {
        let mut t = Trainer::new(problem, self.cfg)?;
        for ((w, old), shard) in t.workers.iter_mut().zip(&self.workers).zip(shards(problem.samples(), self.cfg.workers)) {
            *w = Worker { shard, ..old.clone() };
        }
        t.step = self.step;
        Ok(t)
    }

    pub fn config(&self) -> &SgdConfig {
        &self.cfg
    }

    pub fn params(&self) -> &Array2<f64> {
        &self.workers[0].params
    }

    pub fn residual(&self, worker: usize) -> &Array2<f64> {
        &self.workers[worker].residual
    }

    pub fn bytes_exchanged(&self) -> u64 {
        self.bytes
    }

    pub fn dense_bytes(&self) -> u64 {
        self.dense_bytes
    }

    pub fn set_minibatch(&mut self, m: usize) -> Result<()> {
        if m == 0 {
            return Err(Error::InvalidArgument("minibatch must be positive".into()));
        }
        self.cfg.minibatch = m;
        Ok(())
    }

    pub fn loss(&self) -> f64 {
        self.problem.loss(self.params())
    }

    /// One synchronous update: sub-gradients per worker, quantization with
    /// error feedback, aggregation in worker order, identical update on
    /// every replica.
    pub fn step(&mut self) -> Result<TraceRow> {
        let (k, m) = (self.cfg.workers, self.cfg.minibatch);
        let problem = self.problem;
        let grads: Vec<Array2<f64>> = self
            .workers
            .par_iter_mut()
            .enumerate()
            .map(|(i, w)| {
                let n = m / k + usize::from(i < m % k);
                let idx: Vec<usize> = (0..n).map(|_| w.shard[w.rng.random_range(0..w.shard.len())]).collect();
                problem.grad_sum(&w.params, &idx)
            })
            .collect();
        let entries = problem.dim();
        let agg = if self.cfg.quantize {
            let mut qs = Vec::with_capacity(k);
            for (w, g) in self.workers.iter_mut().zip(&grads) {
                let (q, r) = if self.cfg.error_feedback {
                    quantize(g, &w.residual)?
                } else {
                    quantize(g, &Array2::zeros(g.dim()))?
                };
                if self.cfg.error_feedback {
                    w.residual = r;
                }
                self.bytes += q.wire_bits().div_ceil(8) as u64;
                qs.push(q);
            }
            aggregate(&qs)?
        } else {
            let mut it = grads.into_iter();
            let mut sum = it.next().unwrap();
            for g in it {
                sum += &g;
            }
            self.bytes += (k * entries * DENSE_BITS_PER_ENTRY / 8) as u64;
            sum
        };
        self.dense_bytes += (k * entries * DENSE_BITS_PER_ENTRY / 8) as u64;
        for w in &mut self.workers {
            w.params.scaled_add(-self.cfg.lr, &agg);
        }
        self.step += 1;
        let reference = &self.workers[0].params;
        if self.workers[1..]
            .iter()
            .any(|w| w.params.iter().zip(reference).any(|(a, b)| a.to_bits() != b.to_bits()))
        {
            return Err(Error::ReplicaMismatch { step: self.step });
        }
        let loss = self.loss();
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            return Err(Error::Diverged { step: self.step, loss });
        }
        Ok(TraceRow {
            step: self.step,
            loss,
            bytes_exchanged: self.bytes,
            minibatch_size: m,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoMinibatch {
    pub chosen: usize,
    /// Probe loss per candidate, `None` where the probe diverged.
    pub probe_losses: Vec<Option<f64>>,
}

/// Probes each candidate size for `updates` steps from the trainer's current
/// state on `probe` data and returns the largest whose probe loss stays
/// within `(1 + tol)` of the first (current) size. The trainer itself is not
/// modified.
pub fn auto_minibatch(
    trainer: &Trainer<'_>,
    probe: &LeastSquares,
    candidates: &[usize],
    updates: usize,
    tol: f64,
) -> Result<AutoMinibatch> {
    if candidates.is_empty() {
        return Err(Error::Empty("minibatch candidates"));
    }
    if candidates.windows(2).any(|w| w[0] >= w[1]) || candidates[0] == 0 {
        return Err(Error::InvalidArgument(format!("candidates {candidates:?} must increase from a positive size")));
    }
    let checkpoint = trainer.with_problem(probe)?;
    let probe_losses: Vec<Option<f64>> = candidates
        .par_iter()
        .map(|&m| {
            let mut t = checkpoint.clone();
            t.set_minibatch(m).ok()?;
            for _ in 0..updates {
                t.step().ok()?;
            }
            Some(t.loss()).filter(|l| l.is_finite())
        })
        .collect();
    let chosen = match probe_losses[0] {
        None => candidates[0],
        Some(base) => candidates
            .iter()
            .zip(&probe_losses)
            .filter(|(_, l)| l.is_some_and(|l| l <= (1.0 + tol) * base))
            .map(|(&m, _)| m)
            .next_back()
            .unwrap_or(candidates[0]),
    };
    Ok(AutoMinibatch { chosen, probe_losses })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub trace: Vec<TraceRow>,
    pub final_loss: f64,
    pub bytes_exchanged: u64,
    /// Bytes a dense 32-bit exchange would have used.
    pub dense_bytes: u64,
    pub bandwidth_ratio: f64,
    pub bits_per_entry: f64,
}

/// Runs `steps` updates from zero parameters.
pub fn sim_train(problem: &LeastSquares, cfg: SgdConfig, steps: usize) -> Result<SimReport> {
    let mut t = Trainer::new(problem, cfg)?;
    let probe = problem.head(256)?;
    let mut trace = Vec::with_capacity(steps);
    for s in 0..steps {
        if cfg.auto_every > 0 && s > 0 && s % cfg.auto_every == 0 {
            let m = t.config().minibatch;
            let pick = auto_minibatch(&t, &probe, &[m, 2 * m, 4 * m], PROBE_UPDATES, PROBE_TOLERANCE)?;
            t.set_minibatch(pick.chosen)?;
        }
        trace.push(t.step()?);
    }
    let final_loss = t.loss();
    Ok(SimReport {
        trace,
        final_loss,
        bytes_exchanged: t.bytes_exchanged(),
        dense_bytes: t.dense_bytes(),
        bandwidth_ratio: t.bytes_exchanged() as f64 / t.dense_bytes().max(1) as f64,
        bits_per_entry: if cfg.quantize {
            bits_per_entry(problem.dim())
        } else {
            DENSE_BITS_PER_ENTRY as f64
        },
    })
}

/// Single-process minibatch SGD with the same sampling as worker 0 of a
/// one-worker pool. Returns the loss after every step.
pub fn plain_sgd(problem: &LeastSquares, lr: f64, minibatch: usize, steps: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = worker_rng(seed, 0);
    let mut x = Array2::zeros((problem.dim(), 1));
    let n = problem.samples();
    let mut out = Vec::with_capacity(steps);
    for step in 1..=steps {
        let idx: Vec<usize> = (0..minibatch).map(|_| rng.random_range(0..n)).collect();
        let g = problem.grad_sum(&x, &idx);
        x.scaled_add(-lr, &g);
        let loss = problem.loss(&x);
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            return Err(Error::Diverged { step, loss });
        }
        out.push(loss);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lsq() -> LeastSquares {
        LeastSquares::generate(64, 2048, 0.1, 3).unwrap()
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let p = LeastSquares::generate(5, 40, 0.3, 1).unwrap();
        let x = Array2::from_shape_fn((5, 1), |(i, _)| 0.1 * i as f64 - 0.2);
        let all: Vec<usize> = (0..40).collect();
        let g = p.grad_sum(&x, &all) / 40.0;
        for i in 0..5 {
            let mut hi = x.clone();
            hi[(i, 0)] += 1e-6;
            let mut lo = x.clone();
            lo[(i, 0)] -= 1e-6;
            let fd = (p.loss(&hi) - p.loss(&lo)) / 2e-6;
            assert!((fd - g[(i, 0)]).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn single_dense_worker_is_plain_sgd() {
        let p = lsq();
        let cfg = SgdConfig { workers: 1, quantize: false, ..Default::default() };
        let sim = sim_train(&p, cfg, 300).unwrap();
        let plain = plain_sgd(&p, cfg.lr, cfg.minibatch, 300, cfg.seed).unwrap();
        for (row, l) in sim.trace.iter().zip(&plain) {
            assert_eq!(row.loss.to_bits(), l.to_bits());
        }
        assert_eq!(sim.bandwidth_ratio, 1.0);
    }

    #[test]
    fn quantized_close_to_dense() {
        let p = lsq();
        let q = sim_train(&p, SgdConfig::default(), 2000).unwrap();
        let d = sim_train(&p, SgdConfig { quantize: false, ..Default::default() }, 2000).unwrap();
        let rel = (q.final_loss - d.final_loss).abs() / d.final_loss;
        assert!(rel < 0.01, "quantized {} dense {} rel {rel}", q.final_loss, d.final_loss);
        assert!((q.bandwidth_ratio - bits_per_entry(64) / 32.0).abs() < 1e-12);
        assert!(q.trace.windows(2).all(|w| w[1].bytes_exchanged > w[0].bytes_exchanged));
    }

    #[test]
    fn residual_telescopes() {
        let p = LeastSquares::generate(8, 64, 0.1, 5).unwrap();
        let x = Array2::from_elem((8, 1), 0.3);
        let mut r = Array2::zeros((8, 1));
        let mut sent = Array2::<f64>::zeros((8, 1));
        let mut truth = Array2::<f64>::zeros((8, 1));
        let mut drift_no_feedback = Array2::<f64>::zeros((8, 1));
        for t in 0..50 {
            let idx: Vec<usize> = (0..8).map(|i| (t * 8 + i) % 64).collect();
            let g = p.grad_sum(&x, &idx);
            let (q, nr) = quantize(&g, &r).unwrap();
            sent += &q.dequantize();
            truth += &g;
            r = nr;
            let (q0, _) = quantize(&g, &Array2::zeros((8, 1))).unwrap();
            drift_no_feedback += &(&g - &q0.dequantize());
            for (d, rr) in (&truth - &sent).iter().zip(&r) {
                assert!((d - rr).abs() < 1e-10);
            }
        }
        let fb: f64 = r.iter().map(|v| v.abs()).sum();
        let nofb: f64 = drift_no_feedback.iter().map(|v| v.abs()).sum();
        assert!(nofb > fb);
    }

    #[test]
    fn divergence_is_an_error() {
        let p = lsq();
        let cfg = SgdConfig { lr: 0.5, ..Default::default() };
        assert!(matches!(sim_train(&p, cfg, 100), Err(Error::Diverged { .. })));
    }

    #[test]
    fn auto_minibatch_cases() {
        let p = LeastSquares::generate(16, 512, 0.0, 9).unwrap();
        let cfg = SgdConfig { workers: 2, minibatch: 8, lr: 2e-3, ..Default::default() };
        let t = Trainer::new(&p, cfg).unwrap();
        let before = t.params().clone();
        let one = auto_minibatch(&t, &p, &[8], PROBE_UPDATES, PROBE_TOLERANCE).unwrap();
        assert_eq!(one.chosen, 8);
        let bowl = auto_minibatch(&t, &p, &[8, 16, 32], PROBE_UPDATES, PROBE_TOLERANCE).unwrap();
        assert_eq!(bowl.chosen, 32, "{bowl:?}");
        assert_eq!(t.params(), &before);

        let hot = SgdConfig { lr: 0.05, ..cfg };
        let t = Trainer::new(&p, hot).unwrap();
        let r = auto_minibatch(&t, &p, &[8, 16, 32], PROBE_UPDATES, PROBE_TOLERANCE).unwrap();
        assert_eq!(r.chosen, 8, "{r:?}");
        assert!(r.probe_losses[0].is_some() && r.probe_losses[2].is_none());

        assert!(auto_minibatch(&t, &p, &[], 10, 0.01).is_err());
        assert!(auto_minibatch(&t, &p, &[16, 8], 10, 0.01).is_err());
    }

    #[test]
    fn deterministic() {
        let p = lsq();
        let cfg = SgdConfig { auto_every: 100, ..Default::default() };
        let a = sim_train(&p, cfg, 250).unwrap();
        let b = sim_train(&p, cfg, 250).unwrap();
        assert_eq!(a, b);
    }
}
