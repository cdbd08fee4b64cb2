use ndarray::Array2;

use super::{check_labels, FbResult, LogLikes};
use crate::den_graph::DenominatorFsa;
use crate::error::{Error, Result};

/// Arcs of one side of the graph in compressed sparse layout: for row `r`,
/// entries `offsets[r]..offsets[r+1]` give the state at the other end of
/// the arc, its senone label and its linear weight.
#[derive(Debug, Clone)]
struct Csr {
    offsets: Vec<usize>,
    other: Vec<u32>,
    label: Vec<u32>,
    prob: Vec<f64>,
}

/// Linear-domain forward-backward with per-frame rescaling.
///
/// Each frame is a sparse matrix times dense vector product over the arc
/// layout, with the frame's senone scores exponentiated once (relative to
/// the frame maximum) and looked up by label. Alpha rows are renormalized
/// to sum to one and the log scale factors are accumulated separately.
#[derive(Debug, Clone)]
pub struct ScaledKernel {
    num_states: usize,
    start: usize,
    by_dst: Csr,
    by_src: Csr,
    finals: Vec<f64>,
    labels: Vec<u32>,
    label_bound: usize,
}

impl ScaledKernel {
    pub fn new(fsa: &DenominatorFsa) -> Self {
        let n = fsa.num_states();
        let arcs = fsa.arcs();
        let mut by_dst = Csr {
            offsets: Vec::with_capacity(n + 1),
            other: Vec::with_capacity(arcs.len()),
            label: Vec::with_capacity(arcs.len()),
            prob: Vec::with_capacity(arcs.len()),
        };
        by_dst.offsets.push(0);
        for dst in 0..n as u32 {
            for &i in fsa.incoming(dst) {
                let a = &arcs[i as usize];
                by_dst.other.push(a.src);
                by_dst.label.push(a.senone);
                by_dst.prob.push(a.log_weight.exp());
            }
            by_dst.offsets.push(by_dst.other.len());
        }
        let mut by_src = Csr {
            offsets: Vec::with_capacity(n + 1),
            other: Vec::with_capacity(arcs.len()),
            label: Vec::with_capacity(arcs.len()),
            prob: Vec::with_capacity(arcs.len()),
        };
        by_src.offsets.push(0);
        for src in 0..n as u32 {
            for a in fsa.outgoing(src) {
                by_src.other.push(a.dst);
                by_src.label.push(a.senone);
                by_src.prob.push(a.log_weight.exp());
            }
            by_src.offsets.push(by_src.other.len());
        }
        let mut labels: Vec<u32> = arcs.iter().map(|a| a.senone).collect();
        labels.sort_unstable();
        labels.dedup();
        ScaledKernel {
            num_states: n,
            start: fsa.start() as usize,
            by_dst,
            by_src,
            finals: fsa.finals().iter().map(|f| f.exp()).collect(),
            labels,
            label_bound: fsa.label_bound(),
        }
    }

    /// Fills `emit[l] = exp(scores[l] - max)` for every used label and
    /// returns the max.
    fn frame_emissions(&self, scores: &[f64], emit: &mut [f64]) -> f64 {
        let max = self
            .labels
            .iter()
            .map(|&l| scores[l as usize])
            .fold(f64::NEG_INFINITY, f64::max);
        for &l in &self.labels {
            emit[l as usize] = (scores[l as usize] - max).exp();
        }
        max
    }

    pub fn run(&self, fsa: &DenominatorFsa, x: &LogLikes) -> Result<FbResult> {
        check_labels(fsa, x)?;
        if self.label_bound > x.senones() {
            return Err(Error::Shape("kernel built for a different graph".into()));
        }
        let frames = x.frames();
        let n = self.num_states;
        let mut emit = vec![0.0; x.senones()];

        // alpha[t] holds the normalized forward vector at boundary t.
        let mut alpha = vec![0.0; (frames + 1) * n];
        alpha[self.start] = 1.0;
        let mut log_scale = 0.0;
        for t in 0..frames {
            let frame_max = self.frame_emissions(x.row(t), &mut emit);
            let (prev, next) = alpha.split_at_mut((t + 1) * n);
            let prev = &prev[t * n..];
            let next = &mut next[..n];
            let mut sum = 0.0;
            for (dst, out) in next.iter_mut().enumerate() {
                let mut acc = 0.0;
                for k in self.by_dst.offsets[dst]..self.by_dst.offsets[dst + 1] {
                    acc += prev[self.by_dst.other[k] as usize] * self.by_dst.prob[k] * emit[self.by_dst.label[k] as usize];
                }
                *out = acc;
                sum += acc;
            }
            if sum <= 0.0 || !sum.is_finite() {
                return Err(Error::NoPath { frames });
            }
            let inv = 1.0 / sum;
            next.iter_mut().for_each(|v| *v *= inv);
            log_scale += sum.ln() + frame_max;
        }
        let last = &alpha[frames * n..];
        let end_mass: f64 = last.iter().zip(&self.finals).map(|(a, f)| a * f).sum();
        if end_mass <= 0.0 {
            return Err(Error::NoPath { frames });
        }
        let log_total = log_scale + end_mass.ln();

        // Backward sweep with normalized beta, accumulating gamma on the fly.
        let mut gamma = Array2::zeros((frames, x.senones()));
        let mut beta_next = self.finals.clone();
        let mut beta = vec![0.0; n];
        for t in (0..frames).rev() {
            self.frame_emissions(x.row(t), &mut emit);
            let alpha_t = &alpha[t * n..(t + 1) * n];
            let mut row = gamma.row_mut(t);
            let row = row.as_slice_mut().expect("standard layout");
            let mut beta_sum = 0.0;
            let mut gamma_sum = 0.0;
            for (src, out) in beta.iter_mut().enumerate() {
                let a_src = alpha_t[src];
                let mut acc = 0.0;
                for k in self.by_src.offsets[src]..self.by_src.offsets[src + 1] {
                    let label = self.by_src.label[k] as usize;
                    let v = self.by_src.prob[k] * emit[label] * beta_next[self.by_src.other[k] as usize];
                    acc += v;
                    let g = a_src * v;
                    row[label] += g;
                    gamma_sum += g;
                }
                *out = acc;
                beta_sum += acc;
            }
            if gamma_sum <= 0.0 || beta_sum <= 0.0 {
                return Err(Error::NoPath { frames });
            }
            let inv = 1.0 / gamma_sum;
            for &l in &self.labels {
                row[l as usize] *= inv;
            }
            let inv = 1.0 / beta_sum;
            for (dst, src) in beta_next.iter_mut().zip(&beta) {
                *dst = src * inv;
            }
        }
        Ok(FbResult { log_total, gamma })
    }
}
