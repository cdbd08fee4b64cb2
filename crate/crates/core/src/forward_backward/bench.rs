use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{forward_backward, LogLikes, ScaledKernel};
use crate::den_graph::DenominatorFsa;
use crate::error::Result;

/// Forward-backward implementation selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    /// Log-domain reference recursions.
    LogDomain,
    /// Linear-domain sparse kernel with per-frame rescaling.
    Scaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub kernel: Kernel,
    pub states: usize,
    pub arcs: usize,
    pub senones: usize,
    pub utterances: usize,
    pub passes: usize,
    /// Frames processed over all passes.
    pub frames: usize,
    pub seconds: f64,
    pub frames_per_second: f64,
    /// Speech duration (10 ms frames) divided by wall time.
    pub real_time_factor: f64,
}

/// Times forward, backward and posterior computation over `batch`, repeated
/// `passes` times, sequentially on the calling thread.
pub fn bench_throughput(fsa: &DenominatorFsa, batch: &[LogLikes], kernel: Kernel, passes: usize) -> Result<BenchReport> {
    let scaled = (kernel == Kernel::Scaled).then(|| ScaledKernel::new(fsa));
    let mut frames = 0;
    let start = Instant::now();
    for x in (0..passes).flat_map(|_| batch) {
        let fb = match &scaled {
            Some(k) => k.run(fsa, x)?,
            None => forward_backward(fsa, x)?,
        };
        std::hint::black_box(&fb);
        frames += x.frames();
    }
    let seconds = start.elapsed().as_secs_f64().max(1e-9);
    Ok(BenchReport {
        kernel,
        states: fsa.num_states(),
        arcs: fsa.num_arcs(),
        senones: batch.first().map_or(0, |x| x.senones()),
        utterances: batch.len(),
        passes,
        frames,
        seconds,
        frames_per_second: frames as f64 / seconds,
        real_time_factor: frames as f64 * 0.01 / seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::den_graph::Arc;
    use ndarray::Array2;

    #[test]
    fn report_fields() {
        let fsa = DenominatorFsa::new(1, 0, vec![Arc { src: 0, dst: 0, senone: 0, log_weight: 0.0 }], vec![0.0]).unwrap();
        let batch = vec![LogLikes::new(Array2::zeros((50, 3))).unwrap(); 2];
        for kernel in [Kernel::Scaled, Kernel::LogDomain] {
            let r = bench_throughput(&fsa, &batch, kernel, 3).unwrap();
            assert_eq!((r.states, r.arcs, r.senones, r.utterances, r.frames), (1, 1, 3, 2, 300));
            assert!(r.seconds > 0.0 && r.frames_per_second > 0.0);
            assert!((r.real_time_factor - r.frames_per_second * 0.01).abs() < 1e-6 * r.real_time_factor);
            let json = serde_json::to_value(&r).unwrap();
            for key in ["frames", "arcs", "seconds", "frames_per_second"] {
                assert!(json.get(key).is_some());
            }
        }
    }
}
