use std::time::Instant;

use serde::Serialize;

use super::model::{GnnModel, ModelOptions};
use crate::edge_index::EdgeIndex;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingStats {
    pub samples_ms: Vec<f64>,
    pub mean_ms: f64,
    /// Sample standard deviation; 0 for a single sample.
    pub std_ms: f64,
}

impl TimingStats {
    pub fn from_samples(samples_ms: Vec<f64>) -> Self {
        let n = samples_ms.len() as f64;
        let mean_ms = if samples_ms.is_empty() {
            0.0
        } else {
            samples_ms.iter().sum::<f64>() / n
        };
        let std_ms = if samples_ms.len() < 2 {
            0.0
        } else {
            (samples_ms.iter().map(|s| (s - mean_ms).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        TimingStats {
            samples_ms,
            mean_ms,
            std_ms,
        }
    }
}

/// Runs `body` `warmup` times untimed, then `repeat` times timed.
pub fn time_repeat(warmup: usize, repeat: usize, mut body: impl FnMut() -> Result<()>) -> Result<TimingStats> {
    if repeat == 0 {
        return Err(Error::InvalidShape {
            op: "time_repeat",
            msg: "repeat must be at least 1".into(),
        });
    }
    for _ in 0..warmup {
        body()?;
    }
    let mut samples = Vec::with_capacity(repeat);
    for _ in 0..repeat {
        let t = Instant::now();
        body()?;
        samples.push(t.elapsed().as_secs_f64() * 1e3);
    }
    Ok(TimingStats::from_samples(samples))
}

/// One forward pass plus backward from the sum of the first `num_seeds`
/// output rows.
pub fn forward_backward<T: Scalar>(
    model: &GnnModel<T>,
    edges: &EdgeIndex,
    x: &Tensor<T>,
    opts: &ModelOptions<'_, T>,
    num_seeds: usize,
) -> Result<Tensor<T>> {
    let out = model.forward(edges, x, opts)?;
    let seeds = out.narrow_rows(0, num_seeds.min(out.rows()))?;
    seeds.sum().backward()?;
    model.zero_grad();
    Ok(out)
}

pub fn forward_backward_bench<T: Scalar>(
    model: &GnnModel<T>,
    edges: &EdgeIndex,
    x: &Tensor<T>,
    opts: &ModelOptions<'_, T>,
    num_seeds: usize,
    warmup: usize,
    repeat: usize,
) -> Result<TimingStats> {
    time_repeat(warmup, repeat, || {
        forward_backward(model, edges, x, opts, num_seeds).map(drop)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_has_zero_std() {
        let s = time_repeat(0, 1, || Ok(())).unwrap();
        assert_eq!(s.samples_ms.len(), 1);
        assert_eq!(s.std_ms, 0.0);
    }

    #[test]
    fn sample_statistics() {
        let s = TimingStats::from_samples(vec![1.0, 2.0, 3.0]);
        assert_eq!(s.mean_ms, 2.0);
        assert_eq!(s.std_ms, 1.0);
    }
}
