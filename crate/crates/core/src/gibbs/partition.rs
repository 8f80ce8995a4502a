use rayon::prelude::*;

use super::measure::MeasureSpec;
use crate::error::{Error, Result};
use crate::field_sampler::prior_sampler;
use crate::grid::Grid1D;
use crate::rng::SeedStream;

/// Monte Carlo estimate of a partition function `D_N = E_q e^{-Φ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl PartitionEstimate {
    /// `D / (1 - D^2)`, the proximity scale, with a delta-method error.
    pub fn proximity_scale(&self) -> (f64, f64) {
        let d = self.value;
        let f = d / (1.0 - d * d);
        let df = (1.0 + d * d) / (1.0 - d * d).powi(2);
        (f, df * self.std_error)
    }

    /// Whether the error bar reaches zero.
    pub fn consistent_with_zero(&self) -> bool {
        self.value - 3.0 * self.std_error <= 0.0
    }
}

pub fn estimate_partition(
    spec: &MeasureSpec,
    grid: Grid1D,
    n_samples: usize,
    seed: SeedStream,
) -> Result<PartitionEstimate> {
    if n_samples < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 samples, got {n_samples}")));
    }
    spec.check_grid(&grid)?;
    let sampler = prior_sampler(grid, spec.prior)?;
    let weights: Vec<f64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|r| {
            let u = sampler.sample(seed.child(r));
            (-spec.potential(u.values())).exp()
        })
        .collect();
    let (value, std_error) = crate::stats::mean_se(&weights);
    Ok(PartitionEstimate { value, std_error, n_samples })
}
