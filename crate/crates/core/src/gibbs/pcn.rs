//! Path-space samplers for the cutoff measures.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::measure::MeasureSpec;
use crate::error::{Error, Result};
use crate::field_sampler::{prior_sampler, PriorSampler};
use crate::grid::{Grid1D, LatticeField};
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcnConfig {
    pub step: f64,
    pub burn_in: usize,
    pub thinning: usize,
    /// Independent chains; output is split evenly between them.
    pub n_chains: usize,
}

impl Default for PcnConfig {
    fn default() -> Self {
        Self { step: 0.2, burn_in: 1000, thinning: 10, n_chains: 8 }
    }
}

/// Ensemble drawn from a Gibbs measure.
#[derive(Debug, Clone)]
pub struct Sampled {
    pub samples: Vec<LatticeField>,
    /// Chain index per sample; samples from different chains are independent.
    pub chains: Vec<usize>,
    /// Post-burn-in acceptance rate (rejection samplers: accepted / proposed).
    pub acceptance_rate: f64,
    pub per_chain_acceptance: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Sampled {
    /// Wraps independent draws.
    pub fn independent(samples: Vec<LatticeField>) -> Self {
        Self {
            chains: (0..samples.len()).collect(),
            samples,
            acceptance_rate: 1.0,
            per_chain_acceptance: vec![1.0],
            warnings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `f` over the ensemble.
    pub fn map<T: Send>(&self, f: impl Fn(&LatticeField) -> T + Sync + Send) -> Vec<T> {
        self.samples.par_iter().map(f).collect()
    }

    /// Mean of `f` and a standard error that accounts for within-chain
    /// correlation (chain-batch estimator, falling back to the iid formula for
    /// independent draws).
    pub fn mean_se(&self, f: impl Fn(&LatticeField) -> f64 + Sync + Send) -> (f64, f64) {
        let x = self.map(f);
        chain_mean_se(&x, &self.chains)
    }

    /// Effective sample size of `f`, summed over chains.
    pub fn ess(&self, f: impl Fn(&LatticeField) -> f64 + Sync + Send) -> f64 {
        let x = self.map(f);
        let n_chains = self.chains.iter().max().map_or(0, |m| m + 1);
        if n_chains == self.samples.len() {
            return x.len() as f64;
        }
        (0..n_chains)
            .map(|c| {
                let xs: Vec<f64> = x.iter().zip(&self.chains).filter(|(_, k)| **k == c).map(|(v, _)| *v).collect();
                if xs.len() < 4 {
                    xs.len() as f64
                } else {
                    crate::stats::effective_sample_size(&xs)
                }
            })
            .sum()
    }
}

/// Mean and standard error with per-chain autocorrelation folded in through
/// each chain's effective sample size.
pub fn chain_mean_se(x: &[f64], chains: &[usize]) -> (f64, f64) {
    let n_chains = chains.iter().max().map_or(0, |m| m + 1);
    if n_chains == x.len() || n_chains == 0 {
        return crate::stats::mean_se(x);
    }
    let (mean, _) = crate::stats::mean_se(x);
    let var = crate::stats::variance(x);
    let ess: f64 = (0..n_chains)
        .map(|c| {
            let xs: Vec<f64> = x.iter().zip(chains).filter(|(_, k)| **k == c).map(|(v, _)| *v).collect();
            if xs.len() < 4 {
                xs.len() as f64
            } else {
                crate::stats::effective_sample_size(&xs)
            }
        })
        .sum();
    (mean, (var / ess.max(1.0)).sqrt())
}

pub fn sample_gibbs_pcn(
    spec: &MeasureSpec,
    grid: Grid1D,
    n_samples: usize,
    step: f64,
    burn_in: usize,
    thinning: usize,
    seed: SeedStream,
) -> Result<Sampled> {
    let sampler = prior_sampler(grid, spec.prior)?;
    let config = PcnConfig { step, burn_in, thinning, ..PcnConfig::default() };
    sample_gibbs_pcn_with(spec, sampler.as_ref(), n_samples, &config, seed)
}

struct ChainOutput {
    samples: Vec<Vec<Complex64>>,
    accepted: usize,
    proposed: usize,
}

fn run_chain(
    spec: &MeasureSpec,
    sampler: &dyn PriorSampler,
    count: usize,
    config: &PcnConfig,
    seed: SeedStream,
) -> Result<ChainOutput> {
    let mut rng = seed.rng();
    let a = (1.0 - config.step * config.step).max(0.0).sqrt();
    let b = config.step;
    let mut u = sampler.draw(&mut rng);
    let mut phi = spec.potential(&u);
    if !phi.is_finite() {
        return Err(Error::Divergence { step: 0 });
    }
    let total = config.burn_in + count * config.thinning;
    let mut out = Vec::with_capacity(count);
    let (mut accepted, mut proposed) = (0usize, 0usize);
    let mut proposal = vec![Complex64::new(0.0, 0.0); u.len()];
    for step in 1..=total {
        let xi = sampler.draw(&mut rng);
        for ((p, v), x) in proposal.iter_mut().zip(&u).zip(&xi) {
            *p = a * v + b * x;
        }
        let phi_new = spec.potential(&proposal);
        if !phi_new.is_finite() {
            return Err(Error::Divergence { step });
        }
        let log_u: f64 = rng.gen::<f64>().ln();
        let accept = log_u < phi - phi_new;
        if accept {
            std::mem::swap(&mut u, &mut proposal);
            phi = phi_new;
        }
        if step > config.burn_in {
            proposed += 1;
            accepted += accept as usize;
            if (step - config.burn_in) % config.thinning == 0 {
                out.push(u.clone());
            }
        }
    }
    Ok(ChainOutput { samples: out, accepted, proposed })
}

/// pCN chains with proposal `√(1-β²) u + β ξ`, run in parallel.
pub fn sample_gibbs_pcn_with(
    spec: &MeasureSpec,
    sampler: &dyn PriorSampler,
    n_samples: usize,
    config: &PcnConfig,
    seed: SeedStream,
) -> Result<Sampled> {
    spec.check_grid(sampler.grid())?;
    if !(config.step > 0.0 && config.step <= 1.0) {
        return Err(Error::InvalidArgument(format!("pCN step must lie in (0, 1], got {}", config.step)));
    }
    if config.thinning == 0 || config.n_chains == 0 {
        return Err(Error::InvalidArgument("thinning and chain count must be positive".into()));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("no samples requested".into()));
    }
    let chains = config.n_chains.min(n_samples);
    let counts: Vec<usize> = (0..chains).map(|c| n_samples / chains + usize::from(c < n_samples % chains)).collect();
    let outputs: Vec<Result<ChainOutput>> = counts
        .par_iter()
        .enumerate()
        .map(|(c, &count)| run_chain(spec, sampler, count, config, seed.child(c as u64)))
        .collect();
    let grid = *sampler.grid();
    let mut samples = Vec::with_capacity(n_samples);
    let mut chain_ids = Vec::with_capacity(n_samples);
    let mut per_chain = Vec::with_capacity(chains);
    let (mut acc, mut prop) = (0usize, 0usize);
    for (c, out) in outputs.into_iter().enumerate() {
        let out = out?;
        acc += out.accepted;
        prop += out.proposed;
        per_chain.push(out.accepted as f64 / out.proposed.max(1) as f64);
        for s in out.samples {
            samples.push(LatticeField::from_parts_unchecked(grid, s));
            chain_ids.push(c);
        }
    }
    let rate = acc as f64 / prop.max(1) as f64;
    let mut warnings = Vec::new();
    if !(0.1..=0.9).contains(&rate) {
        warnings.push(format!("pCN acceptance rate {rate:.3} outside [0.1, 0.9]; consider retuning the step"));
    }
    Ok(Sampled { samples, chains: chain_ids, acceptance_rate: rate, per_chain_acceptance: per_chain, warnings })
}

const MAX_ATTEMPTS: usize = 1_000_000;

/// Independent exact draws: prior proposals accepted with probability
/// `e^{-Φ(u)} <= 1`. Member `r` uses `seed.child(r)`.
pub fn sample_gibbs_rejection(
    spec: &MeasureSpec,
    sampler: &dyn PriorSampler,
    n_samples: usize,
    seed: SeedStream,
) -> Result<Sampled> {
    spec.check_grid(sampler.grid())?;
    let draws: Vec<Result<(Vec<Complex64>, usize)>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed.child(r).rng();
            for attempt in 1..=MAX_ATTEMPTS {
                let u = sampler.draw(&mut rng);
                let phi = spec.potential(&u);
                if !phi.is_finite() {
                    return Err(Error::Divergence { step: attempt });
                }
                if rng.gen::<f64>() < (-phi).exp() {
                    return Ok((u, attempt));
                }
            }
            Err(Error::InvalidArgument(format!(
                "rejection sampler found no acceptance in {MAX_ATTEMPTS} proposals; use pCN"
            )))
        })
        .collect();
    let grid = *sampler.grid();
    let mut samples = Vec::with_capacity(n_samples);
    let mut attempts = 0usize;
    for d in draws {
        let (u, a) = d?;
        attempts += a;
        samples.push(LatticeField::from_parts_unchecked(grid, u));
    }
    let rate = n_samples as f64 / attempts.max(1) as f64;
    Ok(Sampled {
        chains: (0..n_samples).collect(),
        samples,
        acceptance_rate: rate,
        per_chain_acceptance: vec![rate],
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::measure::MeasureSpec;

    fn grid() -> Grid1D {
        Grid1D::line(-6.0, 6.0, 121).unwrap()
    }

    #[test]
    fn zero_potential_accepts_everything() {
        let spec = MeasureSpec::mu_n(0.0, grid()).unwrap();
        let s = sample_gibbs_pcn(&spec, grid(), 200, 0.3, 50, 2, SeedStream::new(1, 0)).unwrap();
        assert_eq!(s.len(), 200);
        assert_eq!(s.acceptance_rate, 1.0);
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn chains_are_reproducible() {
        let spec = MeasureSpec::mu_n(1.0, grid()).unwrap();
        let a = sample_gibbs_pcn(&spec, grid(), 40, 0.2, 20, 3, SeedStream::new(9, 1)).unwrap();
        let b = sample_gibbs_pcn(&spec, grid(), 40, 0.2, 20, 3, SeedStream::new(9, 1)).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.chains, b.chains);
    }

    #[test]
    fn rejects_short_grid_and_bad_step() {
        let g = Grid1D::line(-2.5, 2.5, 51).unwrap();
        let spec = MeasureSpec::mu_n(1.0, g).unwrap();
        assert!(sample_gibbs_pcn(&spec, g, 10, 0.2, 1, 1, SeedStream::new(0, 0)).is_err());
        let spec = MeasureSpec::mu_n(1.0, grid()).unwrap();
        assert!(sample_gibbs_pcn(&spec, grid(), 10, 1.5, 1, 1, SeedStream::new(0, 0)).is_err());
    }
}
