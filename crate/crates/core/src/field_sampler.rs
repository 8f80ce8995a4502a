//! Exact sampling of the complex oscillator-process prior.
//!
//! Real and imaginary parts are independent stationary Gaussian processes with
//! covariance `c0 * exp(-|x - y|)`. On a line grid they are drawn exactly by
//! the AR(1) recursion; on a periodic box by a truncated random Fourier series.

use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Grid1D, LatticeField};
use crate::rng::SeedStream;

/// Prior normalization: per-component covariance `c0 * exp(-|x - y|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuPrior {
    pub c0: f64,
}

impl Default for OuPrior {
    fn default() -> Self {
        Self { c0: 0.5 }
    }
}

impl OuPrior {
    pub fn new(c0: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::InvalidArgument(format!("c0 must be positive, got {c0}")));
        }
        Ok(Self { c0 })
    }

    /// Per-component covariance at separation `lag`.
    pub fn covariance(&self, lag: f64) -> f64 {
        self.c0 * (-lag.abs()).exp()
    }

    /// `E|u(x)|^2` for the complex field.
    pub fn complex_variance(&self) -> f64 {
        2.0 * self.c0
    }
}

/// Anything that can draw fresh prior fields on a fixed grid. pCN proposals
/// only need this.
pub trait PriorSampler: Send + Sync {
    fn grid(&self) -> &Grid1D;
    fn prior(&self) -> OuPrior;
    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<Complex64>;

    fn sample(&self, seed: SeedStream) -> LatticeField {
        let mut rng = seed.rng();
        LatticeField::from_parts_unchecked(*self.grid(), self.draw(&mut rng))
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// AR(1) sampler on a non-periodic grid.
#[derive(Debug, Clone)]
pub struct LineSampler {
    grid: Grid1D,
    prior: OuPrior,
    decay: f64,
    innovation: f64,
}

impl LineSampler {
    pub fn new(grid: Grid1D, prior: OuPrior) -> Result<Self> {
        if grid.periodic {
            return Err(Error::InvalidGrid("AR(1) sampling needs a non-periodic grid".into()));
        }
        let h = grid.spacing();
        let decay = (-h).exp();
        let innovation = (prior.c0 * -(-2.0 * h).exp_m1()).sqrt();
        Ok(Self { grid, prior, decay, innovation })
    }
}

impl PriorSampler for LineSampler {
    fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn prior(&self) -> OuPrior {
        self.prior
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        let n = self.grid.n_points;
        let s0 = self.prior.c0.sqrt();
        let mut out = Vec::with_capacity(n);
        let mut u = Complex64::new(s0 * normal(rng), s0 * normal(rng));
        out.push(u);
        for _ in 1..n {
            let xi = Complex64::new(normal(rng), normal(rng));
            u = u * self.decay + xi * self.innovation;
            out.push(u);
        }
        out
    }
}

/// Random Fourier series sampler on a periodic box of length `2 pi L`.
///
/// `phi(x) = sqrt(2 c0 / pi) * sum_{|k| <= K} L^{-1/2} (1 + (k/L)^2)^{-1/2} g_k e^{ikx/L}`
/// with `g_k` standard complex Gaussians. The prefactor makes the single-point
/// variance tend to `2 c0` as `L, K -> infinity`.
pub struct PeriodicSampler {
    grid: Grid1D,
    prior: OuPrior,
    mode_cutoff: usize,
    /// Amplitude times the phase `e^{ik x_min / L}`, per mode `k = -K..=K`.
    amplitudes: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PeriodicSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PeriodicSampler")
            .field("grid", &self.grid)
            .field("prior", &self.prior)
            .field("mode_cutoff", &self.mode_cutoff)
            .finish()
    }
}

impl PeriodicSampler {
    pub fn new(grid: Grid1D, mode_cutoff: usize, prior: OuPrior) -> Result<Self> {
        if !grid.periodic {
            return Err(Error::InvalidGrid("Fourier sampling needs a periodic grid".into()));
        }
        if mode_cutoff > grid.n_points / 2 {
            return Err(Error::InvalidArgument(format!(
                "mode cutoff {mode_cutoff} exceeds the representable band {}",
                grid.n_points / 2
            )));
        }
        let l = grid.length() / (2.0 * std::f64::consts::PI);
        let pref = (2.0 * prior.c0 / std::f64::consts::PI).sqrt();
        let k_max = mode_cutoff as i64;
        let amplitudes = (-k_max..=k_max)
            .map(|k| {
                let kl = k as f64 / l;
                let mut a = pref / (l.sqrt() * (1.0 + kl * kl).sqrt());
                if 2 * k.unsigned_abs() as usize == grid.n_points {
                    // Both signs alias to the Nyquist bin; split its weight.
                    a *= std::f64::consts::FRAC_1_SQRT_2;
                }
                Complex64::from_polar(a, kl * grid.x_min)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_inverse(grid.n_points);
        Ok(Self { grid, prior, mode_cutoff, amplitudes, fft })
    }

    pub fn mode_cutoff(&self) -> usize {
        self.mode_cutoff
    }

    /// Exact covariance `E[Re u(x) Re u(y)]` of the truncated series.
    pub fn covariance(&self, lag: f64) -> f64 {
        let l = self.grid.length() / (2.0 * std::f64::consts::PI);
        let k_max = self.mode_cutoff as i64;
        let sum: f64 = (-k_max..=k_max)
            .map(|k| {
                let kl = k as f64 / l;
                let nyquist = if 2 * k.unsigned_abs() as usize == self.grid.n_points { 0.5 } else { 1.0 };
                nyquist * (kl * lag).cos() / (l * (1.0 + kl * kl))
            })
            .sum();
        self.prior.c0 / std::f64::consts::PI * sum
    }
}

impl PriorSampler for PeriodicSampler {
    fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn prior(&self) -> OuPrior {
        self.prior
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        let n = self.grid.n_points;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let k_max = self.mode_cutoff as i64;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (amp, k) in self.amplitudes.iter().zip(-k_max..=k_max) {
            let g = Complex64::new(s * normal(rng), s * normal(rng));
            buf[k.rem_euclid(n as i64) as usize] += amp * g;
        }
        self.fft.process(&mut buf);
        buf
    }
}

pub fn sample_ou_line(grid: Grid1D, seed: SeedStream) -> Result<LatticeField> {
    sample_ou_line_with(grid, OuPrior::default(), seed)
}

pub fn sample_ou_line_with(grid: Grid1D, prior: OuPrior, seed: SeedStream) -> Result<LatticeField> {
    Ok(LineSampler::new(grid, prior)?.sample(seed))
}

pub fn sample_ou_periodic(grid: Grid1D, mode_cutoff: usize, seed: SeedStream) -> Result<LatticeField> {
    Ok(PeriodicSampler::new(grid, mode_cutoff, OuPrior::default())?.sample(seed))
}

/// AR(1) on a line grid, the full-band Fourier series on a periodic one.
pub fn prior_sampler(grid: Grid1D, prior: OuPrior) -> Result<Box<dyn PriorSampler>> {
    if grid.periodic {
        Ok(Box::new(PeriodicSampler::new(grid, grid.n_points / 2, prior)?))
    } else {
        Ok(Box::new(LineSampler::new(grid, prior)?))
    }
}

/// `count` independent prior draws; replica `r` uses `base.child(r)`.
pub fn sample_ensemble(sampler: &dyn PriorSampler, count: usize, base: SeedStream) -> Vec<LatticeField> {
    (0..count as u64).into_par_iter().map(|r| sampler.sample(base.child(r))).collect()
}

/// Which component of the complex field a covariance reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Re,
    Im,
}

fn component(v: Complex64, c: Component) -> f64 {
    match c {
        Component::Re => v.re,
        Component::Im => v.im,
    }
}

/// Mean of `a_m * b_m` and its standard error. Zero-mean fields make the raw
/// product mean the covariance estimator.
fn product_mean(products: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut n = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for p in products {
        n += 1;
        let d = p - mean;
        mean += d / n as f64;
        m2 += d * (p - mean);
    }
    let se = if n > 1 { (m2 / (n - 1) as f64 / n as f64).sqrt() } else { 0.0 };
    (mean, se)
}

/// Covariance of `Re u(x_i)` and `Re u(x_j)` with its Monte Carlo standard error.
pub fn empirical_covariance(ensemble: &[LatticeField], i: usize, j: usize) -> Result<(f64, f64)> {
    empirical_cross_covariance(ensemble, i, Component::Re, j, Component::Re)
}

pub fn empirical_cross_covariance(
    ensemble: &[LatticeField],
    i: usize,
    ci: Component,
    j: usize,
    cj: Component,
) -> Result<(f64, f64)> {
    let first = ensemble.first().ok_or_else(|| Error::InvalidArgument("empty ensemble".into()))?;
    let n = first.grid().n_points;
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!("indices ({i}, {j}) outside grid of {n} points")));
    }
    Ok(product_mean(
        ensemble.iter().map(|f| component(f.values()[i], ci) * component(f.values()[j], cj)),
    ))
}

/// One line of a covariance report.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceRow {
    pub i: usize,
    pub j: usize,
    pub lag: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub target: f64,
}

impl CovarianceRow {
    /// `|estimate - target| / std_error` (infinite when the error is zero and
    /// the estimate is off target).
    pub fn z_score(&self) -> f64 {
        let d = (self.estimate - self.target).abs();
        if self.std_error > 0.0 {
            d / self.std_error
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Streaming covariance over all index pairs `(i, j)` with `i <= j`, for
/// ensembles too large to hold in memory.
#[derive(Debug, Clone)]
pub struct CovarianceAccumulator {
    n_points: usize,
    count: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl CovarianceAccumulator {
    pub fn new(n_points: usize) -> Self {
        let pairs = n_points * (n_points + 1) / 2;
        Self { n_points, count: 0, sum: vec![0.0; pairs], sum_sq: vec![0.0; pairs] }
    }

    fn pair_index(&self, i: usize, j: usize) -> usize {
        i * self.n_points - i * (i + 1) / 2 + j
    }

    pub fn push(&mut self, field: &[Complex64]) {
        debug_assert_eq!(field.len(), self.n_points);
        let mut p = 0;
        for i in 0..self.n_points {
            let a = field[i].re;
            for b in &field[i..] {
                let v = a * b.re;
                self.sum[p] += v;
                self.sum_sq[p] += v * v;
                p += 1;
            }
        }
        self.count += 1;
    }

    pub fn merge(&mut self, other: &CovarianceAccumulator) {
        assert_eq!(self.n_points, other.n_points);
        self.count += other.count;
        self.sum.iter_mut().zip(&other.sum).for_each(|(a, b)| *a += b);
        self.sum_sq.iter_mut().zip(&other.sum_sq).for_each(|(a, b)| *a += b);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn estimate(&self, i: usize, j: usize) -> (f64, f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let p = self.pair_index(i, j);
        let m = self.count as f64;
        let mean = self.sum[p] / m;
        let var = ((self.sum_sq[p] - m * mean * mean) / (m - 1.0)).max(0.0);
        (mean, (var / m).sqrt())
    }

    pub fn report(&self, grid: &Grid1D, prior: OuPrior) -> Vec<CovarianceRow> {
        let mut rows = Vec::with_capacity(self.sum.len());
        for i in 0..self.n_points {
            for j in i..self.n_points {
                let (estimate, std_error) = self.estimate(i, j);
                let lag = (j - i) as f64 * grid.spacing();
                rows.push(CovarianceRow { i, j, lag, estimate, std_error, target: prior.covariance(lag) });
            }
        }
        rows
    }
}

/// Draws `replicas` prior fields in parallel chunks and accumulates all pair
/// covariances without storing the ensemble.
pub fn covariance_scan(sampler: &dyn PriorSampler, replicas: usize, base: SeedStream) -> CovarianceAccumulator {
    let n = sampler.grid().n_points;
    let chunk = 1024usize;
    let chunks = replicas.div_ceil(chunk);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = CovarianceAccumulator::new(n);
            for r in c * chunk..((c + 1) * chunk).min(replicas) {
                let mut rng = base.child(r as u64).rng();
                acc.push(&sampler.draw(&mut rng));
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(CovarianceAccumulator::new(n), |mut a, b| {
            a.merge(&b);
            a
        })
}

pub fn write_covariance_csv(rows: &[CovarianceRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "i,j,lag,estimate,std_error,target")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{},{}", r.i, r.j, r.lag, r.estimate, r.std_error, r.target)?;
    }
    Ok(())
}

/// Writes an ensemble in long format: `x,re_u,im_u,replica_id`.
pub fn write_ensemble_csv(ensemble: &[LatticeField], mut out: impl Write) -> Result<()> {
    writeln!(out, "x,re_u,im_u,replica_id")?;
    for (r, f) in ensemble.iter().enumerate() {
        for (x, v) in f.grid().points().iter().zip(f.values()) {
            writeln!(out, "{x},{},{},{r}", v.re, v.im)?;
        }
    }
    Ok(())
}

/// Reads an ensemble written by [`write_ensemble_csv`] back onto `grid`.
pub fn read_ensemble_csv(grid: Grid1D, input: impl BufRead) -> Result<Vec<LatticeField>> {
    let bad = |reason: String| Error::Format { path: "<ensemble>".into(), reason };
    let mut lines = input.lines();
    let header = lines.next().transpose()?;
    if header.as_deref().map(str::trim) != Some("x,re_u,im_u,replica_id") {
        return Err(bad("missing header x,re_u,im_u,replica_id".into()));
    }
    let mut members: Vec<Vec<Complex64>> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(bad(format!("line {}: expected 4 columns", lineno + 2)));
        }
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("line {}: {e}", lineno + 2)));
        let re = parse(cols[1])?;
        let im = parse(cols[2])?;
        let r: usize = cols[3].trim().parse().map_err(|e| bad(format!("line {}: {e}", lineno + 2)))?;
        if r >= members.len() {
            members.resize_with(r + 1, Vec::new);
        }
        members[r].push(Complex64::new(re, im));
    }
    members.into_iter().map(|v| LatticeField::new(grid, v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_sampler_is_reproducible() {
        let g = Grid1D::line(-5.0, 5.0, 101).unwrap();
        let a = sample_ou_line(g, SeedStream::new(1, 2)).unwrap();
        let b = sample_ou_line(g, SeedStream::new(1, 2)).unwrap();
        assert_eq!(a, b);
        let c = sample_ou_line(g, SeedStream::new(1, 3)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_wrong_grid_kinds() {
        let p = Grid1D::periodic(0.0, 10.0, 64).unwrap();
        assert!(sample_ou_line(p, SeedStream::new(0, 0)).is_err());
        let l = Grid1D::line(0.0, 10.0, 64).unwrap();
        assert!(sample_ou_periodic(l, 4, SeedStream::new(0, 0)).is_err());
        assert!(sample_ou_periodic(p, 33, SeedStream::new(0, 0)).is_err());
        assert!(sample_ou_periodic(p, 32, SeedStream::new(0, 0)).is_ok());
    }

    #[test]
    fn zero_cutoff_is_constant() {
        let p = Grid1D::periodic(-3.0, 7.0, 32).unwrap();
        let f = sample_ou_periodic(p, 0, SeedStream::new(5, 0)).unwrap();
        let v0 = f.values()[0];
        assert!(f.values().iter().all(|v| (v - v0).norm() < 1e-14));
    }

    #[test]
    fn identical_ensemble_has_zero_error() {
        let g = Grid1D::line(0.0, 1.0, 5).unwrap();
        let f = sample_ou_line(g, SeedStream::new(9, 0)).unwrap();
        let ens = vec![f.clone(); 10];
        let (est, se) = empirical_covariance(&ens, 1, 3).unwrap();
        assert_eq!(se, 0.0);
        assert!((est - f.values()[1].re * f.values()[3].re).abs() < 1e-15);
        assert!(empirical_covariance(&[], 0, 0).is_err());
    }

    #[test]
    fn accumulator_matches_direct_estimate() {
        let g = Grid1D::line(0.0, 2.0, 9).unwrap();
        let s = LineSampler::new(g, OuPrior::default()).unwrap();
        let ens = sample_ensemble(&s, 200, SeedStream::new(3, 0));
        let mut acc = CovarianceAccumulator::new(9);
        ens.iter().for_each(|f| acc.push(f.values()));
        let (a, sa) = acc.estimate(2, 6);
        let (b, sb) = empirical_covariance(&ens, 2, 6).unwrap();
        assert!((a - b).abs() < 1e-12 && (sa - sb).abs() < 1e-12);
    }

    #[test]
    fn ensemble_csv_round_trip() {
        let g = Grid1D::line(0.0, 1.0, 4).unwrap();
        let s = LineSampler::new(g, OuPrior::default()).unwrap();
        let ens = sample_ensemble(&s, 3, SeedStream::new(0, 0));
        let mut buf = Vec::new();
        write_ensemble_csv(&ens, &mut buf).unwrap();
        let back = read_ensemble_csv(g, buf.as_slice()).unwrap();
        assert_eq!(back, ens);
    }
}
