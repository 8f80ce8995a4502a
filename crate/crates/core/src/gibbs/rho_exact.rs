//! Exact grid sampling of the limit process: stationary start from `Ω²`,
//! Markov transitions `p_h(a, b) = Ω(b) e^{-h(L - E)}(a, b) / Ω(a)`.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, LatticeField};
use crate::rng::SeedStream;
use crate::spectral::kernel::positive_semigroup;
use crate::spectral::{SpectralOperator, TargetGrid};

pub const ROW_TOLERANCE: f64 = 1e-6;
/// Transition probabilities below this are dropped from the stored rows.
const DROP: f64 = 1e-16;

/// Stochastic matrix over target-grid cells, stored as sparse cumulative rows.
#[derive(Debug, Clone)]
pub struct RhoSampler {
    pub target: TargetGrid,
    pub step: f64,
    /// Largest `|row sum - 1|` before renormalization.
    pub max_row_defect: f64,
    stationary: Vec<f64>,
    rows: Vec<(Vec<u32>, Vec<f64>)>,
}

fn cumulative(p: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut c: Vec<f64> = p
        .map(|v| {
            acc += v;
            acc
        })
        .collect();
    if let Some(&last) = c.last() {
        c.iter_mut().for_each(|v| *v /= last);
    }
    c
}

fn pick(cdf: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let r: f64 = rng.gen();
    cdf.partition_point(|&c| c <= r).min(cdf.len() - 1)
}

impl RhoSampler {
    /// Builds the transition matrix for lattice spacing `step`.
    pub fn new(op: &SpectralOperator, step: f64) -> Result<Self> {
        if op.grid.dimension != 2 {
            return Err(Error::InvalidArgument("the limit process needs the two-dimensional operator".into()));
        }
        let kernel = positive_semigroup(op, step)?;
        let dv = op.grid.cell_volume();
        let omega = &op.ground_state;
        let n = op.grid.n_states();
        let built: Vec<(usize, f64, (Vec<u32>, Vec<f64>))> = (0..n)
            .into_par_iter()
            .map(|a| {
                let mut idx = Vec::new();
                let mut p = Vec::new();
                let mut sum = 0.0;
                for b in 0..n {
                    let v = omega[b] * kernel.values[(a, b)] * dv / omega[a];
                    sum += v;
                    if v > DROP {
                        idx.push(b as u32);
                        p.push(v);
                    }
                }
                (a, sum, (idx, cumulative(p.into_iter())))
            })
            .collect();
        let mut rows = Vec::with_capacity(n);
        let mut worst = 0.0f64;
        for (a, sum, row) in built {
            let defect = (sum - 1.0).abs();
            if !(defect <= ROW_TOLERANCE) {
                return Err(Error::TransitionNormalization { row: a, sum, tolerance: ROW_TOLERANCE });
            }
            worst = worst.max(defect);
            rows.push(row);
        }
        let stationary = cumulative(op.ground_state.iter().map(|w| w * w * dv));
        Ok(Self { target: op.grid, step, max_row_defect: worst, stationary, rows })
    }

    /// Row `a` as `(state, probability)` pairs.
    pub fn row(&self, a: usize) -> Vec<(usize, f64)> {
        let (idx, cdf) = &self.rows[a];
        let mut prev = 0.0;
        idx.iter()
            .zip(cdf)
            .map(|(&b, &c)| {
                let p = c - prev;
                prev = c;
                (b as usize, p)
            })
            .collect()
    }

    fn jittered(&self, s: usize, rng: &mut ChaCha8Rng) -> Complex64 {
        let (u1, u2) = self.target.coords(s);
        let h = self.target.spacing();
        Complex64::new(u1 + h * (rng.gen::<f64>() - 0.5), u2 + h * (rng.gen::<f64>() - 0.5))
    }

    /// One path on `grid`, whose spacing must equal the transition step.
    pub fn path(&self, n_points: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        let mut s = pick(&self.stationary, rng);
        let mut out = Vec::with_capacity(n_points);
        out.push(self.jittered(s, rng));
        for _ in 1..n_points {
            let (idx, cdf) = &self.rows[s];
            s = idx[pick(cdf, rng)] as usize;
            out.push(self.jittered(s, rng));
        }
        out
    }

    pub fn sample(&self, grid: Grid1D, n_samples: usize, seed: SeedStream) -> Result<Vec<LatticeField>> {
        if grid.periodic {
            return Err(Error::InvalidGrid("the limit process is sampled on line grids".into()));
        }
        if (grid.spacing() - self.step).abs() > 1e-9 * self.step {
            return Err(Error::GridMismatch(format!(
                "grid spacing {} differs from the transition step {}",
                grid.spacing(),
                self.step
            )));
        }
        Ok((0..n_samples as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = seed.child(r).rng();
                LatticeField::from_parts_unchecked(grid, self.path(grid.n_points, &mut rng))
            })
            .collect())
    }
}

pub fn sample_rho_exact(
    op: &SpectralOperator,
    grid: Grid1D,
    n_samples: usize,
    seed: SeedStream,
) -> Result<Vec<LatticeField>> {
    RhoSampler::new(op, grid.spacing())?.sample(grid, n_samples, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_operator_with, OperatorCoefficients, OperatorOptions, PotentialKind};

    fn op() -> SpectralOperator {
        let grid = TargetGrid::new(3.5, 24, 2).unwrap();
        let c = OperatorCoefficients::feynman_kac(0.5, 0.5, 2);
        build_operator_with(grid, PotentialKind::HarmonicPlusQuartic, c, None, &OperatorOptions::default()).unwrap()
    }

    #[test]
    fn rows_are_stochastic() {
        let s = RhoSampler::new(&op(), 0.25).unwrap();
        assert!(s.max_row_defect < 1e-9, "{}", s.max_row_defect);
        for a in [0, 17, 300] {
            let total: f64 = s.row(a).iter().map(|p| p.1).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_one_dimensional_operator_and_bad_spacing() {
        let g = TargetGrid::new(4.0, 32, 1).unwrap();
        let one = build_operator_with(
            g,
            PotentialKind::Harmonic,
            OperatorCoefficients::feynman_kac(0.5, 0.0, 1),
            None,
            &OperatorOptions::default(),
        )
        .unwrap();
        assert!(RhoSampler::new(&one, 0.2).is_err());
        let s = RhoSampler::new(&op(), 0.25).unwrap();
        let grid = Grid1D::line(0.0, 1.0, 11).unwrap();
        assert!(s.sample(grid, 2, SeedStream::new(0, 0)).is_err());
    }
}
