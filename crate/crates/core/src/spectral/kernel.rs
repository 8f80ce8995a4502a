//! Semigroup kernels `e^{-s(L - E)}(a, b)` on the target grid.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{build_operator, mehler_kernel, PotentialKind, SpectralOperator, TargetGrid};
use crate::report::StatReport;
use crate::error::{Error, Result};

/// Kernel values over grid states, scaled so that `Σ_b K(a, b) f(b) dv`
/// approximates `∫ K(a, b) f(b) db`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub grid: TargetGrid,
    pub s: f64,
    pub values: DMatrix<f64>,
    /// `e^{-s(λ_n - E)}` for the first discarded mode; zero when nothing was
    /// discarded.
    pub truncation_bound: f64,
}

/// Spectral sum over the first `n_modes` eigenpairs.
pub fn semigroup_kernel(op: &SpectralOperator, s: f64, n_modes: usize) -> Result<KernelTable> {
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("evolution length must be positive, got {s}")));
    }
    if n_modes == 0 || n_modes > op.n_modes() {
        return Err(Error::InvalidArgument(format!(
            "n_modes {n_modes} exceeds the {} available eigenpairs",
            op.n_modes()
        )));
    }
    let psi = op.eigenvector_matrix(n_modes);
    let weights: Vec<f64> = op.eigenvalues[..n_modes].iter().map(|l| (-s * (l - op.ground_energy)).exp()).collect();
    let mut scaled = psi.clone();
    for (k, w) in weights.iter().enumerate() {
        scaled.column_mut(k).scale_mut(*w);
    }
    let values = &scaled * psi.transpose();
    let truncation_bound = if n_modes < op.n_modes() {
        (-s * (op.eigenvalues[n_modes] - op.ground_energy)).exp()
    } else if op.exact && n_modes == op.grid.n_states() {
        0.0
    } else {
        (-s * (op.eigenvalues[n_modes - 1] - op.ground_energy)).exp()
    };
    Ok(KernelTable { grid: op.grid, s, values, truncation_bound })
}

/// `e^{-s(L - E)}` of the finite-difference matrix by a series with only
/// non-negative terms: `L = cI - M` with `M >= 0` entrywise, so
/// `e^{-sL} = e^{-sc} Σ (sM)^k / k!`. Every entry, however small, is accurate
/// to a few ulps, which the spectral sum cannot offer in the far tails.
pub fn positive_semigroup(op: &SpectralOperator, s: f64) -> Result<KernelTable> {
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("evolution length must be positive, got {s}")));
    }
    let grid = op.grid;
    let n_states = grid.n_states();
    let n = grid.n_u;
    let kc = op.coefficients.kinetic / grid.spacing().powi(2);
    let lap_diag = if grid.dimension == 1 { 2.0 * kc } else { 4.0 * kc };
    let diag: Vec<f64> = op.potential.iter().map(|v| lap_diag + v).collect();
    let c = diag.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    if s * c > 600.0 {
        return Err(Error::InvalidArgument(format!(
            "s * max diagonal = {} too large for the positive series; use a smaller s or box",
            s * c
        )));
    }
    let md: Vec<f64> = diag.iter().map(|d| c - d).collect();
    let apply_m = |v: &[f64], out: &mut [f64]| {
        if grid.dimension == 1 {
            for i in 0..n {
                let mut y = md[i] * v[i];
                if i > 0 {
                    y += kc * v[i - 1];
                }
                if i + 1 < n {
                    y += kc * v[i + 1];
                }
                out[i] = y;
            }
        } else {
            for i in 0..n {
                for j in 0..n {
                    let st = i * n + j;
                    let mut y = md[st] * v[st];
                    if i > 0 {
                        y += kc * v[st - n];
                    }
                    if i + 1 < n {
                        y += kc * v[st + n];
                    }
                    if j > 0 {
                        y += kc * v[st - 1];
                    }
                    if j + 1 < n {
                        y += kc * v[st + 1];
                    }
                    out[st] = y;
                }
            }
        }
    };
    let prefactor = (-s * (c - op.ground_energy)).exp() / grid.cell_volume();
    let rows: Vec<Vec<f64>> = (0..n_states)
        .into_par_iter()
        .map(|a| {
            let mut term = vec![0.0; n_states];
            term[a] = 1.0;
            let mut acc = term.clone();
            let mut next = vec![0.0; n_states];
            let mut k = 1usize;
            loop {
                apply_m(&term, &mut next);
                let f = s / k as f64;
                next.iter_mut().for_each(|v| *v *= f);
                std::mem::swap(&mut term, &mut next);
                acc.iter_mut().zip(&term).for_each(|(x, t)| *x += t);
                // Stop once every entry, including the last ones reached, has converged.
                if k as f64 > s * c && term.iter().zip(&acc).all(|(t, a)| *t <= 1e-17 * a) {
                    break;
                }
                k += 1;
            }
            acc.iter_mut().for_each(|v| *v *= prefactor);
            acc
        })
        .collect();
    let values = DMatrix::from_fn(n_states, n_states, |i, j| rows[i][j]);
    Ok(KernelTable { grid, s, values, truncation_bound: 0.0 })
}

impl KernelTable {
    /// `(K_s ∘ K_t)(a, b) = ∫ K_s(a, c) K_t(c, b) dc`.
    pub fn compose(&self, other: &KernelTable) -> Result<KernelTable> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("kernel composition on different grids".into()));
        }
        let values = (&self.values * &other.values) * self.grid.cell_volume();
        Ok(KernelTable {
            grid: self.grid,
            s: self.s + other.s,
            values,
            truncation_bound: self.truncation_bound.max(other.truncation_bound),
        })
    }

    /// `∫ K(a, b) f(b) db` for every `a`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let dv = self.grid.cell_volume();
        (0..self.values.nrows()).map(|a| self.values.row(a).iter().zip(f).map(|(k, v)| k * v).sum::<f64>() * dv).collect()
    }

    pub fn symmetry_defect(&self) -> f64 {
        (&self.values - self.values.transpose()).abs().max()
    }

    pub fn min_value(&self) -> f64 {
        self.values.min()
    }

    pub fn max_abs_difference(&self, other: &KernelTable) -> f64 {
        (&self.values - &other.values).abs().max()
    }

    /// CSV matrix with the state coordinates in the header and first column.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let label = |st: usize| {
            let (a, b) = self.grid.coords(st);
            if self.grid.dimension == 1 {
                format!("{a}")
            } else {
                format!("{a}:{b}")
            }
        };
        let n = self.values.nrows();
        let header: Vec<String> = (0..n).map(label).collect();
        writeln!(out, "u,{}", header.join(","))?;
        for a in 0..n {
            let row: Vec<String> = self.values.row(a).iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{},{}", label(a), row.join(","))?;
        }
        Ok(())
    }
}

/// Harmonic semigroup on `[-u_max, u_max]` against the Mehler closed form,
/// sup over grid points in `[-window, window]²` after one Richardson step,
/// and Chapman-Kolmogorov `K_s ∘ K_s = K_{2s}` on the coarse grid.
pub fn mehler_consistency_reports(u_max: f64, n_u: usize, s_values: &[f64], window: f64) -> Result<Vec<StatReport>> {
    let grid = TargetGrid::new(u_max, n_u, 1)?;
    let coarse = build_operator(grid, PotentialKind::Harmonic, None)?;
    let fine = build_operator(grid.refined(), PotentialKind::Harmonic, None)?;
    let mut reports = Vec::new();
    for &s in s_values {
        let k = semigroup_kernel(&coarse, s, coarse.n_modes())?;
        let kf = semigroup_kernel(&fine, s, fine.n_modes())?;
        let mut err = 0.0f64;
        for i in 0..n_u {
            for j in 0..n_u {
                let (a, b) = (grid.point(i), grid.point(j));
                if a.abs() <= window && b.abs() <= window {
                    let r = (4.0 * kf.values[(2 * i + 1, 2 * j + 1)] - k.values[(i, j)]) / 3.0;
                    err = err.max((r - mehler_kernel(s, a, b)?).abs());
                }
            }
        }
        reports.push(
            StatReport::new("mehler_consistency", "kernel_sup_error")
                .param("s", s)
                .param("n_u", n_u)
                .values(err, 0.0, 1e-4)
                .verdict(err < 1e-4),
        );
        let ck = k.compose(&k)?.max_abs_difference(&semigroup_kernel(&coarse, 2.0 * s, coarse.n_modes())?);
        reports.push(
            StatReport::new("chapman_kolmogorov", "composition_sup_error")
                .param("s", s)
                .values(ck, 0.0, 1e-6)
                .verdict(ck < 1e-6),
        );
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positive_series_matches_spectral_sum() {
        let g = TargetGrid::new(5.0, 49, 1).unwrap();
        let op = build_operator(g, PotentialKind::Harmonic, None).unwrap();
        let a = positive_semigroup(&op, 0.3).unwrap();
        let b = semigroup_kernel(&op, 0.3, 49).unwrap();
        assert!(a.max_abs_difference(&b) < 1e-12);
        assert!(a.min_value() > 0.0);
    }

    #[test]
    fn positive_series_2d_fixes_ground_state() {
        let g = TargetGrid::new(4.0, 21, 2).unwrap();
        let op = build_operator(g, PotentialKind::HarmonicPlusQuartic, None).unwrap();
        let k = positive_semigroup(&op, 0.2).unwrap();
        let back = k.apply(&op.ground_state);
        for (x, y) in back.iter().zip(&op.ground_state) {
            assert!((x - y).abs() <= 1e-10 * y, "{x} vs {y}");
        }
    }
}
