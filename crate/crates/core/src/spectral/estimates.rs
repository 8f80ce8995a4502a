//! Tail-decay fits of ground states.

use super::{build_operator_with, OperatorCoefficients, OperatorOptions, PotentialKind, SpectralOperator, TargetGrid};
use crate::error::{Error, Result};
use crate::report::StatReport;

/// Result of fitting `log Ω(u) ≈ A - c|u|^p` on a range of the positive axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WkbFit {
    pub exponent: f64,
    pub amplitude: f64,
    pub rate: f64,
    pub rms_residual: f64,
    pub n_points: usize,
}

fn fit_fixed_p(u: &[f64], y: &[f64], p: f64) -> (f64, f64, f64) {
    let x: Vec<f64> = u.iter().map(|v| -v.powf(p)).collect();
    let fit = crate::stats::ols(&x, y);
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - fit.intercept - fit.slope * a).powi(2)).sum();
    (fit.intercept, fit.slope, rss)
}

/// Least-squares fit of the decay exponent along the first axis (the row
/// `u2 = 0` in two dimensions).
pub fn fit_wkb_exponent(op: &SpectralOperator, fit_range: (f64, f64)) -> Result<WkbFit> {
    let grid = op.grid;
    let (lo, hi) = fit_range;
    let h = grid.spacing();
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::InvalidArgument(format!("fit range [{lo}, {hi}] must satisfy 0 <= lo < hi")));
    }
    let margin = (4.0 * h).max(0.5);
    if hi > grid.u_max - margin {
        return Err(Error::InvalidArgument(format!(
            "fit range [{lo}, {hi}] reaches within {margin} of the Dirichlet wall at {}",
            grid.u_max
        )));
    }
    let row = if grid.dimension == 1 {
        0
    } else {
        (0..grid.n_u)
            .min_by(|&a, &b| grid.point(a).abs().total_cmp(&grid.point(b).abs()))
            .expect("non-empty grid")
    };
    let (mut u, mut y) = (Vec::new(), Vec::new());
    for i in 0..grid.n_u {
        let x = grid.point(i);
        if x >= lo && x <= hi {
            let s = if grid.dimension == 1 { i } else { i * grid.n_u + row };
            let v = op.ground_state[s];
            if v <= 0.0 {
                return Err(Error::GroundStateSign { min_value: v });
            }
            if op.potential[s] <= op.ground_energy {
                return Err(Error::InvalidArgument(format!(
                    "u = {x} lies inside the classically allowed region"
                )));
            }
            u.push(x);
            y.push(v.ln());
        }
    }
    if u.len() < 5 {
        return Err(Error::InvalidArgument(format!("only {} grid points in the fit range", u.len())));
    }
    // Coarse scan then golden-section refinement over p.
    let rss = |p: f64| fit_fixed_p(&u, &y, p).2;
    let (p_lo, p_hi) = (1.0, 5.0);
    let steps = 80;
    let best = (0..=steps)
        .map(|k| p_lo + (p_hi - p_lo) * k as f64 / steps as f64)
        .min_by(|a, b| rss(*a).total_cmp(&rss(*b)))
        .expect("scan");
    let dp = (p_hi - p_lo) / steps as f64;
    let (mut a, mut b) = ((best - dp).max(p_lo), (best + dp).min(p_hi));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if rss(c) < rss(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let p = 0.5 * (a + b);
    let (amp, rate, r) = fit_fixed_p(&u, &y, p);
    Ok(WkbFit { exponent: p, amplitude: amp, rate, rms_residual: (r / u.len() as f64).sqrt(), n_points: u.len() })
}

/// Fits the decay exponent and passes when it lies within 0.3 of the WKB
/// prediction: 3 for a quartic potential, 2 for a harmonic one.
pub fn check_wkb_decay(op: &SpectralOperator, fit_range: (f64, f64)) -> Result<StatReport> {
    let fit = fit_wkb_exponent(op, fit_range)?;
    let target = if op.coefficients.quartic > 0.0 { 3.0 } else { 2.0 };
    Ok(StatReport::new("wkb_decay", "ground_state_exponent")
        .param("kind", op.kind.label())
        .param("dimension", op.grid.dimension)
        .param("fit_lo", fit_range.0)
        .param("fit_hi", fit_range.1)
        .values(fit.exponent, fit.rms_residual, target)
        .verdict((fit.exponent - target).abs() <= 0.3))
}

/// Ground energy and state from `grid` and its refinement, combined as
/// `(4 X_{h/2} - X_h) / 3`. The state is returned on the coarse points.
pub fn richardson_ground_state(
    grid: TargetGrid,
    kind: PotentialKind,
    coefficients: OperatorCoefficients,
    options: &OperatorOptions,
) -> Result<(f64, Vec<f64>)> {
    let coarse = build_operator_with(grid, kind, coefficients, None, options)?;
    let fine_grid = grid.refined();
    let fine = build_operator_with(fine_grid, kind, coefficients, None, options)?;
    let energy = (4.0 * fine.ground_energy - coarse.ground_energy) / 3.0;
    let n = grid.n_u;
    let m = fine_grid.n_u;
    let state = (0..grid.n_states())
        .map(|s| {
            let f = if grid.dimension == 1 { 2 * s + 1 } else { (2 * (s / n) + 1) * m + 2 * (s % n) + 1 };
            (4.0 * fine.ground_state[f] - coarse.ground_state[s]) / 3.0
        })
        .collect();
    Ok((energy, state))
}

/// One-dimensional ground-state checks on `[-u_max, u_max]` with `n_u`
/// points: harmonic energy and profile after one Richardson step against
/// `E = 0`, `Ω = π^{-1/4} e^{-u²/2}`; quartic energy under one refinement; the
/// quartic decay exponent fitted on `fit_range` of the refined grid.
pub fn ground_state_reports(u_max: f64, n_u: usize, fit_range: (f64, f64)) -> Result<Vec<StatReport>> {
    let grid = TargetGrid::new(u_max, n_u, 1)?;
    let options = OperatorOptions { basis_size: None, n_modes: Some(4) };
    let harmonic = PotentialKind::Harmonic;
    let (energy, state) =
        richardson_ground_state(grid, harmonic, OperatorCoefficients::literal(harmonic, 1), &options)?;
    let exact = |u: f64| std::f64::consts::PI.powf(-0.25) * (-0.5 * u * u).exp();
    let profile = grid.points().iter().zip(&state).map(|(u, v)| (v - exact(*u)).abs()).fold(0.0, f64::max);
    let quartic = PotentialKind::HarmonicPlusQuartic;
    let q = OperatorCoefficients::literal(quartic, 1);
    let coarse = build_operator_with(grid, quartic, q, None, &options)?;
    let fine = build_operator_with(grid.refined(), quartic, q, None, &options)?;
    let drift = (fine.ground_energy - coarse.ground_energy).abs();
    Ok(vec![
        StatReport::new("ground_state", "harmonic_energy")
            .param("n_u", n_u)
            .values(energy.abs(), 0.0, 1e-8)
            .verdict(energy.abs() < 1e-8),
        StatReport::new("ground_state", "harmonic_profile_sup")
            .param("n_u", n_u)
            .values(profile, 0.0, 1e-5)
            .verdict(profile < 1e-5),
        StatReport::new("ground_state", "quartic_energy_refinement")
            .param("n_u", n_u)
            .param("energy", fine.ground_energy)
            .values(drift, 0.0, 1e-4)
            .verdict(drift < 1e-4),
        check_wkb_decay(&fine, fit_range)?,
    ])
}
