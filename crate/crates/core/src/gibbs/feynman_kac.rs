//! Comparisons between the cutoff measures and the limit process.

use super::pcn::Sampled;
use crate::error::{Error, Result};
use crate::grid::LatticeField;
use crate::report::StatReport;
use crate::spectral::{SpectralOperator, TargetGrid};

/// Bounded test functions of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundedObservable {
    One,
    /// `e^{-|u(0)|²}`.
    GaussianAtZero,
    /// `cos(Re u(0))`.
    CosReAtZero,
    /// `e^{-∫_{-w}^{w} |u|^4}`.
    WindowedQuartic { half_width: f64 },
}

impl BoundedObservable {
    pub const DEFAULTS: [BoundedObservable; 3] = [
        BoundedObservable::GaussianAtZero,
        BoundedObservable::CosReAtZero,
        BoundedObservable::WindowedQuartic { half_width: 0.5 },
    ];

    pub fn label(&self) -> String {
        match self {
            Self::One => "one".into(),
            Self::GaussianAtZero => "exp(-|u(0)|^2)".into(),
            Self::CosReAtZero => "cos(Re u(0))".into(),
            Self::WindowedQuartic { half_width } => format!("exp(-int_{{|x|<{half_width}}} |u|^4)"),
        }
    }

    pub fn eval(&self, u: &LatticeField) -> f64 {
        let g = u.grid();
        let at_zero = || u.values()[g.nearest_index(0.0)];
        match *self {
            Self::One => 1.0,
            Self::GaussianAtZero => (-at_zero().norm_sqr()).exp(),
            Self::CosReAtZero => at_zero().re.cos(),
            Self::WindowedQuartic { half_width } => {
                let w = g.trapezoid_weights();
                let mass: f64 = g
                    .points()
                    .iter()
                    .zip(&w)
                    .zip(u.values())
                    .filter(|((x, _), _)| x.abs() <= half_width + 1e-12)
                    .map(|((_, w), v)| w * v.norm_sqr().powi(2))
                    .sum();
                (-mass).exp()
            }
        }
    }
}

/// Gap `|E_{μ_N} G - E_ρ G|` per `N` and observable, plus one trend report
/// per observable that fails when the gap grows beyond combined error bars.
pub fn feynman_kac_gap(
    mu_ensembles: &[(f64, &Sampled)],
    rho_ensemble: &Sampled,
    observables: &[BoundedObservable],
) -> Result<Vec<StatReport>> {
    let Some(reference) = rho_ensemble.samples.first() else {
        return Err(Error::InvalidArgument("empty limit-process ensemble".into()));
    };
    for (n, e) in mu_ensembles {
        if e.samples.iter().any(|u| !u.grid().same_as(reference.grid())) {
            return Err(Error::GridMismatch(format!("ensemble for N = {n} is on a different grid")));
        }
    }
    let mut order: Vec<&(f64, &Sampled)> = mu_ensembles.iter().collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut reports = Vec::new();
    for obs in observables {
        let (rho_mean, rho_se) = rho_ensemble.mean_se(|u| obs.eval(u));
        let mut gaps = Vec::new();
        for (n, e) in &order {
            let (m, se) = e.mean_se(|u| obs.eval(u));
            let gap = (m - rho_mean).abs();
            let err = se.hypot(rho_se);
            gaps.push((*n, gap, err));
            reports.push(
                StatReport::new("feynman_kac_gap", obs.label())
                    .param("N", n)
                    .values(gap, err, 3.0 * err)
                    .verdict(gap <= 3.0 * err)
                    .informational(),
            );
        }
        let worst = gaps
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / w[1].2.hypot(w[0].2).max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max);
        let label = gaps.iter().map(|g| format!("{}", g.0)).collect::<Vec<_>>().join(";");
        let verdict = if gaps.len() < 2 { crate::report::Verdict::Inconclusive } else { (worst <= 3.0).into() };
        reports.push(
            StatReport::new("feynman_kac_trend", obs.label())
                .param("N", label)
                .values(if worst.is_finite() { worst } else { 0.0 }, 0.0, 3.0)
                .verdict(verdict),
        );
    }
    Ok(reports)
}

/// Radially symmetric CDF of `|v|` for a density on the two-dimensional
/// target grid, read along the positive first axis through the center.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialCdf {
    pub radii: Vec<f64>,
    pub density: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl RadialCdf {
    /// `density` on the target grid states of `op` (odd `n_u`).
    pub fn from_grid_density(op: &SpectralOperator, density: &[f64]) -> Result<Self> {
        Self::from_target_density(op.grid, density)
    }

    pub fn from_target_density(g: TargetGrid, density: &[f64]) -> Result<Self> {
        if density.len() != g.n_states() {
            return Err(Error::GridMismatch(format!("{} density values for {} states", density.len(), g.n_states())));
        }
        let Some(c) = g.center().filter(|_| g.dimension == 2) else {
            return Err(Error::InvalidGrid("radial profiles need a two-dimensional grid with odd n_u".into()));
        };
        let h = g.spacing();
        let radii: Vec<f64> = (0..=c).map(|k| k as f64 * h).collect();
        let dens: Vec<f64> = (0..=c).map(|k| density[(c + k) * g.n_u + c].max(0.0)).collect();
        // Trapezoid on 2π r ρ(r), refined 8x with linear interpolation of ρ.
        let mut cdf = vec![0.0; radii.len()];
        let sub = 8;
        for k in 1..radii.len() {
            let mut acc = 0.0;
            for j in 0..sub {
                let t0 = j as f64 / sub as f64;
                let t1 = (j + 1) as f64 / sub as f64;
                let f = |t: f64| {
                    let r = radii[k - 1] + t * h;
                    let d = dens[k - 1] + t * (dens[k] - dens[k - 1]);
                    2.0 * std::f64::consts::PI * r * d
                };
                acc += 0.5 * (f(t0) + f(t1)) * h / sub as f64;
            }
            cdf[k] = cdf[k - 1] + acc;
        }
        let total = *cdf.last().unwrap_or(&1.0);
        cdf.iter_mut().for_each(|v| *v /= total);
        Ok(Self { radii, density: dens.iter().map(|d| d / total).collect(), cdf })
    }

    /// Ground-state law `Ω²`.
    pub fn ground_state(op: &SpectralOperator) -> Result<Self> {
        Self::from_grid_density(op, &op.ground_density())
    }

    /// Cubic Hermite interpolation with slopes `2πrρ(r)`.
    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let h = self.radii[1] - self.radii[0];
        let k = (r / h).floor() as usize;
        if k + 1 >= self.radii.len() {
            return 1.0;
        }
        let t = r / h - k as f64;
        let slope = |i: usize| 2.0 * std::f64::consts::PI * self.radii[i] * self.density[i] * h;
        let (t2, t3) = (t * t, t * t * t);
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * self.cdf[k]
            + (t3 - 2.0 * t2 + t) * slope(k)
            + (-2.0 * t3 + 3.0 * t2) * self.cdf[k + 1]
            + (t3 - t2) * slope(k + 1);
        v.clamp(0.0, 1.0)
    }

    /// `sup_r |F(r) - G(r)|` over the nodes of both profiles.
    pub fn sup_distance(&self, other: &RadialCdf) -> f64 {
        self.radii
            .iter()
            .chain(&other.radii)
            .map(|&r| (self.eval(r) - other.eval(r)).abs())
            .fold(0.0, f64::max)
    }

    /// `(4 F_{h/2} - F_h) / 3` on the coarse radii, from profiles on a grid
    /// and its refinement.
    pub fn extrapolate(coarse: &RadialCdf, fine: &RadialCdf) -> Result<Self> {
        let ok = fine.radii.len() >= 2 * coarse.radii.len() - 1
            && coarse.radii.iter().enumerate().all(|(k, r)| (fine.radii[2 * k] - r).abs() <= 1e-9 * r.max(1.0));
        if !ok {
            return Err(Error::GridMismatch("fine profile is not a refinement of the coarse one".into()));
        }
        let n = coarse.radii.len();
        let mix = |c: &[f64], f: &[f64]| (0..n).map(|k| (4.0 * f[2 * k] - c[k]) / 3.0).collect::<Vec<f64>>();
        let mut cdf = mix(&coarse.cdf, &fine.cdf);
        let density = mix(&coarse.density, &fine.density).into_iter().map(|d| d.max(0.0)).collect();
        let mut run = 0.0f64;
        for v in &mut cdf {
            run = run.max(v.clamp(0.0, 1.0));
            *v = run;
        }
        Ok(Self { radii: coarse.radii.clone(), density, cdf })
    }
}

/// Law of `u(0)` under `μ_N` on the whole line: density proportional to
/// `(e^{-N(L-E)} Ω₀)²`, `Ω₀` the ground state of `base` (the unperturbed
/// operator on the same grid).
pub fn mu_marginal_density(op: &SpectralOperator, base: &SpectralOperator, radius: f64) -> Result<Vec<f64>> {
    if op.grid != base.grid {
        return Err(Error::GridMismatch("operators live on different target grids".into()));
    }
    let f = if radius > 0.0 { op.evolve(&base.ground_state, radius, op.n_modes()) } else { base.ground_state.clone() };
    let dv = op.grid.cell_volume();
    let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
    let z: f64 = sq.iter().sum::<f64>() * dv;
    Ok(sq.iter().map(|v| v / z).collect())
}
