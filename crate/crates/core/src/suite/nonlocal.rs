//! Non-localization of the limit process: window masses neither vanish nor
//! depend on the window, so cumulative mass grows linearly.

use super::{bonferroni, downgrade, TestPlan, MIN_POWERED};
use crate::error::{Error, Result};
use crate::gibbs::RhoSampler;
use crate::grid::{Grid1D, LatticeField};
use crate::report::{StatReport, Verdict};
use crate::stats::{ks_two_sample, mean_se, normal_quantile, ols};

pub const MIN_WINDOWS: usize = 8;

/// `∫_{x_min + R}^{x_min + R + 1} |f|²` for `R = 0..n_windows`.
pub fn window_masses(f: &LatticeField, n_windows: usize) -> Vec<f64> {
    let g = f.grid();
    let h = g.spacing();
    let v = f.values();
    (0..n_windows)
        .map(|r| {
            let a = g.x_min + r as f64;
            let lo = ((a - g.x_min) / h).round() as usize;
            let hi = (((a + 1.0 - g.x_min) / h).round() as usize).min(g.n_points - 1);
            (lo..hi).map(|i| 0.5 * h * (v[i].norm_sqr() + v[i + 1].norm_sqr())).sum()
        })
        .collect()
}

fn check_grid(grid: &Grid1D, n_windows: usize) -> Result<()> {
    if n_windows < MIN_WINDOWS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_WINDOWS} windows, got {n_windows}")));
    }
    if grid.length() + 1e-9 < n_windows as f64 {
        return Err(Error::InvalidGrid(format!(
            "grid of length {} holds fewer than {n_windows} unit windows",
            grid.length()
        )));
    }
    let per = 1.0 / grid.spacing();
    if (per - per.round()).abs() > 1e-6 {
        return Err(Error::InvalidGrid("grid spacing must divide the unit window".into()));
    }
    Ok(())
}

/// Lower confidence bound of the mean per-member slope of `R ↦ Σ_{r<R} m_r`
/// and the slope floor `½ Ê S_W / W`.
fn slope_test(masses: &[Vec<f64>], level: f64) -> (f64, f64, f64) {
    let w = masses[0].len();
    let xs: Vec<f64> = (1..=w).map(|r| r as f64).collect();
    let slopes: Vec<f64> = masses
        .iter()
        .map(|m| {
            let cum: Vec<f64> = m.iter().scan(0.0, |s, v| {
                *s += v;
                Some(*s)
            }).collect();
            ols(&xs, &cum).slope
        })
        .collect();
    let (mean, se) = mean_se(&slopes);
    let total: Vec<f64> = masses.iter().map(|m| m.iter().sum()).collect();
    let floor = 0.5 * mean_se(&total).0 / w as f64;
    (mean, mean - normal_quantile(level) * se, floor)
}

/// Window-mass checks on one ensemble: (a) pairwise two-sample KS across
/// windows with Bonferroni correction, (b) one-sided lower confidence bound
/// of each window's mean mass above 0, (c) the slope of cumulative mass above
/// half its average rate, with 99% confidence.
pub fn nonlocalization_reports(
    ensemble: &[LatticeField],
    n_windows: usize,
    significance: f64,
    small_mass: f64,
) -> Result<Vec<StatReport>> {
    let first = ensemble.first().ok_or_else(|| Error::InvalidArgument("empty ensemble".into()))?;
    check_grid(first.grid(), n_windows)?;
    let masses: Vec<Vec<f64>> = ensemble.iter().map(|u| window_masses(u, n_windows)).collect();
    let column = |r: usize| masses.iter().map(|m| m[r]).collect::<Vec<f64>>();
    let mut reports = Vec::new();

    let pairs = n_windows * (n_windows - 1) / 2;
    let mut min_p: f64 = 1.0;
    let mut max_d: f64 = 0.0;
    for a in 0..n_windows {
        for b in a + 1..n_windows {
            let ks = ks_two_sample(&column(a), &column(b));
            min_p = min_p.min(bonferroni(ks.p_value, pairs));
            max_d = max_d.max(ks.statistic);
        }
    }
    reports.push(
        StatReport::new("nonlocal_translation", "window mass")
            .param("windows", n_windows)
            .param("bonferroni_m", pairs)
            .values(max_d, 0.0, significance)
            .p(min_p)
            .verdict(min_p > significance),
    );

    let z = normal_quantile(1.0 - significance);
    let lower = (0..n_windows)
        .map(|r| {
            let (m, se) = mean_se(&column(r));
            m - z * se
        })
        .fold(f64::INFINITY, f64::min);
    let (overall, overall_se) = mean_se(&masses.iter().flatten().copied().collect::<Vec<_>>());
    reports.push(
        StatReport::new("nonlocal_lower_bound", "E window mass")
            .param("confidence", 1.0 - significance)
            .values(overall, overall_se, 0.0)
            .param("min_lower_bound", format!("{lower:.6e}"))
            .verdict(lower > 0.0),
    );

    let (slope, slope_lower, floor) = slope_test(&masses, 0.99);
    reports.push(
        StatReport::new("nonlocal_slope", "cumulative window mass")
            .param("lower_99", format!("{slope_lower:.6e}"))
            .values(slope, (slope - slope_lower).max(0.0), floor)
            .verdict(slope_lower > floor),
    );

    for r in 0..n_windows {
        let (m, se) = mean_se(&column(r));
        reports.push(
            StatReport::new("nonlocal_window_mass", "E window mass")
                .param("R", r)
                .values(m, se, f64::NAN)
                .verdict(true)
                .informational(),
        );
    }

    let rates: Vec<f64> = (0..n_windows)
        .map(|r| column(r).iter().filter(|m| **m < small_mass).count() as f64 / ensemble.len() as f64)
        .collect();
    let fit = ols(&(0..n_windows).map(|r| r as f64).collect::<Vec<_>>(), &rates);
    reports.push(
        StatReport::new("nonlocal_small_mass", format!("P(window mass < {small_mass})"))
            .values(fit.slope, fit.slope_se, 0.0)
            .param("mean_rate", rates.iter().sum::<f64>() / n_windows as f64)
            .verdict(true)
            .informational(),
    );
    Ok(reports)
}

/// Deterministic `e^{-(x - x_min)²}` on `grid`, the localized control.
pub fn gaussian_bump(grid: Grid1D) -> Result<LatticeField> {
    let x0 = grid.x_min;
    LatticeField::from_fn(grid, |x| num_complex::Complex64::new((-(x - x0).powi(2)).exp(), 0.0))
}

/// Exact draws of the limit process on `[0, n_windows]`, checked with
/// [`nonlocalization_reports`], plus the Gaussian-bump control, which must
/// fail the slope test.
pub fn test_nonlocalization(plan: &TestPlan) -> Result<Vec<StatReport>> {
    plan.validate()?;
    let w = plan.numerics.n_windows;
    let grid = Grid1D::line_with_spacing(0.0, w as f64, plan.numerics.line_spacing)?;
    check_grid(&grid, w)?;
    let n = plan.sample_size(0);
    let sampler = RhoSampler::new(&plan.limit_operator()?, grid.spacing())?;
    let ensemble = sampler.sample(grid, n, plan.seeds.labeled("nonlocal"))?;
    let mut reports = nonlocalization_reports(&ensemble, w, plan.significance, plan.numerics.small_mass)?;
    let bump = vec![gaussian_bump(grid)?; 2];
    let control = nonlocalization_reports(&bump, w, plan.significance, plan.numerics.small_mass)?;
    let slope = control.iter().find(|r| r.test_name == "nonlocal_slope").expect("slope report");
    reports.push(
        StatReport::new("nonlocal_negative_control", "gaussian bump slope")
            .values(slope.estimate, slope.error, slope.bound_or_target)
            .verdict(if slope.verdict == Verdict::Fail { Verdict::Pass } else { Verdict::Fail }),
    );
    Ok(downgrade(reports, n < MIN_POWERED))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid1D {
        Grid1D::line_with_spacing(0.0, 8.0, 0.05).unwrap()
    }

    #[test]
    fn constant_field_has_unit_windows_and_unit_slope() {
        let one = LatticeField::from_fn(grid(), |_| num_complex::Complex64::new(1.0, 0.0)).unwrap();
        let m = window_masses(&one, 8);
        assert!(m.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let reports = nonlocalization_reports(&vec![one; 10], 8, 0.01, 0.05).unwrap();
        let slope = reports.iter().find(|r| r.test_name == "nonlocal_slope").unwrap();
        assert!((slope.estimate - 1.0).abs() < 1e-12);
        assert!(reports.iter().all(|r| r.verdict == Verdict::Pass));
    }

    #[test]
    fn bump_fails_slope() {
        let bump = vec![gaussian_bump(grid()).unwrap(); 4];
        let reports = nonlocalization_reports(&bump, 8, 0.01, 0.05).unwrap();
        let slope = reports.iter().find(|r| r.test_name == "nonlocal_slope").unwrap();
        assert_eq!(slope.verdict, Verdict::Fail);
    }

    #[test]
    fn short_grid_rejected() {
        let g = Grid1D::line_with_spacing(0.0, 5.0, 0.05).unwrap();
        let one = LatticeField::zeros(g);
        assert!(nonlocalization_reports(&[one], 8, 0.01, 0.05).is_err());
    }
}
