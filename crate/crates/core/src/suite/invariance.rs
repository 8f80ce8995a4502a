//! Invariance of `ρ_N` under the cutoff flow, as two-sample tests between
//! time sections of a pushed-forward ensemble.

use num_complex::Complex64;

use super::{bonferroni, downgrade, TestPlan, MIN_POWERED};
use crate::error::{Error, Result};
use crate::flow::{pushforward_ensemble, FlowConfig};
use crate::gibbs::SamplerKind;
use crate::grid::LatticeField;
use crate::report::{StatReport, Verdict};
use crate::stats::{difference_z, ks_two_sample, mean_se, two_sided_p};

/// Default probe points: center, half radius and the cutoff edge.
pub fn probe_points(radius: f64) -> Vec<f64> {
    let mut p = vec![0.0, 0.5 * radius, radius];
    p.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    p
}

fn column(ensemble: &[LatticeField], x: f64, f: impl Fn(Complex64) -> f64) -> Vec<f64> {
    ensemble.iter().map(|u| f(u.values()[u.grid().nearest_index(x)])).collect()
}

/// Outcome of comparing two sections.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub reports: Vec<StatReport>,
    /// Smallest Bonferroni-adjusted KS p-value.
    pub min_adjusted_p: f64,
    pub max_abs_z: f64,
}

impl Comparison {
    pub fn passed(&self, significance: f64) -> bool {
        self.min_adjusted_p > significance && self.max_abs_z < 3.0
    }
}

/// KS tests on `|u(x0)|` and `Re u(x0)` plus `r ∈ {2, 4}` moment z-tests at
/// each probe. `paired` sections hold the same members at two times.
pub fn compare_sections(
    a: &[LatticeField],
    b: &[LatticeField],
    probes: &[f64],
    significance: f64,
    paired: bool,
) -> Result<Comparison> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("empty section".into()));
    }
    if paired && a.len() != b.len() {
        return Err(Error::InvalidArgument("paired sections differ in size".into()));
    }
    let m = 2 * probes.len();
    let mut reports = Vec::new();
    let mut min_p: f64 = 1.0;
    let mut max_z: f64 = 0.0;
    for &x0 in probes {
        let obs: [(&str, fn(Complex64) -> f64); 2] = [("|u(x0)|", |v| v.norm()), ("Re u(x0)", |v| v.re)];
        for (name, f) in obs {
            let ks = ks_two_sample(&column(a, x0, f), &column(b, x0, f));
            let p = bonferroni(ks.p_value, m);
            min_p = min_p.min(p);
            reports.push(
                StatReport::new("ks_two_sample", name)
                    .param("x0", x0)
                    .param("bonferroni_m", m)
                    .values(ks.statistic, 0.0, significance)
                    .p(p)
                    .verdict(p > significance),
            );
        }
        for r in [2, 4] {
            let pa = column(a, x0, |v| v.norm().powi(r));
            let pb = column(b, x0, |v| v.norm().powi(r));
            let (diff, z) = if paired {
                let d: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| y - x).collect();
                let (md, sd) = mean_se(&d);
                (md, if sd > 0.0 { md / sd } else if md == 0.0 { 0.0 } else { f64::INFINITY })
            } else {
                let (ma, sa) = mean_se(&pa);
                let (mb, sb) = mean_se(&pb);
                (mb - ma, difference_z(mb, sb, ma, sa))
            };
            max_z = max_z.max(z.abs());
            reports.push(
                StatReport::new("moment_drift", format!("|u(x0)|^{r}"))
                    .param("x0", x0)
                    .values(diff, if z != 0.0 { (diff / z).abs() } else { 0.0 }, 3.0)
                    .p(two_sided_p(z))
                    .verdict(z.abs() < 3.0),
            );
        }
    }
    Ok(Comparison { reports, min_adjusted_p: min_p, max_abs_z: max_z })
}

/// Compares the `t = 0` section with every later section of one flow run and
/// adds the scaled-law negative control.
pub fn invariance_reports(
    initial: &[LatticeField],
    config: &FlowConfig,
    times: &[f64],
    probes: &[f64],
    significance: f64,
) -> Result<Vec<StatReport>> {
    let mut reports = Vec::new();
    let push = match pushforward_ensemble(initial, config) {
        Ok(p) => p,
        Err(e @ (Error::EnsembleAborted { .. } | Error::FlowAborted { .. })) => {
            reports.push(StatReport::new("invariance", "flow").param("diagnostic", e).verdict(Verdict::Fail));
            return Ok(reports);
        }
        Err(e) => return Err(e),
    };
    let start = push.section(0.0);
    for &t in times {
        let later = push.section(t);
        let cmp = compare_sections(&start, &later, probes, significance, true)?;
        let pass = cmp.passed(significance);
        reports.extend(cmp.reports.into_iter().map(|r| r.param("t", t)));
        reports.push(
            StatReport::new("invariance", "all probes")
                .param("t", t)
                .param("members", later.len())
                .param("aborted", push.aborted.len())
                .values(cmp.min_adjusted_p, 0.0, significance)
                .p(cmp.min_adjusted_p)
                .verdict(pass),
        );
    }
    let scaled: Vec<LatticeField> = start.iter().map(|u| u.scaled(Complex64::new(1.2, 0.0))).collect();
    let control = compare_sections(&start, &scaled, probes, significance, true)?;
    reports.push(
        StatReport::new("invariance_negative_control", "scaled by 1.2")
            .values(control.min_adjusted_p, 0.0, 0.01)
            .p(control.min_adjusted_p)
            .verdict(control.min_adjusted_p < 0.01),
    );
    Ok(reports)
}

/// Flow configuration for `ρ_N` at radius `N` in the plan.
pub(crate) fn flow_config(plan: &TestPlan, chi: crate::gibbs::CutoffProfile, times: &[f64]) -> FlowConfig {
    let t_final = times.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    let mut snaps: Vec<f64> = times.to_vec();
    snaps.push(0.0);
    snaps.sort_by(f64::total_cmp);
    snaps.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    FlowConfig::new(plan.numerics.dt, t_final, chi)
        .with_coupling(plan.coupling())
        .with_dealias(plan.numerics.dealias_fraction)
        .with_snapshots(snaps)
}

/// For each planned `N`: draw `ρ_N` exactly, push it through the flow and test
/// every planned time against `t = 0`.
pub fn test_invariance(plan: &TestPlan) -> Result<Vec<StatReport>> {
    plan.validate()?;
    let grid = plan.box_grid()?;
    let seeds = plan.seeds.labeled("invariance");
    let mut out = Vec::new();
    for (i, &radius) in plan.n_values.iter().enumerate() {
        let n = plan.sample_size(i);
        let m = plan.cutoff_measures(radius, grid, seeds.labeled("partition").child(i as u64))?;
        let spec = m.rho.clone().with_sampler(SamplerKind::Importance);
        let ensemble = plan.sample(&spec, grid, n, seeds.labeled("rho").child(i as u64))?;
        let config = flow_config(plan, m.rho.cutoff.clone().expect("rho_N has a cutoff"), &plan.times);
        let reports = invariance_reports(&ensemble.samples, &config, &plan.times, &probe_points(radius), plan.significance)?;
        let reports = reports
            .into_iter()
            .map(|r| r.param("N", radius).param("D_N", m.d_n.value))
            .collect();
        out.extend(downgrade(reports, n < MIN_POWERED));
    }
    Ok(out)
}

/// Re-seeded null comparisons: two independent `ρ_N` ensembles at `t = 0`,
/// tested with the Bonferroni KS family. Passes when the rejection count is
/// consistent with a rate at most `significance` (binomial tail above 0.05).
pub fn null_false_positive_rate(plan: &TestPlan, radius: f64) -> Result<StatReport> {
    let grid = plan.box_grid()?;
    let seeds = plan.seeds.labeled("null");
    let m = plan.cutoff_measures(radius, grid, seeds.labeled("partition"))?;
    let spec = m.rho.with_sampler(SamplerKind::Importance);
    let n = plan.sample_size(0);
    let reps = plan.numerics.null_replications;
    let probes = probe_points(radius);
    let mut rejections = 0usize;
    for r in 0..reps as u64 {
        let a = plan.sample(&spec, grid, n, seeds.child(2 * r))?;
        let b = plan.sample(&spec, grid, n, seeds.child(2 * r + 1))?;
        let cmp = compare_sections(&a.samples, &b.samples, &probes, plan.significance, false)?;
        rejections += usize::from(cmp.min_adjusted_p <= plan.significance);
    }
    let tail = binomial_upper_tail(rejections, reps, plan.significance);
    let report = StatReport::new("null_false_positive_rate", "ks family")
        .param("N", radius)
        .param("replications", reps)
        .param("rejections", rejections)
        .values(rejections as f64 / reps.max(1) as f64, 0.0, plan.significance)
        .p(tail)
        .verdict(tail > 0.05);
    Ok(downgrade(vec![report], n < MIN_POWERED).remove(0))
}

/// `P(X >= k)` for `X ~ Binomial(n, p)`.
fn binomial_upper_tail(k: usize, n: usize, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut below = 0.0;
    let mut term = (1.0 - p).powi(n as i32);
    for j in 0..k {
        below += term;
        term *= (n - j) as f64 / (j + 1) as f64 * p / (1.0 - p);
    }
    (1.0 - below).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_tail_values() {
        assert_eq!(binomial_upper_tail(0, 20, 0.01), 1.0);
        assert!((binomial_upper_tail(1, 20, 0.01) - (1.0 - 0.99f64.powi(20))).abs() < 1e-14);
        assert!(binomial_upper_tail(2, 20, 0.01) < 0.05);
    }

    #[test]
    fn probes_cover_plateau_and_edge() {
        assert_eq!(probe_points(2.0), vec![0.0, 1.0, 2.0]);
        assert_eq!(probe_points(0.0), vec![0.0]);
    }
}
