//! Distance between `ρ_N` and `μ_N` on bounded observables, against the
//! scale `D_N / (1 - D_N²)`, and the `ρ_N`-versus-limit gap.

use super::{downgrade, TestPlan, MIN_POWERED};
use crate::error::Result;
use crate::gibbs::{feynman_kac_gap, RhoSampler, SamplerKind, Sampled};
use crate::report::{StatReport, Verdict};

/// Per observable: gap ratios per `N`, and their spread across `N`.
fn ratio_reports(label: &str, rows: &[(f64, f64, f64, f64, f64, bool)], bound: f64) -> Vec<StatReport> {
    let mut out = Vec::new();
    let mut ratios = Vec::new();
    let mut inconclusive = false;
    for &(n, gap, gap_err, scale, scale_err, d_zero) in rows {
        let ratio = gap / scale;
        let err = ratio * (gap_err / gap.max(f64::MIN_POSITIVE)).hypot(scale_err / scale);
        inconclusive |= d_zero;
        ratios.push(ratio);
        out.push(
            StatReport::new("proximity_ratio", label)
                .param("N", n)
                .param("gap", format!("{gap:.6e}"))
                .param("scale", format!("{scale:.6e}"))
                .values(ratio, if err.is_finite() { err } else { 0.0 }, f64::NAN)
                .verdict(if d_zero { Verdict::Inconclusive } else { Verdict::Pass })
                .informational(),
        );
    }
    let all_zero = rows.iter().all(|r| r.1 == 0.0);
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if all_zero { 1.0 } else { max / min };
    let verdict = if inconclusive || ratios.len() < 2 {
        Verdict::Inconclusive
    } else {
        (all_zero || spread < bound).into()
    };
    out.push(
        StatReport::new("proximity_uniformity", label)
            .param("N", rows.iter().map(|r| r.0.to_string()).collect::<Vec<_>>().join(";"))
            .values(spread, 0.0, bound)
            .verdict(verdict),
    );
    out
}

/// For every observable, `|Ê_{ρ_N} G - Ê_{μ_N} G|` divided by
/// `D̂_N / (1 - D̂_N²)` per `N`, with pass when the ratios agree within
/// `proximity_ratio`; then the gap between `ρ_N` and exact draws of the limit
/// process.
pub fn test_measure_proximity(plan: &TestPlan) -> Result<Vec<StatReport>> {
    plan.validate()?;
    let largest = plan.n_values.iter().copied().fold(0.0, f64::max);
    let grid = plan.line_grid(largest)?;
    let seeds = plan.seeds.labeled("proximity");
    let mut ensembles: Vec<(f64, Sampled, Sampled, f64, f64, bool)> = Vec::new();
    let mut underpowered = false;
    for (i, &radius) in plan.n_values.iter().enumerate() {
        let n = plan.sample_size(i);
        underpowered |= n < MIN_POWERED;
        let m = plan.cutoff_measures(radius, grid, seeds.labeled("partition").child(i as u64))?;
        let rho = plan.sample(&m.rho.with_sampler(SamplerKind::Importance), grid, n, seeds.labeled("rho").child(i as u64))?;
        let mu = plan.sample(&m.mu.with_sampler(SamplerKind::Importance), grid, n, seeds.labeled("mu").child(i as u64))?;
        let (scale, scale_err) = m.d_n.proximity_scale();
        ensembles.push((radius, rho, mu, scale, scale_err, m.d_n.consistent_with_zero()));
    }
    let mut reports = Vec::new();
    for obs in &plan.observables {
        let rows: Vec<(f64, f64, f64, f64, f64, bool)> = ensembles
            .iter()
            .map(|(n, rho, mu, scale, scale_err, zero)| {
                let (a, sa) = rho.mean_se(|u| obs.eval(u));
                let (b, sb) = mu.mean_se(|u| obs.eval(u));
                (*n, (a - b).abs(), sa.hypot(sb), *scale, *scale_err, *zero)
            })
            .collect();
        reports.extend(ratio_reports(&obs.label(), &rows, plan.numerics.proximity_ratio));
    }
    let limit = RhoSampler::new(&plan.limit_operator()?, grid.spacing())?;
    let n_limit = (0..plan.n_values.len()).map(|i| plan.sample_size(i)).max().unwrap_or(0);
    let rho = Sampled::independent(limit.sample(grid, n_limit, seeds.labeled("limit"))?);
    let pairs: Vec<(f64, &Sampled)> = ensembles.iter().map(|e| (e.0, &e.1)).collect();
    reports.extend(feynman_kac_gap(&pairs, &rho, &plan.observables)?);
    Ok(downgrade(reports, underpowered))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gaps_pass_and_spread_is_max_over_min() {
        let zero = [(1.0, 0.0, 0.0, 0.5, 0.01, false), (2.0, 0.0, 0.0, 0.1, 0.01, false)];
        assert_eq!(ratio_reports("g", &zero, 3.0).last().unwrap().verdict, Verdict::Pass);
        let rows = [(1.0, 0.2, 0.01, 0.5, 0.01, false), (2.0, 0.01, 0.01, 0.1, 0.01, false)];
        let last = ratio_reports("g", &rows, 3.0).pop().unwrap();
        assert!((last.estimate - 4.0).abs() < 1e-12);
        assert_eq!(last.verdict, Verdict::Fail);
        let undecided = [(1.0, 0.2, 0.01, 0.5, 0.01, true), (2.0, 0.2, 0.01, 0.5, 0.01, false)];
        assert_eq!(ratio_reports("g", &undecided, 3.0).pop().unwrap().verdict, Verdict::Inconclusive);
    }
}
