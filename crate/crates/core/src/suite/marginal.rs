//! Law of `u(0)` under `μ_N` against the limit marginal `Ω²`.

use super::{downgrade, TestPlan, MIN_POWERED};
use crate::error::Result;
use crate::gibbs::{RadialCdf, SamplerKind};
use crate::report::{StatReport, Verdict};
use crate::stats::ks_one_sample;

/// Standard deviation of `√n D` under the Kolmogorov law.
const KS_SD: f64 = 0.2603;
const MAX_ROUNDS: usize = 4;

/// Samples of `|u(0)|` per radius with the reference CDF.
#[derive(Debug, Clone)]
pub struct MarginalResult {
    pub reports: Vec<StatReport>,
    pub samples: Vec<(f64, Vec<f64>)>,
    pub reference: RadialCdf,
}

/// KS distance between `|u(0)|` under pCN draws of `μ_N` and the radial law
/// of `Ω²`, per `N`, at `plan.sample_size(i)` effective samples; plus the
/// trend check that distances strictly decrease beyond combined error bars.
pub fn test_feynman_kac_marginal(plan: &TestPlan) -> Result<MarginalResult> {
    plan.validate()?;
    let reference = plan.limit_marginal()?;
    let seeds = plan.seeds.labeled("fk-marginal");
    let mut order: Vec<(usize, f64)> = plan.n_values.iter().copied().enumerate().collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1));
    let largest = order.last().map_or(0.0, |p| p.1);
    let mut reports = Vec::new();
    let mut samples = Vec::new();
    let mut rows = Vec::new();
    let mut underpowered = false;
    for (i, radius) in order {
        let target = plan.sample_size(i);
        let grid = plan.line_grid(radius)?;
        let spec = plan.mu_spec(radius, grid)?.with_sampler(SamplerKind::PcnMcmc);
        let origin = grid.nearest_index(0.0);
        let mut n = target;
        let mut round = 0u64;
        let (values, ess) = loop {
            let s = plan.sample(&spec, grid, n, seeds.labeled("pcn").child(1000 * i as u64 + round))?;
            let ess = s.ess(|u| u.values()[origin].norm());
            let values: Vec<f64> = s.samples.iter().map(|u| u.values()[origin].norm()).collect();
            round += 1;
            if ess >= target as f64 || round as usize >= MAX_ROUNDS {
                break (values, ess);
            }
            n = ((n as f64) * (target as f64 / ess.max(1.0)) * 1.1).ceil() as usize;
        };
        underpowered |= ess < MIN_POWERED as f64;
        let ks = ks_one_sample(&values, |r| reference.eval(r));
        let p = crate::stats::ks_p_value(ks.statistic, ess);
        let err = KS_SD / ess.max(1.0).sqrt();
        let gating = radius == largest;
        let mut r = StatReport::new("fk_marginal_ks", "|u(0)|")
            .param("N", radius)
            .param("ess", format!("{ess:.0}"))
            .param("draws", values.len())
            .values(ks.statistic, err, 0.05)
            .p(p)
            .verdict(ks.statistic < 0.05);
        if !gating {
            r = r.informational();
        }
        reports.push(r);
        rows.push((radius, ks.statistic, err));
        samples.push((radius, values));
    }
    let decreasing = rows.windows(2).all(|w| w[0].1 - w[1].1 > w[0].2.hypot(w[1].2));
    let worst = rows
        .windows(2)
        .map(|w| (w[0].1 - w[1].1) / w[0].2.hypot(w[1].2))
        .fold(f64::INFINITY, f64::min);
    let label = rows.iter().map(|r| r.0.to_string()).collect::<Vec<_>>().join(";");
    let trend = StatReport::new("fk_marginal_trend", "KS distance")
        .param("N", label)
        .values(if worst.is_finite() { worst } else { 0.0 }, 0.0, 1.0)
        .verdict(if rows.len() < 2 { Verdict::Inconclusive } else { decreasing.into() });
    reports.push(trend);
    Ok(MarginalResult { reports: downgrade(reports, underpowered), samples, reference })
}
