//! Preset pipelines. Each returns its reports and writes its data files into
//! the run directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;

use super::config::{ExperimentConfig, Preset};
use crate::error::Result;
use crate::field_sampler::{covariance_scan, write_covariance_csv, LineSampler};
use crate::flow::correctness_reports;
use crate::gibbs::estimate_partition;
use crate::grid::Grid1D;
use crate::report::StatReport;
use crate::spectral::{
    build_operator, check_kernel_estimates, ground_state_reports, mehler_consistency_reports, mehler_kernel,
    semigroup_kernel, PotentialKind, TargetGrid,
};
use crate::suite::{self, TestPlan};

const KERNEL_S: [f64; 3] = [0.25, 0.5, 1.0];
const KERNEL_WINDOW: f64 = 4.0;
const ESTIMATE_X: (f64, f64, usize) = (0.01, 10.0, 60);
const ESTIMATE_POINTS: usize = 1000;
const COVARIANCE_Z: f64 = 5.0;

/// Shared inputs of a preset run.
pub struct RunContext<'a> {
    pub config: &'a ExperimentConfig,
    pub run_dir: &'a Path,
    pub hash: &'a str,
    pub cache_dir: Option<&'a Path>,
}

impl RunContext<'_> {
    fn plan(&self, preset: Preset) -> Result<TestPlan> {
        let mut plan = self.config.plan_for(preset)?;
        plan.seeds = plan.seeds.labeled(preset.name());
        plan.cache_dir = self.cache_dir.map(Path::to_path_buf);
        Ok(plan)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.run_dir.join(name))?))
    }

    /// Writes `body` (a CSV with header) with `seed` and `config_hash`
    /// columns appended to every line.
    fn write_tagged_csv(&self, name: &str, body: &[u8]) -> Result<()> {
        let mut out = self.create(name)?;
        let text = String::from_utf8_lossy(body);
        let mut lines = text.lines();
        if let Some(h) = lines.next() {
            writeln!(out, "{h},seed,config_hash")?;
        }
        for l in lines {
            writeln!(out, "{l},{},{}", self.config.seed, self.hash)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn run_preset(preset: Preset, ctx: &RunContext) -> Result<Vec<StatReport>> {
    let reports = match preset {
        Preset::Covariance => covariance(ctx)?,
        Preset::Spectral => spectral(ctx)?,
        Preset::Gibbs => gibbs(ctx)?,
        Preset::FeynmanKac => feynman_kac(ctx)?,
        Preset::Invariance => invariance(ctx)?,
        Preset::Nonlocalization => suite::test_nonlocalization(&ctx.plan(preset)?)?,
        Preset::Tightness => suite::test_tightness_bounds(&ctx.plan(preset)?)?,
        Preset::All => {
            let mut all = Vec::new();
            for p in Preset::PIPELINES {
                all.extend(run_preset(p, ctx)?);
            }
            return Ok(all);
        }
    };
    Ok(reports.into_iter().map(|r| r.param("preset", preset)).collect())
}

fn covariance(ctx: &RunContext) -> Result<Vec<StatReport>> {
    let plan = ctx.plan(Preset::Covariance)?;
    let s = ctx.config.covariance()?;
    let grid = Grid1D::line(-s.half_width, s.half_width, s.points)?;
    let sampler = LineSampler::new(grid, plan.prior())?;
    let acc = covariance_scan(&sampler, s.replicas, plan.seeds.labeled("covariance"));
    let rows = acc.report(&grid, plan.prior());
    let worst = rows.iter().max_by(|a, b| a.z_score().total_cmp(&b.z_score())).expect("non-empty grid");
    let abs = rows.iter().map(|r| (r.estimate - r.target).abs()).fold(0.0, f64::max);
    let mut body = Vec::new();
    write_covariance_csv(&rows, &mut body)?;
    ctx.write_tagged_csv("covariance.csv", &body)?;
    Ok(vec![
        StatReport::new("covariance", "max z-score")
            .param("replicas", s.replicas)
            .param("points", s.points)
            .param("worst_lag", worst.lag)
            .values(worst.z_score(), 0.0, COVARIANCE_Z)
            .verdict(worst.z_score() < COVARIANCE_Z),
        StatReport::new("covariance", "max abs error")
            .param("replicas", s.replicas)
            .values(abs, 0.0, f64::NAN)
            .verdict(true)
            .informational(),
    ])
}

fn spectral(ctx: &RunContext) -> Result<Vec<StatReport>> {
    let plan = ctx.plan(Preset::Spectral)?;
    let mut reports = ground_state_reports(8.0, 799, (2.0, 5.0))?;
    reports.extend(mehler_consistency_reports(8.0, 399, &KERNEL_S, KERNEL_WINDOW)?);
    let (lo, hi, n) = ESTIMATE_X;
    let xs: Vec<f64> = (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect();
    let mut rng = plan.seeds.labeled("estimate-points").rng();
    let mut points = Vec::with_capacity(ESTIMATE_POINTS);
    while points.len() < ESTIMATE_POINTS {
        let (a, b): (f64, f64) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        if (a - b).abs() > 1e-3 {
            points.push((a, b));
        }
    }
    reports.extend(check_kernel_estimates(&xs, &points)?);
    let n = &plan.numerics;
    let limit = plan.limit_ground_state(TargetGrid::new(n.target_u_max, n.target_n_u, 2)?)?;
    reports.push(
        StatReport::new("limit_ground_state", "energy")
            .param("n_u", n.target_n_u)
            .values(limit.ground_energy, 0.0, f64::NAN)
            .verdict(limit.ground_energy.is_finite())
            .informational(),
    );
    write_kernel_csv(ctx)?;
    Ok(reports)
}

/// Harmonic kernel against Mehler on a coarse grid, long format.
fn write_kernel_csv(ctx: &RunContext) -> Result<()> {
    let grid = TargetGrid::new(8.0, 159, 1)?;
    let op = build_operator(grid, PotentialKind::Harmonic, None)?;
    let mut body = Vec::new();
    writeln!(body, "s,u1,u2,numeric,mehler")?;
    for &s in &KERNEL_S {
        let k = semigroup_kernel(&op, s, op.n_modes())?;
        for i in 0..grid.n_u {
            for j in 0..grid.n_u {
                let (a, b) = (grid.point(i), grid.point(j));
                if a.abs() <= KERNEL_WINDOW && b.abs() <= KERNEL_WINDOW {
                    writeln!(body, "{s},{a},{b},{},{}", k.values[(i, j)], mehler_kernel(s, a, b)?)?;
                }
            }
        }
    }
    ctx.write_tagged_csv("kernel.csv", &body)
}

fn gibbs(ctx: &RunContext) -> Result<Vec<StatReport>> {
    let plan = ctx.plan(Preset::Gibbs)?;
    let seeds = plan.seeds.labeled("partition");
    let mut reports = Vec::new();
    for (i, &radius) in plan.n_values.iter().enumerate() {
        let grid = plan.line_grid(radius)?;
        let d = estimate_partition(&plan.mu_spec(radius, grid)?, grid, plan.numerics.partition_samples, seeds.child(i as u64))?;
        reports.push(
            StatReport::new("partition", "D_N")
                .param("N", radius)
                .param("samples", d.n_samples)
                .values(d.value, d.std_error, f64::NAN)
                .verdict(d.value > 0.0 && d.value < 1.0)
                .informational(),
        );
    }
    reports.extend(suite::test_moment_bounds(&plan)?);
    reports.extend(suite::test_measure_proximity(&plan)?);
    Ok(reports)
}

fn feynman_kac(ctx: &RunContext) -> Result<Vec<StatReport>> {
    let plan = ctx.plan(Preset::FeynmanKac)?;
    let result = suite::test_feynman_kac_marginal(&plan)?;
    let mut body = Vec::new();
    writeln!(body, "N,abs_u0")?;
    for (radius, values) in &result.samples {
        for v in values {
            writeln!(body, "{radius},{v}")?;
        }
    }
    ctx.write_tagged_csv("marginal_samples.csv", &body)?;
    let r = &result.reference;
    let mut body = Vec::new();
    writeln!(body, "r,cdf,density")?;
    for k in 0..r.radii.len() {
        writeln!(body, "{},{},{}", r.radii[k], r.cdf[k], r.density[k])?;
    }
    ctx.write_tagged_csv("omega_radial.csv", &body)?;
    Ok(result.reports)
}

fn invariance(ctx: &RunContext) -> Result<Vec<StatReport>> {
    let plan = ctx.plan(Preset::Invariance)?;
    let mut reports = suite::test_invariance(&plan)?;
    reports.push(suite::null_false_positive_rate(&plan, plan.n_values[0])?);
    reports.extend(correctness_reports()?);
    Ok(reports)
}
