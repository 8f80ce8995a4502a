//! Strang-split spectral integrator for `i∂_t u = -Δu + g χ|u|²u` on a
//! periodic box.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::gibbs::cutoff::CutoffProfile;
use crate::grid::{Grid1D, LatticeField};
use crate::report::StatReport;

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub dt: f64,
    pub t_final: f64,
    pub cutoff: CutoffProfile,
    /// Coupling `g` in front of the cubic term.
    pub coupling: f64,
    /// Fraction of the band kept after each linear step (1 keeps all modes).
    pub dealias_fraction: f64,
    /// Times to record, within `[-t_final, t_final]`; negative times are
    /// reached by stepping backward.
    pub snapshot_times: Vec<f64>,
}

impl FlowConfig {
    pub fn new(dt: f64, t_final: f64, cutoff: CutoffProfile) -> Self {
        Self { dt, t_final, cutoff, coupling: 1.0, dealias_fraction: 2.0 / 3.0, snapshot_times: vec![0.0, t_final] }
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn with_coupling(mut self, g: f64) -> Self {
        self.coupling = g;
        self
    }

    pub fn with_dealias(mut self, fraction: f64) -> Self {
        self.dealias_fraction = fraction;
        self
    }

    /// Largest angular wavenumber retained.
    pub fn k_max(&self) -> f64 {
        self.cutoff.grid.nyquist() * self.dealias_fraction
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_final must be >= 0, got {}", self.t_final)));
        }
        if !(self.dealias_fraction > 0.0 && self.dealias_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "dealias fraction must lie in (0, 1], got {}",
                self.dealias_fraction
            )));
        }
        if !self.cutoff.grid.periodic {
            return Err(Error::InvalidGrid("the flow needs a periodic grid".into()));
        }
        let k = self.k_max();
        if self.dt * k * k > std::f64::consts::PI * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "dt * k_max^2 = {} exceeds pi; reduce dt below {}",
                self.dt * k * k,
                std::f64::consts::PI / (k * k)
            )));
        }
        if self.snapshot_times.is_empty() {
            return Err(Error::InvalidArgument("no snapshot times".into()));
        }
        let tol = 1e-12 * self.t_final.max(1.0);
        if self.snapshot_times.iter().any(|t| t.abs() > self.t_final + tol) {
            return Err(Error::InvalidArgument("snapshot times outside [-t_final, t_final]".into()));
        }
        if self.snapshot_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("snapshot times must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Snapshots of one evolution with the conserved quantities at each.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<(f64, LatticeField)>,
    /// `(mass, hamiltonian)` per snapshot.
    pub conserved: Vec<(f64, f64)>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.0).collect()
    }

    pub fn at(&self, t: f64) -> Option<&LatticeField> {
        self.snapshots.iter().find(|s| (s.0 - t).abs() <= 1e-12 * t.abs().max(1.0)).map(|s| &s.1)
    }

    /// Largest `|M(t) - M(t_ref)| / M(t_ref)` with `t_ref` the snapshot nearest 0.
    pub fn max_mass_drift(&self) -> f64 {
        let Some(r) = self.snapshots.iter().position(|s| s.0 >= 0.0).or(Some(0)) else { return 0.0 };
        let m0 = self.conserved[r].0;
        self.conserved.iter().map(|c| ((c.0 - m0) / m0).abs()).fold(0.0, f64::max)
    }
}

struct Stepper {
    grid: Grid1D,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k2: Vec<f64>,
    mask: Vec<bool>,
    chi: Vec<f64>,
    coupling: f64,
}

impl Stepper {
    fn new(config: &FlowConfig) -> Self {
        let grid = config.cutoff.grid;
        let mut planner = FftPlanner::new();
        let n = grid.n_points;
        let k = grid.wavenumbers();
        let k_max = config.k_max();
        Self {
            grid,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            k2: k.iter().map(|v| v * v).collect(),
            mask: k.iter().map(|v| v.abs() <= k_max * (1.0 + 1e-12)).collect(),
            chi: config.cutoff.effective_values(),
            coupling: config.coupling,
        }
    }

    fn nonlinear(&self, u: &mut [Complex64], tau: f64) {
        for (v, c) in u.iter_mut().zip(&self.chi) {
            let phase = -self.coupling * c * v.norm_sqr() * tau;
            *v *= Complex64::from_polar(1.0, phase);
        }
    }

    fn linear(&self, u: &mut [Complex64], tau: f64) {
        let n = u.len() as f64;
        self.forward.process(u);
        for ((v, k2), keep) in u.iter_mut().zip(&self.k2).zip(&self.mask) {
            *v = if *keep { *v * Complex64::from_polar(1.0 / n, -k2 * tau) } else { Complex64::new(0.0, 0.0) };
        }
        self.inverse.process(u);
    }

    fn step(&self, u: &mut [Complex64], tau: f64) {
        self.nonlinear(u, 0.5 * tau);
        self.linear(u, tau);
        self.nonlinear(u, 0.5 * tau);
    }

    fn gradient_energy(&self, u: &[Complex64]) -> f64 {
        let mut buf = u.to_vec();
        self.forward.process(&mut buf);
        let n = u.len() as f64;
        let l = self.grid.length();
        buf.iter().zip(&self.k2).map(|(v, k2)| k2 * v.norm_sqr()).sum::<f64>() * l / (n * n)
    }
}

fn mass(grid: &Grid1D, u: &[Complex64]) -> f64 {
    grid.trapezoid_weights().iter().zip(u).map(|(w, v)| w * v.norm_sqr()).sum()
}

/// `∫|∇u|² + (g/2)∫χ|u|⁴` with a spectral gradient and the cutoff's weights.
pub fn hamiltonian_with(u: &LatticeField, cutoff: &CutoffProfile, coupling: f64) -> Result<f64> {
    if !u.grid().periodic {
        return Err(Error::InvalidGrid("the Hamiltonian needs a periodic grid".into()));
    }
    if !u.grid().same_as(&cutoff.grid) {
        return Err(Error::GridMismatch("field and cutoff grids differ".into()));
    }
    let n = u.grid().n_points;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut buf = u.values().to_vec();
    fft.process(&mut buf);
    let k = u.grid().wavenumbers();
    let grad: f64 =
        buf.iter().zip(&k).map(|(v, k)| k * k * v.norm_sqr()).sum::<f64>() * u.grid().length() / (n * n) as f64;
    Ok(grad + 0.5 * coupling * cutoff.quartic_integral(u.values()))
}

pub fn hamiltonian(u: &LatticeField, cutoff: &CutoffProfile) -> Result<f64> {
    hamiltonian_with(u, cutoff, 1.0)
}

fn advance(stepper: &Stepper, u: &mut [Complex64], span: f64, dt: f64, sign: f64) {
    let full = (span / dt + 1e-9).floor() as usize;
    for _ in 0..full {
        stepper.step(u, sign * dt);
    }
    let rest = span - full as f64 * dt;
    if rest > 1e-12 * dt {
        stepper.step(u, sign * rest);
    }
}

/// Evolves `u0` and records the configured snapshots.
pub fn evolve(u0: &LatticeField, config: &FlowConfig) -> Result<Trajectory> {
    config.validate()?;
    if !u0.grid().same_as(&config.cutoff.grid) {
        return Err(Error::GridMismatch("initial datum and cutoff grids differ".into()));
    }
    let stepper = Stepper::new(config);
    let g = *u0.grid();
    let record = |u: &[Complex64]| {
        let m = mass(&g, u);
        let h = stepper.gradient_energy(u) + 0.5 * config.coupling * config.cutoff.quartic_integral(u);
        (m, h)
    };
    let finite = |u: &[Complex64]| u.iter().all(|v| v.re.is_finite() && v.im.is_finite());
    let forward_times: Vec<f64> = config.snapshot_times.iter().copied().filter(|t| *t >= 0.0).collect();
    let backward_times: Vec<f64> = config.snapshot_times.iter().rev().copied().filter(|t| *t < 0.0).collect();
    let mut done: Vec<(f64, LatticeField, (f64, f64))> = Vec::new();
    for (sign, times) in [(1.0, forward_times), (-1.0, backward_times)] {
        let mut u = u0.values().to_vec();
        let mut now = 0.0f64;
        for t in times {
            advance(&stepper, &mut u, (t - now).abs(), config.dt, sign);
            now = t;
            if !finite(&u) {
                done.sort_by(|a, b| a.0.total_cmp(&b.0));
                let partial = Trajectory {
                    conserved: done.iter().map(|s| s.2).collect(),
                    snapshots: done.into_iter().map(|s| (s.0, s.1)).collect(),
                };
                return Err(Error::FlowAborted { time: t, partial: Box::new(partial) });
            }
            let c = record(&u);
            done.push((t, LatticeField::from_parts_unchecked(g, u.clone()), c));
        }
    }
    done.sort_by(|a, b| a.0.total_cmp(&b.0));
    let all = done;
    Ok(Trajectory { conserved: all.iter().map(|s| s.2).collect(), snapshots: all.into_iter().map(|s| (s.0, s.1)).collect() })
}

/// Evolved ensemble: surviving trajectories with their member indices.
#[derive(Debug, Clone)]
pub struct Pushforward {
    pub trajectories: Vec<(usize, Trajectory)>,
    pub aborted: Vec<usize>,
}

impl Pushforward {
    pub fn abort_fraction(&self) -> f64 {
        let total = self.trajectories.len() + self.aborted.len();
        self.aborted.len() as f64 / total.max(1) as f64
    }

    /// The ensemble's section at time `t`.
    pub fn section(&self, t: f64) -> Vec<LatticeField> {
        self.trajectories.iter().filter_map(|(_, tr)| tr.at(t).cloned()).collect()
    }
}

/// Evolves every member; more than 1% aborted members fails the run.
pub fn pushforward_ensemble(initial: &[LatticeField], config: &FlowConfig) -> Result<Pushforward> {
    if initial.is_empty() {
        return Err(Error::InvalidArgument("empty ensemble".into()));
    }
    config.validate()?;
    let results: Vec<(usize, Result<Trajectory>)> =
        initial.par_iter().enumerate().map(|(i, u)| (i, evolve(u, config))).collect();
    let mut trajectories = Vec::new();
    let mut aborted = Vec::new();
    for (i, r) in results {
        match r {
            Ok(t) => trajectories.push((i, t)),
            Err(Error::FlowAborted { .. }) => aborted.push(i),
            Err(e) => return Err(e),
        }
    }
    if aborted.len() * 100 > initial.len() {
        return Err(Error::EnsembleAborted { aborted: aborted.len(), total: initial.len() });
    }
    Ok(Pushforward { trajectories, aborted })
}

/// Exact-solution, conservation, convergence and reversibility checks of the
/// integrator on smooth data.
pub fn correctness_reports() -> Result<Vec<StatReport>> {
    use std::f64::consts::PI;
    let mut out = Vec::new();
    let g = Grid1D::periodic(-PI, PI, 64)?;
    let (k, amp, coupling) = (3.0, 0.8, 2.0);
    for (label, wave) in [("plane_wave", k), ("constant", 0.0)] {
        let u0 = LatticeField::from_fn(g, |x| Complex64::from_polar(amp, wave * x))?;
        let cfg = FlowConfig::new(1e-3, 1.0, CutoffProfile::constant(g, 1.0)).with_dealias(1.0).with_coupling(coupling);
        let tr = evolve(&u0, &cfg)?;
        let omega = wave * wave + coupling * amp * amp;
        let err = g
            .points()
            .iter()
            .zip(tr.at(1.0).expect("t = 1 recorded").values())
            .map(|(x, v)| (v - Complex64::from_polar(amp, wave * x - omega)).norm())
            .fold(0.0, f64::max);
        out.push(StatReport::new("flow_exact", label).param("t", 1).values(err, 0.0, 1e-8).verdict(err < 1e-8));
    }

    let small = Grid1D::periodic(-PI, PI, 32)?;
    let chi = CutoffProfile::smooth(1.5, 0.5, small)?;
    let smooth = LatticeField::from_fn(small, |x| Complex64::from_polar(1.0 + 0.5 * x.cos(), (2.0 * x).sin()))?;
    let run = |dt: f64, times: Vec<f64>, u: &LatticeField| {
        let cfg = FlowConfig::new(dt, 1.0, chi.clone()).with_dealias(1.0).with_coupling(coupling).with_snapshots(times);
        evolve(u, &cfg)
    };
    let tr = run(1e-3, (0..=10).map(|j| j as f64 / 10.0).collect(), &smooth)?;
    let drift = tr.max_mass_drift();
    out.push(StatReport::new("flow_mass", "relative drift").param("t", 1).values(drift, 0.0, 1e-10).verdict(drift < 1e-10));

    let h: Vec<f64> = [0.01, 0.005, 0.0025]
        .iter()
        .map(|&dt| run(dt, vec![0.0, 1.0], &smooth).map(|t| t.conserved[1].1))
        .collect::<Result<_>>()?;
    let ratio = (h[0] - h[1]) / (h[1] - h[2]);
    out.push(
        StatReport::new("flow_self_convergence", "H(1) under dt halving")
            .param("dt", "0.01;0.005;0.0025")
            .values(ratio, 0.0, 4.0)
            .verdict((ratio - 4.0).abs() <= 0.8),
    );

    let forward = run(1e-3, vec![0.0, 1.0], &smooth)?;
    let back = run(1e-3, vec![-1.0, 0.0], forward.at(1.0).expect("t = 1 recorded"))?;
    let err = back
        .at(-1.0)
        .expect("t = -1 recorded")
        .values()
        .iter()
        .zip(smooth.values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    out.push(StatReport::new("flow_reversibility", "max |u0 - back(forward(u0))|").values(err, 0.0, 1e-6).verdict(err < 1e-6));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn box_grid(n: usize) -> Grid1D {
        Grid1D::periodic(-PI, PI, n).unwrap()
    }

    #[test]
    fn plane_wave_is_exact() {
        let g = box_grid(64);
        let k = 3.0;
        let u0 = LatticeField::from_fn(g, |x| Complex64::from_polar(1.0, k * x)).unwrap();
        let cfg = FlowConfig::new(1e-3, 1.0, CutoffProfile::constant(g, 0.0)).with_dealias(1.0);
        let tr = evolve(&u0, &cfg).unwrap();
        let u1 = tr.at(1.0).unwrap();
        for (x, v) in g.points().iter().zip(u1.values()) {
            let exact = Complex64::from_polar(1.0, k * x - k * k);
            assert!((v - exact).norm() < 1e-10);
        }
    }

    #[test]
    fn correctness_checks_pass() {
        let reports = correctness_reports().unwrap();
        assert_eq!(reports.len(), 5);
        for r in &reports {
            assert!(r.passed(), "{} {}: {}", r.test_name, r.observable, r.estimate);
        }
    }

    #[test]
    fn rejects_unresolved_dt() {
        let g = box_grid(64);
        let cfg = FlowConfig::new(0.01, 1.0, CutoffProfile::constant(g, 1.0)).with_dealias(1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn negative_times_run_backward() {
        let g = box_grid(32);
        let u0 = LatticeField::from_fn(g, |x| Complex64::new(x.cos(), 0.5 * (2.0 * x).sin())).unwrap();
        let cfg = FlowConfig::new(1e-3, 0.5, CutoffProfile::constant(g, 1.0))
            .with_dealias(1.0)
            .with_snapshots(vec![-0.5, 0.0, 0.5]);
        let tr = evolve(&u0, &cfg).unwrap();
        assert_eq!(tr.times(), vec![-0.5, 0.0, 0.5]);
        assert!((tr.at(0.0).unwrap().values()[3] - u0.values()[3]).norm() == 0.0);
        assert!(tr.max_mass_drift() < 1e-12);
    }
}
