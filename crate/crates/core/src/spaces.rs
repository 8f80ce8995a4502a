//! Weighted negative-regularity norms on the periodic simulation box and the
//! weights that enter them.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::LatticeField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    ExplicitTable,
    PowerLaw,
    FromMomentBounds,
}

/// Even weight `φ`, given on `|x|` by a table or as `⟨x⟩^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    pub kind: WeightKind,
    /// `(|x|, φ)` pairs with increasing `|x|`; constant beyond the last entry.
    pub table: Option<Vec<(f64, f64)>>,
    pub exponent: Option<f64>,
}

fn japanese(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

fn interpolate(table: &[(f64, f64)], x: f64) -> f64 {
    let a = x.abs();
    let k = table.partition_point(|p| p.0 <= a);
    if k == 0 {
        return table[0].1;
    }
    if k == table.len() {
        return table[k - 1].1;
    }
    let (x0, y0) = table[k - 1];
    let (x1, y1) = table[k];
    y0 + (y1 - y0) * (a - x0) / (x1 - x0)
}

impl WeightSpec {
    pub fn zero() -> Self {
        Self { kind: WeightKind::ExplicitTable, table: Some(vec![(0.0, 0.0)]), exponent: None }
    }

    pub fn power_law(p: f64) -> Result<Self> {
        let s = Self { kind: WeightKind::PowerLaw, table: None, exponent: Some(p) };
        s.validate()?;
        Ok(s)
    }

    pub fn table(pairs: Vec<(f64, f64)>) -> Result<Self> {
        let s = Self { kind: WeightKind::ExplicitTable, table: Some(pairs), exponent: None };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            WeightKind::PowerLaw => match self.exponent {
                Some(p) if p >= 0.0 && p.is_finite() => Ok(()),
                p => Err(Error::InvalidArgument(format!("power-law exponent must be finite and >= 0, got {p:?}"))),
            },
            WeightKind::ExplicitTable | WeightKind::FromMomentBounds => {
                let Some(t) = self.table.as_ref().filter(|t| !t.is_empty()) else {
                    return Err(Error::InvalidArgument("weight table is empty".into()));
                };
                if t.iter().any(|p| !(p.0 >= 0.0 && p.1 >= 0.0 && p.1.is_finite())) {
                    return Err(Error::InvalidArgument("weight tables hold (|x| >= 0, value >= 0) pairs".into()));
                }
                if t.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 < w[0].1) {
                    return Err(Error::InvalidArgument(
                        "weight table must be strictly increasing in |x| and non-decreasing in value".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.kind {
            WeightKind::PowerLaw => japanese(x).powf(self.exponent.unwrap_or(0.0)),
            _ => self.table.as_deref().map_or(0.0, |t| interpolate(t, x)),
        }
    }
}

/// Exponents of the norms. `x_decay` and `z_decay` are the spatial weights
/// `⟨x⟩^{-6}` and `⟨x⟩^{-2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormParams {
    pub sigma: f64,
    pub epsilon: f64,
    pub alpha_time: f64,
    pub t_horizon: f64,
    pub x_decay: f64,
    pub z_decay: f64,
}

impl Default for NormParams {
    fn default() -> Self {
        Self { sigma: -2.0, epsilon: 0.1, alpha_time: 0.5, t_horizon: 1.0, x_decay: 6.0, z_decay: 2.0 }
    }
}

impl NormParams {
    pub fn validate(&self) -> Result<()> {
        if !(-2.0..-1.75).contains(&self.sigma) {
            return Err(Error::InvalidArgument(format!("sigma must lie in [-2, -7/4), got {}", self.sigma)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.alpha_time > 0.0 && self.alpha_time <= 0.5) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1/2], got {}", self.alpha_time)));
        }
        if !(self.t_horizon >= 0.0) {
            return Err(Error::InvalidArgument(format!("T must be >= 0, got {}", self.t_horizon)));
        }
        Ok(())
    }
}

/// `(1 - ∂²)^{s/2} f` as the Fourier multiplier `⟨k⟩^s`.
pub fn fractional_derivative(f: &LatticeField, order: f64) -> Result<Vec<Complex64>> {
    let g = f.grid();
    if !g.periodic {
        return Err(Error::InvalidGrid("fractional derivatives need a periodic grid".into()));
    }
    let n = g.n_points;
    let mut planner = FftPlanner::new();
    let mut buf = f.values().to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    for (v, k) in buf.iter_mut().zip(g.wavenumbers()) {
        *v *= japanese(k).powf(order) / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    Ok(buf)
}

fn weighted_lp(f: &LatticeField, values: &[Complex64], weight: impl Fn(f64) -> f64, p: i32) -> f64 {
    let g = f.grid();
    let h = g.spacing();
    let sum: f64 = g.points().iter().zip(values).map(|(x, v)| (weight(*x) * v.norm()).powi(p) * h).sum();
    sum.powf(1.0 / p as f64)
}

fn x_type_norm(f: &LatticeField, weight: &WeightSpec, decay: f64, order: f64) -> Result<f64> {
    let d = fractional_derivative(f, order)?;
    Ok(weighted_lp(f, &d, |x| japanese(x).powf(-decay) / (1.0 + weight.eval(x)), 2))
}

/// `‖(1+φ)^{-1} ⟨x⟩^{-6} D^σ f‖_{L²}`.
pub fn norm_x(f: &LatticeField, weight: &WeightSpec, params: &NormParams) -> Result<f64> {
    params.validate()?;
    x_type_norm(f, weight, params.x_decay, params.sigma)
}

/// `‖(1+φ)^{-1} ⟨x⟩^{-6(1+ε)} D^{σ(1+ε)} f‖_{L²}`.
pub fn norm_x_eps(f: &LatticeField, weight: &WeightSpec, params: &NormParams) -> Result<f64> {
    params.validate()?;
    let s = 1.0 + params.epsilon;
    x_type_norm(f, weight, params.x_decay * s, params.sigma * s)
}

/// The two terms of the 𝒵 norm: `(L² part, L⁶ part)`.
pub fn norm_z_parts(f: &LatticeField, weight: &WeightSpec, params: &NormParams) -> Result<(f64, f64)> {
    params.validate()?;
    let zd = params.z_decay;
    let l2 = x_type_norm(f, weight, zd, params.sigma + 2.0)?;
    let l6 = weighted_lp(f, f.values(), |x| japanese(x).powf(-zd) * (1.0 + weight.eval(x)).powf(-1.0 / 3.0), 6);
    Ok((l2, l6))
}

/// `‖⟨x⟩^{-2}(1+φ)^{-1} D^{σ+2} f‖_{L²} + ‖⟨x⟩^{-2}(1+φ)^{-1/3} f‖_{L⁶}`.
pub fn norm_z(f: &LatticeField, weight: &WeightSpec, params: &NormParams) -> Result<f64> {
    let (a, b) = norm_z_parts(f, weight, params)?;
    Ok(a + b)
}

/// Discrete `sup ‖f(t₁) - f(t₂)‖_𝒳 / |t₁ - t₂|^α + sup_t ‖f(t)‖_𝒳`.
pub fn norm_time_holder(trajectory: &[(f64, LatticeField)], weight: &WeightSpec, params: &NormParams) -> Result<f64> {
    params.validate()?;
    if trajectory.len() < 2 {
        return Err(Error::InvalidArgument("the time-Hölder norm needs at least two snapshots".into()));
    }
    if trajectory.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidArgument("snapshot times must be strictly increasing".into()));
    }
    let tol = 1e-12 * params.t_horizon.max(1.0);
    if trajectory.iter().any(|s| s.0.abs() > params.t_horizon + tol) {
        return Err(Error::InvalidArgument(format!("snapshot times must lie in [-{0}, {0}]", params.t_horizon)));
    }
    let sup = trajectory.iter().map(|s| norm_x(&s.1, weight, params)).collect::<Result<Vec<_>>>()?;
    let mut holder: f64 = 0.0;
    for i in 0..trajectory.len() {
        for j in i + 1..trajectory.len() {
            let d = trajectory[j].1.sub(&trajectory[i].1)?;
            let q = norm_x(&d, weight, params)? / (trajectory[j].0 - trajectory[i].0).powf(params.alpha_time);
            holder = holder.max(q);
        }
    }
    Ok(holder + sup.iter().copied().fold(0.0, f64::max))
}

/// Which empirical bound a table holds.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum MomentKey {
    /// `E|u(x)|^r <= φ_r(x)`.
    Moment(u32),
    /// `E|u(x) - u(y)|^r / |x - y|^{1 + αr} <= φ_{r,α}(x)`.
    Increment(u32, f64),
}

impl MomentKey {
    fn sort_key(&self) -> (u32, u32, u64) {
        match *self {
            MomentKey::Moment(r) => (0, r, 0),
            MomentKey::Increment(r, a) => (1, r, a.to_bits()),
        }
    }
}

impl Eq for MomentKey {}

impl Ord for MomentKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

/// Folds `(x, bound)` pairs onto `|x|` as a non-decreasing envelope.
fn envelope(table: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut folded: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for &(x, b) in table {
        let a = x.abs();
        let e = folded.entry(a.to_bits()).or_insert((a, b));
        e.1 = e.1.max(b);
    }
    let mut out: Vec<(f64, f64)> = folded.into_values().collect();
    let mut run = 0.0f64;
    for p in &mut out {
        run = run.max(p.1);
        p.1 = run;
    }
    out
}

/// `ξ` upper bounds implied at `x`, with `s` the increment regularity.
fn xi_bounds(x: f64, phi2: f64, phi2s: Option<f64>, phi6: Option<f64>, s: f64) -> [f64; 4] {
    let w2 = japanese(x).powi(2);
    let inf = f64::INFINITY;
    [
        (phi2 * w2).powf(-0.5),
        phi2s.map_or(inf, |p| (p * japanese(x).powi(3)).powf(-0.5)),
        (phi2 * w2).powf(-1.0 / (1.0 - 2.0 * s)),
        phi6.map_or(inf, |p| 1.0 / ((1.0 + p.sqrt()) * w2)),
    ]
}

/// Builds `φ` from empirical moment tables: `ξ` is the largest function
/// allowed by the pointwise conditions, `(1 + φ) ⟨x⟩² = ξ^{-1}`, and the
/// result is made even and non-decreasing by running maxima. The `|D^s ξ|²`
/// condition is taken pointwise as `ξ²`.
pub fn weight_from_moment_bounds(tables: &BTreeMap<MomentKey, Vec<(f64, f64)>>) -> Result<WeightSpec> {
    if tables.is_empty() || tables.values().any(|t| t.is_empty()) {
        return Err(Error::InvalidArgument("empty moment tables".into()));
    }
    if tables.values().flatten().any(|p| !(p.1 > 0.0 && p.1.is_finite())) {
        return Err(Error::InvalidArgument("moment bounds must be positive and finite".into()));
    }
    let get = |k: MomentKey| tables.get(&k).map(|t| envelope(t));
    let phi2 = get(MomentKey::Moment(2));
    let phi6 = get(MomentKey::Moment(6));
    let (s, phi2s) = tables
        .keys()
        .find_map(|k| match *k {
            MomentKey::Increment(2, a) => Some((a, get(*k))),
            _ => None,
        })
        .unwrap_or((0.2, None));
    if !(0.0..0.25).contains(&s) {
        return Err(Error::InvalidArgument(format!("increment regularity must lie in [0, 1/4), got {s}")));
    }
    let base = phi2.clone().or_else(|| phi6.clone()).or_else(|| phi2s.clone()).unwrap_or_default();
    let mut table: Vec<(f64, f64)> = base
        .iter()
        .map(|&(x, _)| {
            let p2 = phi2.as_deref().map_or(1.0, |t| interpolate(t, x));
            let p2s = phi2s.as_deref().map(|t| interpolate(t, x));
            let p6 = phi6.as_deref().map(|t| interpolate(t, x));
            let xi = xi_bounds(x, p2, p2s, p6, s).into_iter().fold(f64::INFINITY, f64::min);
            (x, (1.0 / (xi * japanese(x).powi(2)) - 1.0).max(0.0))
        })
        .collect();
    let mut run = 0.0f64;
    for p in &mut table {
        run = run.max(p.1);
        p.1 = run;
    }
    let w = WeightSpec { kind: WeightKind::FromMomentBounds, table: Some(table), exponent: None };
    w.validate()?;
    Ok(w)
}

/// Checks the `ξ` conditions for `weight` against the tables at each table
/// point; returns the largest ratio `ξ / bound` (at most 1 when all hold).
pub fn xi_condition_ratio(weight: &WeightSpec, tables: &BTreeMap<MomentKey, Vec<(f64, f64)>>) -> f64 {
    let get = |k: MomentKey| tables.get(&k).map(|t| envelope(t));
    let phi2 = get(MomentKey::Moment(2));
    let phi6 = get(MomentKey::Moment(6));
    let (s, phi2s) = tables
        .keys()
        .find_map(|k| match *k {
            MomentKey::Increment(2, a) => Some((a, get(*k))),
            _ => None,
        })
        .unwrap_or((0.2, None));
    let xs: Vec<f64> = tables.values().flatten().map(|p| p.0.abs()).collect();
    xs.iter()
        .map(|&x| {
            let xi = 1.0 / ((1.0 + weight.eval(x)) * japanese(x).powi(2));
            let p2 = phi2.as_deref().map_or(1.0, |t| interpolate(t, x));
            let b = xi_bounds(
                x,
                p2,
                phi2s.as_deref().map(|t| interpolate(t, x)),
                phi6.as_deref().map(|t| interpolate(t, x)),
                s,
            );
            b.iter().map(|bi| xi / bi).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1D;
    use std::f64::consts::PI;

    #[test]
    fn pure_mode_scales_by_multiplier() {
        let g = Grid1D::periodic(-PI, PI, 64).unwrap();
        let f = LatticeField::from_fn(g, |x| Complex64::from_polar(1.0, 5.0 * x)).unwrap();
        let d = fractional_derivative(&f, -2.0).unwrap();
        let m = (1.0f64 + 25.0).powf(-1.0);
        for (a, b) in d.iter().zip(f.values()) {
            assert!((a - b * m).norm() < 1e-15);
        }
    }

    #[test]
    fn rejects_line_grid_and_bad_params() {
        let g = Grid1D::line(-1.0, 1.0, 11).unwrap();
        let f = LatticeField::zeros(g);
        assert!(norm_x(&f, &WeightSpec::zero(), &NormParams::default()).is_err());
        let p = NormParams { sigma: -1.5, ..NormParams::default() };
        assert!(p.validate().is_err());
        assert!(WeightSpec::table(vec![(0.0, 1.0), (1.0, 0.5)]).is_err());
    }
}
