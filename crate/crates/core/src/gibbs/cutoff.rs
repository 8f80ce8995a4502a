//! Cutoff profiles: the sharp indicator of `[-N, N]` and the smooth `χ_N`.
//!
//! Besides point values, each profile carries hat-function weights
//! `W_i = ∫ χ(x) hat_i(x) dx`, so that `Σ W_i g_i` is the exact integral of
//! `χ` times the piecewise-linear interpolant of `g`. These stay exact when
//! the transition is narrower than a grid cell.

use num_complex::Complex64;

use super::partition::PartitionEstimate;
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::numerics::gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutoffKind {
    Sharp,
    Smooth,
    /// `χ ≡ c` on the whole grid (`c = 1` is the uncut equation).
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutoffProfile {
    pub radius: f64,
    pub kind: CutoffKind,
    pub transition_width: f64,
    pub grid: Grid1D,
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    /// Partition-function estimate the width was derived from, if any.
    pub d_n: Option<f64>,
}

fn flat(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step from 1 at `t = 0` to 0 at `t = 1`.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let a = flat(1.0 - t);
        a / (a + flat(t))
    }
}

impl CutoffProfile {
    pub fn sharp(radius: f64, grid: Grid1D) -> Result<Self> {
        Self::build(radius, CutoffKind::Sharp, 0.0, grid, None)
    }

    pub fn constant(grid: Grid1D, c: f64) -> Self {
        let weights = grid.trapezoid_weights().iter().map(|w| w * c).collect();
        Self {
            radius: f64::INFINITY,
            kind: CutoffKind::Constant(c),
            transition_width: 0.0,
            grid,
            values: vec![c; grid.n_points],
            weights,
            d_n: None,
        }
    }

    /// Smooth profile with an explicit transition width; any width > 0 is
    /// accepted, sub-grid ones included.
    pub fn smooth(radius: f64, width: f64, grid: Grid1D) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidArgument(format!("transition width must be positive, got {width}")));
        }
        Self::build(radius, CutoffKind::Smooth, width, grid, None)
    }

    fn build(radius: f64, kind: CutoffKind, width: f64, grid: Grid1D, d_n: Option<f64>) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("cutoff radius must be finite and >= 0, got {radius}")));
        }
        let outer = radius + width;
        if grid.x_min >= -outer || grid.x_max <= outer {
            return Err(Error::InvalidGrid(format!(
                "grid [{}, {}] does not cover the cutoff support [-{outer}, {outer}]",
                grid.x_min, grid.x_max
            )));
        }
        let mut p = Self { radius, kind, transition_width: width, grid, values: Vec::new(), weights: Vec::new(), d_n };
        p.values = grid.points().iter().map(|&x| p.eval(x)).collect();
        p.weights = p.hat_weights();
        Ok(p)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let a = x.abs();
        match self.kind {
            CutoffKind::Constant(c) => c,
            CutoffKind::Sharp => {
                if a <= self.radius {
                    1.0
                } else {
                    0.0
                }
            }
            CutoffKind::Smooth => smooth_step((a - self.radius) / self.transition_width),
        }
    }

    /// Outer edge of the support.
    pub fn support(&self) -> f64 {
        self.radius + self.transition_width
    }

    fn hat_weights(&self) -> Vec<f64> {
        let g = &self.grid;
        let n = g.n_points;
        let h = g.spacing();
        let (gx, gw) = gauss_legendre(24);
        let r = self.radius;
        let outer = self.support();
        let mut breaks = vec![-outer, -r, r, outer];
        breaks.dedup();
        let mut w = vec![0.0; n];
        let cells = if g.periodic { n } else { n - 1 };
        for j in 0..cells {
            let a = g.point(j);
            let b = a + h;
            let right = (j + 1) % n;
            // ∫ χ(x) (b - x)/h and ∫ χ(x) (x - a)/h over [a, b].
            let mut cuts = vec![a];
            cuts.extend(breaks.iter().copied().filter(|&c| c > a && c < b));
            cuts.push(b);
            let (mut left_w, mut right_w) = (0.0, 0.0);
            for piece in cuts.windows(2) {
                let (lo, hi) = (piece[0], piece[1]);
                let mid = 0.5 * (lo + hi);
                let am = mid.abs();
                if am >= outer {
                    continue;
                }
                if am <= r {
                    // Plateau: exact integrals of the two linear hats.
                    left_w += ((b - lo).powi(2) - (b - hi).powi(2)) / (2.0 * h);
                    right_w += ((hi - a).powi(2) - (lo - a).powi(2)) / (2.0 * h);
                    continue;
                }
                // Transition: composite Gauss-Legendre on the piece.
                let pieces = 8;
                let step = (hi - lo) / pieces as f64;
                for k in 0..pieces {
                    let c0 = lo + (k as f64 + 0.5) * step;
                    for (xi, wi) in gx.iter().zip(&gw) {
                        let x = c0 + 0.5 * step * xi;
                        let f = self.eval(x) * wi * 0.5 * step;
                        left_w += f * (b - x) / h;
                        right_w += f * (x - a) / h;
                    }
                }
            }
            w[j] += left_w;
            w[right] += right_w;
        }
        w
    }

    /// `Σ W_i |u_i|^4`: the cutoff-weighted quartic integral.
    pub fn quartic_integral(&self, u: &[Complex64]) -> f64 {
        self.weights.iter().zip(u).map(|(w, v)| w * v.norm_sqr().powi(2)).sum()
    }

    /// Point weights divided by the spacing; the effective `χ` seen by a
    /// discrete Hamiltonian built from [`Self::quartic_integral`].
    pub fn effective_values(&self) -> Vec<f64> {
        let h = self.grid.spacing();
        self.weights.iter().map(|w| w / h).collect()
    }
}

/// `χ_N` with transition width `D_N^3`. Rejects widths below two grid
/// spacings, the resolution at which point values describe the profile.
pub fn build_chi(radius: f64, d_n: &PartitionEstimate, grid: Grid1D) -> Result<CutoffProfile> {
    let width = chi_width(d_n)?;
    if width < 2.0 * grid.spacing() {
        return Err(Error::InvalidGrid(format!(
            "transition width {width:e} is below two grid spacings ({:e})",
            2.0 * grid.spacing()
        )));
    }
    CutoffProfile::build(radius, CutoffKind::Smooth, width, grid, Some(d_n.value))
}

/// `χ_N` with transition width `D_N^3`, allowing sub-grid widths. Quadrature
/// goes through the exact hat weights, so the Gibbs weight and the flow still
/// see the true profile.
pub fn build_chi_subgrid(radius: f64, d_n: &PartitionEstimate, grid: Grid1D) -> Result<CutoffProfile> {
    let width = chi_width(d_n)?;
    CutoffProfile::build(radius, CutoffKind::Smooth, width, grid, Some(d_n.value))
}

fn chi_width(d_n: &PartitionEstimate) -> Result<f64> {
    if !(d_n.value > 0.0 && d_n.value <= 1.0) {
        return Err(Error::InvalidArgument(format!("D_N must lie in (0, 1], got {}", d_n.value)));
    }
    Ok(d_n.value.powi(3))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid1D {
        Grid1D::line(-6.0, 6.0, 241).unwrap()
    }

    fn d(v: f64) -> PartitionEstimate {
        PartitionEstimate { value: v, std_error: 0.0, n_samples: 100 }
    }

    #[test]
    fn sharp_weights_are_trapezoid_on_aligned_grid() {
        let g = grid();
        let p = CutoffProfile::sharp(2.0, g).unwrap();
        let h = g.spacing();
        let total: f64 = p.weights.iter().sum();
        assert!((total - 4.0).abs() < 1e-12);
        let i = g.nearest_index(2.0);
        assert!((p.weights[i] - 0.5 * h).abs() < 1e-12);
        assert!((p.weights[g.nearest_index(0.0)] - h).abs() < 1e-12);
        let zero = CutoffProfile::sharp(0.0, g).unwrap();
        assert!(zero.weights.iter().all(|w| *w == 0.0));
    }

    #[test]
    fn smooth_profile_shape() {
        let g = grid();
        let chi = build_chi(2.0, &d(0.8), g).unwrap();
        let w = 0.8f64.powi(3);
        assert_eq!(chi.eval(0.0), 1.0);
        assert_eq!(chi.eval(2.0), 1.0);
        assert_eq!(chi.eval(2.0 + w + 1e-9), 0.0);
        let mid = chi.eval(2.0 + 0.5 * w);
        assert!((mid - 0.5).abs() < 1e-12);
        let xs: Vec<f64> = (0..=100).map(|k| 2.0 + w * k as f64 / 100.0).collect();
        assert!(xs.windows(2).all(|p| chi.eval(p[1]) <= chi.eval(p[0])));
        // Symmetric step: the transition contributes w/2 on each side.
        let total: f64 = chi.weights.iter().sum();
        assert!((total - (4.0 + w)).abs() < 1e-10, "{total}");
    }

    #[test]
    fn narrow_chi_rejected_unless_subgrid() {
        let g = grid();
        assert!(build_chi(2.0, &d(0.1), g).is_err());
        let chi = build_chi_subgrid(2.0, &d(0.1), g).unwrap();
        let total: f64 = chi.weights.iter().sum();
        assert!((total - (4.0 + 1e-3)).abs() < 1e-10);
        assert!(build_chi_subgrid(2.0, &d(0.0), g).is_err());
    }

    #[test]
    fn rejects_uncovered_support() {
        let g = Grid1D::line(-2.0, 2.0, 41).unwrap();
        assert!(CutoffProfile::sharp(2.0, g).is_err());
    }
}
