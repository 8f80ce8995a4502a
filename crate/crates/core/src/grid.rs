//! Spatial grids and complex fields sampled on them.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Uniform grid on `[x_min, x_max]`.
///
/// A line grid includes both endpoints; a periodic grid identifies `x_max`
/// with `x_min` and stores `n_points` points starting at `x_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub periodic: bool,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize, periodic: bool) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidGrid(format!("non-finite bounds [{x_min}, {x_max}]")));
        }
        if n_points < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {n_points}")));
        }
        if x_max <= x_min {
            return Err(Error::InvalidGrid(format!("empty interval [{x_min}, {x_max}]")));
        }
        Ok(Self { x_min, x_max, n_points, periodic })
    }

    pub fn line(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        Self::new(x_min, x_max, n_points, false)
    }

    pub fn periodic(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        Self::new(x_min, x_max, n_points, true)
    }

    /// Line grid with spacing as close as possible to `h` (never coarser).
    pub fn line_with_spacing(x_min: f64, x_max: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        let n = ((x_max - x_min) / h - 1e-9).ceil() as usize + 1;
        Self::line(x_min, x_max, n.max(2))
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn spacing(&self) -> f64 {
        if self.periodic {
            self.length() / self.n_points as f64
        } else {
            self.length() / (self.n_points - 1) as f64
        }
    }

    pub fn point(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    /// Index of the grid point closest to `x` (wrapping on periodic grids).
    pub fn nearest_index(&self, x: f64) -> usize {
        let h = self.spacing();
        let raw = ((x - self.x_min) / h).round();
        if self.periodic {
            raw.rem_euclid(self.n_points as f64) as usize
        } else {
            raw.clamp(0.0, (self.n_points - 1) as f64) as usize
        }
    }

    /// Trapezoidal quadrature weights. On a periodic grid this is the
    /// rectangle rule, which is the trapezoid rule for periodic integrands.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.n_points];
        if !self.periodic {
            w[0] = 0.5 * h;
            w[self.n_points - 1] = 0.5 * h;
        }
        w
    }

    /// Largest angular wavenumber representable on a periodic grid.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.spacing()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points as i64;
        let dk = 2.0 * std::f64::consts::PI / self.length();
        (0..n).map(|m| (if m <= n / 2 { m } else { m - n }) as f64 * dk).collect()
    }

    pub fn same_as(&self, other: &Grid1D) -> bool {
        self.n_points == other.n_points
            && self.periodic == other.periodic
            && (self.x_min - other.x_min).abs() <= 1e-12 * (1.0 + self.x_min.abs())
            && (self.x_max - other.x_max).abs() <= 1e-12 * (1.0 + self.x_max.abs())
    }
}

/// A complex field sampled on a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    grid: Grid1D,
    values: Vec<Complex64>,
}

impl LatticeField {
    pub fn new(grid: Grid1D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_points {
            return Err(Error::InvalidArgument(format!(
                "field has {} values for a grid of {} points",
                values.len(),
                grid.n_points
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite field value at index {i}")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_parts_unchecked(grid: Grid1D, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_points);
        Self { grid, values }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = grid.points().into_iter().map(f).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.n_points] }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn scaled(&self, c: Complex64) -> LatticeField {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn sub(&self, other: &LatticeField) -> Result<LatticeField> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch("field difference on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { grid: self.grid, values })
    }

    /// ∫|u|² by the grid's trapezoid rule.
    pub fn mass(&self) -> f64 {
        self.grid
            .trapezoid_weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.norm_sqr())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_points() {
        let g = Grid1D::line(-5.0, 5.0, 101).unwrap();
        assert!((g.spacing() - 0.1).abs() < 1e-15);
        assert!((g.point(100) - 5.0).abs() < 1e-12);
        let p = Grid1D::periodic(0.0, 8.0, 16).unwrap();
        assert_eq!(p.spacing(), 0.5);
        assert!(p.points().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(p.nearest_index(8.0), 0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid1D::line(0.0, 1.0, 1).is_err());
        assert!(Grid1D::line(0.0, f64::NAN, 10).is_err());
        assert!(Grid1D::line(1.0, 1.0, 10).is_err());
    }

    #[test]
    fn field_validation() {
        let g = Grid1D::line(0.0, 1.0, 3).unwrap();
        assert!(LatticeField::new(g, vec![Complex64::new(0.0, 0.0); 2]).is_err());
        assert!(LatticeField::new(g, vec![Complex64::new(f64::INFINITY, 0.0); 3]).is_err());
        let f = LatticeField::from_fn(g, |_| Complex64::new(1.0, 0.0)).unwrap();
        assert!((f.mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn wavenumbers_fft_order() {
        let g = Grid1D::periodic(0.0, 2.0 * std::f64::consts::PI, 8).unwrap();
        let k = g.wavenumbers();
        assert_eq!(k, vec![0.0, 1.0, 2.0, 3.0, 4.0, -3.0, -2.0, -1.0]);
    }
}
