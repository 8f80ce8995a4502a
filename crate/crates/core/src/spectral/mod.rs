//! Finite-difference Schrödinger operators on the target plane, their
//! eigendecompositions, semigroup kernels and the Mehler closed form.
//!
//! One-dimensional operators are tridiagonal and solved directly. Two
//! dimensional operators `-k Δ + a|u|^2 + b|u|^4 + c` are diagonalized by
//! Rayleigh-Ritz in the product basis of the lowest `m` eigenvectors of the
//! one-dimensional operator `-k d^2 + a u^2 + b u^4` on the same grid. The
//! separable part is diagonal in that basis and the coupling `2b u1^2 u2^2` is
//! a Kronecker product, so the matrix splits into four parity blocks. With
//! `m = n_u` the basis is complete and the result is the exact diagonalization
//! of the finite-difference matrix.

pub mod cache;
pub mod estimates;
pub mod kernel;
pub mod mehler;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::banded::BandedCholesky;
use crate::linalg::tridiag::SymTridiagonal;

pub use estimates::{check_wkb_decay, fit_wkb_exponent, ground_state_reports, richardson_ground_state, WkbFit};
pub use kernel::{mehler_consistency_reports, semigroup_kernel, KernelTable};
pub use mehler::{check_kernel_estimates, mehler_kernel};

/// Symmetric box `[-u_max, u_max]^dimension` with `n_u` interior points per
/// axis; the Dirichlet walls sit one spacing outside the outermost points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetGrid {
    pub u_max: f64,
    pub n_u: usize,
    pub dimension: usize,
}

impl TargetGrid {
    pub fn new(u_max: f64, n_u: usize, dimension: usize) -> Result<Self> {
        if !(u_max > 0.0 && u_max.is_finite()) {
            return Err(Error::InvalidGrid(format!("u_max must be positive, got {u_max}")));
        }
        if n_u < 16 {
            return Err(Error::InvalidGrid(format!("n_u must be at least 16, got {n_u}")));
        }
        if dimension != 1 && dimension != 2 {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dimension}")));
        }
        Ok(Self { u_max, n_u, dimension })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.u_max / (self.n_u + 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        -self.u_max + (i + 1) as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_u).map(|i| self.point(i)).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dimension as i32)
    }

    pub fn n_states(&self) -> usize {
        self.n_u.pow(self.dimension as u32)
    }

    /// Coordinates of state `s`; in two dimensions `s = i * n_u + j`.
    pub fn coords(&self, s: usize) -> (f64, f64) {
        if self.dimension == 1 {
            (self.point(s), 0.0)
        } else {
            (self.point(s / self.n_u), self.point(s % self.n_u))
        }
    }

    /// Same box with the spacing halved.
    pub fn refined(&self) -> TargetGrid {
        TargetGrid { n_u: 2 * self.n_u + 1, ..*self }
    }

    /// Index of the point `u = 0` when `n_u` is odd.
    pub fn center(&self) -> Option<usize> {
        (self.n_u % 2 == 1).then_some(self.n_u / 2)
    }
}

/// Which closed-form potential to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PotentialKind {
    Harmonic,
    HarmonicPlusQuartic,
    Custom,
}

impl PotentialKind {
    pub fn label(&self) -> &'static str {
        match self {
            PotentialKind::Harmonic => "harmonic",
            PotentialKind::HarmonicPlusQuartic => "harmonic_plus_quartic",
            PotentialKind::Custom => "custom",
        }
    }
}

/// `-kinetic Δ + harmonic |u|^2 + quartic |u|^4 + shift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorCoefficients {
    pub kinetic: f64,
    pub harmonic: f64,
    pub quartic: f64,
    pub shift: f64,
}

impl OperatorCoefficients {
    /// Coefficients as written: `-½d² + ½u² - ½` in one dimension and
    /// `-½Δ + |u|² (+ |u|⁴) - ½` in two.
    pub fn literal(kind: PotentialKind, dimension: usize) -> Self {
        let harmonic = if dimension == 1 { 0.5 } else { 1.0 };
        let quartic = if kind == PotentialKind::HarmonicPlusQuartic { 1.0 } else { 0.0 };
        Self { kinetic: 0.5, harmonic, quartic, shift: -0.5 }
    }

    /// Ground-state transform of the generator of the prior with
    /// per-component covariance `c0 e^{-|x|}`, plus `quartic |u|^4`. The
    /// harmonic ground state is `Ω₀ ∝ e^{-|u|²/(4 c0)}` with energy 0, and the
    /// prior marginal is `Ω₀²`.
    pub fn feynman_kac(c0: f64, quartic: f64, dimension: usize) -> Self {
        Self { kinetic: c0, harmonic: 1.0 / (4.0 * c0), quartic, shift: -(dimension as f64) / 2.0 }
    }

    pub fn potential(&self, r2: f64) -> f64 {
        self.harmonic * r2 + self.quartic * r2 * r2 + self.shift
    }
}

/// Options for [`build_operator_with`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OperatorOptions {
    /// One-dimensional basis functions per axis in two dimensions; defaults to
    /// `n_u` (exact) for `n_u <= 64` and 40 otherwise.
    pub basis_size: Option<usize>,
    /// Eigenpairs kept; defaults to all computed (at most 200 in one dimension).
    pub n_modes: Option<usize>,
}

const EXACT_LIMIT: usize = 64;
const REFINE_LIMIT: usize = 200;
const MAX_SWEEPS: usize = 400;

#[derive(Debug, Clone)]
enum Modes {
    /// On-grid eigenvectors.
    Direct(Vec<Vec<f64>>),
    Product(ProductModes),
}

#[derive(Debug, Clone)]
struct ProductModes {
    n_u: usize,
    /// `basis[k][i]`, normalized with `Σ φ² h = 1`.
    basis: Vec<Vec<f64>>,
    /// Basis index pairs `(k, l)` per parity block.
    blocks: Vec<Vec<(usize, usize)>>,
    /// Block id and coefficient vector per mode.
    modes: Vec<(usize, Vec<f64>)>,
}

impl ProductModes {
    fn evaluate(&self, mode: usize) -> Vec<f64> {
        let m = self.basis.len();
        let n = self.n_u;
        let (block, coeffs) = &self.modes[mode];
        let mut g = vec![0.0; m * m];
        for (&(k, l), c) in self.blocks[*block].iter().zip(coeffs) {
            g[k * m + l] = *c;
        }
        // t[k][j] = Σ_l g[k][l] φ_l(j)
        let mut t = vec![0.0; m * n];
        for k in 0..m {
            for l in 0..m {
                let c = g[k * m + l];
                if c != 0.0 {
                    let row = &mut t[k * n..(k + 1) * n];
                    row.iter_mut().zip(&self.basis[l]).for_each(|(a, b)| *a += c * b);
                }
            }
        }
        let mut out = vec![0.0; n * n];
        for k in 0..m {
            let row = &t[k * n..(k + 1) * n];
            for i in 0..n {
                let p = self.basis[k][i];
                if p != 0.0 {
                    out[i * n..(i + 1) * n].iter_mut().zip(row).for_each(|(a, b)| *a += p * b);
                }
            }
        }
        out
    }
}

/// A discretized Schrödinger operator with its (partial) eigendecomposition.
#[derive(Debug, Clone)]
pub struct SpectralOperator {
    pub grid: TargetGrid,
    pub kind: PotentialKind,
    pub coefficients: OperatorCoefficients,
    /// Potential on the grid states (row-major in two dimensions).
    pub potential: Vec<f64>,
    /// Ascending eigenvalues of the kept modes.
    pub eigenvalues: Vec<f64>,
    pub ground_energy: f64,
    /// Positive, normalized with `Σ Ω² · cell_volume = 1`.
    pub ground_state: Vec<f64>,
    /// Whether the eigenpairs are exact for the finite-difference matrix.
    pub exact: bool,
    modes: Modes,
}

impl SpectralOperator {
    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvector `k` on the grid, normalized in the grid inner product.
    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        if k == 0 {
            return self.ground_state.clone();
        }
        match &self.modes {
            Modes::Direct(v) => v[k].clone(),
            Modes::Product(p) => p.evaluate(k),
        }
    }

    /// Eigenvectors `0..n` as columns of an `n_states x n` matrix.
    pub fn eigenvector_matrix(&self, n: usize) -> DMatrix<f64> {
        let cols: Vec<Vec<f64>> = (0..n).into_par_iter().map(|k| self.eigenvector(k)).collect();
        DMatrix::from_fn(self.grid.n_states(), n, |i, k| cols[k][i])
    }

    /// Applies the finite-difference operator to a grid function.
    pub fn apply(&self, psi: &[f64]) -> Vec<f64> {
        apply_fd(&self.grid, self.coefficients.kinetic, &self.potential, psi)
    }

    /// `max_m ||L ψ_m - λ_m ψ_m||` in the grid norm over the first `n` modes.
    pub fn residual(&self, n: usize) -> f64 {
        let dv = self.grid.cell_volume();
        (0..n.min(self.n_modes()))
            .map(|k| {
                let v = self.eigenvector(k);
                let lv = self.apply(&v);
                let lam = self.eigenvalues[k];
                (lv.iter().zip(&v).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>() * dv).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// `max |<ψ_i, ψ_j> - δ_ij|` over the first `n` modes.
    pub fn orthonormality_defect(&self, n: usize) -> f64 {
        let n = n.min(self.n_modes());
        let dv = self.grid.cell_volume();
        let vecs: Vec<Vec<f64>> = (0..n).map(|k| self.eigenvector(k)).collect();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                let dot: f64 = vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum::<f64>() * dv;
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// Ground-state density `Ω²` on the grid states.
    pub fn ground_density(&self) -> Vec<f64> {
        self.ground_state.iter().map(|v| v * v).collect()
    }

    /// Expansion coefficients `<ψ_m, f>` for the first `n` modes.
    pub fn project(&self, f: &[f64], n: usize) -> Vec<f64> {
        let dv = self.grid.cell_volume();
        (0..n)
            .into_par_iter()
            .map(|k| self.eigenvector(k).iter().zip(f).map(|(a, b)| a * b).sum::<f64>() * dv)
            .collect()
    }

    /// `e^{-s(L - E)} f` by eigen-expansion over the first `n` modes.
    pub fn evolve(&self, f: &[f64], s: f64, n: usize) -> Vec<f64> {
        let c = self.project(f, n);
        let mut out = vec![0.0; f.len()];
        for (k, ck) in c.iter().enumerate() {
            let w = ck * (-s * (self.eigenvalues[k] - self.ground_energy)).exp();
            if w != 0.0 {
                out.iter_mut().zip(self.eigenvector(k)).for_each(|(a, b)| *a += w * b);
            }
        }
        out
    }
}

pub(crate) fn apply_fd(grid: &TargetGrid, kinetic: f64, potential: &[f64], psi: &[f64]) -> Vec<f64> {
    let n = grid.n_u;
    let h2 = grid.spacing().powi(2);
    let c = kinetic / h2;
    let at = |v: &[f64], i: isize| if i < 0 || i >= n as isize { 0.0 } else { v[i as usize] };
    if grid.dimension == 1 {
        (0..n)
            .map(|i| {
                let ii = i as isize;
                c * (2.0 * psi[i] - at(psi, ii - 1) - at(psi, ii + 1)) + potential[i] * psi[i]
            })
            .collect()
    } else {
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let s = i * n + j;
                let mut lap = 4.0 * psi[s];
                if i > 0 {
                    lap -= psi[s - n];
                }
                if i + 1 < n {
                    lap -= psi[s + n];
                }
                if j > 0 {
                    lap -= psi[s - 1];
                }
                if j + 1 < n {
                    lap -= psi[s + 1];
                }
                out[s] = c * lap + potential[s] * psi[s];
            }
        }
        out
    }
}

fn fd_tridiagonal(kinetic: f64, potential: &[f64], h: f64) -> Result<SymTridiagonal> {
    let c = kinetic / (h * h);
    SymTridiagonal::new(
        potential.iter().map(|v| 2.0 * c + v).collect(),
        vec![-c; potential.len() - 1],
    )
}

/// Builds an operator with the literal coefficients for `kind`. `custom`
/// supplies the full potential on the grid states when `kind` is `Custom`.
pub fn build_operator(grid: TargetGrid, kind: PotentialKind, custom: Option<&[f64]>) -> Result<SpectralOperator> {
    build_operator_with(grid, kind, OperatorCoefficients::literal(kind, grid.dimension), custom, &OperatorOptions::default())
}

pub fn build_operator_with(
    grid: TargetGrid,
    kind: PotentialKind,
    mut coefficients: OperatorCoefficients,
    custom: Option<&[f64]>,
    options: &OperatorOptions,
) -> Result<SpectralOperator> {
    if !(coefficients.kinetic > 0.0) {
        return Err(Error::InvalidArgument("kinetic coefficient must be positive".into()));
    }
    if kind == PotentialKind::Harmonic {
        coefficients.quartic = 0.0;
    }
    let potential: Vec<f64> = match (kind, custom) {
        (PotentialKind::Custom, Some(w)) => {
            if w.len() != grid.n_states() {
                return Err(Error::InvalidArgument(format!(
                    "custom potential has {} values for {} grid states",
                    w.len(),
                    grid.n_states()
                )));
            }
            w.to_vec()
        }
        (PotentialKind::Custom, None) => return Err(Error::InvalidArgument("custom potential missing".into())),
        (_, Some(_)) => return Err(Error::InvalidArgument("custom array given for a closed-form potential".into())),
        (_, None) => (0..grid.n_states())
            .map(|s| {
                let (a, b) = grid.coords(s);
                coefficients.potential(a * a + b * b)
            })
            .collect(),
    };
    if let Some(i) = potential.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite potential at state {i}")));
    }
    let (eigenvalues, modes, exact) = if grid.dimension == 1 {
        let n_modes = options.n_modes.unwrap_or(200).min(grid.n_u);
        let tri = fd_tridiagonal(coefficients.kinetic, &potential, grid.spacing())?;
        let (vals, vecs) = tri.lowest_eigenpairs(n_modes)?;
        let scale = grid.spacing().sqrt().recip();
        let vecs = vecs.into_iter().map(|v| v.into_iter().map(|a| a * scale).collect()).collect();
        (vals, Modes::Direct(vecs), true)
    } else {
        let m = options.basis_size.unwrap_or(if grid.n_u <= EXACT_LIMIT { grid.n_u } else { 40 });
        if m == 0 || m > grid.n_u {
            return Err(Error::InvalidArgument(format!("basis size {m} outside 1..={}", grid.n_u)));
        }
        let (vals, product) = product_diagonalize(&grid, kind, &coefficients, &potential, m, options.n_modes)?;
        (vals, Modes::Product(product), m == grid.n_u)
    };
    if eigenvalues.is_empty() {
        return Err(Error::Eigensolver("no eigenpairs computed".into()));
    }
    let mut op = SpectralOperator {
        grid,
        kind,
        coefficients,
        potential,
        ground_energy: eigenvalues[0],
        eigenvalues,
        ground_state: Vec::new(),
        exact,
        modes,
    };
    let mut ground = match &op.modes {
        Modes::Direct(v) => v[0].clone(),
        Modes::Product(p) => p.evaluate(0),
    };
    if ground.iter().sum::<f64>() < 0.0 {
        ground.iter_mut().for_each(|v| *v = -*v);
    }
    if grid.dimension == 2 && grid.n_u <= REFINE_LIMIT {
        let (e, refined) = refine_ground_state(&op, &ground)?;
        op.ground_energy = e;
        op.eigenvalues[0] = e;
        if refined.len() == ground.len() {
            ground = refined;
        }
    }
    let vmax = ground.iter().fold(0.0f64, |a, b| a.max(*b));
    let vmin = ground.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    if vmin <= 0.0 {
        // Far tails of a truncated expansion sit at rounding level; anything
        // beyond that is a genuine sign change.
        let noise = 1e-12 * vmax;
        if op.exact || grid.dimension == 1 || vmin < -noise {
            return Err(Error::GroundStateSign { min_value: vmin });
        }
        ground.iter_mut().for_each(|v| *v = v.max(f64::MIN_POSITIVE));
    }
    op.ground_state = ground;
    Ok(op)
}

/// Inverse iteration on the full finite-difference matrix with a shift below
/// the ground energy, solved by banded Cholesky. Returns the Rayleigh quotient
/// and the normalized iterate, accurate entry by entry.
fn refine_ground_state(op: &SpectralOperator, start: &[f64]) -> Result<(f64, Vec<f64>)> {
    let grid = op.grid;
    let n = grid.n_u;
    let c = op.coefficients.kinetic / grid.spacing().powi(2);
    let gap = op.eigenvalues.get(1).map_or(1.0, |e1| e1 - op.eigenvalues[0]).max(1e-6);
    let dv = grid.cell_volume();
    let mut delta = 1e-8 * (4.0 * c + op.potential.iter().fold(0.0f64, |a, b| a.max(b.abs())));
    loop {
        let sigma = op.eigenvalues[0] - delta;
        let entry = |i: usize, j: usize| {
            if i == j {
                4.0 * c + op.potential[i] - sigma
            } else if i - j == n || (i - j == 1 && i % n != 0) {
                -c
            } else {
                0.0
            }
        };
        match BandedCholesky::factor(n * n, n, entry) {
            Ok(chol) => {
                let mut x: Vec<f64> = start.iter().map(|v| v.abs().max(f64::MIN_POSITIVE)).collect();
                let mut prev_e = f64::INFINITY;
                for it in 0..MAX_SWEEPS {
                    x = chol.solve(&x);
                    let norm = (x.iter().map(|v| v * v).sum::<f64>() * dv).sqrt();
                    x.iter_mut().for_each(|v| *v /= norm);
                    let lx = op.apply(&x);
                    let e = lx.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() * dv;
                    let change = (e - prev_e).abs();
                    if change <= 1e-15 * e.abs().max(1.0) || (it + 1 == MAX_SWEEPS && change <= 1e-11 * e.abs().max(1.0)) {
                        // A few more sweeps settle the tails.
                        for _ in 0..3 {
                            x = chol.solve(&x);
                            let norm = (x.iter().map(|v| v * v).sum::<f64>() * dv).sqrt();
                            x.iter_mut().for_each(|v| *v /= norm);
                        }
                        let lx = op.apply(&x);
                        let e = lx.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() * dv;
                        return Ok((e, x));
                    }
                    prev_e = e;
                }
                return Err(Error::Eigensolver("ground-state inverse iteration did not converge".into()));
            }
            Err(_) if delta < gap => delta *= 10.0,
            Err(e) => return Err(e),
        }
    }
}

fn product_diagonalize(
    grid: &TargetGrid,
    kind: PotentialKind,
    coef: &OperatorCoefficients,
    potential: &[f64],
    m: usize,
    n_modes: Option<usize>,
) -> Result<(Vec<f64>, ProductModes)> {
    let n = grid.n_u;
    let h = grid.spacing();
    let pts = grid.points();
    let custom = kind == PotentialKind::Custom;
    let axis_quartic = if custom { 0.0 } else { coef.quartic };
    let axis: Vec<f64> = pts.iter().map(|u| coef.harmonic * u * u + axis_quartic * u.powi(4)).collect();
    let tri = fd_tridiagonal(coef.kinetic, &axis, h)?;
    let (eps, vecs) = tri.lowest_eigenpairs(m)?;
    let scale = h.sqrt().recip();
    let basis: Vec<Vec<f64>> = vecs.into_iter().map(|v| v.into_iter().map(|a| a * scale).collect()).collect();

    // Matrix elements of a diagonal weight between basis functions.
    let gram = |w: &dyn Fn(usize) -> f64| -> Vec<f64> {
        let mut g = vec![0.0; m * m];
        for k in 0..m {
            for l in 0..=k {
                let v: f64 = (0..n).map(|i| basis[k][i] * basis[l][i] * w(i)).sum::<f64>() * h;
                g[k * m + l] = v;
                g[l * m + k] = v;
            }
        }
        g
    };

    let symmetric_custom = custom && {
        let tol = 1e-12 * potential.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        (0..n).all(|i| (0..n).all(|j| (potential[i * n + j] - potential[(n - 1 - i) * n + j]).abs() <= tol
            && (potential[i * n + j] - potential[i * n + (n - 1 - j)]).abs() <= tol))
    };
    let blocks: Vec<Vec<(usize, usize)>> = if !custom || symmetric_custom {
        [(0, 0), (0, 1), (1, 0), (1, 1)]
            .iter()
            .map(|&(p, q)| {
                (0..m)
                    .filter(|k| k % 2 == p)
                    .flat_map(|k| (0..m).filter(move |l| l % 2 == q).map(move |l| (k, l)))
                    .collect()
            })
            .filter(|b: &Vec<(usize, usize)>| !b.is_empty())
            .collect()
    } else {
        vec![(0..m).flat_map(|k| (0..m).map(move |l| (k, l))).collect()]
    };

    let element: Box<dyn Fn(usize, usize, usize, usize) -> f64 + Sync> = if custom {
        let y = gram(&|i| coef.harmonic * pts[i] * pts[i]);
        // G[i][l][l'] = Σ_j φ_l(j) φ_l'(j) W(i, j) h
        let g: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut gi = vec![0.0; m * m];
                for l in 0..m {
                    for lp in 0..=l {
                        let v: f64 = (0..n).map(|j| basis[l][j] * basis[lp][j] * potential[i * n + j]).sum::<f64>() * h;
                        gi[l * m + lp] = v;
                        gi[lp * m + l] = v;
                    }
                }
                gi
            })
            .collect();
        let basis = basis.clone();
        let eps = eps.clone();
        Box::new(move |k, l, kp, lp| {
            let mut v: f64 = (0..n).map(|i| basis[k][i] * basis[kp][i] * g[i][l * m + lp]).sum::<f64>() * h;
            if l == lp {
                v -= y[k * m + kp];
            }
            if k == kp {
                v -= y[l * m + lp];
            }
            if k == kp && l == lp {
                v += eps[k] + eps[l];
            }
            v
        })
    } else {
        let x = gram(&|i| pts[i] * pts[i]);
        let b2 = 2.0 * coef.quartic;
        let eps = eps.clone();
        let shift = coef.shift;
        Box::new(move |k, l, kp, lp| {
            let mut v = b2 * x[k * m + kp] * x[l * m + lp];
            if k == kp && l == lp {
                v += eps[k] + eps[l] + shift;
            }
            v
        })
    };

    let solved: Vec<(Vec<f64>, DMatrix<f64>)> = blocks
        .par_iter()
        .map(|b| {
            let d = b.len();
            let mat = DMatrix::from_fn(d, d, |r, c| {
                let (k, l) = b[r];
                let (kp, lp) = b[c];
                element(k, l, kp, lp)
            });
            let eig = SymmetricEigen::new(mat);
            (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
        })
        .collect();

    let mut all: Vec<(f64, usize, usize)> = Vec::new();
    for (bi, (vals, _)) in solved.iter().enumerate() {
        for (c, v) in vals.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Eigensolver(format!("non-finite eigenvalue in block {bi}")));
            }
            all.push((*v, bi, c));
        }
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    all.truncate(n_modes.unwrap_or(all.len()).min(all.len()));
    let eigenvalues = all.iter().map(|t| t.0).collect();
    let modes = all
        .iter()
        .map(|&(_, bi, c)| (bi, solved[bi].1.column(c).iter().copied().collect()))
        .collect();
    Ok((eigenvalues, ProductModes { n_u: n, basis, blocks, modes }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_ladder_1d() {
        let g = TargetGrid::new(8.0, 1999, 1).unwrap();
        let op = build_operator(g, PotentialKind::Harmonic, None).unwrap();
        for k in 0..5 {
            assert!((op.eigenvalues[k] - k as f64).abs() < 1e-4, "{k}: {}", op.eigenvalues[k]);
        }
        assert!(op.orthonormality_defect(10) < 1e-10);
        assert!(op.residual(10) < 1e-8);
        assert!(op.ground_state.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn exact_2d_harmonic_matches_separable_sum() {
        let g = TargetGrid::new(5.0, 31, 2).unwrap();
        let op = build_operator(g, PotentialKind::Harmonic, None).unwrap();
        let g1 = TargetGrid::new(5.0, 31, 1).unwrap();
        let c1 = OperatorCoefficients { kinetic: 0.5, harmonic: 1.0, quartic: 0.0, shift: 0.0 };
        let op1 = build_operator_with(g1, PotentialKind::Harmonic, c1, None, &OperatorOptions::default()).unwrap();
        let mut sums: Vec<f64> = Vec::new();
        for a in &op1.eigenvalues[..6] {
            for b in &op1.eigenvalues[..6] {
                sums.push(a + b - 0.5);
            }
        }
        sums.sort_by(f64::total_cmp);
        for k in 0..6 {
            assert!((op.eigenvalues[k] - sums[k]).abs() < 1e-9, "{k}");
        }
        assert!(op.exact);
        assert!(op.residual(8) < 1e-8);
        assert!(op.orthonormality_defect(8) < 1e-10);
    }

    #[test]
    fn custom_potential_reproduces_closed_form() {
        let g = TargetGrid::new(4.0, 21, 2).unwrap();
        let closed = build_operator(g, PotentialKind::HarmonicPlusQuartic, None).unwrap();
        let custom = build_operator(g, PotentialKind::Custom, Some(&closed.potential)).unwrap();
        for k in 0..5 {
            assert!((closed.eigenvalues[k] - custom.eigenvalues[k]).abs() < 1e-8 * closed.eigenvalues[k].abs());
        }
        assert!(build_operator(g, PotentialKind::Custom, None).is_err());
        assert!(build_operator(g, PotentialKind::Custom, Some(&[0.0; 3])).is_err());
    }

    #[test]
    fn rejects_small_grids() {
        assert!(TargetGrid::new(4.0, 15, 1).is_err());
        assert!(TargetGrid::new(4.0, 16, 3).is_err());
    }
}
