//! C interface. Every function returns a [`GfStatus`]; on failure the message
//! is available from [`gf_last_error`] on the same thread until the next call.
//! Operators are opaque handles created by [`gf_operator_new`] and released
//! with [`gf_operator_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gibbsflow::flow::{evolve, FlowConfig};
use gibbsflow::gibbs::CutoffProfile;
use gibbsflow::spectral::{build_operator, PotentialKind, SpectralOperator, TargetGrid};
use gibbsflow::{Error, Grid1D, LatticeField, SeedStream};
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Panic = 4,
}

/// Potential selector for [`gf_operator_new`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GfPotential {
    /// `-½Δ + c|u|² - ½`.
    Harmonic = 0,
    /// `-½Δ + c|u|² + |u|⁴ - ½`.
    HarmonicPlusQuartic = 1,
}

/// Opaque discretized Schrödinger operator.
pub struct GfOperator {
    op: SpectralOperator,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> GfStatus {
    match e {
        Error::InvalidArgument(_) | Error::InvalidGrid(_) | Error::GridMismatch(_) | Error::Config(_) => {
            GfStatus::InvalidArgument
        }
        _ => GfStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (GfStatus, String)>) -> GfStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GfStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GfStatus::Panic
        }
    }
}

fn lib<T>(r: gibbsflow::Result<T>) -> Result<T, (GfStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (GfStatus, String) {
    (GfStatus::NullPointer, format!("{name} is null"))
}

/// Message of the last failed call on this thread; empty after success. The
/// pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn gf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// One Ornstein-Uhlenbeck path with covariance `½e^{-|x-y|}` on `n_points`
/// equispaced points of `[x_min, x_max]`, from stream `stream` of `seed`.
/// Writes real and imaginary parts into arrays of length `n_points`.
///
/// # Safety
/// `re_out` and `im_out` must be valid for `n_points` writes.
#[no_mangle]
pub unsafe extern "C" fn gf_sample_ou_line(
    x_min: f64,
    x_max: f64,
    n_points: usize,
    seed: u64,
    stream: u64,
    re_out: *mut f64,
    im_out: *mut f64,
) -> GfStatus {
    guard(|| {
        if re_out.is_null() {
            return Err(null("re_out"));
        }
        if im_out.is_null() {
            return Err(null("im_out"));
        }
        let grid = lib(Grid1D::line(x_min, x_max, n_points))?;
        let u = lib(gibbsflow::field_sampler::sample_ou_line(grid, SeedStream::new(seed, stream)))?;
        let (re, im) = (std::slice::from_raw_parts_mut(re_out, n_points), std::slice::from_raw_parts_mut(im_out, n_points));
        for (k, v) in u.values().iter().enumerate() {
            re[k] = v.re;
            im[k] = v.im;
        }
        Ok(())
    })
}

/// Mehler kernel of `e^{-x(-½d² + ½u² - ½)}` at `(u1, u2)`, `x > 0`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn gf_mehler_kernel(x: f64, u1: f64, u2: f64, out: *mut f64) -> GfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lib(gibbsflow::spectral::mehler_kernel(x, u1, u2))?;
        Ok(())
    })
}

/// Builds the finite-difference operator on `[-u_max, u_max]^dimension` with
/// `n_u` points per axis and stores a new handle in `*out`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn gf_operator_new(
    u_max: f64,
    n_u: usize,
    dimension: usize,
    potential: GfPotential,
    out: *mut *mut GfOperator,
) -> GfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let grid = lib(TargetGrid::new(u_max, n_u, dimension))?;
        let kind = match potential {
            GfPotential::Harmonic => PotentialKind::Harmonic,
            GfPotential::HarmonicPlusQuartic => PotentialKind::HarmonicPlusQuartic,
        };
        let op = lib(build_operator(grid, kind, None))?;
        *out = Box::into_raw(Box::new(GfOperator { op }));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `op` must come from [`gf_operator_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gf_operator_free(op: *mut GfOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Number of grid states, `n_u^dimension`.
///
/// # Safety
/// `op` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn gf_operator_n_states(op: *const GfOperator, out: *mut usize) -> GfStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("op"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = op.op.grid.n_states();
        Ok(())
    })
}

/// Lowest eigenvalue.
///
/// # Safety
/// `op` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn gf_operator_ground_energy(op: *const GfOperator, out: *mut f64) -> GfStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("op"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = op.op.ground_energy;
        Ok(())
    })
}

/// Positive ground state, normalized with `Σ Ω² · cell_volume = 1`, written
/// into `out` of length `len` (must equal the number of states; row-major in
/// two dimensions).
///
/// # Safety
/// `op` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn gf_operator_ground_state(op: *const GfOperator, out: *mut f64, len: usize) -> GfStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("op"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let n = op.op.ground_state.len();
        if len != n {
            return Err((GfStatus::InvalidArgument, format!("buffer holds {len} values, operator has {n} states")));
        }
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(&op.op.ground_state);
        Ok(())
    })
}

/// Evolves `i∂_t u = -u_xx + g|u|²u` on the periodic box `[-L/2, L/2)` with
/// `n` points from `t = 0` to `t_final` (negative runs backward) with step
/// `dt` and no dealiasing. Input and output arrays may alias.
///
/// # Safety
/// The input arrays must be valid for `n` reads and the output arrays for `n`
/// writes.
#[no_mangle]
pub unsafe extern "C" fn gf_evolve(
    re: *const f64,
    im: *const f64,
    n: usize,
    length: f64,
    coupling: f64,
    dt: f64,
    t_final: f64,
    re_out: *mut f64,
    im_out: *mut f64,
) -> GfStatus {
    guard(|| {
        for (p, name) in [(re, "re"), (im, "im")] {
            if p.is_null() {
                return Err(null(name));
            }
        }
        for (p, name) in [(re_out, "re_out"), (im_out, "im_out")] {
            if p.is_null() {
                return Err(null(name));
            }
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err((GfStatus::InvalidArgument, format!("box length must be positive, got {length}")));
        }
        let grid = lib(Grid1D::periodic(-0.5 * length, 0.5 * length, n))?;
        let values: Vec<Complex64> = (0..n).map(|k| Complex64::new(*re.add(k), *im.add(k))).collect();
        let u0 = lib(LatticeField::new(grid, values))?;
        let config = FlowConfig::new(dt, t_final.abs(), CutoffProfile::constant(grid, 1.0))
            .with_coupling(coupling)
            .with_dealias(1.0)
            .with_snapshots(vec![t_final]);
        let tr = lib(evolve(&u0, &config))?;
        let u = tr.at(t_final).ok_or_else(|| (GfStatus::Numerical, "final snapshot missing".to_string()))?;
        for (k, v) in u.values().iter().enumerate() {
            *re_out.add(k) = v.re;
            *im_out.add(k) = v.im;
        }
        Ok(())
    })
}
