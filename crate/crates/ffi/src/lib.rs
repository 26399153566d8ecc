//! C ABI over the `shiftlab` core.
//!
//! Every function returns a [`ShiftlabStatus`] and writes results through
//! out-pointers. On failure the message is kept per thread and can be read
//! with [`shiftlab_last_error_message`]. Expansions are opaque handles owned
//! by the caller and released with [`shiftlab_expansion_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use shiftlab::averaging::{average_full, kernel_value, GridParams};
use shiftlab::dyadic::{analyze, synthesize_samples, DyadicInterval, HaarExpansion};
use shiftlab::error::Error;
use shiftlab::hilbert::{hp_constant, FourierSeries};
use shiftlab::lowerbound::{c0_constant, c0_via_quadrature, catalan_constant};
use shiftlab::operators::apply_s0;
use shiftlab::stochastic::{mc_pair_norms, McRun};
use shiftlab::walk::SimConfig;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A size or depth outside the supported range.
    OutOfRange = 3,
    /// An evaluation point outside the operation's domain.
    Domain = 4,
    BufferTooSmall = 5,
    /// A Rust panic was caught at the boundary.
    Internal = 6,
}

/// A Haar expansion on `[0, 1)`.
pub struct ShiftlabExpansion {
    inner: HaarExpansion,
}

/// Monte-Carlo norms of the two martingales driven by the walk.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShiftlabMcResult {
    /// `‖M^f_T‖_p`.
    pub norm_f: f64,
    pub standard_error_f: f64,
    /// `‖M^g_T‖_p`, where `M^g = S₀M^f`.
    pub norm_g: f64,
    pub standard_error_g: f64,
    pub unstopped_fraction: f64,
    pub overshoot_fraction: f64,
    pub max_identity_defect: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ShiftlabStatus {
    match e {
        Error::NotPowerOfTwo(_)
        | Error::InvalidInterval { .. }
        | Error::LevelOutOfRange { .. }
        | Error::DepthTooLarge { .. }
        | Error::EnumerationTooLarge(_)
        | Error::ModulationOverflow
        | Error::PathTooShort { .. } => ShiftlabStatus::OutOfRange,
        Error::OutsideDisc { .. } | Error::NearDiscontinuity { .. } | Error::GeneratorZero(_) => {
            ShiftlabStatus::Domain
        }
        _ => ShiftlabStatus::InvalidArgument,
    }
}

/// Runs `body`, recording any error or panic.
fn guard(body: impl FnOnce() -> Result<(), (ShiftlabStatus, String)>) -> ShiftlabStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ShiftlabStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ShiftlabStatus::Internal
        }
    }
}

fn core<T>(r: shiftlab::error::Result<T>) -> Result<T, (ShiftlabStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (ShiftlabStatus, String) {
    (ShiftlabStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `out` must be null or valid for one write.
unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), (ShiftlabStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// # Safety
/// `data` must be null only if `len` is 0, otherwise valid for `len` reads.
unsafe fn slice<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], (ShiftlabStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

/// Version of the library as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn shiftlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buffer`.
///
/// Returns the message length without the terminator, or 0 when the last
/// call succeeded. The copy is truncated to `capacity - 1` bytes and always
/// NUL-terminated when `capacity > 0`.
///
/// # Safety
/// `buffer` must be null or valid for `capacity` writes.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_last_error_message(buffer: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(message) = e.as_ref() else {
            if !buffer.is_null() && capacity > 0 {
                *buffer = 0;
            }
            return 0;
        };
        let bytes = message.as_bytes();
        if !buffer.is_null() && capacity > 0 {
            let n = bytes.len().min(capacity - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buffer, n);
            *buffer.add(n) = 0;
        }
        bytes.len()
    })
}

/// Analyzes `len = 2^depth` equal-width samples into a new expansion.
///
/// # Safety
/// `samples` must be valid for `len` reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_expansion_from_samples(
    samples: *const f64,
    len: usize,
    out: *mut *mut ShiftlabExpansion,
) -> ShiftlabStatus {
    guard(|| {
        let xs = slice(samples, len, "samples")?;
        let inner = core(analyze(xs))?;
        write(out, Box::into_raw(Box::new(ShiftlabExpansion { inner })), "out")
    })
}

/// A new expansion holding `S₀` applied to `e`.
///
/// # Safety
/// `e` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_expansion_apply_s0(
    e: *const ShiftlabExpansion,
    out: *mut *mut ShiftlabExpansion,
) -> ShiftlabStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("expansion"))?;
        let inner = apply_s0(&e.inner);
        write(out, Box::into_raw(Box::new(ShiftlabExpansion { inner })), "out")
    })
}

/// # Safety
/// `e` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_expansion_depth(e: *const ShiftlabExpansion, out: *mut u32) -> ShiftlabStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("expansion"))?;
        write(out, e.inner.depth(), "out")
    })
}

/// The mean (`level = -1`) or the coefficient of interval `(level, index)`.
///
/// # Safety
/// `e` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_expansion_coefficient(
    e: *const ShiftlabExpansion,
    level: i32,
    index: u64,
    out: *mut f64,
) -> ShiftlabStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("expansion"))?;
        let value = if level < 0 {
            e.inner.mean()
        } else {
            let interval = core(DyadicInterval::new(level as u32, index))?;
            if interval.level() >= e.inner.depth() {
                return core(Err(Error::LevelOutOfRange {
                    level: interval.level(),
                    depth: e.inner.depth(),
                }));
            }
            e.inner.coeff(&interval)
        };
        write(out, value, "out")
    })
}

/// Writes the `2^depth` atom values of `e` into `out`.
///
/// # Safety
/// `e` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_expansion_synthesize(
    e: *const ShiftlabExpansion,
    out: *mut f64,
    len: usize,
) -> ShiftlabStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("expansion"))?;
        let values = synthesize_samples(&e.inner);
        if len < values.len() {
            return Err((
                ShiftlabStatus::BufferTooSmall,
                format!("need {} values, buffer holds {len}", values.len()),
            ));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `e` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_expansion_free(e: *mut ShiftlabExpansion) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// `c₀ = 8G/π²` from the Catalan series.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_c0(out: *mut f64) -> ShiftlabStatus {
    guard(|| write(out, c0_constant(), "out"))
}

/// `c₀` by quadrature of `(2/π) log tan(x/2)`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_c0_quadrature(resolution: usize, out: *mut f64) -> ShiftlabStatus {
    guard(|| write(out, core(c0_via_quadrature(resolution))?, "out"))
}

/// Catalan's constant to within `tolerance`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_catalan(tolerance: f64, out: *mut f64) -> ShiftlabStatus {
    guard(|| {
        if !(tolerance > 0.0) {
            return Err((ShiftlabStatus::InvalidArgument, "tolerance must be positive".into()));
        }
        write(out, catalan_constant(tolerance), "out")
    })
}

/// `‖H‖_{p→p}` on the circle.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_hp(p: f64, out: *mut f64) -> ShiftlabStatus {
    guard(|| write(out, core(hp_constant(p))?, "out"))
}

/// `K₀(t, x)` on the grid `α + r·I`, `r ∈ [1, 2)`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_kernel_value(t: f64, x: f64, r: f64, alpha: f64, out: *mut f64) -> ShiftlabStatus {
    guard(|| {
        let params = core(GridParams::new(r, alpha))?;
        write(out, core(kernel_value(t, x, &params))?, "out")
    })
}

/// `E_r E_α K₀(t, x)` with `resolution` dilation points.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_average_full(t: f64, x: f64, resolution: usize, out: *mut f64) -> ShiftlabStatus {
    guard(|| write(out, core(average_full(t, x, resolution))?, "out"))
}

/// Monte-Carlo `L^p` norms for `f = a₀ + Σ cosᵢ cos(iθ) + sinᵢ sin(iθ)`
/// (index from 1) at resolution `n` and horizon `horizon`.
///
/// `strict` selects the step condition `n ≥ 2·horizon`. Results do not
/// depend on the thread count.
///
/// # Safety
/// `cos` and `sin` must be valid for `n_cos` and `n_sin` reads, `out` for
/// one write.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_mc_norms(
    a0: f64,
    cos: *const f64,
    n_cos: usize,
    sin: *const f64,
    n_sin: usize,
    p: f64,
    n: u32,
    horizon: f64,
    strict: bool,
    paths: u64,
    seed: u64,
    out: *mut ShiftlabMcResult,
) -> ShiftlabStatus {
    guard(|| {
        let f = FourierSeries::from_trig(a0, slice(cos, n_cos, "cos")?, slice(sin, n_sin, "sin")?);
        let config = core(if strict {
            SimConfig::new(n, horizon)
        } else {
            SimConfig::relaxed(n, horizon)
        })?;
        let e = core(mc_pair_norms(&f, p, &config, &McRun::new(paths, seed)))?;
        let result = ShiftlabMcResult {
            norm_f: e.f.value,
            standard_error_f: e.f.standard_error,
            norm_g: e.g.value,
            standard_error_g: e.g.standard_error,
            unstopped_fraction: e.f.unstopped_fraction,
            overshoot_fraction: e.overshoot_fraction,
            max_identity_defect: e.summary.max_identity_defect,
        };
        write(out, result, "out")
    })
}
