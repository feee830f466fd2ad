//! C interface to `whichpath-core`.
//!
//! Every function returns a [`WpStatus`] (or a plain value that cannot fail)
//! and never unwinds across the boundary. After a non-`WP_STATUS_OK` status,
//! [`wp_last_error`] describes the failure for the calling thread.
//!
//! Visibility traces are returned as an opaque [`WpTrace`] handle, released
//! with [`wp_trace_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use whichpath_core::analytics::{absorption, full_report};
use whichpath_core::decoherence::{infer_spin_lifetime, spin_correlation_closed};
use whichpath_core::field::{default_grid, intensity_profile, uniform_grid, visibility_trace, VisibilityTrace};
use whichpath_core::{Error, RamseyConfig};

/// Outcome of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    /// The quantity is undefined at this point (a pointer state has zero weight).
    Degenerate = 3,
    OutOfRange = 4,
    Internal = 5,
    Panic = 6,
}

/// Closed-form quantities at one `(γΔt, φ_R)` point, with `γ = 1`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WpReport {
    pub gamma_dt: f64,
    pub phi_r: f64,
    pub pe_minus: f64,
    pub pe_plus: f64,
    pub delta_p: f64,
    pub sigma_minus: f64,
    pub sigma_plus_re: f64,
    pub sigma_plus_im: f64,
    pub w_minus: f64,
    /// Zero when `w_plus_defined` is false.
    pub w_plus_re: f64,
    pub w_plus_im: f64,
    pub w_plus_defined: bool,
    /// `1 − w⁻`.
    pub wp_before: f64,
    /// `1 − |w⁺|`, NaN when `w_plus_defined` is false.
    pub wp_after: f64,
    /// Largest gap between the closed forms and state evolution.
    pub max_discrepancy: f64,
}

/// Sampled self-homodyne visibility.
pub struct WpTrace {
    trace: VisibilityTrace,
    intensity: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> WpStatus {
    match err {
        Error::InvalidParameter { .. } | Error::NotNormalized { .. } | Error::InvalidGrid(_) => WpStatus::InvalidParameter,
        Error::Degenerate(_) | Error::DegenerateBranch { .. } => WpStatus::Degenerate,
        _ => WpStatus::Internal,
    }
}

fn fail(status: WpStatus, message: impl Into<String>) -> WpStatus {
    set_error(message.into());
    status
}

/// Runs `body`, converting errors and panics to a status.
fn guard<F>(body: F) -> WpStatus
where
    F: FnOnce() -> Result<(), WpStatus>,
{
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => WpStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(WpStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

fn lift<T>(r: whichpath_core::Result<T>) -> Result<T, WpStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, WpStatus> {
    // SAFETY: the caller passes either null or a valid, writable pointer.
    unsafe { p.as_mut() }.ok_or_else(|| fail(WpStatus::NullPointer, format!("`{name}` is null")))
}

fn trace_ref<'a>(h: *const WpTrace) -> Result<&'a WpTrace, WpStatus> {
    // SAFETY: the caller passes null or a handle from `wp_visibility_trace`.
    unsafe { h.as_ref() }.ok_or_else(|| fail(WpStatus::NullPointer, "trace handle is null"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn wp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Fills `out` with the closed-form report at `(gamma_dt, phi_r)`.
///
/// A degenerate point (`p_e⁺` of 0 or 1) still fills `out` and returns
/// `WP_STATUS_OK`, with `w_plus_defined = false`.
///
/// # Safety
/// Pointer arguments must be null or valid for writes of their type.
#[no_mangle]
pub unsafe extern "C" fn wp_report(gamma_dt: f64, phi_r: f64, out: *mut WpReport) -> WpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let cfg = lift(RamseyConfig::dimensionless(gamma_dt, phi_r))?;
        let r = lift(full_report(&cfg))?;
        let (w_re, w_im) = r.w_plus.map_or((0.0, 0.0), |w| (w.re, w.im));
        *out = WpReport {
            gamma_dt,
            phi_r,
            pe_minus: r.pe_minus,
            pe_plus: r.pe_plus,
            delta_p: r.delta_p,
            sigma_minus: r.sigma_minus,
            sigma_plus_re: r.sigma_plus.re,
            sigma_plus_im: r.sigma_plus.im,
            w_minus: r.w_minus,
            w_plus_re: w_re,
            w_plus_im: w_im,
            w_plus_defined: r.w_plus.is_some(),
            wp_before: r.wp_before(),
            wp_after: r.wp_after().unwrap_or(f64::NAN),
            max_discrepancy: r.max_discrepancy,
        };
        Ok(())
    })
}

/// Population change `Δp` during the second pulse, in units of `ħω₀`.
///
/// # Safety
/// Pointer arguments must be null or valid for writes of their type.
#[no_mangle]
pub unsafe extern "C" fn wp_absorption(gamma_dt: f64, phi_r: f64, out: *mut f64) -> WpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = absorption(&lift(RamseyConfig::dimensionless(gamma_dt, phi_r))?);
        Ok(())
    })
}

/// Ensemble spin correlation at rate `w` after time `t` (`w·t` is what matters).
#[no_mangle]
pub extern "C" fn wp_spin_correlation(w: f64, t: f64) -> f64 {
    spin_correlation_closed(w, t)
}

/// Spin lifetime `1/w` (units of `tau_p`) reproducing the contrast `ratio`.
///
/// # Safety
/// Pointer arguments must be null or valid for writes of their type.
#[no_mangle]
pub unsafe extern "C" fn wp_infer_spin_lifetime(ratio: f64, tau_p: f64, out_lifetime: *mut f64) -> WpStatus {
    guard(|| {
        let out = out_ref(out_lifetime, "out_lifetime")?;
        *out = lift(infer_spin_lifetime(ratio, tau_p))?.lifetime;
        Ok(())
    })
}

/// Samples the visibility on `samples` uniform points over `[0, γΔt + 8]`;
/// `samples = 0` selects the default resolution. On success `*out` owns a
/// new handle.
///
/// # Safety
/// Pointer arguments must be null or valid for writes of their type.
#[no_mangle]
pub unsafe extern "C" fn wp_visibility_trace(
    gamma_dt: f64,
    phi_r: f64,
    phi_hom: f64,
    samples: usize,
    out: *mut *mut WpTrace,
) -> WpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let cfg = lift(RamseyConfig::dimensionless(gamma_dt, phi_r))?;
        let grid = match samples {
            0 => default_grid(&cfg),
            n => uniform_grid(0.0, cfg.delta_t + 8.0 / cfg.gamma, n),
        };
        let trace = lift(visibility_trace(&cfg, &grid, phi_hom))?;
        let intensity = lift(intensity_profile(&cfg, &grid))?;
        *out = Box::into_raw(Box::new(WpTrace { trace, intensity }));
        Ok(())
    })
}

/// Number of samples in the trace (0 for a null handle).
///
/// # Safety
/// `trace` must be null or a live handle from [`wp_visibility_trace`];
/// other pointers must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wp_trace_len(trace: *const WpTrace) -> usize {
    // SAFETY: null or a live handle by contract.
    trace.as_ref().map_or(0, |t| t.trace.grid.len())
}

/// Sample `index`: time (units of `1/γ`), visibility and intensity. The
/// visibility is NaN where the intensity vanishes.
///
/// # Safety
/// `trace` must be null or a live handle from [`wp_visibility_trace`];
/// other pointers must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wp_trace_sample(
    trace: *const WpTrace,
    index: usize,
    out_t: *mut f64,
    out_v: *mut f64,
    out_intensity: *mut f64,
) -> WpStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        let (out_t, out_v, out_i) = (out_ref(out_t, "out_t")?, out_ref(out_v, "out_v")?, out_ref(out_intensity, "out_intensity")?);
        if index >= t.trace.grid.len() {
            return Err(fail(
                WpStatus::OutOfRange,
                format!("index {index} outside trace of {} samples", t.trace.grid.len()),
            ));
        }
        *out_t = t.trace.grid[index];
        *out_v = t.trace.v[index].unwrap_or(f64::NAN);
        *out_i = t.intensity[index];
        Ok(())
    })
}

/// Plateau values of the two bins. `*out_v2` is NaN and the status
/// `WP_STATUS_DEGENERATE` when the second bin receives no emission.
///
/// # Safety
/// `trace` must be null or a live handle from [`wp_visibility_trace`];
/// other pointers must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wp_trace_plateaus(trace: *const WpTrace, out_v1: *mut f64, out_v2: *mut f64) -> WpStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        let (v1, v2) = (out_ref(out_v1, "out_v1")?, out_ref(out_v2, "out_v2")?);
        *v1 = t.trace.v1;
        *v2 = t.trace.v2.unwrap_or(f64::NAN);
        if t.trace.v2.is_none() {
            return Err(fail(WpStatus::Degenerate, "second plateau undefined"));
        }
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `trace` must be null or a handle from [`wp_visibility_trace`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn wp_trace_free(trace: *mut WpTrace) {
    if !trace.is_null() {
        // SAFETY: created by `Box::into_raw` in `wp_visibility_trace` and
        // freed at most once by contract.
        drop(Box::from_raw(trace));
    }
}
