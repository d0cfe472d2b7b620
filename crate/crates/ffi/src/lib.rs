//! C ABI over the `sbar` crate.
//!
//! Every fallible call returns an [`SbarStatus`]; on failure the message is
//! available from [`sbar_last_error_message`] on the same thread. Handles are
//! opaque and owned by the caller until passed to the matching `_free`.
//! Complex buffers are interleaved `re, im` pairs of `double`. Port indices
//! crossing the boundary are 1-based.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use num_complex::Complex64;
use sbar::geometry::ChannelRealization;
use sbar::kernels::{Jitter, Kernel, LengthUnit};
use sbar::plan::{bind_observation, SamplingPlan};
use sbar::{build_port_geometry, design_plan, observe_pilots, reconstruct, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbarStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    PlanTooLarge = 4,
    InvalidIndex = 5,
    SingularSystem = 6,
    NonPositiveDenominator = 7,
    PlanMismatch = 8,
    NoisePowerMismatch = 9,
    Io = 10,
    Format = 11,
    Panic = 12,
    Other = 13,
}

/// Opaque covariance kernel.
pub struct SbarKernel {
    inner: Kernel,
}

/// Opaque sampling plan.
pub struct SbarPlan {
    inner: SamplingPlan,
    id: CString,
}

impl SbarPlan {
    fn new(inner: SamplingPlan) -> Self {
        let id = CString::new(inner.id()).expect("plan ids are hex");
        SbarPlan { inner, id }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let message = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn status_of(e: &Error) -> SbarStatus {
    match e {
        Error::InvalidArgument(_) | Error::EmptyTrainingSet | Error::ZeroNormTruth | Error::Config(_) => {
            SbarStatus::InvalidArgument
        }
        Error::DimensionMismatch { .. } => SbarStatus::DimensionMismatch,
        Error::PlanTooLarge { .. } => SbarStatus::PlanTooLarge,
        Error::IndexAlreadyMeasured(_) | Error::IndexOutOfRange { .. } | Error::DuplicateIndex(_) => {
            SbarStatus::InvalidIndex
        }
        Error::SingularSystem(_) => SbarStatus::SingularSystem,
        Error::NonPositiveDenominator { .. } => SbarStatus::NonPositiveDenominator,
        Error::PlanMismatch { .. } => SbarStatus::PlanMismatch,
        Error::NoisePowerMismatch { .. } => SbarStatus::NoisePowerMismatch,
        Error::Io(_) => SbarStatus::Io,
        Error::Format { .. } | Error::Csv(_) => SbarStatus::Format,
        Error::Trial { source, .. } => status_of(source),
        _ => SbarStatus::Other,
    }
}

struct Failure(SbarStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let mut message = e.to_string();
        let mut source = std::error::Error::source(&e);
        while let Some(s) = source {
            message.push_str(": ");
            message.push_str(&s.to_string());
            source = s.source();
        }
        Failure(status_of(&e), message)
    }
}

fn null(what: &str) -> Failure {
    Failure(SbarStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, converting errors and panics into a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SbarStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SbarStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            SbarStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a Path, Failure> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = unsafe { CStr::from_ptr(path) }
        .to_str()
        .map_err(|_| Failure(SbarStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(Path::new(s))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn complex_slice(data: *const f64, len: usize, what: &str) -> Result<Vec<Complex64>, Failure> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if data.is_null() {
        return Err(null(what));
    }
    let raw = unsafe { std::slice::from_raw_parts(data, 2 * len) };
    Ok(raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect())
}

unsafe fn write_complex(out: *mut f64, values: &[Complex64]) {
    let out = unsafe { std::slice::from_raw_parts_mut(out, 2 * values.len()) };
    for (pair, v) in out.chunks_exact_mut(2).zip(values) {
        pair[0] = v.re;
        pair[1] = v.im;
    }
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sbar_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or an empty string.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sbar_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

fn kernel_out(out: *mut *mut SbarKernel, make: impl FnOnce() -> Result<Kernel, Error>) -> SbarStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = make()?;
        unsafe { put(out, SbarKernel { inner }) };
        Ok(())
    })
}

/// Bessel kernel `alpha^2 J_order(d / eta)` on a uniform array, with
/// distances and `eta` in wavelengths and the default relative jitter.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sbar_kernel_bessel(
    num_ports: usize,
    aperture_in_wavelengths: f64,
    carrier_hz: f64,
    alpha: f64,
    eta: f64,
    order: u32,
    out: *mut *mut SbarKernel,
) -> SbarStatus {
    kernel_out(out, || {
        let g = build_port_geometry(num_ports, aperture_in_wavelengths, carrier_hz)?;
        Kernel::bessel(&g, alpha, eta, order, LengthUnit::Wavelength, Jitter::default())
    })
}

/// Exponential kernel `alpha^2 exp(-d^2 / eta^2)`, units as for
/// `sbar_kernel_bessel`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sbar_kernel_exponential(
    num_ports: usize,
    aperture_in_wavelengths: f64,
    carrier_hz: f64,
    alpha: f64,
    eta: f64,
    out: *mut *mut SbarKernel,
) -> SbarStatus {
    kernel_out(out, || {
        let g = build_port_geometry(num_ports, aperture_in_wavelengths, carrier_hz)?;
        Kernel::exponential(&g, alpha, eta, LengthUnit::Wavelength, Jitter::default())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sbar_kernel_load(path: *const c_char, out: *mut *mut SbarKernel) -> SbarStatus {
    guard(|| {
        let path = unsafe { path_arg(path) }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = sbar::files::load_kernel(path)?;
        unsafe { put(out, SbarKernel { inner }) };
        Ok(())
    })
}

/// Writes JSON when `path` ends in `.json`, binary otherwise.
///
/// # Safety
/// `kernel` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sbar_kernel_save(kernel: *const SbarKernel, path: *const c_char) -> SbarStatus {
    guard(|| {
        let k = unsafe { handle(kernel, "kernel") }?;
        sbar::files::save_kernel(&k.inner, unsafe { path_arg(path) }?)?;
        Ok(())
    })
}

/// Zero for a null handle.
///
/// # Safety
/// `kernel` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn sbar_kernel_num_ports(kernel: *const SbarKernel) -> usize {
    unsafe { kernel.as_ref() }.map_or(0, |k| k.inner.num_ports())
}

/// # Safety
/// `kernel` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn sbar_kernel_free(kernel: *mut SbarKernel) {
    if !kernel.is_null() {
        drop(unsafe { Box::from_raw(kernel) });
    }
}

/// Greedy design of `num_timeslots * antennas_per_slot` measurements.
///
/// # Safety
/// `kernel` must come from this library and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sbar_plan_design(
    kernel: *const SbarKernel,
    num_timeslots: usize,
    antennas_per_slot: usize,
    noise_power: f64,
    out: *mut *mut SbarPlan,
) -> SbarStatus {
    guard(|| {
        let k = unsafe { handle(kernel, "kernel") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let plan = design_plan(&k.inner, num_timeslots, antennas_per_slot, noise_power)?;
        unsafe { put(out, SbarPlan::new(plan)) };
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sbar_plan_load(path: *const c_char, out: *mut *mut SbarPlan) -> SbarStatus {
    guard(|| {
        let path = unsafe { path_arg(path) }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let plan = sbar::files::load_plan(path)?;
        unsafe { put(out, SbarPlan::new(plan)) };
        Ok(())
    })
}

/// # Safety
/// `plan` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sbar_plan_save(plan: *const SbarPlan, path: *const c_char) -> SbarStatus {
    guard(|| {
        let p = unsafe { handle(plan, "plan") }?;
        sbar::files::save_plan(&p.inner, unsafe { path_arg(path) }?)?;
        Ok(())
    })
}

/// # Safety
/// `plan` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn sbar_plan_free(plan: *mut SbarPlan) {
    if !plan.is_null() {
        drop(unsafe { Box::from_raw(plan) });
    }
}

/// Zero for a null handle.
///
/// # Safety
/// `plan` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn sbar_plan_num_ports(plan: *const SbarPlan) -> usize {
    unsafe { plan.as_ref() }.map_or(0, |p| p.inner.num_ports())
}

/// Zero for a null handle.
///
/// # Safety
/// `plan` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn sbar_plan_num_timeslots(plan: *const SbarPlan) -> usize {
    unsafe { plan.as_ref() }.map_or(0, |p| p.inner.num_timeslots())
}

/// Zero for a null handle.
///
/// # Safety
/// `plan` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn sbar_plan_antennas_per_slot(plan: *const SbarPlan) -> usize {
    unsafe { plan.as_ref() }.map_or(0, |p| p.inner.antennas_per_slot())
}

/// `num_timeslots * antennas_per_slot`; zero for a null handle.
///
/// # Safety
/// `plan` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn sbar_plan_num_measurements(plan: *const SbarPlan) -> usize {
    unsafe { plan.as_ref() }.map_or(0, |p| p.inner.num_measurements())
}

/// Design-time noise power; NaN for a null handle.
///
/// # Safety
/// `plan` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn sbar_plan_noise_power(plan: *const SbarPlan) -> f64 {
    unsafe { plan.as_ref() }.map_or(f64::NAN, |p| p.inner.noise_power())
}

/// Content hash of the plan; owned by the handle. Null for a null handle.
///
/// # Safety
/// `plan` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn sbar_plan_id(plan: *const SbarPlan) -> *const c_char {
    unsafe { plan.as_ref() }.map_or(ptr::null(), |p| p.id.as_ptr())
}

/// Copies the 1-based measurement order, slot by slot, into `out`.
///
/// # Safety
/// `out` must hold `len` elements; `len` must equal the measurement count.
#[no_mangle]
pub unsafe extern "C" fn sbar_plan_order(plan: *const SbarPlan, out: *mut usize, len: usize) -> SbarStatus {
    guard(|| {
        let p = unsafe { handle(plan, "plan") }?;
        let order = p.inner.order();
        if len != order.len() {
            return Err(Error::DimensionMismatch {
                what: "order buffer",
                expected: order.len(),
                found: len,
            }
            .into());
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let out = unsafe { std::slice::from_raw_parts_mut(out, len) };
        for (o, &port) in out.iter_mut().zip(order) {
            *o = port + 1;
        }
        Ok(())
    })
}

/// Simulates the plan's pilots on channel `h` (`num_ports` complex values)
/// and writes the measurement-count complex samples to `y_out`.
///
/// # Safety
/// Buffers must hold the stated number of interleaved complex values.
#[no_mangle]
pub unsafe extern "C" fn sbar_plan_observe(
    plan: *const SbarPlan,
    h: *const f64,
    h_len: usize,
    noise_power: f64,
    seed: u64,
    y_out: *mut f64,
) -> SbarStatus {
    guard(|| {
        let p = unsafe { handle(plan, "plan") }?;
        let h = unsafe { complex_slice(h, h_len, "h") }?;
        if y_out.is_null() {
            return Err(null("y_out"));
        }
        let h = ChannelRealization::external(h.into());
        let y = observe_pilots(&h, &p.inner, noise_power, seed)?;
        unsafe { write_complex(y_out, y.values.as_slice()) };
        Ok(())
    })
}

/// Posterior-mean reconstruction from `y_len` complex pilot samples.
/// Writes `num_ports` complex values to `estimate_out` and, when
/// `variance_out` is non-null, `num_ports` posterior variances.
///
/// # Safety
/// Buffers must hold the stated number of values.
#[no_mangle]
pub unsafe extern "C" fn sbar_reconstruct(
    plan: *const SbarPlan,
    y: *const f64,
    y_len: usize,
    noise_power: f64,
    estimate_out: *mut f64,
    variance_out: *mut f64,
) -> SbarStatus {
    guard(|| {
        let p = unsafe { handle(plan, "plan") }?;
        let y = unsafe { complex_slice(y, y_len, "y") }?;
        if estimate_out.is_null() {
            return Err(null("estimate_out"));
        }
        let obs = bind_observation(&p.inner, y.into(), noise_power);
        let r = reconstruct(&p.inner, &obs)?;
        unsafe { write_complex(estimate_out, r.estimate.as_slice()) };
        if !variance_out.is_null() {
            unsafe { std::slice::from_raw_parts_mut(variance_out, r.post_variance.len()) }
                .copy_from_slice(&r.post_variance);
        }
        Ok(())
    })
}
