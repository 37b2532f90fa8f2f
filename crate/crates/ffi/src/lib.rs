//! C ABI over the cavity-noise engine.
//!
//! Handles are opaque and owned by the caller once returned; release them with
//! the matching `*_free`. Every fallible call returns a [`CnStatus`] and, on
//! failure, leaves a message retrievable with [`cn_last_error`] on the same
//! thread. Array getters copy into caller buffers; pass a null buffer to query
//! the required length.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use cavity_noise::budget::{attribute, build_budget, ModelInputs, NoiseBudget};
use cavity_noise::optics::{self, LoopSuppression};
use cavity_noise::params::{load_config, LoadedConfig, OperatingPoint};
use cavity_noise::{Error, FrequencyGrid};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidInput = 5,
    Domain = 6,
    Band = 7,
    NotFound = 8,
    BufferTooSmall = 9,
    Internal = 10,
}

/// Loaded cavity configuration.
pub struct CnModel {
    config: LoadedConfig,
}

/// Noise budget on a frequency grid.
pub struct CnBudget {
    budget: NoiseBudget,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(CnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => CnStatus::Io,
            Error::Parse { .. } | Error::Format { .. } => CnStatus::Parse,
            Error::Invalid { .. } | Error::GridMismatch(_) => CnStatus::InvalidInput,
            Error::Domain(_) | Error::Calibration { .. } | Error::Fit(_) => CnStatus::Domain,
            Error::Band { .. } => CnStatus::Band,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: CnStatus, message: impl Into<String>) -> Failure {
    Failure(status, message.into())
}

/// Run `body`, translating errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CnStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            clear_error();
            CnStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CnStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(fail(CnStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(CnStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| fail(CnStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_arg<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or_else(|| fail(CnStatus::NullPointer, format!("{name} is null")))
}

fn find_op<'a>(config: &'a LoadedConfig, label: &str) -> Result<&'a OperatingPoint, Failure> {
    config
        .operating_point(label)
        .ok_or_else(|| fail(CnStatus::NotFound, format!("no operating point '{label}'")))
}

/// Copy `data` into `out` (capacity `cap`); always report the needed length.
unsafe fn copy_out(data: &[f64], out: *mut f64, cap: usize, len: *mut usize) -> Result<(), Failure> {
    *out_arg(len, "len")? = data.len();
    if out.is_null() {
        return Ok(());
    }
    if cap < data.len() {
        return Err(fail(
            CnStatus::BufferTooSmall,
            format!("buffer holds {cap} values, need {}", data.len()),
        ));
    }
    std::ptr::copy_nonoverlapping(data.as_ptr(), out, data.len());
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into the library on this thread.
#[no_mangle]
pub extern "C" fn cn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Load a TOML configuration file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cn_model_load(path: *const c_char, out: *mut *mut CnModel) -> CnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        let path = str_arg(path, "path")?;
        let config = load_config(Path::new(path))?;
        *out = Box::into_raw(Box::new(CnModel { config }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`cn_model_load`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cn_model_free(model: *mut CnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Cavity linewidth (HWHM) in Hz.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cn_model_linewidth_hz(model: *const CnModel, out: *mut f64) -> CnStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(model, "model")?.config.cavity.linewidth_hz();
        Ok(())
    })
}

/// Number of operating points in the configuration.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cn_model_operating_point_count(model: *const CnModel, out: *mut usize) -> CnStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(model, "model")?.config.operating_points.len();
        Ok(())
    })
}

/// Closed-loop optical-spring frequency in Hz at the labelled operating point.
/// Returns `NotFound` when the point has no spring (e.g. on resonance).
///
/// # Safety
/// Pointers must be valid; `label` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cn_model_spring_frequency(
    model: *const CnModel,
    label: *const c_char,
    out: *mut f64,
) -> CnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let config = &ref_arg(model, "model")?.config;
        let op = find_op(config, str_arg(label, "label")?)?;
        match optics::spring_frequency(&config.cavity, op, &config.mechanics)? {
            Some(f) => {
                *out = f;
                Ok(())
            }
            None => Err(fail(CnStatus::NotFound, format!("no optical spring at '{}'", op.label))),
        }
    })
}

/// Budget at the labelled operating point on a log grid. `loop_unity_gain_hz`
/// of zero disables the length-loop readout correction.
///
/// # Safety
/// Pointers must be valid; `label` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cn_budget_build(
    model: *const CnModel,
    label: *const c_char,
    f_min_hz: f64,
    f_max_hz: f64,
    points_per_decade: usize,
    loop_unity_gain_hz: f64,
    out: *mut *mut CnBudget,
) -> CnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        let config = &ref_arg(model, "model")?.config;
        let op = find_op(config, str_arg(label, "label")?)?;
        if !(loop_unity_gain_hz.is_finite() && loop_unity_gain_hz >= 0.0) {
            return Err(fail(
                CnStatus::InvalidInput,
                format!("loop_unity_gain_hz {loop_unity_gain_hz} must be finite and nonnegative"),
            ));
        }
        let grid = FrequencyGrid::log_spaced(f_min_hz, f_max_hz, points_per_decade)?;
        let mut inputs = ModelInputs::new(&config.cavity, &config.mechanics, &config.noise);
        inputs.servo = LoopSuppression {
            unity_gain_hz: loop_unity_gain_hz,
        };
        let budget = build_budget(&inputs, op, &grid)?;
        *out = Box::into_raw(Box::new(CnBudget { budget }));
        Ok(())
    })
}

/// # Safety
/// `budget` must come from [`cn_budget_build`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cn_budget_free(budget: *mut CnBudget) {
    if !budget.is_null() {
        drop(Box::from_raw(budget));
    }
}

/// Grid frequencies in Hz.
///
/// # Safety
/// `budget` and `len` must be valid; `out` null or writable for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn cn_budget_frequencies(
    budget: *const CnBudget,
    out: *mut f64,
    cap: usize,
    len: *mut usize,
) -> CnStatus {
    guard(|| copy_out(ref_arg(budget, "budget")?.budget.grid().points(), out, cap, len))
}

/// Total displacement ASD in m/√Hz.
///
/// # Safety
/// As for [`cn_budget_frequencies`].
#[no_mangle]
pub unsafe extern "C" fn cn_budget_total(budget: *const CnBudget, out: *mut f64, cap: usize, len: *mut usize) -> CnStatus {
    guard(|| copy_out(ref_arg(budget, "budget")?.budget.total().asd(), out, cap, len))
}

/// One component's ASD by label (`thermal`, `qrpn`, `shot`, `dark`, `crpn`).
///
/// # Safety
/// As for [`cn_budget_frequencies`]; `label` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cn_budget_component(
    budget: *const CnBudget,
    label: *const c_char,
    out: *mut f64,
    cap: usize,
    len: *mut usize,
) -> CnStatus {
    guard(|| {
        let budget = &ref_arg(budget, "budget")?.budget;
        let label = str_arg(label, "label")?;
        let spectrum = budget
            .component(label)
            .ok_or_else(|| fail(CnStatus::NotFound, format!("no component '{label}'")))?;
        copy_out(spectrum.asd(), out, cap, len)
    })
}

/// Band rms of the total in metres.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cn_budget_band_rms(budget: *const CnBudget, lo_hz: f64, hi_hz: f64, out: *mut f64) -> CnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = attribute(&ref_arg(budget, "budget")?.budget, (lo_hz, hi_hz))?.total_rms;
        Ok(())
    })
}

/// Share of the band power carried by one component.
///
/// # Safety
/// Pointers must be valid; `label` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cn_budget_band_fraction(
    budget: *const CnBudget,
    label: *const c_char,
    lo_hz: f64,
    hi_hz: f64,
    out: *mut f64,
) -> CnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let budget = &ref_arg(budget, "budget")?.budget;
        let label = str_arg(label, "label")?;
        let stat = attribute(budget, (lo_hz, hi_hz))?;
        *out = stat
            .fraction(label)
            .ok_or_else(|| fail(CnStatus::NotFound, format!("no component '{label}'")))?;
        Ok(())
    })
}
