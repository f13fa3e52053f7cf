//! C ABI surface for the HALO pipeline.
//!
//! Handles are opaque pointers owned by the library; every constructor has a
//! matching `_free`. Fallible calls return a [`HaloStatus`] and record a
//! message retrievable with [`halo_last_error`]. Handles are not
//! thread-safe; callers must not share one handle across threads without
//! external synchronization.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use halo_core::profile::{load_profile, synthetic_tiered_profile, WeightProfile};
use halo_core::quantize::{
    dequantize, effective_bitwidth, load_model, quantize_model, save_model, QuantizeConfig,
    QuantizedModel,
};
use halo_core::sensitivity::Matrix2D;
use halo_core::HaloError;

/// Status codes mirrored into the generated header.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaloStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    IoError = 3,
    Malformed = 4,
    Infeasible = 5,
    Internal = 6,
}

/// Opaque per-weight timing/energy profile.
pub struct HaloProfile(WeightProfile);

/// Opaque quantized model.
pub struct HaloModel(QuantizedModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: Vec<u8> = msg.bytes().filter(|&b| b != 0).collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &HaloError) -> HaloStatus {
    match err {
        HaloError::InvalidArgument(_)
        | HaloError::NonFinite(_)
        | HaloError::ShapeMismatch(_)
        | HaloError::IndexOutOfBounds(_)
        | HaloError::TileTooLarge { .. } => HaloStatus::InvalidArgument,
        HaloError::Io { .. } => HaloStatus::IoError,
        HaloError::Json { .. }
        | HaloError::MalformedProfile(_)
        | HaloError::IncompleteProfile(_)
        | HaloError::MalformedModel(_)
        | HaloError::MalformedContainer(_)
        | HaloError::EmptyContainer => HaloStatus::Malformed,
        HaloError::EmptyCodebook { .. }
        | HaloError::NoFeasibleLevel { .. }
        | HaloError::TimingViolation { .. }
        | HaloError::UnmappedClass(_) => HaloStatus::Infeasible,
    }
}

fn fail(err: HaloError) -> HaloStatus {
    set_error(&err.to_string());
    status_of(&err)
}

fn guard<F: FnOnce() -> HaloStatus>(f: F) -> HaloStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            HaloStatus::Internal
        }
    }
}

/// # Safety
/// `path` must be a valid NUL-terminated string.
unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a Path, HaloStatus> {
    if path.is_null() {
        set_error("null path");
        return Err(HaloStatus::NullPointer);
    }
    match CStr::from_ptr(path).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(HaloStatus::InvalidArgument)
        }
    }
}

/// Copies the most recent error message for this thread into `buf`
/// (NUL-terminated, truncated to `len`). Returns the full message length,
/// not counting the terminator.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn halo_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Loads a `halo-profile-v1` JSON profile.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn halo_profile_load(
    path: *const c_char,
    out: *mut *mut HaloProfile,
) -> HaloStatus {
    if out.is_null() {
        set_error("null output pointer");
        return HaloStatus::NullPointer;
    }
    let path = match path_arg(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    guard(|| match load_profile(path) {
        Ok(p) => {
            *out = Box::into_raw(Box::new(HaloProfile(p)));
            HaloStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// Builds the built-in synthetic tiered profile (useful for tests and
/// demos; no gate simulation required).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn halo_profile_synthetic(out: *mut *mut HaloProfile) -> HaloStatus {
    if out.is_null() {
        set_error("null output pointer");
        return HaloStatus::NullPointer;
    }
    *out = Box::into_raw(Box::new(HaloProfile(synthetic_tiered_profile())));
    HaloStatus::Ok
}

/// # Safety
/// `profile` must come from a `halo_profile_*` constructor, freed once.
#[no_mangle]
pub unsafe extern "C" fn halo_profile_free(profile: *mut HaloProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Worst-case settling delay in picoseconds for one weight value; 0 if
/// `profile` is null.
///
/// # Safety
/// `profile` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn halo_profile_worst_delay_ps(
    profile: *const HaloProfile,
    weight: i8,
) -> u32 {
    profile.as_ref().map_or(0, |p| p.0.worst_delay_ps(weight))
}

/// Mean switching energy for one weight value; NaN if `profile` is null.
///
/// # Safety
/// `profile` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn halo_profile_switch_energy(
    profile: *const HaloProfile,
    weight: i8,
) -> f64 {
    profile
        .as_ref()
        .map_or(f64::NAN, |p| p.0.mean_switch_energy(weight))
}

/// Quantizes a row-major `rows x cols` weight/gradient pair into a model
/// with square tiles of edge `tile` and the given HIGH-class sensitivity
/// retention (e.g. 0.95).
///
/// # Safety
/// `weights` and `gradients` must each point to `rows * cols` floats;
/// `profile` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn halo_quantize(
    weights: *const f32,
    gradients: *const f32,
    rows: usize,
    cols: usize,
    tile: usize,
    retention: f64,
    profile: *const HaloProfile,
    out: *mut *mut HaloModel,
) -> HaloStatus {
    if weights.is_null() || gradients.is_null() || profile.is_null() || out.is_null() {
        set_error("null pointer argument");
        return HaloStatus::NullPointer;
    }
    let n = rows * cols;
    let w = std::slice::from_raw_parts(weights, n).to_vec();
    let g = std::slice::from_raw_parts(gradients, n).to_vec();
    let profile = &(*profile).0;
    guard(|| {
        let config = QuantizeConfig {
            tile_rows: tile,
            tile_cols: tile,
            retention,
            ..QuantizeConfig::default()
        };
        let result = Matrix2D::new(rows, cols, w)
            .and_then(|wm| Matrix2D::new(rows, cols, g).map(|gm| (wm, gm)))
            .and_then(|(wm, gm)| quantize_model(&wm, &gm, &config, profile));
        match result {
            Ok(model) => {
                *out = Box::into_raw(Box::new(HaloModel(model)));
                HaloStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `model` must come from a `halo_*` constructor, freed once.
#[no_mangle]
pub unsafe extern "C" fn halo_model_free(model: *mut HaloModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Parameter-weighted effective bit-width; NaN if `model` is null.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn halo_model_effective_bitwidth(model: *const HaloModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| effective_bitwidth(&m.0))
}

/// Nonzero count of the sparse outlier/salient overlay.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn halo_model_overlay_nnz(model: *const HaloModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.overlay.nnz())
}

/// Fraction of tiles in the fast LOW class.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn halo_model_k_fraction(model: *const HaloModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| m.0.k_fraction)
}

/// Writes the model to `dir` in `halo-model-v1` layout.
///
/// # Safety
/// `model` must be a live handle; `dir` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn halo_model_save(
    model: *const HaloModel,
    dir: *const c_char,
) -> HaloStatus {
    let Some(model) = model.as_ref() else {
        set_error("null model");
        return HaloStatus::NullPointer;
    };
    let dir = match path_arg(dir) {
        Ok(p) => p,
        Err(s) => return s,
    };
    guard(|| match save_model(&model.0, dir) {
        Ok(()) => HaloStatus::Ok,
        Err(e) => fail(e),
    })
}

/// Loads a `halo-model-v1` directory.
///
/// # Safety
/// `dir` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn halo_model_load(
    dir: *const c_char,
    out: *mut *mut HaloModel,
) -> HaloStatus {
    if out.is_null() {
        set_error("null output pointer");
        return HaloStatus::NullPointer;
    }
    let dir = match path_arg(dir) {
        Ok(p) => p,
        Err(s) => return s,
    };
    guard(|| match load_model(dir) {
        Ok(m) => {
            *out = Box::into_raw(Box::new(HaloModel(m)));
            HaloStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// Reconstructs the dequantized weights into `out` (row-major,
/// `rows * cols` floats).
///
/// # Safety
/// `model` must be a live handle; `out` must point to `len` writable floats.
#[no_mangle]
pub unsafe extern "C" fn halo_model_dequantize(
    model: *const HaloModel,
    out: *mut f32,
    len: usize,
) -> HaloStatus {
    let Some(model) = model.as_ref() else {
        set_error("null model");
        return HaloStatus::NullPointer;
    };
    if out.is_null() {
        set_error("null output buffer");
        return HaloStatus::NullPointer;
    }
    let need = model.0.rows * model.0.cols;
    if len != need {
        set_error(&format!("buffer holds {len} floats, model needs {need}"));
        return HaloStatus::InvalidArgument;
    }
    let dense = dequantize(&model.0);
    std::ptr::copy_nonoverlapping(dense.data.as_ptr(), out, need);
    HaloStatus::Ok
}
