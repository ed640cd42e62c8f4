//! C ABI over `lsi-core`.
//!
//! Objects are opaque handles returned through out-pointers by calls such as
//! `lsi_config_load` and released with the matching `_free`. Every fallible call
//! returns an [`LsiStatus`]; on failure the message is kept per thread and
//! can be read with [`lsi_last_error`]. Pixel and element indices are 0-based.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lsi_core::cli::{analyze, reconstruct, simulate};
use lsi_core::error::Error;
use lsi_core::io::{load_config, parse_config, read_dataset, write_dataset, RunConfig};
use lsi_core::model::FrequencyDataset;

/// Result codes. Values are stable.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Bad configuration, parameters, indices or input data.
    InvalidInput = 3,
    /// File could not be read or written.
    Io = 4,
    /// File contents are corrupt or in the wrong format.
    Format = 5,
    /// A computation failed to converge or hit a numerical guard.
    Numeric = 6,
    /// The request exceeds an enumeration limit.
    Refused = 7,
    /// Caller buffer is too small; the required length is reported.
    BufferTooSmall = 8,
    /// Unexpected internal failure.
    Internal = 9,
}

pub struct LsiConfig(RunConfig);

pub struct LsiDataset(FrequencyDataset);

pub struct LsiImage {
    n_x: usize,
    n_z: usize,
    power: Vec<f64>,
    report: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> LsiStatus {
    match e {
        Error::Io(_) => LsiStatus::Io,
        Error::Corruption(_) | Error::Format(_) | Error::Parse { .. } => LsiStatus::Format,
        Error::Refusal { .. } => LsiStatus::Refused,
        _ if e.exit_code() == 2 => LsiStatus::Numeric,
        _ => LsiStatus::InvalidInput,
    }
}

fn guard(f: impl FnOnce() -> Result<(), LsiStatus>) -> LsiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LsiStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            LsiStatus::Internal
        }
    }
}

fn fail(e: Error) -> LsiStatus {
    set_error(format!("{}: {e}", e.category()));
    status_of(&e)
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, LsiStatus> {
    if p.is_null() {
        set_error("null string argument".into());
        return Err(LsiStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not UTF-8".into());
        LsiStatus::InvalidUtf8
    })
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, LsiStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null handle".into());
        LsiStatus::NullPointer
    })
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), LsiStatus> {
    if out.is_null() {
        set_error("null output pointer".into());
        return Err(LsiStatus::NullPointer);
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies `src` into a caller buffer of `len` doubles, always reporting the
/// required count through `needed` when it is non-null.
unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize, needed: *mut usize) -> Result<(), LsiStatus> {
    if !needed.is_null() {
        *needed = src.len();
    }
    if buf.is_null() || len < src.len() {
        set_error(format!("buffer holds {len} values, {} needed", src.len()));
        return Err(LsiStatus::BufferTooSmall);
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Message for the last failure on this thread, or an empty string. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lsi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lsi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a TOML run configuration from `path`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lsi_config_load(path: *const c_char, out: *mut *mut LsiConfig) -> LsiStatus {
    guard(|| {
        let cfg = load_config(str_arg(path)?).map_err(fail)?;
        store(out, LsiConfig(cfg))
    })
}

/// Parses a TOML run configuration from memory.
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lsi_config_parse(text: *const c_char, out: *mut *mut LsiConfig) -> LsiStatus {
    guard(|| {
        let cfg = parse_config(str_arg(text)?).map_err(fail)?;
        store(out, LsiConfig(cfg))
    })
}

/// # Safety
/// `cfg` must be null or a handle from `lsi_config_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lsi_config_free(cfg: *mut LsiConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Synthesizes the full-matrix dataset described by `cfg`.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lsi_simulate(cfg: *const LsiConfig, out: *mut *mut LsiDataset) -> LsiStatus {
    guard(|| {
        let ds = simulate(&handle(cfg)?.0).map_err(fail)?;
        store(out, LsiDataset(ds))
    })
}

/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lsi_dataset_read(path: *const c_char, out: *mut *mut LsiDataset) -> LsiStatus {
    guard(|| {
        let ds = read_dataset(str_arg(path)?).map_err(fail)?;
        store(out, LsiDataset(ds))
    })
}

/// # Safety
/// `ds` must be a live handle and `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lsi_dataset_write(ds: *const LsiDataset, path: *const c_char) -> LsiStatus {
    guard(|| write_dataset(str_arg(path)?, &handle(ds)?.0).map_err(fail))
}

/// Number of frequency bins, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsi_dataset_bins(ds: *const LsiDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.bins())
}

/// Number of array elements, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsi_dataset_elements(ds: *const LsiDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.element_count())
}

/// Noise standard deviation recorded with the dataset, or NaN for null.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsi_dataset_sigma(ds: *const LsiDataset) -> f64 {
    ds.as_ref().map_or(f64::NAN, |d| d.0.sigma())
}

/// Copies bin `bin` as interleaved (re, im) pairs in column-major order:
/// `2 * M * M` doubles, column `p` holding transmission `p`.
///
/// # Safety
/// `ds` must be a live handle; `buf` must hold `len` doubles; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn lsi_dataset_bin(
    ds: *const LsiDataset,
    bin: usize,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> LsiStatus {
    guard(|| {
        let d = &handle(ds)?.0;
        if bin >= d.bins() {
            return Err(fail(Error::Index { index: bin, len: d.bins() }));
        }
        let flat: Vec<f64> = d.matrix(bin).iter().flat_map(|z| [z.re, z.im]).collect();
        copy_out(&flat, buf, len, needed)
    })
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lsi_dataset_free(ds: *mut LsiDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Runs the configured imaging method on `ds`.
///
/// # Safety
/// `cfg` and `ds` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lsi_reconstruct(cfg: *const LsiConfig, ds: *const LsiDataset, out: *mut *mut LsiImage) -> LsiStatus {
    guard(|| {
        let cfg = &handle(cfg)?.0;
        let rec = reconstruct(cfg, &handle(ds)?.0).map_err(fail)?;
        let power = rec.image.power();
        let report = CString::new(rec.report.replace('\0', " ")).unwrap_or_default();
        store(out, LsiImage { n_x: cfg.grid.n_x(), n_z: cfg.grid.n_z(), power, report })
    })
}

/// Grid dimensions of an image.
///
/// # Safety
/// `img` must be a live handle; `n_x` and `n_z` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn lsi_image_size(img: *const LsiImage, n_x: *mut usize, n_z: *mut usize) -> LsiStatus {
    guard(|| {
        let i = handle(img)?;
        if n_x.is_null() || n_z.is_null() {
            set_error("null output pointer".into());
            return Err(LsiStatus::NullPointer);
        }
        *n_x = i.n_x;
        *n_z = i.n_z;
        Ok(())
    })
}

/// Copies pixel power in row-major order (depth rows, lateral fastest).
///
/// # Safety
/// `img` must be a live handle; `buf` must hold `len` doubles; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn lsi_image_power(img: *const LsiImage, buf: *mut f64, len: usize, needed: *mut usize) -> LsiStatus {
    guard(|| copy_out(&handle(img)?.power, buf, len, needed))
}

/// Text report of the reconstruction, owned by the image handle.
///
/// # Safety
/// `img` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsi_image_report(img: *const LsiImage) -> *const c_char {
    img.as_ref().map_or(ptr::null(), |i| i.report.as_ptr())
}

/// # Safety
/// `img` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lsi_image_free(img: *mut LsiImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Analysis report for `cfg`, returned as a new string to be released with
/// [`lsi_string_free`].
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lsi_analyze(cfg: *const LsiConfig, out: *mut *mut c_char) -> LsiStatus {
    guard(|| {
        let text = analyze(&handle(cfg)?.0).map_err(fail)?;
        if out.is_null() {
            set_error("null output pointer".into());
            return Err(LsiStatus::NullPointer);
        }
        *out = CString::new(text.replace('\0', " ")).unwrap_or_default().into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn lsi_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
