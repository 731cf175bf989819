//! C ABI over `multimap-core`.
//!
//! Objects cross the boundary as opaque handles created by `mm_*_new`,
//! `mm_*_read` or a computing call, and released with the matching
//! `mm_*_free`. Every fallible call returns an [`MmStatus`]; on failure the
//! message is kept per thread and can be fetched with
//! [`mm_last_error_message`]. Output pointers are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use multimap_core::error::Error;
use multimap_core::io::{self, Config};
use multimap_core::maskgen::{count, make_mask, mean_image, Mask};
use multimap_core::pipeline::{estimate, QuantMaps};
use multimap_core::seqsim::{simulate_scan, ImageSet};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmStatus {
    Ok = 0,
    InvalidArgument = 1,
    OutOfBounds = 2,
    DimensionMismatch = 3,
    Config = 4,
    Numerical = 5,
    NotFound = 6,
    Version = 7,
    Checksum = 8,
    Validation = 9,
    Io = 10,
    Json = 11,
    NullPointer = 12,
    Panic = 13,
}

pub struct MmConfig(Config);
pub struct MmImageSet(ImageSet);
pub struct MmMask(Mask);
pub struct MmMaps(QuantMaps);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> MmStatus {
    match e {
        Error::InvalidArgument(_) => MmStatus::InvalidArgument,
        Error::OutOfBounds { .. } => MmStatus::OutOfBounds,
        Error::DimensionMismatch(_) => MmStatus::DimensionMismatch,
        Error::Config(_) => MmStatus::Config,
        Error::Numerical(_) => MmStatus::Numerical,
        Error::NotFound { .. } => MmStatus::NotFound,
        Error::Version { .. } => MmStatus::Version,
        Error::Checksum { .. } => MmStatus::Checksum,
        Error::Validation(_) => MmStatus::Validation,
        Error::Io(_) => MmStatus::Io,
        Error::Json(_) => MmStatus::Json,
    }
}

enum Fail {
    Core(Error),
    Null(&'static str),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MmStatus::Ok,
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is null"));
            MmStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic".into());
            MmStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn string<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Core(Error::InvalidArgument(format!("{what} is not UTF-8"))))
}

unsafe fn path(p: *const c_char) -> Result<PathBuf, Fail> {
    string(p, "path").map(PathBuf::from)
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_config_new(out: *mut *mut MmConfig) -> MmStatus {
    guard(|| put(out, MmConfig(Config::default())))
}

/// Parses a JSON configuration; omitted sections keep their defaults.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_config_from_json(json: *const c_char, out: *mut *mut MmConfig) -> MmStatus {
    guard(|| {
        let cfg: Config = serde_json::from_str(string(json, "json")?).map_err(Error::from)?;
        cfg.validate()?;
        put(out, MmConfig(cfg))
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mm_config_free(cfg: *mut MmConfig) {
    free(cfg)
}

/// Simulates the phantom and scan described by `cfg`.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_simulate(cfg: *const MmConfig, out: *mut *mut MmImageSet) -> MmStatus {
    guard(|| {
        let cfg = &deref(cfg, "config")?.0;
        cfg.validate()?;
        let phantom = cfg.recipe()?.build()?;
        put(out, MmImageSet(simulate_scan(&phantom, &cfg.scan_config())?))
    })
}

/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_imageset_read(dir: *const c_char, out: *mut *mut MmImageSet) -> MmStatus {
    guard(|| put(out, MmImageSet(io::read_imageset(&path(dir)?)?)))
}

/// # Safety
/// `set` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mm_imageset_write(set: *const MmImageSet, dir: *const c_char) -> MmStatus {
    guard(|| Ok(io::write_imageset(&deref(set, "image set")?.0, &path(dir)?)?))
}

/// # Safety
/// `set` must be a live handle; `width` and `height` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mm_imageset_size(set: *const MmImageSet, width: *mut usize, height: *mut usize) -> MmStatus {
    guard(|| {
        let s = &deref(set, "image set")?.0;
        if width.is_null() || height.is_null() {
            return Err(Fail::Null("output pointer"));
        }
        *width = s.width();
        *height = s.height();
        Ok(())
    })
}

/// Copies image `index` (1..=11) of `segment` (1 or 2) as interleaved
/// real/imaginary float pairs into `buf`, which holds `len` floats.
///
/// # Safety
/// `set` must be a live handle and `buf` point to `len` writable floats.
#[no_mangle]
pub unsafe extern "C" fn mm_imageset_copy(
    set: *const MmImageSet,
    segment: usize,
    index: usize,
    buf: *mut f32,
    len: usize,
) -> MmStatus {
    guard(|| {
        let img = deref(set, "image set")?.0.image(segment, index)?;
        if buf.is_null() {
            return Err(Fail::Null("buffer"));
        }
        if len != img.len() * 2 {
            return Err(Error::DimensionMismatch(format!("buffer holds {len} floats, image needs {}", img.len() * 2)).into());
        }
        let out = std::slice::from_raw_parts_mut(buf, len);
        for (pair, v) in out.chunks_exact_mut(2).zip(img.as_slice()) {
            pair[0] = v.re;
            pair[1] = v.im;
        }
        Ok(())
    })
}

/// # Safety
/// `set` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mm_imageset_free(set: *mut MmImageSet) {
    free(set)
}

/// Thresholds and cleans the mean image using the mask settings of `cfg`.
///
/// # Safety
/// `set` and `cfg` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_mask_make(set: *const MmImageSet, cfg: *const MmConfig, out: *mut *mut MmMask) -> MmStatus {
    guard(|| {
        let s = &deref(set, "image set")?.0;
        let c = &deref(cfg, "config")?.0;
        put(out, MmMask(make_mask(&mean_image(s), &c.mask)?))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_mask_read(file: *const c_char, out: *mut *mut MmMask) -> MmStatus {
    guard(|| put(out, MmMask(io::read_mask(&path(file)?)?)))
}

/// # Safety
/// `mask` and `cfg` must be live handles and `file` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mm_mask_write(mask: *const MmMask, cfg: *const MmConfig, file: *const c_char) -> MmStatus {
    guard(|| {
        let m = &deref(mask, "mask")?.0;
        let c = &deref(cfg, "config")?.0;
        Ok(io::write_mask(&path(file)?, m, &c.mask)?)
    })
}

/// Number of pixels inside the mask, or 0 for a null handle.
///
/// # Safety
/// `mask` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mm_mask_count(mask: *const MmMask) -> usize {
    mask.as_ref().map_or(0, |m| count(&m.0))
}

/// # Safety
/// `mask` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mm_mask_free(mask: *mut MmMask) {
    free(mask)
}

/// Runs the full estimation. The B1 table is computed from `cfg`.
///
/// # Safety
/// All handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_estimate(
    set: *const MmImageSet,
    mask: *const MmMask,
    cfg: *const MmConfig,
    out: *mut *mut MmMaps,
) -> MmStatus {
    guard(|| {
        let s = &deref(set, "image set")?.0;
        let m = &deref(mask, "mask")?.0;
        let c = &deref(cfg, "config")?.0;
        put(out, MmMaps(estimate(s, m, &c.estimate_config(), None)?))
    })
}

/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_maps_read(dir: *const c_char, out: *mut *mut MmMaps) -> MmStatus {
    guard(|| put(out, MmMaps(io::read_quantmaps(&path(dir)?)?)))
}

/// # Safety
/// `maps` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mm_maps_write(maps: *const MmMaps, dir: *const c_char) -> MmStatus {
    guard(|| Ok(io::write_quantmaps(&deref(maps, "maps")?.0, &path(dir)?)?))
}

/// Copies the map called `name` (for example `"t1"` or `"fat_fraction"`).
/// `values` receives `len` doubles; `valid`, if not null, `len` 0/1 bytes.
///
/// # Safety
/// `maps` must be a live handle, `name` a NUL-terminated string, `values`
/// point to `len` writable doubles and `valid` be null or point to `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn mm_maps_get(
    maps: *const MmMaps,
    name: *const c_char,
    values: *mut f64,
    valid: *mut u8,
    len: usize,
) -> MmStatus {
    guard(|| {
        let m = deref(maps, "maps")?.0.get(string(name, "name")?)?;
        if values.is_null() {
            return Err(Fail::Null("values"));
        }
        if len != m.values.len() {
            return Err(Error::DimensionMismatch(format!("buffer holds {len} values, map has {}", m.values.len())).into());
        }
        ptr::copy_nonoverlapping(m.values.as_slice().as_ptr(), values, len);
        if !valid.is_null() {
            for (i, &v) in m.valid.as_slice().iter().enumerate() {
                *valid.add(i) = v as u8;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `maps` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mm_maps_free(maps: *mut MmMaps) {
    free(maps)
}
