//! C ABI over the `codedcache` library.
//!
//! Every fallible entry point returns a [`CcStatus`]. On failure a message is
//! kept per thread and can be read with [`cc_last_error`]. Handles are opaque
//! and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use codedcache::coded_cache;
use codedcache::dqn::{checkpoint, DuelingNet};
use codedcache::harness::{self, ExperimentConfig};
use codedcache::popularity;
use codedcache::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidParameter = 3,
    ConstraintViolation = 4,
    Capacity = 5,
    Config = 6,
    Parse = 7,
    Shape = 8,
    Aggregation = 9,
    Checkpoint = 10,
    Schema = 11,
    Io = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

/// Experiment configuration handle.
pub struct CcConfig {
    inner: ExperimentConfig,
}

/// Loaded dueling Q-network handle.
pub struct CcNet {
    inner: DuelingNet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> CcStatus {
    match err {
        Error::InvalidParameter(_) => CcStatus::InvalidParameter,
        Error::ConstraintViolation(_) => CcStatus::ConstraintViolation,
        Error::Capacity(_) => CcStatus::Capacity,
        Error::Config(_) => CcStatus::Config,
        Error::Parse { .. } => CcStatus::Parse,
        Error::Shape(_) => CcStatus::Shape,
        Error::Aggregation(_) => CcStatus::Aggregation,
        Error::Checkpoint(_) => CcStatus::Checkpoint,
        Error::Schema(_) => CcStatus::Schema,
        Error::Io { .. } => CcStatus::Io,
    }
}

struct Fail(CcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> CcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CcStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside codedcache".to_string());
            CcStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(CcStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(CcStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

/// Message of the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Writes a configuration with every key at its default value to `*out`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn cc_config_default(out: *mut *mut CcConfig) -> CcStatus {
    guard(|| {
        non_null(out, "out")?;
        let cfg = Box::new(CcConfig {
            inner: ExperimentConfig::default(),
        });
        *out = Box::into_raw(cfg);
        Ok(())
    })
}

/// Parses config text; omitted keys keep their defaults.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cc_config_parse(text: *const c_char, out: *mut *mut CcConfig) -> CcStatus {
    guard(|| {
        non_null(out, "out")?;
        let text = str_arg(text, "text")?;
        let inner = harness::parse_config(text)?;
        *out = Box::into_raw(Box::new(CcConfig { inner }));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cc_config_free(cfg: *mut CcConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Sets the output directory of `cc_run_experiment`.
///
/// # Safety
/// `cfg` must be a live handle and `dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cc_config_set_out_dir(cfg: *mut CcConfig, dir: *const c_char) -> CcStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        let dir = str_arg(dir, "dir")?;
        (*cfg).inner.out_dir = PathBuf::from(dir);
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live handle and `seeds` must point to `n_seeds` values.
#[no_mangle]
pub unsafe extern "C" fn cc_config_set_seeds(cfg: *mut CcConfig, seeds: *const u64, n_seeds: usize) -> CcStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        non_null(seeds, "seeds")?;
        (*cfg).inner.seeds = std::slice::from_raw_parts(seeds, n_seeds).to_vec();
        Ok(())
    })
}

/// Overrides one of `M`, `Z`, `K`, `V` or `T` (slots).
///
/// # Safety
/// `cfg` must be a live handle and `name` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cc_config_set_param(cfg: *mut CcConfig, name: *const c_char, value: f64) -> CcStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        let name = str_arg(name, "name")?;
        let c = &mut (*cfg).inner;
        if name == "T" {
            if !(value >= 1.0 && value.fract() == 0.0) {
                return Err(Fail(CcStatus::InvalidParameter, format!("T must be a positive integer, got {value}")));
            }
            c.slots = value as usize;
        } else {
            *c = c.with_param(name, value)?;
        }
        Ok(())
    })
}

/// Restricts the run to a comma-separated list of scheme names.
///
/// # Safety
/// `cfg` must be a live handle and `schemes` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cc_config_set_schemes(cfg: *mut CcConfig, schemes: *const c_char) -> CcStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        let list = str_arg(schemes, "schemes")?;
        (*cfg).inner.schemes = list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        Ok(())
    })
}

/// Serializes the configuration. `*needed` receives the byte length
/// including the terminating NUL; when `capacity` is too small nothing is
/// written and `BufferTooSmall` is returned.
///
/// # Safety
/// `cfg` must be a live handle, `buf` writable for `capacity` bytes (or null
/// with zero capacity) and `needed` writable.
#[no_mangle]
pub unsafe extern "C" fn cc_config_emit(
    cfg: *const CcConfig,
    buf: *mut c_char,
    capacity: usize,
    needed: *mut usize,
) -> CcStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        non_null(needed, "needed")?;
        let text = harness::emit_config(&(*cfg).inner);
        *needed = text.len() + 1;
        if capacity < text.len() + 1 {
            return Err(Fail(CcStatus::BufferTooSmall, format!("need {} bytes", text.len() + 1)));
        }
        non_null(buf, "buf")?;
        ptr::copy_nonoverlapping(text.as_ptr() as *const c_char, buf, text.len());
        *buf.add(text.len()) = 0;
        Ok(())
    })
}

/// Validates the configuration and runs every seed, writing results under
/// its output directory. `*n_records` receives the number of metric rows.
///
/// # Safety
/// `cfg` must be a live handle; `n_records` may be null.
#[no_mangle]
pub unsafe extern "C" fn cc_run_experiment(cfg: *const CcConfig, n_records: *mut usize) -> CcStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        let cfg = &(*cfg).inner;
        cfg.validate()?;
        let out = harness::run_experiment(cfg)?;
        if !n_records.is_null() {
            *n_records = out.records.len();
        }
        Ok(())
    })
}

/// Coded multicast load for `u` distinct cached requests among `k_faps`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cc_coded_multicast_load(u: usize, k_faps: usize, t: usize, out: *mut f64) -> CcStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = coded_cache::coded_multicast_load(u, k_faps, t)?;
        Ok(())
    })
}

/// Memory-sharing split for caching `n_cached` contents.
///
/// # Safety
/// All out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cc_fragmentation_param(
    k_faps: usize,
    cache_size: usize,
    n_cached: usize,
    t_low: *mut usize,
    t_high: *mut usize,
    weight_low: *mut f64,
) -> CcStatus {
    guard(|| {
        non_null(t_low, "t_low")?;
        non_null(t_high, "t_high")?;
        non_null(weight_low, "weight_low")?;
        let f = coded_cache::fragmentation_param(k_faps, cache_size, n_cached)?;
        *t_low = f.t_low;
        *t_high = f.t_high;
        *weight_low = f.weight_low;
        Ok(())
    })
}

/// Fills `out[0..n_contents]` with the Zipf probabilities for `alpha`.
///
/// # Safety
/// `out` must be writable for `n_contents` values.
#[no_mangle]
pub unsafe extern "C" fn cc_zipf_profile(alpha: f64, n_contents: usize, out: *mut f64) -> CcStatus {
    guard(|| {
        non_null(out, "out")?;
        let p = popularity::zipf_profile(alpha, n_contents)?;
        ptr::copy_nonoverlapping(p.probabilities().as_ptr(), out, n_contents);
        Ok(())
    })
}

/// Loads a network checkpoint written by the experiment driver.
///
/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cc_net_load(path: *const c_char, out: *mut *mut CcNet) -> CcStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = str_arg(path, "path")?;
        let inner = checkpoint::load(std::path::Path::new(path))?;
        *out = Box::into_raw(Box::new(CcNet { inner }));
        Ok(())
    })
}

/// # Safety
/// `net` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cc_net_free(net: *mut CcNet) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// State length the network expects, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cc_net_input_dim(net: *const CcNet) -> usize {
    net.as_ref().map_or(0, |n| n.inner.input_dim())
}

/// Number of actions, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cc_net_n_actions(net: *const CcNet) -> usize {
    net.as_ref().map_or(0, |n| n.inner.n_actions())
}

/// Q-values of one state. `state_len` must equal the input dimension and
/// `q_len` the action count.
///
/// # Safety
/// `net` must be a live handle, `state` readable for `state_len` values and
/// `q_out` writable for `q_len` values.
#[no_mangle]
pub unsafe extern "C" fn cc_net_forward(
    net: *const CcNet,
    state: *const f64,
    state_len: usize,
    q_out: *mut f64,
    q_len: usize,
) -> CcStatus {
    guard(|| {
        non_null(net, "net")?;
        non_null(state, "state")?;
        non_null(q_out, "q_out")?;
        let net = &(*net).inner;
        if q_len != net.n_actions() {
            return Err(Fail(
                CcStatus::Shape,
                format!("q_len {q_len} but the network has {} actions", net.n_actions()),
            ));
        }
        let q = net.forward(std::slice::from_raw_parts(state, state_len))?;
        ptr::copy_nonoverlapping(q.as_ptr(), q_out, q_len);
        Ok(())
    })
}
