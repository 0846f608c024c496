//! C interface to the dynamics engine.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_parse`
//! and released by the matching `*_free`. Every fallible call returns a
//! [`NonadiabStatus`]; the message of the most recent failure on the calling
//! thread is available from [`nonadiab_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use nonadiab::ensemble::Ensemble;
use nonadiab::models::DiabaticModel;
use nonadiab::runner::run;
use nonadiab::{parse_config, Error, ModelKind, RunConfig};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonadiabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Numerical = 4,
    Incompatible = 5,
    Io = 6,
    Data = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Parsed run configuration.
pub struct NonadiabConfig {
    inner: RunConfig,
}

/// Trajectory ensemble advanced step by step.
pub struct NonadiabEnsemble {
    inner: Ensemble,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> NonadiabStatus {
    match err {
        Error::Config { .. } => NonadiabStatus::Config,
        Error::Degenerate { .. } | Error::Numerical { .. } => NonadiabStatus::Numerical,
        Error::Incompatible(_) => NonadiabStatus::Incompatible,
        Error::Io { .. } => NonadiabStatus::Io,
        Error::Data { .. } => NonadiabStatus::Data,
    }
}

/// Runs `f`, recording the error message and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (NonadiabStatus, String)>) -> NonadiabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NonadiabStatus::Ok,
        Ok(Err((status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {message}"));
            NonadiabStatus::Panic
        }
    }
}

fn engine(err: Error) -> (NonadiabStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(name: &str) -> (NonadiabStatus, String) {
    (NonadiabStatus::NullPointer, format!("{name} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, (NonadiabStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (NonadiabStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, (NonadiabStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn handle_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, (NonadiabStatus, String)> {
    p.as_mut().ok_or_else(|| null(name))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nonadiab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nonadiab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses configuration text. On success `*out` owns a new handle.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nonadiab_config_parse(text: *const c_char, out: *mut *mut NonadiabConfig) -> NonadiabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = read_str(text, "text")?;
        let inner = parse_config(text).map_err(engine)?;
        *out = Box::into_raw(Box::new(NonadiabConfig { inner }));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from [`nonadiab_config_parse`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nonadiab_config_free(cfg: *mut NonadiabConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Overrides the random seed.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nonadiab_config_set_seed(cfg: *mut NonadiabConfig, seed: u64) -> NonadiabStatus {
    guard(|| {
        handle_mut(cfg, "cfg")?.inner.seed = seed;
        Ok(())
    })
}

/// Overrides the output directory.
///
/// # Safety
/// `cfg` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nonadiab_config_set_output_dir(cfg: *mut NonadiabConfig, dir: *const c_char) -> NonadiabStatus {
    guard(|| {
        let cfg = handle_mut(cfg, "cfg")?;
        cfg.inner.output.dir = PathBuf::from(read_str(dir, "dir")?);
        Ok(())
    })
}

/// Writes the configuration hash (64 hex digits plus NUL) into `buf`.
///
/// # Safety
/// `cfg` must be a live handle and `buf` valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn nonadiab_config_hash(cfg: *const NonadiabConfig, buf: *mut c_char, len: usize) -> NonadiabStatus {
    guard(|| {
        let cfg = handle(cfg, "cfg")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let hash = cfg.inner.hash();
        if len < hash.len() + 1 {
            return Err((
                NonadiabStatus::BufferTooSmall,
                format!("hash needs {} bytes, buffer has {len}", hash.len() + 1),
            ));
        }
        ptr::copy_nonoverlapping(hash.as_ptr().cast::<c_char>(), buf, hash.len());
        *buf.add(hash.len()) = 0;
        Ok(())
    })
}

/// Runs the configured method to completion and writes the output files.
/// `threads == 0` uses every available core.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nonadiab_run(cfg: *const NonadiabConfig, threads: usize) -> NonadiabStatus {
    guard(|| {
        let cfg = handle(cfg, "cfg")?;
        let threads = if threads == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            threads
        };
        run(&cfg.inner, threads).map_err(engine)?;
        Ok(())
    })
}

/// Samples the initial ensemble of a trajectory method.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nonadiab_ensemble_new(
    cfg: *const NonadiabConfig,
    out: *mut *mut NonadiabEnsemble,
) -> NonadiabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg = handle(cfg, "cfg")?;
        cfg.inner.validate().map_err(engine)?;
        let inner = Ensemble::from_config(&cfg.inner).map_err(engine)?;
        *out = Box::into_raw(Box::new(NonadiabEnsemble { inner }));
        Ok(())
    })
}

/// # Safety
/// `ens` must come from [`nonadiab_ensemble_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nonadiab_ensemble_free(ens: *mut NonadiabEnsemble) {
    if !ens.is_null() {
        drop(Box::from_raw(ens));
    }
}

/// Advances the ensemble by `steps` time steps. Stops at the first failure.
///
/// # Safety
/// `ens` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nonadiab_ensemble_step(ens: *mut NonadiabEnsemble, steps: usize) -> NonadiabStatus {
    guard(|| {
        let ens = handle_mut(ens, "ens")?;
        for _ in 0..steps {
            ens.inner.step().map_err(engine)?;
        }
        Ok(())
    })
}

/// Number of trajectories, or 0 for a null handle.
///
/// # Safety
/// `ens` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nonadiab_ensemble_len(ens: *const NonadiabEnsemble) -> usize {
    ens.as_ref().map_or(0, |e| e.inner.len())
}

/// Current time (a.u.), population of each state and the decoherence
/// indicator.
///
/// # Safety
/// `ens` must be a live handle; the output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nonadiab_ensemble_observables(
    ens: *const NonadiabEnsemble,
    time: *mut f64,
    populations: *mut [f64; 2],
    coherence: *mut f64,
) -> NonadiabStatus {
    guard(|| {
        let ens = handle(ens, "ens")?;
        if time.is_null() || populations.is_null() || coherence.is_null() {
            return Err(null("output pointer"));
        }
        *time = ens.inner.time;
        *populations = ens.inner.populations();
        *coherence = ens.inner.coherence();
        Ok(())
    })
}

/// Copies the trajectory positions into `buf`, which must hold at least
/// [`nonadiab_ensemble_len`] values.
///
/// # Safety
/// `ens` must be a live handle and `buf` valid for `len` values.
#[no_mangle]
pub unsafe extern "C" fn nonadiab_ensemble_positions(
    ens: *const NonadiabEnsemble,
    buf: *mut f64,
    len: usize,
) -> NonadiabStatus {
    guard(|| {
        let ens = handle(ens, "ens")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let n = ens.inner.len();
        if len < n {
            return Err((
                NonadiabStatus::BufferTooSmall,
                format!("{n} positions, buffer holds {len}"),
            ));
        }
        for (i, t) in ens.inner.trajectories.iter().enumerate() {
            *buf.add(i) = t.r;
        }
        Ok(())
    })
}

/// Adiabatic energies and the non-adiabatic coupling of a benchmark model
/// (`"single_avoided"`, `"dual_avoided"`, `"extended_coupling"`,
/// `"double_arch"`) with default parameters.
///
/// # Safety
/// `model` must be a NUL-terminated string; the output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nonadiab_model_adiabatic(
    model: *const c_char,
    r: f64,
    energies: *mut [f64; 2],
    nacv: *mut f64,
) -> NonadiabStatus {
    guard(|| {
        let kind: ModelKind = read_str(model, "model")?.parse().map_err(engine)?;
        if energies.is_null() || nacv.is_null() {
            return Err(null("output pointer"));
        }
        let point = DiabaticModel::new(kind).adiabatic_point(r, None).map_err(engine)?;
        *energies = point.energies;
        *nacv = point.nacv;
        Ok(())
    })
}
