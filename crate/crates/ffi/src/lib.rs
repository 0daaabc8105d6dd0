//! C ABI over the `pedlead` analysis library.
//!
//! Every entry point returns a [`PlStatus`]; results come back through out
//! pointers. On failure the message for the calling thread is available
//! from [`pl_last_error_message`] until the next call on that thread.
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::io::Cursor;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use pedlead::error::Error;
use pedlead::lagcorr::Mode;
use pedlead::network::{dpi_prune, InfluenceNetwork};
use pedlead::report::{self, RunConfig, TrialAnalysis};
use pedlead::simulate::{simulate_trial, SimConfig};
use pedlead::trajectory::{load_trial, truncate, AgentId, Trial, TrialFormat};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Structure = 4,
    Timing = 5,
    Range = 6,
    TooShort = 7,
    Undefined = 8,
    Config = 9,
    Io = 10,
    Json = 11,
    OutOfBounds = 12,
    Panic = 13,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlMode {
    Heading = 0,
    Speed = 1,
}

impl From<PlMode> for Mode {
    fn from(m: PlMode) -> Mode {
        match m {
            PlMode::Heading => Mode::Heading,
            PlMode::Speed => Mode::Speed,
        }
    }
}

/// Analysis settings. Obtain defaults from [`pl_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlParams {
    pub mode: PlMode,
    /// Half-window in samples; 0 selects the per-mode default.
    pub omega: usize,
    pub tau_max_s: f64,
    pub windows: usize,
    pub theta: f64,
    pub heading_cutoff_hz: f64,
    pub speed_cutoff_hz: f64,
}

/// A loaded or simulated trial.
pub struct PlTrial {
    trial: Trial,
}

/// Results of analyzing one trial in one mode.
pub struct PlAnalysis {
    analysis: TrialAnalysis,
    config: RunConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PlStatus {
    match e {
        Error::Parse { .. } => PlStatus::Parse,
        Error::Structure(_) => PlStatus::Structure,
        Error::Timing(_) => PlStatus::Timing,
        Error::Range(_) => PlStatus::Range,
        Error::TooShort { .. } => PlStatus::TooShort,
        Error::EmptyMap(..) | Error::UndefinedScore(_) => PlStatus::Undefined,
        Error::FilterDesign(_) | Error::Config(_) => PlStatus::Config,
        Error::Io { .. } => PlStatus::Io,
        Error::Json { .. } => PlStatus::Json,
    }
}

struct Failure(PlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail<T>(status: PlStatus, message: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, message.into()))
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> PlStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => PlStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal panic".into());
            set_error(message);
            PlStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: non-null pointers come from this library or the caller's valid memory
    unsafe { p.as_ref() }.ok_or_else(|| Failure(PlStatus::NullArgument, format!("{what} is null")))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return fail(PlStatus::NullArgument, format!("{what} is null"));
    }
    // SAFETY: checked non-null; caller guarantees it is writable
    unsafe { out.write(value) };
    Ok(())
}

unsafe fn c_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return fail(PlStatus::NullArgument, format!("{what} is null"));
    }
    // SAFETY: caller passes a nul-terminated string
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| Failure(PlStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn boxed_trial(trial: Trial) -> *mut PlTrial {
    Box::into_raw(Box::new(PlTrial { trial }))
}

/// Message describing the last failure on this thread, or NULL. The
/// pointer stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn pl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pl_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: allocated by CString::into_raw in this library
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Loads a long-format trial CSV from a file path.
///
/// # Safety
/// `path` must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pl_trial_load_path(
    path: *const c_char,
    out: *mut *mut PlTrial,
) -> PlStatus {
    guard(|| {
        let path = unsafe { c_str(path, "path") }?;
        let trial = report::load_trial_file(Path::new(path))?;
        unsafe { put(out, boxed_trial(trial), "out") }
    })
}

/// Loads a long-format trial CSV from `len` bytes at `data`.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pl_trial_load_buffer(
    data: *const u8,
    len: usize,
    out: *mut *mut PlTrial,
) -> PlStatus {
    guard(|| {
        if data.is_null() {
            return fail(PlStatus::NullArgument, "data is null");
        }
        // SAFETY: caller guarantees `len` readable bytes
        let bytes = unsafe { std::slice::from_raw_parts(data, len) };
        let trial = load_trial(Cursor::new(bytes), TrialFormat::LongCsv)?;
        unsafe { put(out, boxed_trial(trial), "out") }
    })
}

/// Simulates a trial from a JSON simulation config.
///
/// # Safety
/// `config_json` must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pl_simulate_json(
    config_json: *const c_char,
    out: *mut *mut PlTrial,
) -> PlStatus {
    guard(|| {
        let text = unsafe { c_str(config_json, "config_json") }?;
        let config: SimConfig = serde_json::from_str(text)
            .map_err(|e| Failure(PlStatus::Json, format!("config: {e}")))?;
        let trial = simulate_trial(&config)?;
        unsafe { put(out, boxed_trial(trial), "out") }
    })
}

/// # Safety
/// `trial` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pl_trial_free(trial: *mut PlTrial) {
    if !trial.is_null() {
        // SAFETY: allocated by Box::into_raw in this library
        drop(unsafe { Box::from_raw(trial) });
    }
}

/// # Safety
/// `trial` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pl_trial_agent_count(trial: *const PlTrial, out: *mut usize) -> PlStatus {
    guard(|| {
        let t = unsafe { deref(trial, "trial") }?;
        unsafe { put(out, t.trial.n_agents(), "out") }
    })
}

/// # Safety
/// `trial` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pl_trial_sample_count(trial: *const PlTrial, out: *mut usize) -> PlStatus {
    guard(|| {
        let t = unsafe { deref(trial, "trial") }?;
        unsafe { put(out, t.trial.len(), "out") }
    })
}

/// Copies the id of agent `index` into `buf` (nul-terminated, truncated
/// to `cap`), and the full length excluding the nul into `len_out`.
///
/// # Safety
/// `trial` must be a live handle; `buf` must have `cap` writable bytes or
/// be NULL with `cap` 0; `len_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pl_trial_agent_id(
    trial: *const PlTrial,
    index: usize,
    buf: *mut c_char,
    cap: usize,
    len_out: *mut usize,
) -> PlStatus {
    guard(|| {
        let t = unsafe { deref(trial, "trial") }?;
        let Some(id) = t.trial.agents.get(index) else {
            return fail(
                PlStatus::OutOfBounds,
                format!("agent {index} of {}", t.trial.n_agents()),
            );
        };
        let bytes = id.as_str().as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            // SAFETY: n + 1 <= cap bytes are writable
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n) = 0;
            }
        }
        unsafe { put(len_out, bytes.len(), "len_out") }
    })
}

/// Drops `head_s` seconds from the start and `tail_s` from the end.
///
/// # Safety
/// `trial` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pl_trial_truncate(
    trial: *const PlTrial,
    head_s: f64,
    tail_s: f64,
    out: *mut *mut PlTrial,
) -> PlStatus {
    guard(|| {
        let t = unsafe { deref(trial, "trial") }?;
        let cut = truncate(&t.trial, head_s, tail_s)?;
        unsafe { put(out, boxed_trial(cut), "out") }
    })
}

#[no_mangle]
pub extern "C" fn pl_params_default(mode: PlMode) -> PlParams {
    let c = RunConfig::default();
    PlParams {
        mode,
        omega: 0,
        tau_max_s: c.tau_max_s,
        windows: c.windows,
        theta: c.theta,
        heading_cutoff_hz: c.kinematics.heading_cutoff_hz,
        speed_cutoff_hz: c.kinematics.speed_cutoff_hz,
    }
}

/// Runs the full analysis in one mode.
///
/// # Safety
/// `trial` and `params` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pl_analyze(
    trial: *const PlTrial,
    params: *const PlParams,
    out: *mut *mut PlAnalysis,
) -> PlStatus {
    guard(|| {
        let t = unsafe { deref(trial, "trial") }?;
        let p = *unsafe { deref(params, "params") }?;
        let mut config = RunConfig {
            modes: vec![p.mode.into()],
            omega: (p.omega > 0).then_some(p.omega),
            tau_max_s: p.tau_max_s,
            windows: p.windows,
            theta: p.theta,
            ..RunConfig::default()
        };
        config.kinematics.heading_cutoff_hz = p.heading_cutoff_hz;
        config.kinematics.speed_cutoff_hz = p.speed_cutoff_hz;
        let analysis = report::analyze_trial("trial", &t.trial, &config)?;
        let handle = Box::into_raw(Box::new(PlAnalysis { analysis, config }));
        unsafe { put(out, handle, "out") }
    })
}

/// # Safety
/// `analysis` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pl_analysis_free(analysis: *mut PlAnalysis) {
    if !analysis.is_null() {
        // SAFETY: allocated by Box::into_raw in this library
        drop(unsafe { Box::from_raw(analysis) });
    }
}

impl PlAnalysis {
    fn mode(&self) -> &report::ModeAnalysis {
        &self.analysis.modes[0]
    }
}

/// Leadership index of agent `agent`, in percent.
///
/// # Safety
/// `analysis` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pl_analysis_leadership_index(
    analysis: *const PlAnalysis,
    agent: usize,
    out: *mut f64,
) -> PlStatus {
    guard(|| {
        let a = unsafe { deref(analysis, "analysis") }?;
        let Some(score) = a.mode().scores.get(agent) else {
            return fail(PlStatus::OutOfBounds, format!("agent {agent}"));
        };
        unsafe { put(out, score.index_percent, "out") }
    })
}

/// # Safety
/// `analysis` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pl_analysis_window_count(
    analysis: *const PlAnalysis,
    out: *mut usize,
) -> PlStatus {
    guard(|| {
        let a = unsafe { deref(analysis, "analysis") }?;
        unsafe { put(out, a.mode().networks.len(), "out") }
    })
}

/// Weight of edge `from -> to` in the pruned network of `window`; 0 when
/// the edge was removed.
///
/// # Safety
/// `analysis` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pl_analysis_edge_weight(
    analysis: *const PlAnalysis,
    window: usize,
    from: usize,
    to: usize,
    out: *mut f64,
) -> PlStatus {
    guard(|| {
        let a = unsafe { deref(analysis, "analysis") }?;
        let Some(w) = a.mode().networks.get(window) else {
            return fail(PlStatus::OutOfBounds, format!("window {window}"));
        };
        let n = w.pruned.nodes.len();
        if from >= n || to >= n {
            return fail(
                PlStatus::OutOfBounds,
                format!("edge ({from}, {to}) with {n} agents"),
            );
        }
        unsafe { put(out, w.pruned.weight(from, to), "out") }
    })
}

/// Leadership and network reports as one JSON object
/// `{"leadership": ..., "network": ...}`. Free with [`pl_string_free`].
///
/// # Safety
/// `analysis` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pl_analysis_to_json(
    analysis: *const PlAnalysis,
    out: *mut *mut c_char,
) -> PlStatus {
    guard(|| {
        let a = unsafe { deref(analysis, "analysis") }?;
        let value = serde_json::json!({
            "leadership": report::leadership_report(&a.analysis, a.mode(), &a.config),
            "network": report::network_report(&a.analysis, a.mode(), &a.config),
        });
        let text = CString::new(value.to_string()).expect("json has no nul bytes");
        unsafe { put(out, text.into_raw(), "out") }
    })
}

/// DPI pruning of a dense `n x n` row-major weight matrix (`weights[i*n+j]`
/// is the edge i -> j; diagonal ignored, 0 means absent). The pruned
/// matrix is written to `out`, which may alias `weights`.
///
/// # Safety
/// `weights` and `out` must each hold `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn pl_dpi_prune(n: usize, weights: *const f64, out: *mut f64) -> PlStatus {
    guard(|| {
        if weights.is_null() || out.is_null() {
            return fail(PlStatus::NullArgument, "weights or out is null");
        }
        let cells = n
            .checked_mul(n)
            .ok_or_else(|| Failure(PlStatus::OutOfBounds, format!("n = {n}")))?;
        // SAFETY: caller guarantees n*n readable doubles; copied before any write
        let input = unsafe { std::slice::from_raw_parts(weights, cells) }.to_vec();
        let mut net = InfluenceNetwork {
            window: 0..0,
            nodes: (0..n).map(|k| AgentId::new(k.to_string())).collect(),
            edges: Default::default(),
            undefined: Default::default(),
        };
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let w = input[i * n + j];
                if !w.is_finite() || w < 0.0 {
                    return fail(PlStatus::Range, format!("weight ({i}, {j}) = {w}"));
                }
                if w > 0.0 {
                    net.edges.insert((i, j), w);
                }
            }
        }
        let pruned = dpi_prune(&net);
        // SAFETY: caller guarantees n*n writable doubles
        let dst = unsafe { std::slice::from_raw_parts_mut(out, cells) };
        dst.fill(0.0);
        for (&(i, j), &w) in &pruned.edges {
            dst[i * n + j] = w;
        }
        Ok(())
    })
}
