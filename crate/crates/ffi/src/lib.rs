//! C ABI over the planner. Scenes and plan results are opaque handles;
//! every fallible call returns a [`PcdStatus`] and leaves a message for
//! [`pcd_last_error_message`] on failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pcd::collision::Scene;
use pcd::error::Error;
use pcd::geometry::Configuration;
use pcd::planner::{plan, plan_untraced, PlanResult, PlannerConfig};

/// Status codes. `Ok` is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    SceneFormat = 4,
    DimensionMismatch = 5,
    InCollision = 6,
    BufferTooSmall = 7,
    NoTrace = 8,
    Internal = 9,
    Panic = 10,
}

/// A parsed scene.
pub struct PcdScene {
    scene: Scene,
}

/// The outcome of one planning query.
pub struct PcdPlanResult {
    result: PlanResult,
    dimension: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcdConfig {
    /// Collision probe spacing along local paths.
    pub resolution: f64,
    pub max_iterations: u64,
    pub seed: u64,
    pub store_checkpath_samples: bool,
    /// Keep the event trace so it can be fetched with `pcd_result_trace_jsonl`.
    pub record_trace: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PcdCounts {
    pub splits: u64,
    pub samples: u64,
    pub probes: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("NULs were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> PcdStatus {
    match e {
        Error::DimensionMismatch { .. } => PcdStatus::DimensionMismatch,
        Error::InCollision(_) => PcdStatus::InCollision,
        Error::SceneFormat(_) | Error::UnsupportedVersion { .. } | Error::Json(_) => PcdStatus::SceneFormat,
        Error::InvalidArgument(_) | Error::OutOfUnitCube { .. } | Error::AxisOutOfRange { .. } => {
            PcdStatus::InvalidArgument
        }
        _ => PcdStatus::Internal,
    }
}

struct Failure(PcdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

/// Runs `f`, records any failure and converts panics into `Panic`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PcdStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PcdStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PcdStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: callers pass either NULL or a pointer obtained from this library.
    unsafe { p.as_ref() }.ok_or_else(|| Failure(PcdStatus::NullPointer, format!("{what} is NULL")))
}

fn coords(p: *const f64, len: usize, what: &str) -> Result<Configuration, Failure> {
    if p.is_null() {
        return Err(Failure(PcdStatus::NullPointer, format!("{what} is NULL")));
    }
    // SAFETY: the caller guarantees `p` points to `len` readable doubles.
    let slice = unsafe { std::slice::from_raw_parts(p, len) };
    Ok(Configuration::new(slice.to_vec())?)
}

fn string_out(out: *mut *mut c_char, text: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(PcdStatus::NullPointer, "out is NULL".into()));
    }
    let c = CString::new(text).map_err(|e| Failure(PcdStatus::Internal, e.to_string()))?;
    // SAFETY: checked non-null above.
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. Valid until
/// the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn pcd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pcd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn pcd_config_default() -> PcdConfig {
    let d = PlannerConfig::default();
    PcdConfig {
        resolution: d.resolution,
        max_iterations: d.max_iterations,
        seed: d.seed,
        store_checkpath_samples: d.store_checkpath_samples,
        record_trace: false,
    }
}

/// Parses a scene document. On success `*out` owns a new scene that must be
/// released with `pcd_scene_free`.
///
/// # Safety
/// `json` must be NULL or a NUL-terminated string; `out` must be NULL or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn pcd_scene_from_json(json: *const c_char, out: *mut *mut PcdScene) -> PcdStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return Err(Failure(PcdStatus::NullPointer, "json and out must be non-NULL".into()));
        }
        // SAFETY: non-null and NUL-terminated per the contract.
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|e| Failure(PcdStatus::InvalidUtf8, e.to_string()))?;
        let file = pcd::io::load_scene(text, "scene")?;
        let handle = Box::new(PcdScene { scene: file.scene });
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(handle) };
        Ok(())
    })
}

/// Dimension of `scene`, or 0 for NULL.
///
/// # Safety
/// `scene` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pcd_scene_dimension(scene: *const PcdScene) -> usize {
    // SAFETY: NULL or a live handle per the contract.
    unsafe { scene.as_ref() }.map_or(0, |s| s.scene.dimension)
}

/// Writes whether `q` (of `len` coordinates) lies inside an obstacle.
///
/// # Safety
/// `scene` must be a live handle, `q` must point to `len` doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcd_scene_collides(
    scene: *const PcdScene,
    q: *const f64,
    len: usize,
    out: *mut bool,
) -> PcdStatus {
    guard(|| {
        let scene = &non_null(scene, "scene")?.scene;
        let q = coords(q, len, "q")?;
        if q.dimension() != scene.dimension {
            return Err(Failure(
                PcdStatus::DimensionMismatch,
                format!("expected {} coordinates, got {len}", scene.dimension),
            ));
        }
        if out.is_null() {
            return Err(Failure(PcdStatus::NullPointer, "out is NULL".into()));
        }
        // SAFETY: checked non-null above.
        unsafe { *out = scene.collides(q.coords()) };
        Ok(())
    })
}

/// Releases a scene. NULL is ignored.
///
/// # Safety
/// `scene` must be NULL or a handle from `pcd_scene_from_json` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pcd_scene_free(scene: *mut PcdScene) {
    if !scene.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(scene) });
    }
}

/// Plans from `start` to `goal`, each of `len` coordinates. An exhausted
/// budget is not an error: check `pcd_result_solved`. On success `*out`
/// owns a result that must be released with `pcd_result_free`.
///
/// # Safety
/// `scene` must be a live handle, `start` and `goal` must point to `len`
/// doubles and `config` must be NULL (defaults) or readable.
#[no_mangle]
pub unsafe extern "C" fn pcd_plan(
    scene: *const PcdScene,
    start: *const f64,
    goal: *const f64,
    len: usize,
    config: *const PcdConfig,
    out: *mut *mut PcdPlanResult,
) -> PcdStatus {
    guard(|| {
        let scene = &non_null(scene, "scene")?.scene;
        let (start, goal) = (coords(start, len, "start")?, coords(goal, len, "goal")?);
        // SAFETY: NULL or readable per the contract.
        let c = unsafe { config.as_ref() }.copied().unwrap_or_else(|| pcd_config_default());
        if out.is_null() {
            return Err(Failure(PcdStatus::NullPointer, "out is NULL".into()));
        }
        let config = PlannerConfig {
            resolution: c.resolution,
            max_iterations: c.max_iterations,
            seed: c.seed,
            store_checkpath_samples: c.store_checkpath_samples,
        };
        let result = if c.record_trace {
            plan(scene, &start, &goal, &config)?
        } else {
            plan_untraced(scene, &start, &goal, &config)?
        };
        let handle = Box::new(PcdPlanResult {
            result,
            dimension: len,
        });
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(handle) };
        Ok(())
    })
}

/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pcd_result_solved(result: *const PcdPlanResult) -> bool {
    // SAFETY: NULL or a live handle per the contract.
    unsafe { result.as_ref() }.is_some_and(|r| r.result.is_solved())
}

/// Outer iterations run, which is the solve iteration for solved results.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pcd_result_iterations(result: *const PcdPlanResult) -> u64 {
    // SAFETY: NULL or a live handle per the contract.
    unsafe { result.as_ref() }.map_or(0, |r| r.result.iterations)
}

/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pcd_result_counts(result: *const PcdPlanResult) -> PcdCounts {
    // SAFETY: NULL or a live handle per the contract.
    unsafe { result.as_ref() }.map_or_else(PcdCounts::default, |r| PcdCounts {
        splits: r.result.counts.splits,
        samples: r.result.counts.samples,
        probes: r.result.counts.probes,
    })
}

/// Number of path waypoints; 0 when unsolved.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pcd_result_waypoint_count(result: *const PcdPlanResult) -> usize {
    // SAFETY: NULL or a live handle per the contract.
    unsafe { result.as_ref() }
        .and_then(|r| r.result.path())
        .map_or(0, |p| p.waypoints().len())
}

/// Copies the waypoints, row-major, into `buf` of `len` doubles. `len` must
/// be at least waypoint count times dimension.
///
/// # Safety
/// `result` must be a live handle and `buf` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn pcd_result_waypoints(result: *const PcdPlanResult, buf: *mut f64, len: usize) -> PcdStatus {
    guard(|| {
        let r = non_null(result, "result")?;
        let Some(path) = r.result.path() else {
            return Err(Failure(PcdStatus::InvalidArgument, "the query was not solved".into()));
        };
        let need = path.waypoints().len() * r.dimension;
        if len < need {
            return Err(Failure(PcdStatus::BufferTooSmall, format!("need {need} doubles, got {len}")));
        }
        if buf.is_null() {
            return Err(Failure(PcdStatus::NullPointer, "buf is NULL".into()));
        }
        // SAFETY: `buf` holds at least `need` doubles per the contract.
        let out = unsafe { std::slice::from_raw_parts_mut(buf, need) };
        for (chunk, q) in out.chunks_mut(r.dimension).zip(path.waypoints()) {
            chunk.copy_from_slice(q.coords());
        }
        Ok(())
    })
}

/// Writes the JSON-lines trace to `*out`; release it with `pcd_string_free`.
/// Fails with `NoTrace` unless the plan ran with `record_trace`.
///
/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pcd_result_trace_jsonl(result: *const PcdPlanResult, out: *mut *mut c_char) -> PcdStatus {
    guard(|| {
        let r = non_null(result, "result")?;
        let trace = r
            .result
            .trace
            .as_ref()
            .ok_or_else(|| Failure(PcdStatus::NoTrace, "plan ran without record_trace".into()))?;
        string_out(out, trace.to_jsonl())
    })
}

/// Releases a plan result. NULL is ignored.
///
/// # Safety
/// `result` must be NULL or a handle from `pcd_plan` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pcd_result_free(result: *mut PcdPlanResult) {
    if !result.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(result) });
    }
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pcd_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: produced by CString::into_raw in this library.
        drop(unsafe { CString::from_raw(s) });
    }
}
