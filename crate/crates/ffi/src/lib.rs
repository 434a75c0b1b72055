//! C ABI over `sagin-core`.
//!
//! Scenarios and runs are opaque heap handles owned by the caller and
//! released with their `_free` function. Every fallible call returns a
//! [`SaginStatus`]; on failure the message is kept per thread and read back
//! with [`sagin_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use sagin_core::experiment::{
    policy_for, run_pipeline, OffloadMode, PipelineOptions, RunOutput, Scheme, Solution,
};
use sagin_core::scenario::{Scenario, ScenarioConfig};
use sagin_core::selection::SelectionKind;
use sagin_core::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaginStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Config = 4,
    NotFound = 5,
    Infeasible = 6,
    Scheduling = 7,
    Integrity = 8,
    Io = 9,
    OutOfRange = 10,
    Panic = 11,
}

/// Collection scheme selector for [`sagin_run`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaginScheme {
    Proposed = 0,
    RScheme = 1,
    FScheme = 2,
}

/// Satellite selection policy selector for [`sagin_run`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaginSelection {
    MaxThroughput = 0,
    Random = 1,
    Unchanging = 2,
}

/// Offload timing selector for [`sagin_run`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaginOffloadMode {
    Batch = 0,
    PerHover = 1,
}

/// Pipeline settings. Enum-valued fields hold the integer values of
/// [`SaginScheme`], [`SaginSelection`] and [`SaginOffloadMode`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaginRunOptions {
    pub scheme: u32,
    pub selection: u32,
    pub offload_mode: u32,
    pub gwo_population: usize,
    pub gwo_iterations: usize,
}

/// Energy breakdown in joules.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SaginEnergyReport {
    pub hover_energy_p1: f64,
    pub flight_energy: f64,
    pub device_energy: f64,
    pub sat_compute_energy: f64,
    pub hover_energy_p2: f64,
    pub total: f64,
}

/// One offload event.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SaginDecision {
    pub uav_id: u32,
    pub sat_id: u32,
    pub t_request: f64,
    pub t_wait: f64,
    pub t_offload: f64,
    pub elevation: f64,
    pub rate: f64,
    pub data_bits: u64,
    pub t_tr: f64,
    pub t_sa: f64,
}

/// Opaque scenario handle.
pub struct SaginScenario {
    inner: Scenario,
}

/// Opaque handle to a finished pipeline run.
pub struct SaginRun {
    scenario: Scenario,
    output: RunOutput,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(SaginStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidArgument(_) => SaginStatus::InvalidArgument,
            Error::Parse { .. } => SaginStatus::Parse,
            Error::Config(_) => SaginStatus::Config,
            Error::NotFound(_) => SaginStatus::NotFound,
            Error::Infeasible(_) => SaginStatus::Infeasible,
            Error::Scheduling(_) => SaginStatus::Scheduling,
            Error::Integrity(_) => SaginStatus::Integrity,
            Error::Io { .. } | Error::Csv(_) => SaginStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SaginStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any failure or panic, and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SaginStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            clear_last_error();
            SaginStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {message}"));
            SaginStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SaginStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

/// # Safety
/// `out` is null or valid for writes.
unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn scheme_from(v: u32) -> Result<Scheme, Failure> {
    match v {
        0 => Ok(Scheme::Proposed),
        1 => Ok(Scheme::RScheme),
        2 => Ok(Scheme::FScheme),
        _ => Err(Failure(
            SaginStatus::InvalidArgument,
            format!("unknown scheme {v}"),
        )),
    }
}

fn selection_from(v: u32) -> Result<SelectionKind, Failure> {
    match v {
        0 => Ok(SelectionKind::MaxThroughput),
        1 => Ok(SelectionKind::Random),
        2 => Ok(SelectionKind::Unchanging),
        _ => Err(Failure(
            SaginStatus::InvalidArgument,
            format!("unknown selection policy {v}"),
        )),
    }
}

fn offload_mode_from(v: u32) -> Result<OffloadMode, Failure> {
    match v {
        0 => Ok(OffloadMode::Batch),
        1 => Ok(OffloadMode::PerHover),
        _ => Err(Failure(
            SaginStatus::InvalidArgument,
            format!("unknown offload mode {v}"),
        )),
    }
}

fn into_handle<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn sagin_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sagin_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default pipeline settings: proposed scheme, max-throughput selection,
/// batch offload, GWO 50 x 200.
#[no_mangle]
pub extern "C" fn sagin_run_options_default() -> SaginRunOptions {
    let d = PipelineOptions::default();
    SaginRunOptions {
        scheme: SaginScheme::Proposed as u32,
        selection: SaginSelection::MaxThroughput as u32,
        offload_mode: SaginOffloadMode::Batch as u32,
        gwo_population: d.gwo_population,
        gwo_iterations: d.gwo_iterations,
    }
}

/// Generates a scenario from the default configuration with the given seed
/// and counts.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sagin_scenario_generate(
    seed: u64,
    devices: usize,
    uavs: usize,
    sats: usize,
    out: *mut *mut SaginScenario,
) -> SaginStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = ScenarioConfig {
            seed,
            devices,
            uavs,
            sats,
            ..ScenarioConfig::default()
        };
        let inner = cfg.generate()?;
        write_out(out, into_handle(SaginScenario { inner }), "out")
    })
}

/// Generates a scenario from a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sagin_scenario_from_config(
    path: *const c_char,
    out: *mut *mut SaginScenario,
) -> SaginStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = ScenarioConfig::load(&path)?.generate()?;
        write_out(out, into_handle(SaginScenario { inner }), "out")
    })
}

/// Loads a scenario snapshot written by [`sagin_scenario_save`] or `sagin gen`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sagin_scenario_load(
    path: *const c_char,
    out: *mut *mut SaginScenario,
) -> SaginStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = Scenario::load(&path)?;
        write_out(out, into_handle(SaginScenario { inner }), "out")
    })
}

/// # Safety
/// `scenario` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sagin_scenario_save(
    scenario: *const SaginScenario,
    path: *const c_char,
) -> SaginStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let path = path_arg(path, "path")?;
        s.inner.save(&path)?;
        Ok(())
    })
}

/// Number of IoT devices, or 0 for a null handle.
///
/// # Safety
/// `scenario` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sagin_scenario_device_count(scenario: *const SaginScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.inner.devices.len())
}

/// Total device data in bits, or 0 for a null handle.
///
/// # Safety
/// `scenario` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sagin_scenario_total_bits(scenario: *const SaginScenario) -> u64 {
    scenario.as_ref().map_or(0, |s| s.inner.total_data_bits())
}

/// # Safety
/// `scenario` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sagin_scenario_free(scenario: *mut SaginScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs collection, trajectory planning and offloading on a scenario.
///
/// # Safety
/// `scenario` must be a live handle, `options` null (defaults) or valid,
/// and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sagin_run(
    scenario: *const SaginScenario,
    options: *const SaginRunOptions,
    out: *mut *mut SaginRun,
) -> SaginStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let o = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| sagin_run_options_default());
        let scheme = scheme_from(o.scheme)?;
        let selection = selection_from(o.selection)?;
        let opts = PipelineOptions {
            gwo_population: o.gwo_population,
            gwo_iterations: o.gwo_iterations,
            offload_mode: offload_mode_from(o.offload_mode)?,
            ..PipelineOptions::default()
        };
        let output = run_pipeline(&s.inner, scheme, &policy_for(&s.inner, selection), &opts)?;
        let run = SaginRun {
            scenario: s.inner.clone(),
            output,
        };
        write_out(out, into_handle(run), "out")
    })
}

/// # Safety
/// `run` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sagin_run_report(
    run: *const SaginRun,
    out: *mut SaginEnergyReport,
) -> SaginStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let e = &r.output.report;
        let report = SaginEnergyReport {
            hover_energy_p1: e.hover_energy_p1,
            flight_energy: e.flight_energy,
            device_energy: e.device_energy,
            sat_compute_energy: e.sat_compute_energy,
            hover_energy_p2: e.hover_energy_p2,
            total: e.total,
        };
        write_out(out, report, "out")
    })
}

/// Total UAV flight distance in meters.
///
/// # Safety
/// `run` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sagin_run_flight_distance(
    run: *const SaginRun,
    out: *mut f64,
) -> SaginStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        write_out(out, r.output.flight_distance(), "out")
    })
}

/// Number of offload events, or 0 for a null handle.
///
/// # Safety
/// `run` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sagin_run_decision_count(run: *const SaginRun) -> usize {
    run.as_ref()
        .map_or(0, |r| r.output.artifacts.decisions.len())
}

/// # Safety
/// `run` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sagin_run_decision(
    run: *const SaginRun,
    index: usize,
    out: *mut SaginDecision,
) -> SaginStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let decisions = &r.output.artifacts.decisions;
        let d = decisions.get(index).ok_or_else(|| {
            Failure(
                SaginStatus::OutOfRange,
                format!("decision {index} out of range ({} events)", decisions.len()),
            )
        })?;
        let c = SaginDecision {
            uav_id: d.uav_id,
            sat_id: d.sat_id,
            t_request: d.t_request,
            t_wait: d.t_wait,
            t_offload: d.t_offload,
            elevation: d.elevation,
            rate: d.rate_at_selection,
            data_bits: d.data_bits,
            t_tr: d.t_tr,
            t_sa: d.t_sa,
        };
        write_out(out, c, "out")
    })
}

/// Number of constraint violations found when re-checking the run.
///
/// # Safety
/// `run` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sagin_run_violation_count(
    run: *const SaginRun,
    out: *mut usize,
) -> SaginStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        write_out(out, r.output.violations(&r.scenario).len(), "out")
    })
}

/// Writes the full solution (scenario plus decisions) as TOML, readable by
/// `sagin validate`.
///
/// # Safety
/// `run` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sagin_run_save_solution(
    run: *const SaginRun,
    path: *const c_char,
) -> SaginStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let path = path_arg(path, "path")?;
        let solution = Solution {
            scheme: r.output.scheme,
            selection: r.output.selection,
            scenario: r.scenario.clone(),
            artifacts: r.output.artifacts.clone(),
        };
        let text = solution.to_toml_string()?;
        std::fs::write(&path, text)
            .map_err(|e| Failure(SaginStatus::Io, format!("{}: {e}", path.display())))
    })
}

/// # Safety
/// `run` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sagin_run_free(run: *mut SaginRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
