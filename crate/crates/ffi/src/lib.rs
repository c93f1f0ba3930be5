//! C ABI over `psnsim_core`.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `_free` function. Every fallible call returns a
//! [`PsnStatus`]. On failure a description is available from
//! [`psn_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use psnsim_core::mac::Protocol;
use psnsim_core::metrics::info_delay_cdf;
use psnsim_core::network::{run_scenario, RunOutput};
use psnsim_core::output::{traffic_lambda, write_artifacts, RunSummary};
use psnsim_core::scenario::{Prepared, ScenarioConfig, TopologyKind};
use psnsim_core::Error;

pub const PSN_TOPOLOGY_CROSSROAD: u32 = 0;
pub const PSN_TOPOLOGY_LINE: u32 = 1;
pub const PSN_TOPOLOGY_MESH: u32 = 2;

pub const PSN_PROTOCOL_CSMA: u32 = 0;
pub const PSN_PROTOCOL_TDMA: u32 = 1;
pub const PSN_PROTOCOL_FUNNELING: u32 = 2;
pub const PSN_PROTOCOL_IQUEUE: u32 = 3;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsnStatus {
    Ok = 0,
    /// A required pointer was null.
    NullArgument = 1,
    /// An argument was out of range or not valid UTF-8.
    InvalidArgument = 2,
    /// The scenario failed validation.
    Config = 3,
    /// The simulation or its statistics failed.
    Runtime = 4,
    /// Writing artifacts failed.
    Io = 5,
    /// An internal panic was caught at the boundary.
    Panic = 6,
}

/// A scenario description, not yet validated.
pub struct PsnScenario {
    config: ScenarioConfig,
}

/// The result of one simulation run.
pub struct PsnRun {
    prepared: Prepared,
    runs: Vec<RunOutput>,
    summary: RunSummary,
}

/// Headline metrics of a run. Unavailable values are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsnSummary {
    pub seed: u64,
    pub events: u64,
    pub cycle_length_s: f64,
    pub records: u64,
    pub delivered: u64,
    pub delivery_ratio: f64,
    pub delay_p50_s: f64,
    pub delay_p90_s: f64,
    pub delay_p99_s: f64,
    pub data_delivered: u64,
    pub data_collided: u64,
    pub data_lost: u64,
    pub data_dropped: u64,
    pub interarrival_shape: f64,
    pub interarrival_scale_s: f64,
    pub sensor_lifetime_mean_days: f64,
    pub sensor_lifetime_min_days: f64,
    pub router_lifetime_mean_days: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(PsnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Config(_) => PsnStatus::Config,
            Error::Io(_) => PsnStatus::Io,
            _ => PsnStatus::Runtime,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PsnStatus::NullArgument, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(PsnStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PsnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PsnStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            PsnStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn scenario_ref<'a>(p: *const PsnScenario) -> Result<&'a PsnScenario, Failure> {
    p.as_ref().ok_or_else(|| null("scenario"))
}

unsafe fn run_ref<'a>(p: *const PsnRun) -> Result<&'a PsnRun, Failure> {
    p.as_ref().ok_or_else(|| null("run"))
}

fn topology_from(v: u32) -> Result<TopologyKind, Failure> {
    match v {
        PSN_TOPOLOGY_CROSSROAD => Ok(TopologyKind::Crossroad),
        PSN_TOPOLOGY_LINE => Ok(TopologyKind::Line),
        PSN_TOPOLOGY_MESH => Ok(TopologyKind::Mesh),
        _ => Err(invalid(format!("unknown topology {v}"))),
    }
}

fn protocol_from(v: u32) -> Result<Protocol, Failure> {
    match v {
        PSN_PROTOCOL_CSMA => Ok(Protocol::Csma),
        PSN_PROTOCOL_TDMA => Ok(Protocol::Tdma),
        PSN_PROTOCOL_FUNNELING => Ok(Protocol::Funneling),
        PSN_PROTOCOL_IQUEUE => Ok(Protocol::Iqueue),
        _ => Err(invalid(format!("unknown protocol {v}"))),
    }
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn psn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the most recent failure on this thread, or an empty string.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn psn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Default scenario for one topology and protocol.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn psn_scenario_new(
    topology: u32,
    protocol: u32,
    out: *mut *mut PsnScenario,
) -> PsnStatus {
    guard(|| {
        let config = ScenarioConfig::new(topology_from(topology)?, protocol_from(protocol)?);
        write_out(out, boxed(PsnScenario { config }), "out")
    })
}

/// Parse a scenario from TOML text. Missing keys take their defaults.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psn_scenario_from_toml(
    toml: *const c_char,
    out: *mut *mut PsnScenario,
) -> PsnStatus {
    guard(|| {
        let text = str_arg(toml, "toml")?;
        let config = ScenarioConfig::from_toml_str(text)?;
        write_out(out, boxed(PsnScenario { config }), "out")
    })
}

/// Set the simulated span in seconds.
///
/// # Safety
/// `scenario` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn psn_scenario_set_duration(scenario: *mut PsnScenario, seconds: f64) -> PsnStatus {
    guard(|| {
        let sc = scenario.as_mut().ok_or_else(|| null("scenario"))?;
        if !(seconds.is_finite() && seconds > 0.0) {
            return Err(invalid(format!("duration must be positive and finite, got {seconds}")));
        }
        sc.config.run.duration = seconds;
        Ok(())
    })
}

/// Validate the scenario and report its duty-cycle length and node count.
/// Either output pointer may be null.
///
/// # Safety
/// `scenario` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn psn_scenario_validate(
    scenario: *const PsnScenario,
    cycle_length_s: *mut f64,
    node_count: *mut usize,
) -> PsnStatus {
    guard(|| {
        let p = scenario_ref(scenario)?.config.prepare()?;
        if !cycle_length_s.is_null() {
            cycle_length_s.write(p.t_cycle);
        }
        if !node_count.is_null() {
            node_count.write(p.n_nodes());
        }
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn psn_scenario_free(scenario: *mut PsnScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Simulate the scenario once with `seed`.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psn_run(scenario: *const PsnScenario, seed: u64, out: *mut *mut PsnRun) -> PsnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let prepared = scenario_ref(scenario)?.config.prepare()?;
        let run = run_scenario(&prepared, seed)?;
        let summary = RunSummary::from_run(&run, traffic_lambda(&prepared));
        write_out(
            out,
            boxed(PsnRun {
                prepared,
                runs: vec![run],
                summary,
            }),
            "out",
        )
    })
}

/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psn_run_summary(run: *const PsnRun, out: *mut PsnSummary) -> PsnStatus {
    guard(|| {
        let r = run_ref(run)?;
        let (s, o) = (&r.summary, &r.runs[0]);
        let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
        let summary = PsnSummary {
            seed: o.seed,
            events: o.events,
            cycle_length_s: o.t_cycle,
            records: s.records as u64,
            delivered: s.delivered as u64,
            delivery_ratio: s.delivery_ratio,
            delay_p50_s: nan(s.delay_p50),
            delay_p90_s: nan(s.delay_p90),
            delay_p99_s: nan(s.delay_p99),
            data_delivered: s.data_delivered as u64,
            data_collided: s.data_collided as u64,
            data_lost: s.data_lost as u64,
            data_dropped: s.data_dropped as u64,
            interarrival_shape: nan(s.interarrival_shape),
            interarrival_scale_s: nan(s.interarrival_scale),
            sensor_lifetime_mean_days: nan(s.sensor_lifetime.as_ref().map(|l| l.mean_days)),
            sensor_lifetime_min_days: nan(s.sensor_lifetime.as_ref().map(|l| l.min_days)),
            router_lifetime_mean_days: nan(s.router_lifetime.as_ref().map(|l| l.mean_days)),
        };
        write_out(out, summary, "out")
    })
}

/// Information delay at quantile `q` in `[0, 1]`, NaN when nothing arrived.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psn_run_delay_quantile(run: *const PsnRun, q: f64, out: *mut f64) -> PsnStatus {
    guard(|| {
        let r = run_ref(run)?;
        if !(0.0..=1.0).contains(&q) {
            return Err(invalid(format!("quantile {q} outside [0, 1]")));
        }
        let d = info_delay_cdf(&r.runs[0].records).percentile(q).unwrap_or(f64::NAN);
        write_out(out, d, "out")
    })
}

/// Number of nodes, gateway included.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psn_run_node_count(run: *const PsnRun, out: *mut usize) -> PsnStatus {
    guard(|| write_out(out, run_ref(run)?.runs[0].energy.len(), "out"))
}

/// Energy spent by `node` over the run (mJ) and its projected lifetime in
/// days (infinity for a node that never drew power). Either output may be
/// null.
///
/// # Safety
/// `run` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn psn_run_node_energy(
    run: *const PsnRun,
    node: usize,
    energy_mj: *mut f64,
    lifetime_days: *mut f64,
) -> PsnStatus {
    guard(|| {
        let r = run_ref(run)?;
        let e = r.runs[0]
            .energy
            .iter()
            .find(|e| e.node == node)
            .ok_or_else(|| invalid(format!("no node {node}")))?;
        if !energy_mj.is_null() {
            energy_mj.write(e.ledger.total_mj());
        }
        if !lifetime_days.is_null() {
            lifetime_days.write(e.lifetime.days());
        }
        Ok(())
    })
}

/// Write the CSV and summary artifacts of the run into `dir`, creating it.
///
/// # Safety
/// `run` must be a live handle; `dir` must be a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn psn_run_write_artifacts(run: *const PsnRun, dir: *const c_char) -> PsnStatus {
    guard(|| {
        let r = run_ref(run)?;
        let dir = str_arg(dir, "dir")?;
        write_artifacts(Path::new(dir), &r.prepared, &r.runs)?;
        Ok(())
    })
}

/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn psn_run_free(run: *mut PsnRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn last_error() -> String {
        unsafe { CStr::from_ptr(psn_last_error()) }.to_string_lossy().into_owned()
    }

    #[test]
    fn enum_codes_map_to_kinds() {
        for (i, k) in TopologyKind::ALL.iter().enumerate() {
            assert_eq!(topology_from(i as u32).ok(), Some(*k));
        }
        for (i, p) in Protocol::ALL.iter().enumerate() {
            assert_eq!(protocol_from(i as u32).ok(), Some(*p));
        }
        assert!(topology_from(3).is_err());
        assert!(protocol_from(4).is_err());
    }

    #[test]
    fn null_and_range_checks() {
        unsafe {
            assert_eq!(psn_scenario_new(0, 0, ptr::null_mut()), PsnStatus::NullArgument);
            let mut sc = ptr::null_mut();
            assert_eq!(psn_scenario_new(7, 0, &mut sc), PsnStatus::InvalidArgument);
            assert!(sc.is_null());
            assert!(last_error().contains("unknown topology 7"));
            assert_eq!(psn_run_summary(ptr::null(), ptr::null_mut()), PsnStatus::NullArgument);
            psn_scenario_free(ptr::null_mut());
            psn_run_free(ptr::null_mut());
        }
    }

    #[test]
    fn panics_are_contained() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, PsnStatus::Panic);
        assert!(last_error().contains("boom"));
    }

    #[test]
    fn version_is_the_crate_version() {
        let v = unsafe { CStr::from_ptr(psn_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
