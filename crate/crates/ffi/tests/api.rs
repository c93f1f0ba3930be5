use std::ffi::{CStr, CString};
use std::ptr;

use psnsim_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(psn_last_error()) }.to_string_lossy().into_owned()
}

struct Scenario(*mut PsnScenario);

impl Drop for Scenario {
    fn drop(&mut self) {
        unsafe { psn_scenario_free(self.0) }
    }
}

struct Run(*mut PsnRun);

impl Drop for Run {
    fn drop(&mut self) {
        unsafe { psn_run_free(self.0) }
    }
}

fn scenario(topology: u32, protocol: u32, duration: f64) -> Scenario {
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(psn_scenario_new(topology, protocol, &mut p), PsnStatus::Ok);
        assert_eq!(psn_scenario_set_duration(p, duration), PsnStatus::Ok);
    }
    Scenario(p)
}

fn run(sc: &Scenario, seed: u64) -> Run {
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { psn_run(sc.0, seed, &mut r) }, PsnStatus::Ok, "{}", last_error());
    Run(r)
}

fn summary(r: &Run) -> PsnSummary {
    let mut s = std::mem::MaybeUninit::uninit();
    assert_eq!(unsafe { psn_run_summary(r.0, s.as_mut_ptr()) }, PsnStatus::Ok);
    unsafe { s.assume_init() }
}

#[test]
fn run_and_summarise() {
    let sc = scenario(PSN_TOPOLOGY_LINE, PSN_PROTOCOL_TDMA, 2_000.0);
    let (mut cycle, mut nodes) = (0.0, 0usize);
    assert_eq!(unsafe { psn_scenario_validate(sc.0, &mut cycle, &mut nodes) }, PsnStatus::Ok);
    assert_eq!(nodes, 26);
    assert!(cycle > 0.0);

    let r = run(&sc, 11);
    let s = summary(&r);
    assert_eq!(s.seed, 11);
    assert_eq!(s.cycle_length_s, cycle);
    assert!(s.records > 0 && s.delivered <= s.records);
    assert_eq!(s.data_collided, 0);
    assert!(s.delay_p50_s <= s.delay_p90_s && s.delay_p90_s <= s.delay_p99_s);
    assert!(s.sensor_lifetime_min_days <= s.sensor_lifetime_mean_days);

    let mut median = 0.0;
    assert_eq!(unsafe { psn_run_delay_quantile(r.0, 0.5, &mut median) }, PsnStatus::Ok);
    assert_eq!(median, s.delay_p50_s);
    assert_eq!(unsafe { psn_run_delay_quantile(r.0, 1.5, &mut median) }, PsnStatus::InvalidArgument);

    let mut n = 0usize;
    assert_eq!(unsafe { psn_run_node_count(r.0, &mut n) }, PsnStatus::Ok);
    assert_eq!(n, nodes);
    let (mut mj, mut days) = (0.0, 0.0);
    assert_eq!(unsafe { psn_run_node_energy(r.0, 1, &mut mj, &mut days) }, PsnStatus::Ok);
    assert!(mj > 0.0 && days.is_finite() && days > 0.0);
    assert_eq!(unsafe { psn_run_node_energy(r.0, n, &mut mj, ptr::null_mut()) }, PsnStatus::InvalidArgument);
}

#[test]
fn same_seed_same_summary() {
    let sc = scenario(PSN_TOPOLOGY_MESH, PSN_PROTOCOL_IQUEUE, 1_000.0);
    let (a, b) = (summary(&run(&sc, 5)), summary(&run(&sc, 5)));
    assert_eq!(a.events, b.events);
    assert_eq!(a.records, b.records);
    assert_eq!(a.delay_p99_s.to_bits(), b.delay_p99_s.to_bits());
    assert_eq!(a.sensor_lifetime_mean_days.to_bits(), b.sensor_lifetime_mean_days.to_bits());
}

#[test]
fn toml_errors_are_reported() {
    let mut p = ptr::null_mut();
    let bad = CString::new("[app]\nthreshold = 900.0\n").unwrap();
    assert_eq!(unsafe { psn_scenario_from_toml(bad.as_ptr(), &mut p) }, PsnStatus::Ok);
    let sc = Scenario(p);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { psn_run(sc.0, 1, &mut r) }, PsnStatus::Config);
    assert!(r.is_null());
    assert!(last_error().contains("threshold exceeds period"), "{}", last_error());

    let garbage = CString::new("[mac\n").unwrap();
    let mut q = ptr::null_mut();
    assert_eq!(unsafe { psn_scenario_from_toml(garbage.as_ptr(), &mut q) }, PsnStatus::Config);
    assert!(q.is_null());

    let not_utf8 = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { psn_scenario_from_toml(not_utf8.as_ptr().cast(), &mut q) },
        PsnStatus::InvalidArgument
    );
    assert_eq!(unsafe { psn_scenario_set_duration(sc.0, -1.0) }, PsnStatus::InvalidArgument);
}

#[test]
fn artifacts_on_disk() {
    let sc = scenario(PSN_TOPOLOGY_CROSSROAD, PSN_PROTOCOL_CSMA, 600.0);
    let r = run(&sc, 42);
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { psn_run_write_artifacts(r.0, path.as_ptr()) }, PsnStatus::Ok);
    for f in ["frames.csv", "delays.csv", "energy.csv", "interarrivals.csv", "summary.toml"] {
        assert!(dir.path().join("out").join(f).is_file(), "{f}");
    }
    assert_eq!(unsafe { psn_run_write_artifacts(r.0, ptr::null()) }, PsnStatus::NullArgument);
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/psnsim.h");
    let src = include_str!("../src/lib.rs");
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .filter_map(|rest| rest.split('(').next())
        .collect();
    assert!(exports.len() >= 12);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct PsnScenario PsnScenario;"));
}
