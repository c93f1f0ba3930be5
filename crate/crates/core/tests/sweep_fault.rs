use std::fs;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use psnsim_core::mac::Protocol;
use psnsim_core::output::{read_manifest, sha256_hex, CellStatus, RunManifest};
use psnsim_core::scenario::{ScenarioConfig, TopologyKind};
use psnsim_core::sweep::{sweep, SweepOptions, SWEEP_CSV};

fn verify_complete_cells(out: &Path, m: &RunManifest) -> usize {
    let mut complete = 0;
    for cell in &m.cells {
        if cell.status != CellStatus::Complete {
            assert!(cell.files.is_empty(), "{cell:?}");
            continue;
        }
        complete += 1;
        assert_eq!(cell.files.len(), 5);
        for f in &cell.files {
            let bytes = fs::read(out.join(&cell.dir).join(&f.name)).unwrap();
            assert_eq!(bytes.len() as u64, f.bytes, "{}/{}", cell.dir, f.name);
            assert_eq!(sha256_hex(&bytes), f.sha256, "{}/{}", cell.dir, f.name);
        }
    }
    complete
}

#[test]
fn cancel_after_first_cell() {
    let mut base = ScenarioConfig::default();
    base.run.duration = 800.0;
    let flag = Arc::new(AtomicBool::new(false));
    let hook_flag = flag.clone();
    let opts = SweepOptions {
        runs: 2,
        parallel: 2,
        cancel: Some(flag),
        on_cell: Some(Arc::new(move |_| hook_flag.store(true, Ordering::SeqCst))),
    };
    let dir = tempfile::tempdir().unwrap();
    let protocols = [Protocol::Csma, Protocol::Tdma, Protocol::Iqueue];
    let r = sweep(&base, &[TopologyKind::Line], &protocols, &opts, dir.path(), None).unwrap();

    let status: Vec<_> = r.cells.iter().map(|c| c.status).collect();
    assert_eq!(status, [CellStatus::Complete, CellStatus::Missing, CellStatus::Missing]);
    let m = read_manifest(dir.path()).unwrap();
    assert_eq!(m, r.manifest);
    assert_eq!(verify_complete_cells(dir.path(), &m), 1);
    assert!(!dir.path().join("line-tdma").exists());
    let table = fs::read_to_string(dir.path().join(SWEEP_CSV)).unwrap();
    assert!(table.contains("line,tdma,missing"));
}

#[test]
fn cancelled_before_start_leaves_everything_missing() {
    let opts = SweepOptions {
        runs: 1,
        cancel: Some(Arc::new(AtomicBool::new(true))),
        ..SweepOptions::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let r = sweep(&ScenarioConfig::default(), &TopologyKind::ALL, &[Protocol::Csma], &opts, dir.path(), None).unwrap();
    assert_eq!(r.failed(), 3);
    assert!(read_manifest(dir.path()).unwrap().cells.iter().all(|c| c.status == CellStatus::Missing));
}

#[test]
fn killed_sweep_leaves_a_consistent_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    fs::write(&scenario, "[run]\nduration = 100000.0\nruns = 2\n").unwrap();
    let out = dir.path().join("out");
    let mut child = Command::new(env!("CARGO_BIN_EXE_psnsim"))
        .arg("sweep")
        .arg(&scenario)
        .arg("--out")
        .arg(&out)
        .args(["--parallel", "2", "--topologies", "crossroad,line,mesh"])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();

    let deadline = Instant::now() + Duration::from_secs(120);
    while Instant::now() < deadline {
        if let Ok(m) = read_manifest(&out) {
            if m.cells.iter().any(|c| c.status == CellStatus::Complete) {
                break;
            }
        }
        if child.try_wait().unwrap().is_some() {
            break;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    child.kill().ok();
    child.wait().unwrap();

    let m = read_manifest(&out).unwrap();
    assert_eq!(m.cells.len(), 12);
    let complete = verify_complete_cells(&out, &m);
    assert!(complete >= 1);
}
