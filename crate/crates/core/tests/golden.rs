//! Byte-exact artifacts for pinned scenarios. Regenerate with `PSNSIM_BLESS=1`.

use std::fs;
use std::path::PathBuf;

use psnsim_core::mac::Protocol;
use psnsim_core::network::run_scenario;
use psnsim_core::output::render_artifacts;
use psnsim_core::scenario::{ScenarioConfig, TopologyKind};

fn check(kind: TopologyKind, protocol: Protocol, seed: u64) {
    let mut c = ScenarioConfig::new(kind, protocol);
    c.run.duration = 600.0;
    let sc = c.prepare().unwrap();
    let runs = vec![run_scenario(&sc, seed).unwrap()];
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{}-{}", kind.name(), protocol.name()));
    let bless = std::env::var_os("PSNSIM_BLESS").is_some();
    for (name, bytes) in render_artifacts(&sc, &runs).unwrap() {
        let path = dir.join(name);
        if bless {
            fs::create_dir_all(&dir).unwrap();
            fs::write(&path, &bytes).unwrap();
            continue;
        }
        let want = fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        if want != bytes {
            let (w, g) = (String::from_utf8_lossy(&want), String::from_utf8_lossy(&bytes));
            let line = w.lines().zip(g.lines()).position(|(a, b)| a != b);
            panic!("{} differs (first differing line {line:?}, {} vs {} lines)", path.display(), w.lines().count(), g.lines().count());
        }
    }
}

#[test]
fn crossroad_csma() {
    check(TopologyKind::Crossroad, Protocol::Csma, 42);
}

#[test]
fn line_funneling() {
    check(TopologyKind::Line, Protocol::Funneling, 42);
}

#[test]
fn mesh_iqueue() {
    check(TopologyKind::Mesh, Protocol::Iqueue, 42);
}
