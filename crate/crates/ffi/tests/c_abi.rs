//! Compiles and runs a C program against the static library and header.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include <string.h>
#include "psnsim.h"

int main(void) {
    PsnScenario *sc = NULL;
    if (psn_scenario_new(PSN_TOPOLOGY_CROSSROAD, PSN_PROTOCOL_CSMA, &sc) != PSN_STATUS_OK) return 10;
    if (psn_scenario_set_duration(sc, 900.0) != PSN_STATUS_OK) return 11;
    PsnRun *run = NULL;
    if (psn_run(sc, 7, &run) != PSN_STATUS_OK) return 12;
    PsnSummary s;
    if (psn_run_summary(run, &s) != PSN_STATUS_OK) return 13;
    if (s.records == 0 || !(s.delivery_ratio > 0.0) || s.seed != 7) return 14;
    if (psn_scenario_new(9, 0, &sc) != PSN_STATUS_INVALID_ARGUMENT) return 15;
    if (strstr(psn_last_error(), "unknown topology") == NULL) return 16;
    printf("%s %llu %.6f\n", psn_version(), (unsigned long long)s.records, s.delivery_ratio);
    psn_run_free(run);
    psn_scenario_free(sc);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libpsnsim_ffi.a");
    assert!(lib.is_file(), "{} not built", lib.display());
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let exe = dir.path().join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let build = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .expect("C compiler available");
    assert!(build.status.success(), "{}", String::from_utf8_lossy(&build.stderr));
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let line = String::from_utf8(out.stdout).unwrap();
    assert!(line.starts_with(env!("CARGO_PKG_VERSION")), "{line}");
}
