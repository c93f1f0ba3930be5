//! Multi-run execution and protocol × topology sweeps.

use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mac::Protocol;
use crate::network::{run_scenario, RunOutput};
use crate::output::{
    display_path, write_artifacts, write_atomic, write_manifest, CellEntry, CellStatus,
    PooledSummary, RunManifest, Summary,
};
use crate::scenario::{Prepared, ScenarioConfig, TopologyKind};

pub const SWEEP_CSV: &str = "sweep.csv";

pub type CellHook = Arc<dyn Fn(&CellResult) + Send + Sync>;

#[derive(Clone, Default)]
pub struct SweepOptions {
    pub runs: usize,
    /// Worker threads; 0 uses all cores.
    pub parallel: usize,
    pub cancel: Option<Arc<AtomicBool>>,
    /// Called after each cell is finished and recorded in the manifest.
    pub on_cell: Option<CellHook>,
}

impl std::fmt::Debug for SweepOptions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SweepOptions")
            .field("runs", &self.runs)
            .field("parallel", &self.parallel)
            .field("cancel", &self.cancel)
            .field("on_cell", &self.on_cell.is_some())
            .finish()
    }
}

impl SweepOptions {
    fn cancelled(&self) -> bool {
        self.cancel.as_ref().is_some_and(|c| c.load(Ordering::SeqCst))
    }
}

pub fn seeds(first: u64, runs: usize) -> Vec<u64> {
    (0..runs as u64).map(|i| first.wrapping_add(i)).collect()
}

fn pool(parallel: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Run `sc` once per seed, in parallel; results come back in seed order.
/// Returns `Ok(None)` if cancelled before every run finished.
pub fn run_seeds(
    sc: &Prepared,
    seeds: &[u64],
    parallel: usize,
    cancel: Option<&AtomicBool>,
) -> Result<Option<Vec<RunOutput>>> {
    let stop = || cancel.is_some_and(|c| c.load(Ordering::SeqCst));
    let results: Vec<Option<Result<RunOutput>>> = pool(parallel)?.install(|| {
        seeds
            .par_iter()
            .map(|&s| (!stop()).then(|| run_scenario(sc, s)))
            .collect()
    });
    let mut out = Vec::with_capacity(seeds.len());
    for r in results {
        match r {
            Some(r) => out.push(r?),
            None => return Ok(None),
        }
    }
    if stop() {
        return Ok(None);
    }
    Ok(Some(out))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub topology: TopologyKind,
    pub protocol: Protocol,
    pub status: CellStatus,
    pub error: Option<String>,
    pub pooled: Option<PooledSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub cells: Vec<CellResult>,
    pub manifest: RunManifest,
}

impl SweepReport {
    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| c.status != CellStatus::Complete).count()
    }
}

pub fn cell_dir_name(kind: TopologyKind, protocol: Protocol) -> String {
    format!("{}-{}", kind.name(), protocol.name())
}

/// Execute every (topology, protocol) cell of `base`. Cells run one after
/// another, the runs inside a cell in parallel. The manifest is rewritten
/// after each cell so an interrupted sweep leaves a consistent record.
pub fn sweep(
    base: &ScenarioConfig,
    topologies: &[TopologyKind],
    protocols: &[Protocol],
    opts: &SweepOptions,
    out: &Path,
    scenario_path: Option<&Path>,
) -> Result<SweepReport> {
    std::fs::create_dir_all(out)?;
    let seed_list = seeds(base.run.seed, opts.runs);
    let mut manifest = RunManifest {
        scenario: scenario_path.map(display_path),
        output_dir: display_path(out),
        seeds: seed_list.clone(),
        parallel: opts.parallel,
        files: Vec::new(),
        cells: Vec::new(),
    };
    let mut cells = Vec::new();
    for &k in topologies {
        for &p in protocols {
            manifest.cells.push(CellEntry {
                topology: k.name().into(),
                protocol: p.name().into(),
                dir: cell_dir_name(k, p),
                status: CellStatus::Missing,
                error: None,
                files: Vec::new(),
            });
            cells.push(CellResult {
                topology: k,
                protocol: p,
                status: CellStatus::Missing,
                error: None,
                pooled: None,
            });
        }
    }
    write_manifest(out, &manifest)?;

    for i in 0..cells.len() {
        if opts.cancelled() {
            break;
        }
        let (k, p) = (cells[i].topology, cells[i].protocol);
        let mut cfg = base.clone();
        cfg.topology.kind = k;
        cfg.mac.protocol = p;
        cfg.run.runs = opts.runs;
        let outcome = cfg.prepare().and_then(|sc| {
            let Some(runs) = run_seeds(&sc, &seed_list, opts.parallel, opts.cancel.as_deref())? else {
                return Ok(None);
            };
            let dir = out.join(&manifest.cells[i].dir);
            let files = write_artifacts(&dir, &sc, &runs)?;
            Ok(Some((Summary::new(&sc, &runs).pooled, files)))
        });
        match outcome {
            Ok(Some((pooled, files))) => {
                cells[i].status = CellStatus::Complete;
                cells[i].pooled = Some(pooled);
                manifest.cells[i].status = CellStatus::Complete;
                manifest.cells[i].files = files;
            }
            Ok(None) => break,
            Err(e) => {
                cells[i].status = CellStatus::Failed;
                cells[i].error = Some(e.to_string());
                manifest.cells[i].status = CellStatus::Failed;
                manifest.cells[i].error = Some(e.to_string());
            }
        }
        write_manifest(out, &manifest)?;
        if let Some(hook) = &opts.on_cell {
            hook(&cells[i]);
        }
    }

    let table = comparison_csv(&cells, opts.runs > 1)?;
    write_atomic(out, SWEEP_CSV, &table)?;
    Ok(SweepReport { cells, manifest })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// The pooled comparison table. Spread columns only appear with several runs.
pub fn comparison_csv(cells: &[CellResult], spread: bool) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec![
        "topology", "protocol", "status", "runs", "records", "delivery_ratio", "delay_p50",
        "delay_p90", "delay_p99", "scale_ratio", "data_collided", "data_dropped",
        "sensor_lifetime_mean", "sensor_lifetime_std", "router_lifetime_mean",
    ];
    if spread {
        header.extend(["delivery_ratio_run_std", "delay_p50_run_std", "sensor_lifetime_run_std"]);
    }
    let ser = |e: csv::Error| Error::Serialize(e.to_string());
    w.write_record(&header).map_err(ser)?;
    for c in cells {
        let p = c.pooled.as_ref();
        let status = match c.status {
            CellStatus::Complete => "complete",
            CellStatus::Failed => "failed",
            CellStatus::Missing => "missing",
        };
        let mut row = vec![
            c.topology.name().to_string(),
            c.protocol.name().to_string(),
            status.to_string(),
            opt(p.map(|p| p.runs)),
            opt(p.map(|p| p.records)),
            opt(p.map(|p| p.delivery_ratio)),
            opt(p.and_then(|p| p.delay_p50)),
            opt(p.and_then(|p| p.delay_p90)),
            opt(p.and_then(|p| p.delay_p99)),
            opt(p.and_then(|p| p.scale_ratio)),
            opt(p.map(|p| p.data_collided)),
            opt(p.map(|p| p.data_dropped)),
            opt(p.and_then(|p| p.sensor_lifetime_mean)),
            opt(p.and_then(|p| p.sensor_lifetime_std)),
            opt(p.and_then(|p| p.router_lifetime_mean)),
        ];
        if spread {
            row.extend([
                opt(p.and_then(|p| p.delivery_ratio_run_std)),
                opt(p.and_then(|p| p.delay_p50_run_std)),
                opt(p.and_then(|p| p.sensor_lifetime_run_std)),
            ]);
        }
        w.write_record(&row).map_err(ser)?;
    }
    w.into_inner().map_err(|e| Error::Serialize(e.to_string()))
}
