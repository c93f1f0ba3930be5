//! Run artifacts: fixed-layout CSV traces, a TOML summary and a manifest of
//! SHA-256 digests.
//!
//! | file | columns |
//! |------|---------|
//! | `frames.csv` | `run,origin,src,dst,kind,gen_time,tx_time,rx_time,outcome,retries` |
//! | `delays.csv` | `run,sensor,sensed_at,sent_at,delivered_at,mode,hops,retries,delay` |
//! | `energy.csv` | `run,node,role,tx_s,rx_s,cs_s,off_s,switches,energy_mj,avg_power_mw,lifetime_days` |
//! | `interarrivals.csv` | `run,origin,time,gap_merged,gap_node` |
//!
//! `run` is the seed. Empty fields mean "not applicable" (an undelivered
//! record has no `delivered_at`).

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mac::FrameKind;
use crate::metrics::{
    energy_summary, fit_weibull_mle, info_delay_cdf, merge_interarrivals, pooled_interarrivals,
    LifetimeStats,
};
use crate::network::{Outcome, RunOutput};
use crate::scenario::{Prepared, Role};
use crate::traffic_model::fit_sum_weibull;

pub const FRAMES_CSV: &str = "frames.csv";
pub const DELAYS_CSV: &str = "delays.csv";
pub const ENERGY_CSV: &str = "energy.csv";
pub const INTERARRIVALS_CSV: &str = "interarrivals.csv";
pub const SUMMARY_TOML: &str = "summary.toml";
pub const MANIFEST_JSON: &str = "manifest.json";

#[derive(Serialize)]
struct FrameRow {
    run: u64,
    origin: usize,
    src: usize,
    dst: usize,
    kind: &'static str,
    gen_time: f64,
    tx_time: f64,
    rx_time: Option<f64>,
    outcome: &'static str,
    retries: u32,
}

#[derive(Serialize)]
struct DelayRow {
    run: u64,
    sensor: usize,
    sensed_at: f64,
    sent_at: f64,
    delivered_at: Option<f64>,
    mode: &'static str,
    hops: usize,
    retries: u32,
    delay: Option<f64>,
}

#[derive(Serialize)]
struct EnergyRow {
    run: u64,
    node: usize,
    role: &'static str,
    tx_s: f64,
    rx_s: f64,
    cs_s: f64,
    off_s: f64,
    switches: u64,
    energy_mj: f64,
    avg_power_mw: f64,
    lifetime_days: f64,
}

#[derive(Serialize)]
struct InterarrivalRow {
    run: u64,
    origin: usize,
    time: f64,
    gap_merged: Option<f64>,
    gap_node: Option<f64>,
}

fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Serialize(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Serialize(e.to_string()))
}

fn frames_csv(runs: &[RunOutput]) -> Result<Vec<u8>> {
    csv_bytes(runs.iter().flat_map(|r| {
        r.frames.iter().map(move |f| FrameRow {
            run: r.seed,
            origin: f.origin,
            src: f.src,
            dst: f.dst,
            kind: f.kind.name(),
            gen_time: f.gen_time,
            tx_time: f.tx_time,
            rx_time: f.rx_time,
            outcome: f.outcome.name(),
            retries: f.retries,
        })
    }))
}

fn delays_csv(runs: &[RunOutput]) -> Result<Vec<u8>> {
    csv_bytes(runs.iter().flat_map(|r| {
        r.records.iter().map(move |rec| DelayRow {
            run: r.seed,
            sensor: rec.sensor,
            sensed_at: rec.sensed_at,
            sent_at: rec.sent_at,
            delivered_at: rec.delivered_at,
            mode: rec.mode.name(),
            hops: rec.hops,
            retries: rec.retries,
            delay: rec.delay(),
        })
    }))
}

fn energy_csv(runs: &[RunOutput]) -> Result<Vec<u8>> {
    csv_bytes(runs.iter().flat_map(|r| {
        r.energy.iter().map(move |e| EnergyRow {
            run: r.seed,
            node: e.node,
            role: e.role.name(),
            tx_s: e.ledger.tx_s,
            rx_s: e.ledger.rx_s,
            cs_s: e.ledger.cs_s,
            off_s: e.ledger.off_s,
            switches: e.ledger.switch_count,
            energy_mj: e.ledger.total_mj(),
            avg_power_mw: e.ledger.total_mj() / r.duration,
            lifetime_days: e.lifetime.days(),
        })
    }))
}

fn interarrivals_csv(runs: &[RunOutput]) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for r in runs {
        let mut events = r.sensing.clone();
        events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.origin.cmp(&b.origin)));
        let mut last_node: HashMap<usize, f64> = HashMap::new();
        let mut last: Option<f64> = None;
        for e in events {
            rows.push(InterarrivalRow {
                run: r.seed,
                origin: e.origin,
                time: e.time,
                gap_merged: last.map(|t| e.time - t),
                gap_node: last_node.get(&e.origin).map(|t| e.time - t),
            });
            last = Some(e.time);
            last_node.insert(e.origin, e.time);
        }
    }
    csv_bytes(rows)
}

/// Scale of the sum-of-Weibull fit for a scenario's traffic, if it converges.
pub fn traffic_lambda(sc: &Prepared) -> Option<f64> {
    let t = &sc.config.traffic;
    fit_sum_weibull(&t.parking(), &t.vacant()).ok().map(|f| f.params.scale)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub records: usize,
    pub delivered: usize,
    pub delivery_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_p50: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_p90: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_p99: Option<f64>,
    /// Weibull fit `(A, Λ)` of per-sensor packet interarrivals.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interarrival_shape: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interarrival_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_ratio: Option<f64>,
    /// Shape of the fit to interarrivals merged over all sensors.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub merged_shape: Option<f64>,
    pub data_delivered: usize,
    pub data_collided: usize,
    pub data_lost: usize,
    pub data_dropped: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensor_lifetime: Option<LifetimeStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub router_lifetime: Option<LifetimeStats>,
}

fn sensing_by_node(runs: &[&RunOutput]) -> Vec<Vec<f64>> {
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for r in runs {
        let mut by: HashMap<usize, Vec<f64>> = HashMap::new();
        for e in &r.sensing {
            by.entry(e.origin).or_default().push(e.time);
        }
        let mut keys: Vec<usize> = by.keys().copied().collect();
        keys.sort_unstable();
        groups.extend(keys.into_iter().map(|k| by.remove(&k).unwrap_or_default()));
    }
    groups
}

impl RunSummary {
    pub fn from_run(r: &RunOutput, lambda: Option<f64>) -> Self {
        let delays = info_delay_cdf(&r.records);
        let groups = sensing_by_node(&[r]);
        let refs: Vec<&[f64]> = groups.iter().map(Vec::as_slice).collect();
        let per_node = pooled_interarrivals(&refs).ok().and_then(|d| fit_weibull_mle(&d).ok());
        let merged = merge_interarrivals(&refs).ok().and_then(|d| fit_weibull_mle(&d).ok());
        let stats = energy_summary(&r.energy);
        let role = |x: Role| stats.iter().find(|s| s.role == x).cloned();
        RunSummary {
            seed: r.seed,
            records: r.records.len(),
            delivered: delays.delivered,
            delivery_ratio: delays.delivery_ratio(),
            delay_p50: delays.percentile(0.5),
            delay_p90: delays.percentile(0.9),
            delay_p99: delays.percentile(0.99),
            interarrival_shape: per_node.map(|f| f.shape),
            interarrival_scale: per_node.map(|f| f.scale),
            scale_ratio: per_node.zip(lambda).map(|(f, l)| f.scale / l),
            merged_shape: merged.map(|f| f.shape),
            data_delivered: r.count_outcome(FrameKind::Data, Outcome::Delivered),
            data_collided: r.count_outcome(FrameKind::Data, Outcome::Collided),
            data_lost: r.count_outcome(FrameKind::Data, Outcome::Lost),
            data_dropped: r.count_outcome(FrameKind::Data, Outcome::Dropped),
            sensor_lifetime: role(Role::Sensor),
            router_lifetime: role(Role::Router),
        }
    }
}

/// Statistics pooled over all runs of one scenario. The `*_run_std` columns
/// (spread across runs) are only present with two or more runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledSummary {
    pub runs: usize,
    pub records: usize,
    pub delivery_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_p50: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_p90: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_p99: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interarrival_shape: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interarrival_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_ratio: Option<f64>,
    pub data_collided: usize,
    pub data_dropped: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensor_lifetime_mean: Option<f64>,
    /// Mean over runs of the within-run spread of sensor lifetimes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensor_lifetime_std: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_lifetime_role: Option<Role>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub router_lifetime_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delivery_ratio_run_std: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_p50_run_std: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensor_lifetime_run_std: Option<f64>,
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let s = (xs.len() > 1)
        .then(|| (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(m), s)
}

impl PooledSummary {
    pub fn from_runs(runs: &[RunOutput], per_run: &[RunSummary], lambda: Option<f64>) -> Self {
        let delays = info_delay_cdf(runs.iter().flat_map(|r| r.records.iter()));
        let all: Vec<&RunOutput> = runs.iter().collect();
        let groups = sensing_by_node(&all);
        let refs: Vec<&[f64]> = groups.iter().map(Vec::as_slice).collect();
        let fit = pooled_interarrivals(&refs).ok().and_then(|d| fit_weibull_mle(&d).ok());
        let multi = runs.len() > 1;
        let col = |f: &dyn Fn(&RunSummary) -> Option<f64>| -> Vec<f64> { per_run.iter().filter_map(f).collect() };
        let ratios = col(&|s| Some(s.delivery_ratio));
        let p50s = col(&|s| s.delay_p50);
        let sensor_means = col(&|s| s.sensor_lifetime.as_ref().map(|l| l.mean_days));
        let sensor_stds = col(&|s| s.sensor_lifetime.as_ref().map(|l| l.std_days));
        let router_means = col(&|s| s.router_lifetime.as_ref().map(|l| l.mean_days));
        let min_role = {
            let mut counts: HashMap<Role, usize> = HashMap::new();
            for s in per_run {
                let cands = [s.sensor_lifetime.as_ref(), s.router_lifetime.as_ref()];
                if let Some(m) = cands.into_iter().flatten().min_by(|a, b| a.min_days.total_cmp(&b.min_days)) {
                    *counts.entry(m.role).or_default() += 1;
                }
            }
            counts.into_iter().max_by_key(|&(r, c)| (c, r == Role::Router)).map(|x| x.0)
        };
        PooledSummary {
            runs: runs.len(),
            records: delays.delivered + delays.undelivered,
            delivery_ratio: delays.delivery_ratio(),
            delay_p50: delays.percentile(0.5),
            delay_p90: delays.percentile(0.9),
            delay_p99: delays.percentile(0.99),
            interarrival_shape: fit.map(|f| f.shape),
            interarrival_scale: fit.map(|f| f.scale),
            scale_ratio: fit.zip(lambda).map(|(f, l)| f.scale / l),
            data_collided: per_run.iter().map(|s| s.data_collided).sum(),
            data_dropped: per_run.iter().map(|s| s.data_dropped).sum(),
            sensor_lifetime_mean: mean_std(&sensor_means).0,
            sensor_lifetime_std: mean_std(&sensor_stds).0,
            min_lifetime_role: min_role,
            router_lifetime_mean: mean_std(&router_means).0,
            delivery_ratio_run_std: multi.then(|| mean_std(&ratios).1).flatten(),
            delay_p50_run_std: multi.then(|| mean_std(&p50s).1).flatten(),
            sensor_lifetime_run_std: multi.then(|| mean_std(&sensor_means).1).flatten(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioHeader {
    pub topology: String,
    pub protocol: String,
    pub duration: f64,
    pub t_cycle: f64,
    pub n_csma: usize,
    pub n_tdma: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traffic_lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: ScenarioHeader,
    pub pooled: PooledSummary,
    pub runs: Vec<RunSummary>,
}

impl Summary {
    pub fn new(sc: &Prepared, runs: &[RunOutput]) -> Self {
        let lambda = traffic_lambda(sc);
        let per_run: Vec<RunSummary> = runs.iter().map(|r| RunSummary::from_run(r, lambda)).collect();
        Summary {
            scenario: ScenarioHeader {
                topology: sc.config.topology.kind.name().into(),
                protocol: sc.mac.protocol.name().into(),
                duration: sc.config.run.duration,
                t_cycle: sc.t_cycle,
                n_csma: sc.mac.n_csma,
                n_tdma: sc.mac.n_tdma,
                traffic_lambda: lambda,
            },
            pooled: PooledSummary::from_runs(runs, &per_run, lambda),
            runs: per_run,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Complete,
    Failed,
    Missing,
}

/// One (topology, protocol) combination of a sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellEntry {
    pub topology: String,
    pub protocol: String,
    pub dir: String,
    pub status: CellStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<FileDigest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub output_dir: String,
    pub seeds: Vec<u64>,
    pub parallel: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<FileDigest>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<CellEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Write `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, dir.join(name))?;
    Ok(())
}

/// The artifact contents of one scenario, in manifest order.
pub fn render_artifacts(sc: &Prepared, runs: &[RunOutput]) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let summary = Summary::new(sc, runs);
    let summary = toml::to_string(&summary).map_err(|e| Error::Serialize(e.to_string()))?;
    Ok(vec![
        (FRAMES_CSV, frames_csv(runs)?),
        (DELAYS_CSV, delays_csv(runs)?),
        (ENERGY_CSV, energy_csv(runs)?),
        (INTERARRIVALS_CSV, interarrivals_csv(runs)?),
        (SUMMARY_TOML, summary.into_bytes()),
    ])
}

/// Render everything in memory first, then write; a failure while rendering
/// leaves `dir` untouched.
pub fn write_artifacts(dir: &Path, sc: &Prepared, runs: &[RunOutput]) -> Result<Vec<FileDigest>> {
    let files = render_artifacts(sc, runs)?;
    fs::create_dir_all(dir)?;
    let mut digests = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        write_atomic(dir, name, &bytes)?;
        digests.push(FileDigest {
            name: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
    }
    Ok(digests)
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest).map_err(|e| Error::Serialize(e.to_string()))?;
    write_atomic(dir, MANIFEST_JSON, format!("{json}\n").as_bytes())
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(dir.join(MANIFEST_JSON))?;
    serde_json::from_str(&text).map_err(|e| Error::Serialize(e.to_string()))
}

pub fn display_path(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mac::Protocol;
    use crate::network::run_scenario;
    use crate::scenario::{ScenarioConfig, TopologyKind};

    fn prepared() -> Prepared {
        let mut c = ScenarioConfig::new(TopologyKind::Line, Protocol::Funneling);
        c.run.duration = 2_000.0;
        c.prepare().unwrap()
    }

    fn header(bytes: &[u8]) -> String {
        String::from_utf8_lossy(bytes).lines().next().unwrap().to_string()
    }

    #[test]
    fn headers_are_fixed() {
        let sc = prepared();
        let runs = vec![run_scenario(&sc, 1).unwrap()];
        let files = render_artifacts(&sc, &runs).unwrap();
        let h: Vec<String> = files[..4].iter().map(|(_, b)| header(b)).collect();
        assert_eq!(h[0], "run,origin,src,dst,kind,gen_time,tx_time,rx_time,outcome,retries");
        assert_eq!(h[1], "run,sensor,sensed_at,sent_at,delivered_at,mode,hops,retries,delay");
        assert_eq!(
            h[2],
            "run,node,role,tx_s,rx_s,cs_s,off_s,switches,energy_mj,avg_power_mw,lifetime_days"
        );
        assert_eq!(h[3], "run,origin,time,gap_merged,gap_node");
        for (name, b) in &files {
            assert!(!b.contains(&b'\r'), "{name}");
        }
        let summary = String::from_utf8(files[4].1.clone()).unwrap();
        let back: Summary = toml::from_str(&summary).unwrap();
        assert_eq!(back.runs.len(), 1);
        assert!(back.pooled.delivery_ratio_run_std.is_none());
    }

    #[test]
    fn pooled_spread_needs_two_runs() {
        let sc = prepared();
        let runs: Vec<RunOutput> = (1..=2).map(|s| run_scenario(&sc, s).unwrap()).collect();
        let s = Summary::new(&sc, &runs);
        assert!(s.pooled.delivery_ratio_run_std.is_some());
        assert_eq!(s.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn artifacts_and_digests_are_reproducible() {
        let sc = prepared();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let runs = vec![run_scenario(&sc, 4).unwrap()];
        let da = write_artifacts(a.path(), &sc, &runs).unwrap();
        let runs = vec![run_scenario(&sc, 4).unwrap()];
        let db = write_artifacts(b.path(), &sc, &runs).unwrap();
        assert_eq!(da, db);
        for d in &da {
            let bytes = fs::read(a.path().join(&d.name)).unwrap();
            assert_eq!(sha256_hex(&bytes), d.sha256);
        }
        assert!(!a.path().join(".frames.csv.tmp").exists());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = RunManifest {
            scenario: Some("s.toml".into()),
            output_dir: display_path(dir.path()),
            seeds: vec![1, 2],
            parallel: 2,
            files: vec![FileDigest { name: "a".into(), bytes: 1, sha256: sha256_hex(b"a") }],
            cells: vec![],
        };
        write_manifest(dir.path(), &m).unwrap();
        assert_eq!(read_manifest(dir.path()).unwrap(), m);
    }

    #[test]
    fn interarrival_gaps() {
        let sc = prepared();
        let r = run_scenario(&sc, 2).unwrap();
        let text = String::from_utf8(interarrivals_csv(std::slice::from_ref(&r)).unwrap()).unwrap();
        assert_eq!(text.lines().count(), r.sensing.len() + 1);
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut prev = f64::NEG_INFINITY;
        for rec in rdr.records() {
            let rec = rec.unwrap();
            let t: f64 = rec[2].parse().unwrap();
            assert!(t >= prev);
            if !rec[3].is_empty() {
                assert!((rec[3].parse::<f64>().unwrap() - (t - prev)).abs() < 1e-9);
            }
            prev = t;
        }
    }
}
