use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use psnsim_core::mac::Protocol;
use psnsim_core::output::{display_path, write_artifacts, write_manifest, RunManifest, Summary};
use psnsim_core::scenario::{ScenarioConfig, TopologyKind};
use psnsim_core::sweep::{run_seeds, seeds, sweep, SweepOptions, SWEEP_CSV};
use psnsim_core::verify::{verify_math, MathImpl};
use psnsim_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(name = "psnsim", version, about = "Parking sensor network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML). Defaults apply when omitted.
    scenario: Option<PathBuf>,
    /// First seed; run i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "PSNSIM_OUT", default_value = "psnsim-out")]
    out: PathBuf,
    /// Number of runs (overrides the scenario file).
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    parallel: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        topology: Option<TopologyKind>,
        #[arg(long)]
        protocol: Option<Protocol>,
    },
    /// Run every protocol × topology combination.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated protocols.
        #[arg(long, value_delimiter = ',', default_value = "csma,tdma,funneling,iqueue")]
        protocols: Vec<Protocol>,
        /// Comma-separated topologies.
        #[arg(long, value_delimiter = ',', default_value = "crossroad,line,mesh")]
        topologies: Vec<TopologyKind>,
    },
    /// Check the traffic mathematics against numerical oracles.
    VerifyMath {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("psnsim: {msg}");
    ExitCode::from(code)
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn report(e: Error) -> ExitCode {
    let code = error_code(&e);
    match e {
        Error::Config(list) => {
            eprintln!("psnsim: invalid configuration");
            for c in list {
                eprintln!("  - {c}");
            }
            ExitCode::from(code)
        }
        other => fail(code, other),
    }
}

fn load(common: &Common) -> Result<ScenarioConfig, ExitCode> {
    let mut cfg = match &common.scenario {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| fail(EXIT_CONFIG, format!("cannot read {}: {e}", p.display())))?;
            ScenarioConfig::from_toml_str(&text).map_err(report)?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.run.seed = s;
    }
    if let Some(r) = common.runs {
        cfg.run.runs = r;
    }
    Ok(cfg)
}

fn cmd_run(common: &Common, topology: Option<TopologyKind>, protocol: Option<Protocol>) -> ExitCode {
    let mut cfg = match load(common) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Some(t) = topology {
        cfg.topology.kind = t;
    }
    if let Some(p) = protocol {
        cfg.mac.protocol = p;
    }
    let sc = match cfg.prepare() {
        Ok(sc) => sc,
        Err(e) => return report(e),
    };
    let seed_list = seeds(cfg.run.seed, cfg.run.runs);
    let runs = match run_seeds(&sc, &seed_list, common.parallel, None) {
        Ok(Some(r)) => r,
        Ok(None) => return fail(EXIT_RUNTIME, "interrupted"),
        Err(e) => return report(e),
    };
    let out = &common.out;
    let files = match write_artifacts(out, &sc, &runs) {
        Ok(f) => f,
        Err(e) => return report(e),
    };
    let manifest = RunManifest {
        scenario: common.scenario.as_deref().map(display_path),
        output_dir: display_path(out),
        seeds: seed_list,
        parallel: common.parallel,
        files,
        cells: Vec::new(),
    };
    if let Err(e) = write_manifest(out, &manifest) {
        return report(e);
    }
    let p = Summary::new(&sc, &runs).pooled;
    println!(
        "{} / {}: {} runs, cycle {:.3} s ({} csma + {} tdma slots)",
        sc.config.topology.kind,
        sc.mac.protocol,
        runs.len(),
        sc.t_cycle,
        sc.mac.n_csma,
        sc.mac.n_tdma
    );
    println!("  records {}  delivery ratio {:.4}", p.records, p.delivery_ratio);
    if let (Some(a), Some(b), Some(c)) = (p.delay_p50, p.delay_p90, p.delay_p99) {
        println!("  delay p50 {a:.3} s  p90 {b:.3} s  p99 {c:.3} s");
    }
    if let Some(m) = p.sensor_lifetime_mean {
        println!("  sensor lifetime {m:.1} days (spread {:.2})", p.sensor_lifetime_std.unwrap_or(0.0));
    }
    println!("  artifacts in {}", out.display());
    ExitCode::SUCCESS
}

fn cmd_sweep(common: &Common, protocols: &[Protocol], topologies: &[TopologyKind]) -> ExitCode {
    let cfg = match load(common) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let opts = SweepOptions {
        runs: cfg.run.runs,
        parallel: common.parallel,
        ..SweepOptions::default()
    };
    let report_ = match sweep(&cfg, topologies, protocols, &opts, &common.out, common.scenario.as_deref()) {
        Ok(r) => r,
        Err(e) => return report(e),
    };
    println!("{:<10} {:<10} {:>9} {:>9} {:>10} {:>12}", "topology", "protocol", "status", "delivery", "delay_p50", "sensor_days");
    for c in &report_.cells {
        let p = c.pooled.as_ref();
        let status = format!("{:?}", c.status).to_lowercase();
        let f = |v: Option<f64>, prec: usize| v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<10} {:<10} {:>9} {:>9} {:>10} {:>12}",
            c.topology.name(),
            c.protocol.name(),
            status,
            f(p.map(|p| p.delivery_ratio), 4),
            f(p.and_then(|p| p.delay_p50), 3),
            f(p.and_then(|p| p.sensor_lifetime_mean), 1),
        );
        if let Some(e) = &c.error {
            eprintln!("  {}-{}: {e}", c.topology.name(), c.protocol.name());
        }
    }
    println!("table in {}", Path::new(&common.out).join(SWEEP_CSV).display());
    if report_.failed() > 0 {
        return ExitCode::from(EXIT_RUNTIME);
    }
    ExitCode::SUCCESS
}

fn cmd_verify(seed: u64) -> ExitCode {
    let r = verify_math(&MathImpl::default(), seed);
    print!("{r}");
    if r.passed() {
        ExitCode::SUCCESS
    } else {
        let names: Vec<&str> = r.failures().map(|c| c.name).collect();
        fail(EXIT_VERIFY, format!("verification failed: {}", names.join(", ")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run { common, topology, protocol } => cmd_run(common, *topology, *protocol),
        Command::Sweep {
            common,
            protocols,
            topologies,
        } => cmd_sweep(common, protocols, topologies),
        Command::VerifyMath { seed } => cmd_verify(*seed),
    }
}
