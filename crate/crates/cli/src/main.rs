use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use quadsim::harness::{
    default_grid, emit_plots, format_summary_table, run_stem, run_sweep, write_run, write_summary_csv, Mode,
    ScenarioConfig,
};
use quadsim::sim::{read_trace_csv, run_scenario};

#[derive(Parser)]
#[command(name = "quadsim", version, about = "Quadrotor payload-impact simulator with adaptive NMPC control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trace and summary.
    Simulate {
        /// Scenario file (TOML). Defaults are used for anything it omits.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the output directory from the config file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also render plots next to the trace.
        #[arg(long)]
        plots: bool,
    },
    /// Run the payload-mass by drop-height grid for one mode.
    Sweep {
        #[arg(long)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        /// Base scenario file; its mode, payload mass and drop height are replaced per cell.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Render plots from a trace CSV.
    Plot {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig> {
    match path {
        Some(p) => ScenarioConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ScenarioConfig::default()),
    }
}

fn simulate(config: Option<&Path>, seed: Option<u64>, out: Option<PathBuf>, plots: bool) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.scenario.seed = s;
    }
    let out = out
        .or_else(|| cfg.scenario.out_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let outcome = run_scenario(&cfg)?;
    let stem = run_stem(&cfg);
    let trace_path = write_run(&out, &stem, &outcome, &cfg)?;
    fs::write(out.join(format!("{stem}.toml")), cfg.to_toml_string())?;
    let s = outcome.summary(&cfg);
    println!(
        "{} m_P={} h_P={}: MAE_v {:.3} cm/s, MAE_p {:.3} cm, impulse {:.4} N·s, failed {}, {:.2} s",
        s.mode, s.payload_mass, s.drop_height, s.mae_v_cm_s, s.mae_p_cm, s.impulse_ns, s.failed, s.runtime_s
    );
    println!("trace: {}", trace_path.display());
    if plots {
        for f in emit_plots(&outcome.trace, &out)? {
            println!("plot: {}", f.display());
        }
    }
    Ok(())
}

fn sweep(mode: Mode, out: &Path, config: Option<&Path>) -> Result<()> {
    let base = load_config(config)?;
    let cells = run_sweep(&base, mode, &default_grid(), Some(out))?;
    let stem = format!("sweep_{}", mode.label());
    write_summary_csv(&cells, File::create(out.join(format!("{stem}.csv")))?)?;
    let table = format_summary_table(&cells);
    fs::write(out.join(format!("{stem}.txt")), &table)?;
    print!("{table}");
    for c in &cells {
        if let Some(e) = &c.error {
            eprintln!("m_P={} h_P={}: {e}", c.summary.payload_mass, c.summary.drop_height);
        }
    }
    Ok(())
}

fn plot(trace: &Path, out: &Path) -> Result<()> {
    let file = File::open(trace).with_context(|| format!("opening {}", trace.display()))?;
    let records = read_trace_csv(BufReader::new(file))?;
    for f in emit_plots(&records, out)? {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { config, seed, out, plots } => simulate(config.as_deref(), seed, out, plots),
        Command::Sweep { mode, out, config } => sweep(mode, &out, config.as_deref()),
        Command::Plot { trace, out } => plot(&trace, &out),
    }
}
