//! `dpc-sim`: seeded BER experiments, metric reports and capacity-region
//! exports for the sign-bit-shaping DPC codec.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dpc_core::sim::{
    metrics_table, monotonicity_warnings, report_metrics, run_experiment_to_files, selftest,
    write_region_csv, ExperimentConfig, RunMeta,
};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "dpc-sim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a BER experiment described by a config file.
    Simulate(SimulateArgs),
    /// Post-process a finished run: transmit power, granular gain, shaping
    /// loss and the gap-to-capacity split.
    Metrics(MetricsArgs),
    /// Emit the two-user broadcast capacity-region boundary as CSV.
    Region(RegionArgs),
    /// Run the built-in property suites.
    Selftest,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment config (TOML key-value file).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output stem: writes `<out>.csv` and `<out>.meta.toml`.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Write 0.000 in the seconds column (byte-identical reruns).
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct MetricsArgs {
    /// A run's `.meta.toml` (or its output stem).
    #[arg(long)]
    run: PathBuf,
    /// Also write the table as CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RegionArgs {
    /// Read total_power / p_n1 / p_n2 from a broadcast config file.
    #[arg(long, conflicts_with_all = ["power", "p_n1", "p_n2"])]
    config: Option<PathBuf>,
    #[arg(long)]
    power: Option<f64>,
    #[arg(long)]
    p_n1: Option<f64>,
    #[arg(long)]
    p_n2: Option<f64>,
    /// Number of beta grid intervals.
    #[arg(long, default_value_t = 200)]
    grid: usize,
    /// Output CSV path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => simulate(args),
        Command::Metrics(args) => metrics(args),
        Command::Region(args) => region(args),
        Command::Selftest => run_selftest(),
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate().context("invalid experiment config")?;
    let artifacts = run_experiment_to_files(&cfg, &args.out, args.threads, args.no_timing)?;
    for rec in &artifacts.records {
        println!("{}", rec.csv_line());
    }
    for w in monotonicity_warnings(&artifacts.records) {
        eprintln!("warning: {w}");
    }
    for pt in &artifacts.meta.points {
        if pt.low_confidence {
            eprintln!(
                "warning: point {} dB finished with {} errors (< {}), low confidence",
                pt.snr_db, pt.errors, artifacts.meta.min_errors
            );
        }
    }
    eprintln!(
        "wrote {} and {}",
        args.out.with_extension("csv").display(),
        args.out.with_extension("meta.toml").display()
    );
    Ok(())
}

fn metrics(args: MetricsArgs) -> Result<()> {
    let path = if args.run.extension().is_some() {
        args.run.clone()
    } else {
        args.run.with_extension("meta.toml")
    };
    let meta =
        RunMeta::from_file(&path).with_context(|| format!("reading {}", path.display()))?;
    let rows = report_metrics(&meta);
    print!("{}", metrics_table(&rows));
    if let Some(bc) = &meta.broadcast {
        println!(
            "broadcast: beta={:.6} P={:.4} measured P_X1={:.4} P_X2={:.4} snr1={:.4} dB snr2={:.4} dB",
            bc.beta, bc.total_power, bc.measured_p_x1, bc.measured_p_x2, bc.snr1_db, bc.snr2_db
        );
    }
    if let Some(out) = args.out {
        let mut text = String::from(
            "snr_db,measured_sx,granular_gain_db,shaping_loss_db,operating_snr_db,capacity_snr_db,total_gap_db,shaping_gap_db,coding_gap_db,low_confidence\n",
        );
        for r in &rows {
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.snr_db,
                r.measured_sx,
                r.granular_gain_db,
                r.shaping_loss_db,
                r.operating_snr_db,
                r.capacity_snr_db,
                r.total_gap_db,
                r.shaping_gap_db,
                r.coding_gap_db,
                r.low_confidence
            ));
        }
        std::fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn region(args: RegionArgs) -> Result<()> {
    let (p, p_n1, p_n2) = if let Some(cfg_path) = args.config {
        let cfg = ExperimentConfig::from_file(&cfg_path)
            .with_context(|| format!("reading {}", cfg_path.display()))?;
        match (cfg.total_power, cfg.p_n1, cfg.p_n2) {
            (Some(p), Some(a), Some(b)) => (p, a, b),
            _ => bail!("config lacks total_power / p_n1 / p_n2"),
        }
    } else {
        match (args.power, args.p_n1, args.p_n2) {
            (Some(p), Some(a), Some(b)) => (p, a, b),
            _ => bail!("provide --config or all of --power, --p-n1, --p-n2"),
        }
    };
    match args.out {
        Some(path) => {
            let file = std::fs::File::create(&path)
                .with_context(|| format!("creating {}", path.display()))?;
            write_region_csv(p, p_n1, p_n2, args.grid, file)?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            let stdout = std::io::stdout();
            write_region_csv(p, p_n1, p_n2, args.grid, stdout.lock())?;
        }
    }
    Ok(())
}

fn run_selftest() -> Result<()> {
    let mut failed = 0usize;
    for r in selftest() {
        println!(
            "{} {:<22} {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
        if !r.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        bail!("{failed} selftest suite(s) failed");
    }
    Ok(())
}
