use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use strack_sim::output::{self, SUMMARY_CSV};
use strack_sim::sweep::Axis;
use strack_sim::{config, resolve_out_dir, run_sweep, run_to_dir, OUT_DIR_ENV, SWEEP_CSV};

#[derive(Parser)]
#[command(
    name = "strack-sim",
    version,
    about = "Packet-level simulator for STrack and RoCEv2 on fat-tree fabrics"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one config and write telemetry CSVs.
    Run {
        config: PathBuf,
        /// Output directory (default: the config's output_dir or out/<name>,
        /// under $STRACK_OUT_DIR when set).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the cartesian product of one or more axes.
    Sweep {
        config: PathBuf,
        /// `dotted.key=v1,v2,...`, e.g. `workload.size=4KB,2MB,16MB`.
        #[arg(long = "axis", required = true)]
        axes: Vec<Axis>,
        /// Root directory holding one subdirectory per point.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Points run concurrently (default: available cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Recompute per-size FCT statistics from an fct.csv.
    Summarize {
        fct: PathBuf,
        #[arg(long, default_value = "unknown")]
        transport: String,
        /// Directory for summary.csv (default: next to the input).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fmt_us(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.3} us"))
}

fn run(config_path: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let cfg = config::load(config_path)?;
    let dir = resolve_out_dir(out, &cfg, config_path);
    let r = run_to_dir(&cfg, &dir)?;
    let row = output::run_row(cfg.transport, cfg.seed, &r);
    println!("transport    {}", row.transport);
    println!("messages     {}", row.messages);
    println!("max FCT      {}", fmt_us(row.max_fct_us));
    println!("max CCT      {}", fmt_us(row.max_cct_us));
    println!("end time     {:.3} us", row.end_us);
    println!("drops        {}", row.data_drops);
    println!("retransmit   {} bytes", row.retransmitted_bytes);
    println!("output       {}", dir.display());
    Ok(())
}

fn sweep(config_path: &Path, axes: &[Axis], out: Option<&Path>, jobs: Option<usize>) -> anyhow::Result<bool> {
    let root = match out {
        Some(p) => p.to_path_buf(),
        None => {
            let stem = config_path.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
            let rel = Path::new("out").join(format!("{stem}-sweep"));
            match std::env::var_os(OUT_DIR_ENV) {
                Some(r) => Path::new(&r).join(rel),
                None => rel,
            }
        }
    };
    let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let outcomes = run_sweep(config_path, axes, &root, jobs)?;
    let mut ok = true;
    for o in &outcomes {
        let name = o
            .dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        match &o.result {
            Ok((row, _)) => println!(
                "ok      {name}  max FCT {}  max CCT {}",
                fmt_us(row.max_fct_us),
                fmt_us(row.max_cct_us)
            ),
            Err(e) => {
                ok = false;
                println!("FAILED  {name}  {e}");
            }
        }
    }
    println!("aggregate    {}", root.join(SWEEP_CSV).display());
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Run { config, out } => run(config, out.as_deref()).map(|_| true),
        Cmd::Sweep {
            config,
            axes,
            out,
            jobs,
        } => sweep(config, axes, out.as_deref(), *jobs),
        Cmd::Validate { config: path } => config::load(path)
            .and_then(|c| config::validate(&c))
            .map(|fat| {
                println!(
                    "{}: ok ({} hosts, {} ToRs, {} spines)",
                    path.display(),
                    fat.hosts(),
                    fat.tors(),
                    fat.spines()
                );
                true
            })
            .map_err(anyhow::Error::from),
        Cmd::Summarize { fct, transport, out } => (|| {
            let rows = output::read_fct(fct).with_context(|| format!("reading {}", fct.display()))?;
            let dir = out.clone().unwrap_or_else(|| config::base_dir(fct));
            output::write_summary(&dir, &output::summary_rows(transport, &rows))?;
            println!("{}", dir.join(SUMMARY_CSV).display());
            Ok(true)
        })(),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
