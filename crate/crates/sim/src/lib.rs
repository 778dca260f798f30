//! File formats, telemetry output and run orchestration around
//! `strack-core`.

pub mod config;
pub mod output;
pub mod sweep;
pub mod trace_file;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::Context;
use strack_core::sim::{RunResult, SimConfig, Simulation};

use crate::output::{RunRow, SummaryRow};
use crate::sweep::{Axis, Point};

/// Overrides the output root for runs that do not name `--out`.
pub const OUT_DIR_ENV: &str = "STRACK_OUT_DIR";
pub const EFFECTIVE_CONFIG: &str = "config.toml";
pub const TRACE_TXT: &str = "trace.txt";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_SUMMARY_CSV: &str = "sweep_summary.csv";

/// Where a run writes. An explicit directory wins; otherwise the config's
/// `output_dir` (or `out/<config name>`) is placed under the root from
/// [`OUT_DIR_ENV`], falling back to the working directory.
pub fn resolve_out_dir(explicit: Option<&Path>, cfg: &SimConfig, config_path: &Path) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    let rel = match &cfg.output_dir {
        Some(d) => PathBuf::from(d),
        None => {
            let stem = config_path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
            Path::new("out").join(stem)
        }
    };
    match std::env::var_os(OUT_DIR_ENV) {
        Some(root) => Path::new(&root).join(rel),
        None => rel,
    }
}

/// Runs one config and writes its effective config, trace and telemetry
/// into `dir`.
pub fn run_to_dir(cfg: &SimConfig, dir: &Path) -> anyhow::Result<RunResult> {
    let sim = Simulation::new(cfg.clone()).map_err(config::LoadError::Invalid)?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let eff = config::effective(cfg);
    fs::write(dir.join(EFFECTIVE_CONFIG), config::to_toml(&eff))
        .with_context(|| format!("writing {}", dir.join(EFFECTIVE_CONFIG).display()))?;
    fs::write(dir.join(TRACE_TXT), trace_file::render(sim.trace()))
        .with_context(|| format!("writing {}", dir.join(TRACE_TXT).display()))?;
    let result = sim.run()?;
    output::write_run(dir, cfg.transport, cfg.seed, &result)?;
    Ok(result)
}

pub struct PointOutcome {
    pub point: Point,
    pub dir: PathBuf,
    pub result: Result<(RunRow, Vec<SummaryRow>), String>,
}

impl PointOutcome {
    pub fn failed(&self) -> bool {
        self.result.is_err()
    }
}

fn run_point(base: &toml::Table, config_path: &Path, root: &Path, point: &Point) -> PointOutcome {
    let dir = sweep::point_dir(root, point);
    let result = (|| -> anyhow::Result<_> {
        let mut table = base.clone();
        for (k, v) in point {
            sweep::apply(&mut table, k, v)?;
        }
        let cfg = config::from_table(table, config_path, &config::base_dir(config_path))?;
        let r = run_to_dir(&cfg, &dir)?;
        let fct = output::fct_rows(&r);
        Ok((
            output::run_row(cfg.transport, cfg.seed, &r),
            output::summary_rows(cfg.transport.as_str(), &fct),
        ))
    })()
    .map_err(|e| format!("{e:#}"));
    PointOutcome {
        point: point.clone(),
        dir,
        result,
    }
}

/// Runs every point of the product of `axes` on up to `jobs` threads.
/// Failed points are reported in the aggregate; the others are kept.
pub fn run_sweep(config_path: &Path, axes: &[Axis], root: &Path, jobs: usize) -> anyhow::Result<Vec<PointOutcome>> {
    let base = config::read_table(config_path)?;
    let points = sweep::points(axes)?;
    fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<PointOutcome>>> = Mutex::new((0..points.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, points.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(p) = points.get(i) else { break };
                let o = run_point(&base, config_path, root, p);
                slots.lock().unwrap()[i] = Some(o);
            });
        }
    });
    let outcomes: Vec<PointOutcome> = slots.into_inner().unwrap().into_iter().map(|o| o.unwrap()).collect();
    write_aggregate(root, axes, &outcomes)?;
    Ok(outcomes)
}

fn record_of<T: serde::Serialize>(row: &T) -> anyhow::Result<Vec<String>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.serialize(row)?;
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    let rec = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(bytes.as_slice())
        .records()
        .next()
        .expect("one record was written")?;
    Ok(rec.iter().map(String::from).collect())
}

fn write_aggregate(root: &Path, axes: &[Axis], outcomes: &[PointOutcome]) -> anyhow::Result<()> {
    // Axis columns are prefixed so they cannot collide with run fields.
    let keys: Vec<String> = axes.iter().map(|a| format!("param.{}", a.key)).collect();
    let path = root.join(SWEEP_CSV);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    let run_header = output::RUN_HEADER;
    let mut header: Vec<&str> = keys.iter().map(String::as_str).collect();
    header.extend(["status", "error"]);
    header.extend(run_header);
    w.write_record(&header)?;
    for o in outcomes {
        let mut rec: Vec<String> = o.point.iter().map(|(_, v)| v.clone()).collect();
        match &o.result {
            Ok((run, _)) => {
                rec.extend(["ok".to_string(), String::new()]);
                rec.extend(record_of(run)?);
            }
            Err(e) => {
                rec.extend(["failed".to_string(), e.clone()]);
                rec.extend(run_header.iter().map(|_| String::new()));
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;

    let path = root.join(SWEEP_SUMMARY_CSV);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    let mut header: Vec<&str> = keys.iter().map(String::as_str).collect();
    header.extend(output::SUMMARY_HEADER);
    w.write_record(&header)?;
    for o in outcomes {
        if let Ok((_, rows)) = &o.result {
            for r in rows {
                let mut rec: Vec<String> = o.point.iter().map(|(_, v)| v.clone()).collect();
                rec.extend(record_of(r)?);
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
