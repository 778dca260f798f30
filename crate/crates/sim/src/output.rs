//! CSV telemetry. Every file carries a header row and a leading
//! `schema_version` column; times are microseconds.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use strack_core::sim::{RunResult, TransportKind};
use strack_core::telemetry::{summarize, SCHEMA_VERSION};
use strack_core::time::SimTime;

pub const FCT_CSV: &str = "fct.csv";
pub const CCT_CSV: &str = "cct.csv";
pub const QDELAY_CSV: &str = "qdelay.csv";
pub const TPUT_CSV: &str = "tput.csv";
pub const EVENTS_CSV: &str = "events.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const RUN_CSV: &str = "run.csv";

#[derive(Debug, thiserror::Error)]
#[error("writing {path}")]
pub struct WriteError {
    pub path: PathBuf,
    pub source: csv::Error,
}

impl WriteError {
    fn io(path: &Path, e: io::Error) -> Self {
        WriteError {
            path: path.to_path_buf(),
            source: e.into(),
        }
    }
}

fn us(t: SimTime) -> f64 {
    t.as_micros_f64()
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct FctRow {
    pub schema_version: u32,
    pub flow_id: u32,
    pub msg_id: u32,
    pub job_id: u32,
    pub src: u32,
    pub dst: u32,
    pub bytes: u64,
    pub release_us: f64,
    pub first_send_us: Option<f64>,
    pub completion_us: Option<f64>,
    pub delivered_us: Option<f64>,
    pub fct_us: Option<f64>,
    pub retransmitted_bytes: u64,
    pub drops_experienced: u64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CctRow {
    pub schema_version: u32,
    pub job_id: u32,
    pub messages: u32,
    pub first_send_us: f64,
    pub last_finish_us: f64,
    pub cct_us: f64,
}

#[derive(Debug, Serialize)]
struct QdelayRow {
    schema_version: u32,
    time_us: f64,
    switch_id: u32,
    queue_id: u16,
    delay_us: f64,
    occupancy_bytes: u64,
    arrival_gbps: f64,
}

#[derive(Debug, Serialize)]
struct TputRow {
    schema_version: u32,
    msg_id: u32,
    window: usize,
    window_start_us: f64,
    bytes: u64,
    gbps: f64,
}

#[derive(Debug, Serialize)]
struct EventRow {
    schema_version: u32,
    time_us: f64,
    kind: &'static str,
    node: u32,
    port: u16,
    flow: Option<u32>,
    psn: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SummaryRow {
    pub schema_version: u32,
    pub transport: String,
    pub bucket_bytes: u64,
    pub count: usize,
    pub max_fct_us: f64,
    pub p99_fct_us: f64,
    pub mean_fct_us: f64,
    pub min_fct_us: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Clone)]
pub struct RunRow {
    pub schema_version: u32,
    pub transport: String,
    pub seed: u64,
    pub messages: usize,
    pub end_us: f64,
    pub max_fct_us: Option<f64>,
    pub max_cct_us: Option<f64>,
    pub injected_bytes: u64,
    pub delivered_bytes: u64,
    pub dropped_bytes: u64,
    pub in_network_bytes: u64,
    pub data_drops: u64,
    pub link_losses: u64,
    pub sack_losses: u64,
    pub retransmitted_bytes: u64,
    pub ooo_recoveries: u64,
    pub probe_recoveries: u64,
    pub probes: u64,
    pub timeouts: u64,
    pub nacks: u64,
    pub cnps: u64,
    pub pfc_pauses: u64,
    pub pfc_resumes: u64,
    pub events: u64,
}

fn write_rows<T: Serialize>(
    dir: &Path,
    name: &str,
    rows: impl IntoIterator<Item = T>,
    header: &[&str],
) -> Result<(), WriteError> {
    let path = dir.join(name);
    let err = |source| WriteError {
        path: path.clone(),
        source,
    };
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&path)
        .map_err(err)?;
    // Written by hand so that empty tables still carry their header.
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| WriteError::io(&path, e))
}

pub fn fct_rows(r: &RunResult) -> Vec<FctRow> {
    r.flows
        .iter()
        .map(|f| FctRow {
            schema_version: SCHEMA_VERSION,
            flow_id: f.flow_id,
            msg_id: f.msg_id,
            job_id: f.job_id,
            src: f.src,
            dst: f.dst,
            bytes: f.bytes,
            release_us: us(f.release_time),
            first_send_us: f.first_send_time.map(us),
            completion_us: f.completion_time.map(us),
            delivered_us: f.delivered_time.map(us),
            fct_us: f.fct().map(us),
            retransmitted_bytes: f.retransmitted_bytes,
            drops_experienced: f.drops_experienced,
        })
        .collect()
}

/// Max, p99, mean and min FCT per message size.
pub fn summary_rows(transport: &str, fct: &[FctRow]) -> Vec<SummaryRow> {
    let stats = summarize(fct.iter().filter_map(|f| f.fct_us.map(|v| (f.bytes, v))));
    stats
        .into_iter()
        .map(|(bucket, s)| SummaryRow {
            schema_version: SCHEMA_VERSION,
            transport: transport.to_string(),
            bucket_bytes: bucket,
            count: s.count,
            max_fct_us: s.max,
            p99_fct_us: s.p99,
            mean_fct_us: s.mean,
            min_fct_us: s.min,
        })
        .collect()
}

pub fn run_row(transport: TransportKind, seed: u64, r: &RunResult) -> RunRow {
    let s = &r.stats;
    let c = &r.conservation;
    RunRow {
        schema_version: SCHEMA_VERSION,
        transport: transport.as_str().to_string(),
        seed,
        messages: r.flows.len(),
        end_us: us(r.end_time),
        max_fct_us: r.max_fct().map(us),
        max_cct_us: r.max_cct().map(us),
        injected_bytes: c.injected,
        delivered_bytes: c.delivered,
        dropped_bytes: c.dropped,
        in_network_bytes: c.in_network,
        data_drops: s.data_drops,
        link_losses: s.link_losses,
        sack_losses: s.sack_losses,
        retransmitted_bytes: s.retransmitted_bytes,
        ooo_recoveries: s.ooo_recoveries,
        probe_recoveries: s.probe_recoveries,
        probes: s.probes,
        timeouts: s.timeouts,
        nacks: s.nacks,
        cnps: s.cnps,
        pfc_pauses: s.pfc_pauses,
        pfc_resumes: s.pfc_resumes,
        events: s.events,
    }
}

const FCT_HEADER: &[&str] = &[
    "schema_version",
    "flow_id",
    "msg_id",
    "job_id",
    "src",
    "dst",
    "bytes",
    "release_us",
    "first_send_us",
    "completion_us",
    "delivered_us",
    "fct_us",
    "retransmitted_bytes",
    "drops_experienced",
];
const CCT_HEADER: &[&str] = &[
    "schema_version",
    "job_id",
    "messages",
    "first_send_us",
    "last_finish_us",
    "cct_us",
];
const QDELAY_HEADER: &[&str] = &[
    "schema_version",
    "time_us",
    "switch_id",
    "queue_id",
    "delay_us",
    "occupancy_bytes",
    "arrival_gbps",
];
const TPUT_HEADER: &[&str] = &["schema_version", "msg_id", "window", "window_start_us", "bytes", "gbps"];
const EVENTS_HEADER: &[&str] = &["schema_version", "time_us", "kind", "node", "port", "flow", "psn"];
pub const SUMMARY_HEADER: &[&str] = &[
    "schema_version",
    "transport",
    "bucket_bytes",
    "count",
    "max_fct_us",
    "p99_fct_us",
    "mean_fct_us",
    "min_fct_us",
];
pub const RUN_HEADER: &[&str] = &[
    "schema_version",
    "transport",
    "seed",
    "messages",
    "end_us",
    "max_fct_us",
    "max_cct_us",
    "injected_bytes",
    "delivered_bytes",
    "dropped_bytes",
    "in_network_bytes",
    "data_drops",
    "link_losses",
    "sack_losses",
    "retransmitted_bytes",
    "ooo_recoveries",
    "probe_recoveries",
    "probes",
    "timeouts",
    "nacks",
    "cnps",
    "pfc_pauses",
    "pfc_resumes",
    "events",
];

pub fn write_summary(dir: &Path, rows: &[SummaryRow]) -> Result<(), WriteError> {
    fs::create_dir_all(dir).map_err(|e| WriteError::io(dir, e))?;
    write_rows(dir, SUMMARY_CSV, rows, SUMMARY_HEADER)
}

/// Writes every telemetry file for one finished run into `dir`.
pub fn write_run(dir: &Path, transport: TransportKind, seed: u64, r: &RunResult) -> Result<(), WriteError> {
    fs::create_dir_all(dir).map_err(|e| WriteError::io(dir, e))?;
    let fct = fct_rows(r);
    write_rows(dir, FCT_CSV, &fct, FCT_HEADER)?;
    write_summary(dir, &summary_rows(transport.as_str(), &fct))?;
    write_rows(
        dir,
        CCT_CSV,
        r.jobs.iter().map(|j| CctRow {
            schema_version: SCHEMA_VERSION,
            job_id: j.job_id,
            messages: j.messages,
            first_send_us: us(j.first_send),
            last_finish_us: us(j.last_finish),
            cct_us: us(j.cct()),
        }),
        CCT_HEADER,
    )?;
    write_rows(
        dir,
        QDELAY_CSV,
        r.qdelay.iter().map(|s| QdelayRow {
            schema_version: SCHEMA_VERSION,
            time_us: us(s.time),
            switch_id: s.switch_id,
            queue_id: s.queue_id,
            delay_us: us(s.delay),
            occupancy_bytes: s.occupancy_bytes,
            arrival_gbps: s.arrival_gbps,
        }),
        QDELAY_HEADER,
    )?;
    let window = r.tput.window();
    let n = (r.end_time.as_ps() / window.as_ps()) as usize + 1;
    write_rows(
        dir,
        TPUT_CSV,
        r.tput.rows(n).into_iter().map(|(f, i, b)| TputRow {
            schema_version: SCHEMA_VERSION,
            msg_id: f,
            window: i,
            window_start_us: us(window.mul(i as u64)),
            bytes: b,
            gbps: r.tput.gbps(b),
        }),
        TPUT_HEADER,
    )?;
    write_rows(
        dir,
        EVENTS_CSV,
        r.events.iter().map(|e| EventRow {
            schema_version: SCHEMA_VERSION,
            time_us: us(e.time),
            kind: e.kind.as_str(),
            node: e.node,
            port: e.port,
            flow: e.flow,
            psn: e.psn,
        }),
        EVENTS_HEADER,
    )?;
    write_rows(dir, RUN_CSV, [run_row(transport, seed, r)], RUN_HEADER)
}

pub fn read_fct(path: &Path) -> Result<Vec<FctRow>, csv::Error> {
    csv::Reader::from_path(path)?.deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(bytes: u64, fct: f64) -> FctRow {
        FctRow {
            schema_version: SCHEMA_VERSION,
            flow_id: 0,
            msg_id: 0,
            job_id: 0,
            src: 0,
            dst: 1,
            bytes,
            release_us: 0.0,
            first_send_us: Some(0.0),
            completion_us: Some(fct),
            delivered_us: Some(fct),
            fct_us: Some(fct),
            retransmitted_bytes: 0,
            drops_experienced: 0,
        }
    }

    #[test]
    fn single_row_summary() {
        let s = summary_rows("strack", &[row(10, 7.5)]);
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].max_fct_us, s[0].p99_fct_us, s[0].mean_fct_us), (7.5, 7.5, 7.5));
    }

    #[test]
    fn ten_row_fixture() {
        let vals = [3.0, 9.0, 1.0, 4.0, 10.0, 2.0, 8.0, 5.0, 7.0, 6.0];
        let rows: Vec<_> = vals.iter().map(|&v| row(4096, v)).collect();
        let s = &summary_rows("rocev2", &rows)[0];
        // Nearest rank: ceil(0.99 * 10) = 10th smallest.
        assert_eq!(s.p99_fct_us, 10.0);
        assert_eq!(s.max_fct_us, 10.0);
        assert_eq!(s.min_fct_us, 1.0);
        assert!((s.mean_fct_us - 5.5).abs() < 1e-12);
        assert_eq!(s.count, 10);
    }

    #[test]
    fn buckets_are_independent() {
        let rows = vec![row(1, 1.0), row(2, 50.0), row(1, 3.0)];
        let s = summary_rows("strack", &rows);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].bucket_bytes, s[0].max_fct_us, s[0].count), (1, 3.0, 2));
        assert_eq!((s[1].bucket_bytes, s[1].max_fct_us, s[1].count), (2, 50.0, 1));
    }

    #[test]
    fn empty_table_keeps_its_header() {
        let dir = tempfile::tempdir().unwrap();
        write_summary(dir.path(), &[]).unwrap();
        let text = fs::read_to_string(dir.path().join(SUMMARY_CSV)).unwrap();
        assert_eq!(text.trim_end(), SUMMARY_HEADER.join(","));
    }

    #[test]
    fn fct_rows_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![row(5, 1.25), row(6, 2.5)];
        write_rows(dir.path(), FCT_CSV, &rows, FCT_HEADER).unwrap();
        assert_eq!(read_fct(&dir.path().join(FCT_CSV)).unwrap(), rows);
    }
}
