//! Line-oriented trace format, one message per line:
//!
//! ```text
//! # msg_id src dst bytes deps job
//! 0 0 9 4MB - 0
//! 1 9 3 1048576 0 0
//! 2 3 12 64KB 0,1 1
//! ```
//!
//! `deps` is a comma-separated list of message ids or `-` for none. Sizes
//! accept the same units as config files. Blank lines and `#` comments are
//! ignored.

use std::fmt::Write as _;

use strack_core::workload::{ByteSize, MessageRecord, Trace};

#[derive(Debug, thiserror::Error)]
#[error("line {line}: {reason}")]
pub struct TraceParseError {
    pub line: usize,
    pub reason: String,
}

fn field<T: std::str::FromStr>(tok: Option<&str>, name: &str, line: usize) -> Result<T, TraceParseError> {
    let tok = tok.ok_or_else(|| TraceParseError {
        line,
        reason: format!("missing {name}"),
    })?;
    tok.parse().map_err(|_| TraceParseError {
        line,
        reason: format!("bad {name} {tok:?}"),
    })
}

pub fn parse(text: &str) -> Result<Trace, TraceParseError> {
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut tok = body.split_whitespace();
        let msg_id = field(tok.next(), "msg_id", line)?;
        let src = field(tok.next(), "src", line)?;
        let dst = field(tok.next(), "dst", line)?;
        let size = tok.next().ok_or_else(|| TraceParseError {
            line,
            reason: "missing bytes".into(),
        })?;
        let size_bytes = ByteSize::parse(size)
            .map_err(|reason| TraceParseError { line, reason })?
            .0;
        let deps = tok.next().ok_or_else(|| TraceParseError {
            line,
            reason: "missing deps".into(),
        })?;
        let depends_on = if deps == "-" {
            Vec::new()
        } else {
            deps.split(',')
                .map(|d| field(Some(d), "dependency", line))
                .collect::<Result<_, _>>()?
        };
        let job_id = field(tok.next(), "job", line)?;
        if let Some(extra) = tok.next() {
            return Err(TraceParseError {
                line,
                reason: format!("unexpected trailing field {extra:?}"),
            });
        }
        records.push(MessageRecord {
            msg_id,
            src,
            dst,
            size_bytes,
            depends_on,
            job_id,
        });
    }
    Ok(Trace::new(records))
}

pub fn render(trace: &Trace) -> String {
    let mut out = String::from("# msg_id src dst bytes deps job\n");
    for r in &trace.records {
        let deps = if r.depends_on.is_empty() {
            "-".to_string()
        } else {
            r.depends_on.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
        };
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            r.msg_id, r.src, r.dst, r.size_bytes, deps, r.job_id
        );
    }
    out
}
