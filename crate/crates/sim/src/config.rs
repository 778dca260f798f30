//! TOML config files.

use std::fs;
use std::path::{Path, PathBuf};

use strack_core::error::ConfigError;
use strack_core::net::topology::FatTree;
use strack_core::sim::{SimConfig, WorkloadSpec};

use crate::trace_file::{self, TraceParseError};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("reading {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("trace file {path}")]
    Trace { path: PathBuf, source: TraceParseError },
    #[error("invalid config: `{}`: {}", .0.key, .0.reason)]
    Invalid(ConfigError),
}

/// Parses config text. A `trace_file` workload path is resolved against
/// `base_dir` and inlined.
pub fn from_str(text: &str, origin: &Path, base_dir: &Path) -> Result<SimConfig, LoadError> {
    let value: toml::Table = toml::from_str(text).map_err(|e| LoadError::Syntax {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    from_table(value, origin, base_dir)
}

pub fn from_table(table: toml::Table, origin: &Path, base_dir: &Path) -> Result<SimConfig, LoadError> {
    let mut cfg: SimConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let key = e.path().to_string();
        let inner = e.into_inner();
        LoadError::Syntax {
            path: origin.to_path_buf(),
            message: if key == "." {
                inner.message().to_string()
            } else {
                format!("`{key}`: {}", inner.message())
            },
        }
    })?;
    if let WorkloadSpec::TraceFile { path } = &cfg.workload {
        let p = base_dir.join(path);
        let text = fs::read_to_string(&p).map_err(|source| LoadError::Io {
            path: p.clone(),
            source,
        })?;
        let trace = trace_file::parse(&text).map_err(|source| LoadError::Trace { path: p, source })?;
        cfg.workload = WorkloadSpec::Trace { records: trace.records };
    }
    Ok(cfg)
}

pub fn read_table(path: &Path) -> Result<toml::Table, LoadError> {
    let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| LoadError::Syntax {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn load(path: &Path) -> Result<SimConfig, LoadError> {
    from_table(read_table(path)?, path, &base_dir(path))
}

pub fn validate(cfg: &SimConfig) -> Result<FatTree, LoadError> {
    cfg.validate().map_err(LoadError::Invalid)
}

/// The config as it will run: defaults that depend on the transport are
/// written out, and the output location is dropped so re-running the file
/// does not depend on where it was written.
pub fn effective(cfg: &SimConfig) -> SimConfig {
    let mut e = cfg.clone();
    let (kmin, kmax) = cfg.ecn_bdp();
    e.switch.ecn_kmin_bdp = Some(kmin);
    e.switch.ecn_kmax_bdp = Some(kmax);
    e.switch.lossless = Some(cfg.lossless());
    e.output_dir = None;
    e
}

pub fn to_toml(cfg: &SimConfig) -> String {
    toml::to_string(cfg).expect("every config field has a TOML form")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
transport = "strack"

[topology]
hosts = 2
tors = 2
spines = 1

[workload]
kind = "permutation"
size = "64KB"
"#;

    fn parse(text: &str) -> Result<SimConfig, LoadError> {
        from_str(text, Path::new("test.toml"), Path::new("."))
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.seed, 1);
        assert_eq!(c.mtu, 4096);
        assert_eq!(c.roce.qps_per_conn, 1);
        assert!(validate(&c).is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let e = parse(&format!("{MINIMAL}\n[strack]\nbogus_knob = 3\n")).unwrap_err();
        assert!(e.to_string().contains("bogus_knob"), "{e}");
        let e = parse(&MINIMAL.replace("spines = 1", "spines = 1\nspline = 2")).unwrap_err();
        assert!(e.to_string().contains("spline"), "{e}");
        let e = parse(&MINIMAL.replace("\"strack\"", "\"tcp\"")).unwrap_err();
        assert!(e.to_string().contains("`transport`"), "{e}");
        let e = parse(&MINIMAL.replace("\"64KB\"", "\"64QB\"")).unwrap_err();
        assert!(
            e.to_string().contains("`workload`") && e.to_string().contains("64QB"),
            "{e}"
        );
    }

    #[test]
    fn semantic_errors_name_the_key() {
        let c = parse(&MINIMAL.replace("spines = 1", "spines = 1\noversub = 3")).unwrap();
        let e = validate(&c).unwrap_err();
        assert!(e.to_string().contains("topology.oversub"), "{e}");
        let c = parse(&format!("{MINIMAL}\n[roce]\nqps_per_conn = 2\n")).unwrap();
        assert!(validate(&c).unwrap_err().to_string().contains("roce.qps_per_conn"));
    }

    #[test]
    fn effective_config_round_trips() {
        let c = parse(MINIMAL).unwrap();
        let e = effective(&c);
        assert_eq!(e.switch.lossless, Some(false));
        assert_eq!(e.switch.ecn_kmin_bdp, Some(0.25));
        let back = parse(&to_toml(&e)).unwrap();
        assert_eq!(back, e);
        assert_eq!(effective(&back), e);
    }

    #[test]
    fn trace_file_is_inlined() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("t.trace"), "0 0 1 4KB - 0\n1 1 0 4KB 0 0\n").unwrap();
        let text = MINIMAL.replace(
            "kind = \"permutation\"\nsize = \"64KB\"",
            "kind = \"trace_file\"\npath = \"t.trace\"",
        );
        let c = from_str(&text, Path::new("x.toml"), dir.path()).unwrap();
        match &c.workload {
            WorkloadSpec::Trace { records } => assert_eq!(records.len(), 2),
            w => panic!("not inlined: {w:?}"),
        }
        let missing = from_str(&text, Path::new("x.toml"), Path::new("/nonexistent")).unwrap_err();
        assert!(matches!(missing, LoadError::Io { .. }));
    }
}
