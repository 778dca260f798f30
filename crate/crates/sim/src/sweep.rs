//! Parameter sweeps. An axis is `dotted.key=v1,v2,...`; several axes form
//! their cartesian product, and each point overrides the base config table.

use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AxisError {
    #[error("axis `{0}` is not of the form key=v1,v2,...")]
    Syntax(String),
    #[error("axis `{0}` has an empty value")]
    EmptyValue(String),
    #[error("axis key `{0}` is given twice")]
    Duplicate(String),
    #[error("`{key}` cannot be set: `{at}` is not a table")]
    NotATable { key: String, at: String },
}

impl std::str::FromStr for Axis {
    type Err = AxisError;

    fn from_str(s: &str) -> Result<Self, AxisError> {
        let (key, vals) = s.split_once('=').ok_or_else(|| AxisError::Syntax(s.into()))?;
        let key = key.trim();
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(AxisError::Syntax(s.into()));
        }
        let values: Vec<String> = vals.split(',').map(|v| v.trim().to_string()).collect();
        if values.iter().any(String::is_empty) {
            return Err(AxisError::EmptyValue(s.into()));
        }
        Ok(Axis {
            key: key.to_string(),
            values,
        })
    }
}

/// One point of the product: `(key, value)` per axis, in axis order.
pub type Point = Vec<(String, String)>;

pub fn points(axes: &[Axis]) -> Result<Vec<Point>, AxisError> {
    for (i, a) in axes.iter().enumerate() {
        if axes[..i].iter().any(|b| b.key == a.key) {
            return Err(AxisError::Duplicate(a.key.clone()));
        }
    }
    let mut out: Vec<Point> = vec![Vec::new()];
    for a in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                a.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((a.key.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    Ok(out)
}

/// Integers, floats and booleans keep their type; anything else is a
/// string (sizes such as `16MB`, transport names).
pub fn parse_value(raw: &str) -> toml::Value {
    if let Ok(i) = raw.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(f) = raw.parse::<f64>() {
        toml::Value::Float(f)
    } else if let Ok(b) = raw.parse::<bool>() {
        toml::Value::Boolean(b)
    } else {
        toml::Value::String(raw.to_string())
    }
}

pub fn apply(table: &mut toml::Table, key: &str, raw: &str) -> Result<(), AxisError> {
    let parts: Vec<&str> = key.split('.').collect();
    let (last, path) = parts.split_last().expect("keys are non-empty");
    let mut t = table;
    for (i, p) in path.iter().enumerate() {
        let entry = t
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry.as_table_mut().ok_or_else(|| AxisError::NotATable {
            key: key.to_string(),
            at: parts[..=i].join("."),
        })?;
    }
    t.insert(last.to_string(), parse_value(raw));
    Ok(())
}

/// Directory name for a point, e.g. `transport=rocev2,workload.size=16MB`.
pub fn point_dir(root: &Path, p: &Point) -> PathBuf {
    let name: Vec<String> = p
        .iter()
        .map(|(k, v)| {
            let v: String = v
                .chars()
                .map(|c| {
                    if c.is_ascii_alphanumeric() || "._-".contains(c) {
                        c
                    } else {
                        '_'
                    }
                })
                .collect();
            format!("{k}={v}")
        })
        .collect();
    if name.is_empty() {
        root.join("base")
    } else {
        root.join(name.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_axes() {
        let a: Axis = "workload.size=4KB, 128KB,16MB".parse().unwrap();
        assert_eq!(a.key, "workload.size");
        assert_eq!(a.values, ["4KB", "128KB", "16MB"]);
        assert!("nokey".parse::<Axis>().is_err());
        assert!("a..b=1".parse::<Axis>().is_err());
        assert_eq!("a=1,,2".parse::<Axis>(), Err(AxisError::EmptyValue("a=1,,2".into())));
    }

    #[test]
    fn product_in_axis_order() {
        let axes = vec![
            "transport=strack,rocev2".parse().unwrap(),
            "seed=1,2,3".parse().unwrap(),
        ];
        let p = points(&axes).unwrap();
        assert_eq!(p.len(), 6);
        assert_eq!(
            p[0],
            vec![("transport".into(), "strack".into()), ("seed".into(), "1".into())]
        );
        assert_eq!(p[5][0].1, "rocev2");
        assert_eq!(p[5][1].1, "3");
        assert_eq!(points(&[]).unwrap(), vec![Vec::new()]);
        let dup: Vec<Axis> = vec!["a=1".parse().unwrap(), "a=2".parse().unwrap()];
        assert!(points(&dup).is_err());
    }

    #[test]
    fn values_keep_their_type() {
        assert_eq!(parse_value("7"), toml::Value::Integer(7));
        assert_eq!(parse_value("0.25"), toml::Value::Float(0.25));
        assert_eq!(parse_value("true"), toml::Value::Boolean(true));
        assert_eq!(parse_value("16MB"), toml::Value::String("16MB".into()));
    }

    #[test]
    fn apply_creates_nested_tables() {
        let mut t: toml::Table = toml::from_str("seed = 1\n[workload]\nkind = \"permutation\"\n").unwrap();
        apply(&mut t, "workload.size", "2MB").unwrap();
        apply(&mut t, "strack.gamma", "0.5").unwrap();
        assert_eq!(t["workload"]["size"].as_str(), Some("2MB"));
        assert_eq!(t["strack"]["gamma"].as_float(), Some(0.5));
        assert!(matches!(apply(&mut t, "seed.x", "1"), Err(AxisError::NotATable { .. })));
    }

    #[test]
    fn dirs_are_filesystem_safe() {
        let p = vec![
            ("workload.size".to_string(), "16MB".to_string()),
            ("x".to_string(), "a/b".to_string()),
        ];
        assert_eq!(point_dir(Path::new("r"), &p), Path::new("r/workload.size=16MB,x=a_b"));
    }
}
