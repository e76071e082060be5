//! Grid evaluation of a subcommand over one or two configuration keys.
//!
//! Each grid point overrides the raw file, rebuilds the configuration and
//! records the target's headline numbers. Output is long format: one row
//! per (point, quantity). A failing point is recorded with its error and
//! does not stop the others; the process still exits with that error's
//! code.

use std::path::PathBuf;

use lcvco_isf::config::RawConfig;
use lcvco_isf::output::write_rows;
use lcvco_isf::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::{commands, finish, RunOptions, Target};

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

/// `section.key=start:stop:count` (inclusive, linear) or
/// `section.key=v1,v2,...` (values passed through, units allowed).
pub fn parse_axis(spec: &str) -> Result<Axis> {
    let bad = |m: &str| Error::Argument(format!("--param '{spec}': {m}"));
    let (key, rhs) = spec.split_once('=').ok_or_else(|| bad("expected key=values"))?;
    let (key, rhs) = (key.trim(), rhs.trim());
    if key.is_empty() || rhs.is_empty() {
        return Err(bad("empty key or values"));
    }
    let values = if rhs.contains(':') {
        let parts: Vec<&str> = rhs.split(':').collect();
        let [a, b, n] = parts[..] else { return Err(bad("range needs start:stop:count")) };
        let a: f64 = a.trim().parse().map_err(|_| bad("range start is not a number"))?;
        let b: f64 = b.trim().parse().map_err(|_| bad("range stop is not a number"))?;
        let n: usize = n.trim().parse().map_err(|_| bad("count is not a positive integer"))?;
        match n {
            0 => return Err(bad("count must be at least 1")),
            1 => vec![a.to_string()],
            _ => (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).to_string()).collect(),
        }
    } else {
        rhs.split(',').map(|v| v.trim().to_string()).collect()
    };
    if values.iter().any(String::is_empty) {
        return Err(bad("empty value"));
    }
    Ok(Axis { key: key.to_string(), values })
}

#[derive(Debug, Serialize)]
struct Row {
    point: usize,
    param_1: String,
    value_1: String,
    param_2: Option<String>,
    value_2: Option<String>,
    quantity: String,
    value: f64,
    error: Option<String>,
}

/// Cartesian product of the axes, first axis slowest.
fn grid(axes: &[Axis]) -> Vec<Vec<(String, String)>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push((axis.key.clone(), v.clone()));
                    p
                })
            })
            .collect()
    })
}

fn evaluate(raw: &RawConfig, point: &[(String, String)], out: Option<&PathBuf>, opts: &RunOptions, target: Target) -> Result<Vec<(String, f64)>> {
    let mut raw = raw.clone();
    for (k, v) in point {
        raw.set(k, v)?;
    }
    let cfg = finish(&raw, out, opts)?;
    commands::scalars(target, &cfg, opts)
}

pub fn run(raw: &RawConfig, out: Option<&PathBuf>, opts: &RunOptions, target: Target, params: &[String]) -> Result<()> {
    if params.len() > 2 {
        return Err(Error::Argument(format!("at most two --param axes, got {}", params.len())));
    }
    let axes = params.iter().map(|p| parse_axis(p)).collect::<Result<Vec<_>>>()?;
    // Validates the unswept parts and fixes the output directory.
    let base = finish(raw, out, opts)?;
    let points = grid(&axes);
    let results: Vec<Result<Vec<(String, f64)>>> =
        points.par_iter().map(|p| evaluate(raw, p, out, opts, target)).collect();

    let mut rows = Vec::new();
    let mut first_error = None;
    for (i, (point, result)) in points.iter().zip(results).enumerate() {
        let (p1, p2) = (&point[0], point.get(1));
        let row = |quantity: String, value: f64, error: Option<String>| Row {
            point: i,
            param_1: p1.0.clone(),
            value_1: p1.1.clone(),
            param_2: p2.map(|p| p.0.clone()),
            value_2: p2.map(|p| p.1.clone()),
            quantity,
            value,
            error,
        };
        match result {
            Ok(values) => rows.extend(values.into_iter().map(|(q, v)| row(q, v, None))),
            Err(e) => {
                eprintln!("point {i}: error: {e}");
                rows.push(row("error".into(), f64::NAN, Some(e.to_string())));
                first_error.get_or_insert(e);
            }
        }
    }
    let path = base.output_dir.join("sweep.csv");
    write_rows(&path, rows)?;
    eprintln!("wrote {}", path.display());
    first_error.map_or(Ok(()), Err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_axis_is_inclusive() {
        let a = parse_axis("steady_state.a=0.5:1.5:3").unwrap();
        assert_eq!(a.key, "steady_state.a");
        assert_eq!(a.values, vec!["0.5", "1", "1.5"]);
    }

    #[test]
    fn list_axis_keeps_units() {
        let a = parse_axis("tank.c = 1nF, 2nF").unwrap();
        assert_eq!(a.values, vec!["1nF", "2nF"]);
    }

    #[test]
    fn malformed_axes_are_rejected() {
        for spec in ["novalue", "a=1:2", "a=1:2:0", "a=x:2:3", "a=1,,2"] {
            assert!(matches!(parse_axis(spec), Err(Error::Argument(_))), "{spec}");
        }
    }

    #[test]
    fn grid_is_cartesian_first_axis_slowest() {
        let axes = [parse_axis("a=1,2").unwrap(), parse_axis("b=x,y,z").unwrap()];
        let g = grid(&axes);
        assert_eq!(g.len(), 6);
        assert_eq!(g[1], vec![("a".to_string(), "1".to_string()), ("b".to_string(), "y".to_string())]);
    }
}
