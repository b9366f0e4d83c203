//! CSV and JSON artifacts.

use crate::error::Result;
use crate::model::{PdmpModel, StatePoint};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

fn header(dim: usize) -> String {
    let mut s = String::new();
    for k in 0..dim {
        let _ = write!(s, "x{k},");
    }
    s.push_str("mode,value\n");
    s
}

fn row(out: &mut String, dim: usize, x: &StatePoint, value: f64) {
    for k in 0..dim {
        let _ = write!(out, "{:.16e},", x.coords.get(k).copied().unwrap_or(0.0));
    }
    let _ = writeln!(out, "{},{:.16e}", x.mode, value);
}

fn state_dim(model: &PdmpModel) -> usize {
    model.modes().iter().map(|m| m.dim).max().unwrap_or(0)
}

/// One row per interior cell center.
pub fn density_csv(model: &PdmpModel, values: &[f64]) -> String {
    let dim = state_dim(model);
    let mut out = header(dim);
    for (c, v) in values.iter().enumerate() {
        row(&mut out, dim, &model.grid().center(c), *v);
    }
    out
}

/// One row per Γ⁻ cell.
pub fn boundary_csv(model: &PdmpModel, values: &[f64]) -> String {
    let dim = state_dim(model);
    let mut out = header(dim);
    for (cell, v) in model.atlas().minus().iter().zip(values) {
        row(&mut out, dim, &cell.point, *v);
    }
    out
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Masses {
    pub input: f64,
    pub output: f64,
    /// Censored paths (simulate) or mass lost by truncation (solvers).
    pub censored: f64,
    /// Stochasticity or mass defect where meaningful.
    pub defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub model: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub subcommand: String,
    pub model: String,
    pub parameters: serde_json::Value,
    pub masses: Masses,
    pub residuals: serde_json::Map<String, serde_json::Value>,
    pub wall_time_seconds: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::drift_redistribute;

    #[test]
    fn csv_round_trips_values() {
        let m = drift_redistribute(3);
        let v = [0.1, 1.0 / 3.0, 2.0];
        let csv = density_csv(&m, &v);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x0,mode,value");
        assert_eq!(lines.len(), 4);
        for (line, want) in lines[1..].iter().zip(v) {
            let got: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
            assert_eq!(got, want);
        }
    }
}
