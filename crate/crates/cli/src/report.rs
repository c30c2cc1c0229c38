//! Summary JSON and per-step CSV output.

use std::path::{Path, PathBuf};

use kamlin::kam::{StepParams, StepReport};
use kamlin::Complex;
use serde::Serialize;
use serde_json::Value;

pub const STEP_CSV_HEADER: &str = "nu,s,n_min,norm_R,norm_F,norm_P_next,lemma41_bound,margin";
pub const SCHEDULE_CSV_HEADER: &str = "nu,s,delta,sigma,epsilon,step_margin";

/// One row of the twist table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwistEntry {
    pub j: u32,
    pub re: f64,
    pub im_residual: f64,
}

impl TwistEntry {
    pub fn new(j: u32, value: Complex) -> Self {
        Self { j, re: value.re, im_residual: value.im }
    }
}

/// Every command writes this shape; sections a command does not produce stay
/// empty or null.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub command: &'static str,
    pub verdict: String,
    /// What the verdict does and does not cover.
    pub scope: String,
    #[serde(rename = "A")]
    pub a: Vec<TwistEntry>,
    pub steps: Vec<StepReport>,
    pub schedule: Value,
    pub diophantine: Value,
    pub details: Value,
}

impl Summary {
    pub fn new(command: &'static str) -> Self {
        Self {
            command,
            verdict: String::new(),
            scope: String::new(),
            a: Vec::new(),
            steps: Vec::new(),
            schedule: Value::Null,
            diophantine: Value::Null,
            details: Value::Null,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }
}

/// Float format for CSV cells: 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn step_csv(steps: &[StepReport]) -> String {
    let mut out = String::from(STEP_CSV_HEADER);
    out.push('\n');
    for r in steps {
        let cells = [r.nu.to_string(), num(r.s), r.n_min.to_string(), num(r.norm_r), num(r.norm_f), num(r.norm_p_next), num(r.solve_bound), num(r.margin)];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn schedule_csv(steps: &[StepParams]) -> String {
    let mut out = String::from(SCHEDULE_CSV_HEADER);
    out.push('\n');
    for p in steps {
        let cells = [p.nu.to_string(), num(p.s), num(p.delta), num(p.sigma), num(p.epsilon), num(p.step_margin)];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// The CSV sits next to the JSON summary with the extension replaced.
pub fn csv_path(json_path: &Path) -> PathBuf {
    json_path.with_extension("csv")
}

pub fn write_outputs(out: Option<&Path>, summary: &Summary, csv: Option<&str>) -> std::io::Result<()> {
    let json = summary.to_json();
    match out {
        Some(path) => {
            std::fs::write(path, json)?;
            if let Some(csv) = csv {
                std::fs::write(csv_path(path), csv)?;
            }
            println!("{}", summary.verdict);
        }
        None => print!("{json}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_float_format_round_trips() {
        let x = 0.1 + 0.2;
        let cell = num(x);
        assert_eq!(cell, "3.0000000000000004e-1");
        assert_eq!(cell.parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_path_replaces_extension() {
        assert_eq!(csv_path(Path::new("out/run.json")), PathBuf::from("out/run.csv"));
        assert_eq!(csv_path(Path::new("run")), PathBuf::from("run.csv"));
    }

    #[test]
    fn empty_step_table_has_header_only() {
        assert_eq!(step_csv(&[]), format!("{STEP_CSV_HEADER}\n"));
    }
}
