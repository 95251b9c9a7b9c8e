//! Report files and console lines.

use std::fs;
use std::io;
use std::path::PathBuf;

use serde_json::{json, Value};

use crate::checks::{Outcome, Status};
use crate::config::{ExperimentConfig, Format};

pub const TOOL: &str = "harnack-lab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct Writer {
    dir: PathBuf,
    format: Format,
    seed: u64,
    hash: String,
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::Fail => "fail",
        Status::Skipped => "skipped",
        Status::Invalid => "invalid",
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Writer {
    pub fn new(cfg: &ExperimentConfig) -> Writer {
        Writer { dir: cfg.output.dir.clone(), format: cfg.output.format, seed: cfg.seed, hash: cfg.hash() }
    }

    pub fn prepare(&self) -> io::Result<()> {
        fs::create_dir_all(&self.dir)
    }

    fn envelope(&self, name: &str, out: &Outcome) -> Value {
        json!({
            "check": name,
            "tool": TOOL,
            "version": VERSION,
            "seed": self.seed,
            "config_hash": self.hash,
            "status": status_name(out.status),
            "pass": out.status == Status::Pass,
            "result": out.result,
        })
    }

    pub fn write_check(&self, name: &str, out: &Outcome) -> io::Result<()> {
        if matches!(self.format, Format::Json | Format::Both) {
            let text = serde_json::to_string_pretty(&self.envelope(name, out))? + "\n";
            fs::write(self.dir.join(format!("{name}.report.json")), text)?;
        }
        if matches!(self.format, Format::Csv | Format::Both) && !out.columns.is_empty() {
            let mut text = out.columns.join(",") + "\n";
            for row in &out.rows {
                let cells: Vec<String> = row.iter().map(|c| csv_field(c)).collect();
                text += &(cells.join(",") + "\n");
            }
            fs::write(self.dir.join(format!("{name}.data.csv")), text)?;
        }
        Ok(())
    }

    pub fn write_summary(&self, outcomes: &[(&str, Outcome)]) -> io::Result<()> {
        let failed = outcomes.iter().any(|(_, o)| matches!(o.status, Status::Fail | Status::Invalid));
        let summary = json!({
            "tool": TOOL,
            "version": VERSION,
            "seed": self.seed,
            "config_hash": self.hash,
            "pass": !failed,
            "checks": outcomes.iter().map(|(n, o)| json!({ "check": n, "status": status_name(o.status) })).collect::<Vec<_>>(),
        });
        fs::write(self.dir.join("pipeline.summary.json"), serde_json::to_string_pretty(&summary)? + "\n")
    }
}

pub fn print_line(name: &str, out: &Outcome, plain: bool) {
    let (tag, color) = match out.status {
        Status::Pass => ("PASS", "32"),
        Status::Fail => ("FAIL", "31"),
        Status::Skipped => ("SKIP", "33"),
        Status::Invalid => ("INVALID", "31"),
    };
    if plain {
        println!("{tag:<8}{name}");
    } else {
        println!("\x1b[{color}m{tag:<8}\x1b[0m{name}");
    }
}

pub fn print_table(out: &Outcome) {
    for row in &out.rows {
        let exact = row.get(2).filter(|e| !e.is_empty() && *e != &row[1]);
        match exact {
            Some(e) => println!("  {:<12}{}  ({})", row[0], row[1], e),
            None => println!("  {:<12}{}", row[0], row[1]),
        }
    }
}
