use std::fs;
use std::io::Write;
use std::path::Path;

use crate::cluster::Assignment;
use crate::error::{Error, Result};
use crate::metrics::write_tidy_csv;
use crate::pipeline::config::RunConfig;
use crate::pipeline::run::{Benchmark, RunOutput};

/// `row,cluster` with 1-based cluster ids.
pub fn write_assignment<W: Write>(a: &Assignment, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["row", "cluster"])?;
    for (r, &l) in a.labels.iter().enumerate() {
        out.write_record([(r + 1).to_string(), (l + 1).to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads an assignment CSV with a `cluster` column of 1-based ids.
pub fn read_assignment(path: impl AsRef<Path>) -> Result<Assignment> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let col = rdr
        .headers()?
        .iter()
        .position(|h| h == "cluster")
        .ok_or_else(|| Error::Data(format!("{} has no \"cluster\" column", path.display())))?;
    let mut labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let v: usize = rec
            .get(col)
            .and_then(|s| s.parse().ok())
            .filter(|&v| v >= 1)
            .ok_or_else(|| Error::Data(format!("row {}: cluster must be a positive integer", i + 1)))?;
        labels.push(v - 1);
    }
    Ok(Assignment::new(labels))
}

fn create(dir: &Path, name: &str) -> Result<std::io::BufWriter<fs::File>> {
    Ok(std::io::BufWriter::new(fs::File::create(dir.join(name))?))
}

/// report.json, metrics.csv, assignment.csv, plan.json (when a plan
/// exists) and config.json.
pub fn write_run(dir: &Path, run: &RunOutput, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), run.report.to_json_pretty())?;
    write_tidy_csv(std::slice::from_ref(&run.report), create(dir, "metrics.csv")?)?;
    write_assignment(&run.assignment, create(dir, "assignment.csv")?)?;
    if let Some(plan) = &run.plan {
        fs::write(dir.join("plan.json"), plan.to_json_pretty())?;
    }
    fs::write(dir.join("model.json"), run.model.to_json_pretty())?;
    fs::write(dir.join("config.json"), cfg.to_json_pretty())?;
    Ok(())
}

/// report.json (all methods), metrics.csv, config.json, and one
/// assignment and plan per method under `<method>/`.
pub fn write_benchmark(dir: &Path, b: &Benchmark) -> Result<()> {
    fs::create_dir_all(dir)?;
    let reports = b.reports();
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&reports)?)?;
    write_tidy_csv(&reports, create(dir, "metrics.csv")?)?;
    fs::write(dir.join("config.json"), b.config.to_json_pretty())?;
    for run in &b.runs {
        let sub = dir.join(&run.method);
        fs::create_dir_all(&sub)?;
        write_assignment(&run.assignment, create(&sub, "assignment.csv")?)?;
        if let Some(plan) = &run.plan {
            fs::write(sub.join("plan.json"), plan.to_json_pretty())?;
        }
    }
    Ok(())
}
