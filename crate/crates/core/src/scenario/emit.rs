use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Format, ReportBundle};
use crate::error::Result;
use crate::verifiers::{summary_table, ResidualReport};

fn file_safe(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
}

fn write(path: PathBuf, bytes: &[u8], written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, bytes)?;
    written.push(path);
    Ok(())
}

fn report_csv(r: &ResidualReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sample", "linf", "l2"])?;
    for s in &r.samples {
        w.write_record([s.key(), format!("{:e}", s.linf), format!("{:e}", s.l2)])?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn summary_csv(bundle: &ReportBundle) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["identity", "formulation", "file", "max_residual", "tolerance", "result"])?;
    for run in &bundle.runs {
        for (c, r) in run.checks.iter().zip(&run.reports) {
            w.write_record([
                c.identity.clone(),
                run.formulation.name().to_string(),
                c.file.clone(),
                format!("{:e}", c.max_residual),
                format!("{:e}", c.tolerance),
                r.status().to_string(),
            ])?;
        }
        if let Some(f) = &run.failure {
            w.write_record(["divergence", run.formulation.name(), "", "", "", f.as_str()])?;
        }
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Human-readable summary: one line per check with a PASS/FAIL column.
pub fn summary_text(bundle: &ReportBundle) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario  {}", bundle.scenario.name);
    if bundle.options.tolerance_scale != 1.0 {
        let _ = writeln!(out, "tolerance scale  {}", bundle.options.tolerance_scale);
    }
    let reports: Vec<ResidualReport> = bundle.reports().cloned().collect();
    out.push('\n');
    out.push_str(&summary_table(&reports));
    for run in &bundle.runs {
        if let Some(f) = &run.failure {
            let _ = writeln!(out, "{}: {f}", run.formulation.name());
        }
    }
    let verdict = match bundle.exit_code() {
        0 => "all checks pass",
        3 => "propagation diverged",
        _ => "some checks fail",
    };
    let _ = writeln!(out, "\n{verdict}");
    out
}

/// Writes the bundle into `dir`: `manifest.json`, one CSV per expectation
/// series and one file per check in `format`, plus a summary for the csv and
/// table formats. Returns the written paths in order.
pub fn emit_report(bundle: &ReportBundle, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut manifest = serde_json::to_string_pretty(&bundle.manifest())?;
    manifest.push('\n');
    write(dir.join("manifest.json"), manifest.as_bytes(), &mut written)?;

    let multi = bundle.multi();
    for run in &bundle.runs {
        let prefix = run.prefix(multi);
        for series in &run.series {
            let mut bytes = Vec::new();
            series.write_csv(&mut bytes)?;
            write(dir.join(format!("{prefix}series-{}.csv", file_safe(&series.id))), &bytes, &mut written)?;
        }
        for (c, r) in run.checks.iter().zip(&run.reports) {
            let stem = file_safe(&c.file);
            match format {
                Format::Json => {
                    let mut text = r.to_json()?;
                    text.push('\n');
                    write(dir.join(format!("{stem}.json")), text.as_bytes(), &mut written)?;
                }
                Format::Csv => write(dir.join(format!("{stem}.csv")), &report_csv(r)?, &mut written)?,
                Format::Table => write(dir.join(format!("{stem}.txt")), r.to_table().as_bytes(), &mut written)?,
            }
        }
    }
    match format {
        Format::Csv => write(dir.join("summary.csv"), &summary_csv(bundle)?, &mut written)?,
        Format::Table => write(dir.join("summary.txt"), summary_text(bundle).as_bytes(), &mut written)?,
        Format::Json => {}
    }
    Ok(written)
}
