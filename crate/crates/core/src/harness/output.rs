use std::fs::File;
use std::io::{BufWriter, Write};

use super::config::{OutputFormat, OutputSpec};
use super::run::CellResult;
use super::HarnessError;

pub const CSV_HEADER: [&str; 20] = [
    "schema_version",
    "test",
    "n",
    "d",
    "s",
    "beta",
    "epsilon",
    "m",
    "alpha",
    "lambda_floor",
    "split_mode",
    "trials",
    "failures",
    "rejections",
    "rejection_rate",
    "ci_low",
    "ci_high",
    "mean_statistic",
    "var_statistic",
    "p_values",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per cell. Retained p-values are joined with `;`.
pub fn write_csv<W: Write>(results: &[CellResult], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| HarnessError::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in results {
        let p_values = r
            .p_values
            .as_ref()
            .map(|p| p.iter().map(f64::to_string).collect::<Vec<_>>().join(";"))
            .unwrap_or_default();
        w.write_record([
            r.schema_version.to_string(),
            r.test.to_string(),
            r.n.to_string(),
            r.d.to_string(),
            r.s.to_string(),
            r.beta.to_string(),
            opt(r.epsilon),
            opt(r.m),
            r.alpha.to_string(),
            r.lambda_floor.to_string(),
            r.split_mode.to_string(),
            r.trials.to_string(),
            r.failures.to_string(),
            r.rejections.to_string(),
            r.rejection_rate.to_string(),
            r.ci_low.to_string(),
            r.ci_high.to_string(),
            opt(r.mean_statistic),
            opt(r.var_statistic),
            p_values,
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))
}

/// A JSON array with one object per cell.
pub fn write_json<W: Write>(results: &[CellResult], mut out: W) -> Result<(), HarnessError> {
    serde_json::to_writer_pretty(&mut out, results)
        .map_err(|e| HarnessError::Serialize(e.to_string()))?;
    writeln!(out).map_err(|e| HarnessError::Io(e.to_string()))
}

pub fn write_results<W: Write>(
    results: &[CellResult],
    format: OutputFormat,
    out: W,
) -> Result<(), HarnessError> {
    match format {
        OutputFormat::Csv => write_csv(results, out),
        OutputFormat::Json => write_json(results, out),
    }
}

pub fn write_results_to_path(results: &[CellResult], spec: &OutputSpec) -> Result<(), HarnessError> {
    let file = File::create(&spec.path).map_err(|e| HarnessError::Io(e.to_string()))?;
    let mut w = BufWriter::new(file);
    write_results(results, spec.format, &mut w)?;
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))
}
