//! CSV persistence. Floats are written with 17 significant digits so that
//! re-reading a file reproduces every value bit for bit.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scenario::{Method, ScenarioConfig};

use super::performance::{PerfFlags, PerfSummary};
use super::runner::ReplicateRecord;

pub const RECORD_COLUMNS: [&str; 11] = [
    "scenario_index",
    "replicate",
    "method",
    "outcome",
    "estimate",
    "std_error",
    "df",
    "ci_lower",
    "ci_upper",
    "converged",
    "n_imputation_failures",
];

pub const PERFORMANCE_COLUMNS: [&str; 23] = [
    "scenario_index",
    "mechanism",
    "design",
    "eta",
    "nonresponse",
    "icc",
    "method",
    "outcome",
    "true_theta",
    "coverage",
    "bias",
    "pct_bias",
    "rmse",
    "avg_width",
    "mc_error_bias",
    "mc_error_cr",
    "n_effective",
    "n_failed",
    "undercoverage",
    "overcoverage",
    "biased",
    "coverage_flag",
    "any_flag",
];

/// `NaN`, or scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    match s {
        "NA" | "" => Ok(f64::NAN),
        _ => s.parse().map_err(|_| Error::Config(format!("bad number '{s}'"))),
    }
}

fn outcome_label(l: usize) -> &'static str {
    if l == 0 {
        "Y1"
    } else {
        "Y2"
    }
}

fn parse_outcome(s: &str) -> Result<usize> {
    match s {
        "Y1" => Ok(0),
        "Y2" => Ok(1),
        _ => Err(Error::Config(format!("bad outcome '{s}'"))),
    }
}

fn parse_bool(s: &str) -> Result<bool> {
    s.parse().map_err(|_| Error::Config(format!("bad boolean '{s}'")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Config(format!("bad integer '{s}'")))
}

/// Records sorted by (scenario, replicate, method, outcome).
pub fn sorted_records(records: &[ReplicateRecord]) -> Vec<ReplicateRecord> {
    let mut v = records.to_vec();
    v.sort_by_key(|r| (r.scenario_index, r.replicate, r.method, r.outcome));
    v
}

pub fn write_records<W: Write>(out: W, records: &[ReplicateRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    for r in sorted_records(records) {
        w.write_record([
            r.scenario_index.to_string(),
            r.replicate.to_string(),
            r.method.label().to_string(),
            outcome_label(r.outcome).to_string(),
            fmt_f64(r.estimate),
            fmt_f64(r.std_error),
            fmt_f64(r.df),
            fmt_f64(r.ci_lower),
            fmt_f64(r.ci_upper),
            r.converged.to_string(),
            r.n_imputation_failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn header_index<R: Read>(rdr: &mut csv::Reader<R>, required: &[&str]) -> Result<HashMap<String, usize>> {
    let h = rdr.headers()?.clone();
    let map: HashMap<String, usize> = h.iter().enumerate().map(|(i, s)| (s.to_string(), i)).collect();
    for c in required {
        if !map.contains_key(*c) {
            return Err(Error::Config(format!("missing column '{c}'")));
        }
    }
    Ok(map)
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<ReplicateRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let ix = header_index(&mut rdr, &RECORD_COLUMNS)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let g = |c: &str| row.get(ix[c]).unwrap_or("");
        out.push(ReplicateRecord {
            scenario_index: parse_usize(g("scenario_index"))?,
            replicate: parse_usize(g("replicate"))?,
            method: g("method").parse::<Method>()?,
            outcome: parse_outcome(g("outcome"))?,
            estimate: parse_f64(g("estimate"))?,
            std_error: parse_f64(g("std_error"))?,
            df: parse_f64(g("df"))?,
            ci_lower: parse_f64(g("ci_lower"))?,
            ci_upper: parse_f64(g("ci_upper"))?,
            converged: parse_bool(g("converged"))?,
            n_imputation_failures: parse_usize(g("n_imputation_failures"))?,
        });
    }
    Ok(out)
}

/// A performance summary together with its scenario's factor labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceRow {
    pub mechanism: String,
    pub design: String,
    pub eta: String,
    pub nonresponse: String,
    pub icc: String,
    pub perf: PerfSummary,
}

impl PerformanceRow {
    pub fn new(config: &ScenarioConfig, perf: PerfSummary) -> Self {
        Self {
            mechanism: config.mechanism.label().to_string(),
            design: config.design_level.label().to_string(),
            eta: config.eta.label().to_string(),
            nonresponse: config.nonresponse.label().to_string(),
            icc: config.icc.label(),
            perf,
        }
    }

    /// Factor level by canonical factor name.
    pub fn factor(&self, name: &str) -> Option<&str> {
        match name {
            "design" => Some(&self.design),
            "icc" => Some(&self.icc),
            "mechanism" => Some(&self.mechanism),
            "eta" => Some(&self.eta),
            "nonresponse" => Some(&self.nonresponse),
            _ => None,
        }
    }
}

fn sort_rows(rows: &[PerformanceRow]) -> Vec<&PerformanceRow> {
    let mut v: Vec<&PerformanceRow> = rows.iter().collect();
    v.sort_by_key(|r| (r.perf.scenario_index, r.perf.outcome, r.perf.method));
    v
}

pub fn write_performance<W: Write>(out: W, rows: &[PerformanceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PERFORMANCE_COLUMNS)?;
    for r in sort_rows(rows) {
        let p = &r.perf;
        w.write_record([
            p.scenario_index.to_string(),
            r.mechanism.clone(),
            r.design.clone(),
            r.eta.clone(),
            r.nonresponse.clone(),
            r.icc.clone(),
            p.method.label().to_string(),
            outcome_label(p.outcome).to_string(),
            fmt_f64(p.true_theta),
            fmt_f64(p.coverage),
            fmt_f64(p.bias),
            p.pct_bias.map(fmt_f64).unwrap_or_else(|| "NA".into()),
            fmt_f64(p.rmse),
            fmt_f64(p.avg_width),
            fmt_f64(p.mc_error_bias),
            fmt_f64(p.mc_error_cr),
            p.n_effective.to_string(),
            p.n_failed.to_string(),
            p.flags.undercoverage.to_string(),
            p.flags.overcoverage.to_string(),
            p.flags.biased.to_string(),
            p.flags.coverage_unsatisfactory().to_string(),
            (p.flags.coverage_unsatisfactory() || p.flags.biased).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_performance<R: Read>(input: R) -> Result<Vec<PerformanceRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let ix = header_index(&mut rdr, &PERFORMANCE_COLUMNS[..21])?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let g = |c: &str| row.get(ix[c]).unwrap_or("").to_string();
        let pct = g("pct_bias");
        out.push(PerformanceRow {
            mechanism: g("mechanism"),
            design: g("design"),
            eta: g("eta"),
            nonresponse: g("nonresponse"),
            icc: g("icc"),
            perf: PerfSummary {
                scenario_index: parse_usize(&g("scenario_index"))?,
                method: g("method").parse()?,
                outcome: parse_outcome(&g("outcome"))?,
                true_theta: parse_f64(&g("true_theta"))?,
                coverage: parse_f64(&g("coverage"))?,
                bias: parse_f64(&g("bias"))?,
                pct_bias: if pct == "NA" { None } else { Some(parse_f64(&pct)?) },
                rmse: parse_f64(&g("rmse"))?,
                avg_width: parse_f64(&g("avg_width"))?,
                mc_error_bias: parse_f64(&g("mc_error_bias"))?,
                mc_error_cr: parse_f64(&g("mc_error_cr"))?,
                n_effective: parse_usize(&g("n_effective"))?,
                n_failed: parse_usize(&g("n_failed"))?,
                flags: PerfFlags {
                    undercoverage: parse_bool(&g("undercoverage"))?,
                    overcoverage: parse_bool(&g("overcoverage"))?,
                    biased: parse_bool(&g("biased"))?,
                },
            },
        });
    }
    Ok(out)
}

/// Percentage-bias table: one row per scenario, outcome and method.
pub fn write_bias_table<W: Write>(out: W, rows: &[PerformanceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario_index",
        "mechanism",
        "design",
        "eta",
        "nonresponse",
        "icc",
        "outcome",
        "method",
        "pct_bias",
        "bias",
        "mc_error_bias",
        "biased",
    ])?;
    for r in sort_rows(rows) {
        let p = &r.perf;
        w.write_record([
            p.scenario_index.to_string(),
            r.mechanism.clone(),
            r.design.clone(),
            r.eta.clone(),
            r.nonresponse.clone(),
            r.icc.clone(),
            outcome_label(p.outcome).to_string(),
            p.method.label().to_string(),
            p.pct_bias.map(fmt_f64).unwrap_or_else(|| "NA".into()),
            fmt_f64(p.bias),
            fmt_f64(p.mc_error_bias),
            p.flags.biased.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Coverage and average-width table with the coverage flags.
pub fn write_coverage_table<W: Write>(out: W, rows: &[PerformanceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario_index",
        "mechanism",
        "design",
        "eta",
        "nonresponse",
        "icc",
        "outcome",
        "method",
        "coverage",
        "avg_width",
        "mc_error_cr",
        "undercoverage",
        "overcoverage",
    ])?;
    for r in sort_rows(rows) {
        let p = &r.perf;
        w.write_record([
            p.scenario_index.to_string(),
            r.mechanism.clone(),
            r.design.clone(),
            r.eta.clone(),
            r.nonresponse.clone(),
            r.icc.clone(),
            outcome_label(p.outcome).to_string(),
            p.method.label().to_string(),
            fmt_f64(p.coverage),
            fmt_f64(p.avg_width),
            fmt_f64(p.mc_error_cr),
            p.flags.undercoverage.to_string(),
            p.flags.overcoverage.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const RECORDS_FILE: &str = "replicates.csv";
pub const PERFORMANCE_FILE: &str = "performance.csv";
pub const BIAS_TABLE_FILE: &str = "pct_bias_table.csv";
pub const COVERAGE_TABLE_FILE: &str = "coverage_table.csv";

/// Read `performance.csv` from `input_dir` and write it, with the bias and
/// coverage tables, into `output_dir`. Returns the number of rows read.
pub fn summarize_run(input_dir: &Path, output_dir: &Path) -> Result<usize> {
    let rows = read_performance(std::fs::File::open(input_dir.join(PERFORMANCE_FILE))?)?;
    std::fs::create_dir_all(output_dir)?;
    if std::fs::canonicalize(input_dir)? != std::fs::canonicalize(output_dir)? {
        write_performance(std::fs::File::create(output_dir.join(PERFORMANCE_FILE))?, &rows)?;
    }
    write_bias_table(std::fs::File::create(output_dir.join(BIAS_TABLE_FILE))?, &rows)?;
    write_coverage_table(std::fs::File::create(output_dir.join(COVERAGE_TABLE_FILE))?, &rows)?;
    Ok(rows.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(parse_f64(&s).unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert!(parse_f64(&fmt_f64(f64::NAN)).unwrap().is_nan());
    }

    #[test]
    fn records_round_trip() {
        let r = ReplicateRecord {
            scenario_index: 3,
            replicate: 1,
            method: Method::Fmi,
            outcome: 1,
            estimate: 0.9876543210987654,
            std_error: 0.12,
            df: 7.25,
            ci_lower: 0.7,
            ci_upper: 1.3,
            converged: true,
            n_imputation_failures: 2,
        };
        let mut buf = Vec::new();
        write_records(&mut buf, std::slice::from_ref(&r)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&RECORD_COLUMNS.join(",")));
        assert_eq!(read_records(&buf[..]).unwrap(), vec![r]);
    }
}
