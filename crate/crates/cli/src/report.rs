//! Estimate and simulation reports as CSV and aligned text.
//!
//! The CSV starts with `# key=value` audit lines followed by a headed table.
//! Numbers use the shortest round-trip representation, so parsing a written
//! report gives back the exact values.

use std::fmt::Write as _;

use ivcox::sim::SimReport;

use crate::io::{csv_text, fmt_num, parse_num};
use crate::{CliError, Result};

pub const ESTIMATE_COLUMNS: [&str; 9] =
    ["component", "est", "sd", "ci_lo", "ci_hi", "naive_est", "naive_sd", "naive_ci_lo", "naive_ci_hi"];

pub const SIM_COLUMNS: [&str; 13] =
    ["estimator", "design", "censoring", "n", "reps", "failed", "component", "beta0", "bias", "sd", "mse", "rmse", "cp95"];

/// One coefficient: proposed estimate with its interval, then the naive Cox fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentRow {
    pub component: String,
    pub est: f64,
    pub sd: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub naive_est: f64,
    pub naive_sd: f64,
    pub naive_ci_lo: f64,
    pub naive_ci_hi: f64,
}

impl ComponentRow {
    fn values(&self) -> [f64; 8] {
        [self.est, self.sd, self.ci_lo, self.ci_hi, self.naive_est, self.naive_sd, self.naive_ci_lo, self.naive_ci_hi]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EstimateReport {
    pub audit: Vec<(String, String)>,
    pub rows: Vec<ComponentRow>,
}

impl EstimateReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut out = audit_block(&self.audit);
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| std::iter::once(r.component.clone()).chain(r.values().iter().map(|&v| fmt_num(v))).collect())
            .collect();
        out.push_str(&csv_text(&ESTIMATE_COLUMNS, &rows)?);
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let head = ["Comp", "Est", "Sd", "CI lo", "CI hi", "Naive est", "Naive sd", "Naive lo", "Naive hi"];
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| std::iter::once(r.component.clone()).chain(r.values().iter().map(|v| fixed3(*v))).collect())
            .collect();
        let mut out = String::new();
        for (k, v) in &self.audit {
            let _ = writeln!(out, "{k}: {v}");
        }
        out.push('\n');
        out.push_str(&align(&head, &body));
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (audit, table) = split_audit(text);
        let mut reader = csv::Reader::from_reader(table.as_bytes());
        check_header(&mut reader, &ESTIMATE_COLUMNS)?;
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(report_err)?;
            let v = numbers(&rec, 1..9)?;
            rows.push(ComponentRow {
                component: rec[0].to_string(),
                est: v[0],
                sd: v[1],
                ci_lo: v[2],
                ci_hi: v[3],
                naive_est: v[4],
                naive_sd: v[5],
                naive_ci_lo: v[6],
                naive_ci_hi: v[7],
            });
        }
        Ok(Self { audit, rows })
    }
}

/// Monte Carlo summary, one row per estimator and component.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTable {
    pub audit: Vec<(String, String)>,
    pub rows: Vec<SimRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRow {
    pub estimator: String,
    pub design: String,
    pub censoring: String,
    pub n: usize,
    pub reps: usize,
    pub failed: usize,
    pub component: String,
    pub beta0: f64,
    pub bias: f64,
    pub sd: f64,
    pub mse: f64,
    /// Joint RMSE of the whole coefficient vector, repeated on each component row.
    pub rmse: f64,
    pub cp95: f64,
}

impl SimTable {
    pub fn from_reports(audit: Vec<(String, String)>, reports: &[&SimReport], components: &[String]) -> Self {
        let mut rows = Vec::new();
        for r in reports {
            for (j, name) in components.iter().enumerate() {
                rows.push(SimRow {
                    estimator: r.estimator.clone(),
                    design: r.design.clone(),
                    censoring: r.censoring.clone(),
                    n: r.n,
                    reps: r.reps,
                    failed: r.failed,
                    component: name.clone(),
                    beta0: r.beta0[j],
                    bias: r.bias[j],
                    sd: r.sd[j],
                    mse: r.mse[j],
                    rmse: r.rmse,
                    cp95: r.cp95.as_ref().map_or(f64::NAN, |c| c[j]),
                });
            }
        }
        Self { audit, rows }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = audit_block(&self.audit);
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut v = vec![
                    r.estimator.clone(),
                    r.design.clone(),
                    r.censoring.clone(),
                    r.n.to_string(),
                    r.reps.to_string(),
                    r.failed.to_string(),
                    r.component.clone(),
                ];
                v.extend([r.beta0, r.bias, r.sd, r.mse, r.rmse, r.cp95].map(fmt_num));
                v
            })
            .collect();
        out.push_str(&csv_text(&SIM_COLUMNS, &rows)?);
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let head = ["Estimator", "Design", "Cens", "n", "N", "Failed", "Comp", "beta0", "Bias", "Sd", "MSE", "RMSE", "CP95"];
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut v = vec![
                    r.estimator.clone(),
                    r.design.clone(),
                    format!("{}%", r.censoring),
                    r.n.to_string(),
                    r.reps.to_string(),
                    r.failed.to_string(),
                    r.component.clone(),
                ];
                v.extend([r.beta0, r.bias, r.sd, r.mse, r.rmse, r.cp95].map(fixed3));
                v
            })
            .collect();
        let mut out = String::new();
        for (k, v) in &self.audit {
            let _ = writeln!(out, "{k}: {v}");
        }
        out.push('\n');
        out.push_str(&align(&head, &body));
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (audit, table) = split_audit(text);
        let mut reader = csv::Reader::from_reader(table.as_bytes());
        check_header(&mut reader, &SIM_COLUMNS)?;
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(report_err)?;
            let count = |i: usize| -> Result<usize> {
                rec[i].parse().map_err(|_| CliError::Config(format!("bad count `{}` in report", &rec[i])))
            };
            let v = numbers(&rec, 7..13)?;
            rows.push(SimRow {
                estimator: rec[0].to_string(),
                design: rec[1].to_string(),
                censoring: rec[2].to_string(),
                n: count(3)?,
                reps: count(4)?,
                failed: count(5)?,
                component: rec[6].to_string(),
                beta0: v[0],
                bias: v[1],
                sd: v[2],
                mse: v[3],
                rmse: v[4],
                cp95: v[5],
            });
        }
        Ok(Self { audit, rows })
    }
}

/// Per-resample bootstrap estimates.
pub fn resamples_csv(components: &[String], estimates: &[Vec<f64>]) -> Result<String> {
    let mut head = vec!["resample"];
    head.extend(components.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = estimates
        .iter()
        .enumerate()
        .map(|(r, b)| std::iter::once(r.to_string()).chain(b.iter().map(|&v| fmt_num(v))).collect())
        .collect();
    csv_text(&head, &rows)
}

fn audit_block(audit: &[(String, String)]) -> String {
    audit.iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
}

fn split_audit(text: &str) -> (Vec<(String, String)>, String) {
    let mut audit = Vec::new();
    let mut table = String::new();
    for line in text.lines() {
        match line.strip_prefix("# ") {
            Some(kv) => {
                let (k, v) = kv.split_once('=').unwrap_or((kv, ""));
                audit.push((k.to_string(), v.to_string()));
            }
            None => {
                table.push_str(line);
                table.push('\n');
            }
        }
    }
    (audit, table)
}

fn report_err(e: csv::Error) -> CliError {
    CliError::Config(format!("malformed report: {e}"))
}

fn check_header(reader: &mut csv::Reader<&[u8]>, want: &[&str]) -> Result<()> {
    let got = reader.headers().map_err(report_err)?;
    if got.iter().ne(want.iter().copied()) {
        return Err(CliError::Config(format!("report header {:?} does not match {want:?}", got)));
    }
    Ok(())
}

fn numbers(rec: &csv::StringRecord, range: std::ops::Range<usize>) -> Result<Vec<f64>> {
    range
        .map(|i| parse_num(&rec[i]).ok_or_else(|| CliError::Config(format!("bad number `{}` in report", &rec[i]))))
        .collect()
}

fn fixed3(v: f64) -> String {
    if v.is_nan() { "NA".into() } else { format!("{v:.3}") }
}

/// Left-aligned first column, right-aligned numbers.
fn align(head: &[&str], body: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = head.iter().map(|h| h.chars().count()).collect();
    for row in body {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| -> String {
        let parts: Vec<String> = cells
            .zip(&width)
            .enumerate()
            .map(|(i, (c, &w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(&mut head.iter().copied());
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (width.len() - 1)));
    out.push('\n');
    for row in body {
        out.push_str(&line(&mut row.iter().map(String::as_str)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Application results of the unemployment insurance experiment.
    fn application_table() -> EstimateReport {
        let row = |c: &str, v: [f64; 8]| ComponentRow {
            component: c.into(),
            est: v[0],
            sd: v[1],
            ci_lo: v[2],
            ci_hi: v[3],
            naive_est: v[4],
            naive_sd: v[5],
            naive_ci_lo: v[6],
            naive_ci_hi: v[7],
        };
        EstimateReport {
            audit: vec![("seed".into(), "1".into()), ("tbar".into(), "26".into())],
            rows: vec![
                row("z:JSIE", [0.910, 0.327, 0.270, 1.550, 0.079, 0.090, -0.098, 0.256]),
                row("z:HIE", [0.929, 0.339, 0.264, 1.594, 0.075, 0.097, -0.115, 0.264]),
                row("x", [0.058, 0.098, -0.135, 0.250, -0.136, 0.040, -0.215, -0.058]),
            ],
        }
    }

    #[test]
    fn application_table_round_trips() {
        let t = application_table();
        let csv = t.to_csv().unwrap();
        assert!(csv.starts_with("# seed=1\n# tbar=26\ncomponent,est,sd,"));
        assert!(csv.contains("z:JSIE,0.91,0.327,0.27,1.55,0.079,0.09,-0.098,0.256"));
        assert_eq!(EstimateReport::parse(&csv).unwrap(), t);
        let text = t.to_text();
        assert!(text.contains("z:JSIE  0.910  0.327   0.270  1.550"), "{text}");
        assert!(text.contains("-0.136"));
    }

    #[test]
    fn awkward_values_round_trip() {
        let mut t = application_table();
        t.rows[0].est = 1.0 / 3.0;
        t.rows[1].sd = f64::NAN;
        t.rows[2].ci_lo = -2.5e-17;
        let back = EstimateReport::parse(&t.to_csv().unwrap()).unwrap();
        assert_eq!(back.rows[0].est, 1.0 / 3.0);
        assert!(back.rows[1].sd.is_nan());
        assert_eq!(back.rows[2].ci_lo, -2.5e-17);
    }

    #[test]
    fn sim_table_round_trips() {
        let report = SimReport::from_estimates(
            "proposed",
            "discrete-bernoulli",
            "20",
            500,
            &[vec![0.6, 0.4], vec![0.71, 0.2], vec![0.66, 0.33]],
            &[0.65, 0.3],
            1,
        );
        let t = SimTable::from_reports(vec![("seed".into(), "3".into())], &[&report], &["z".into(), "x".into()]);
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows[0].cp95.is_nan());
        let back = SimTable::parse(&t.to_csv().unwrap()).unwrap();
        for (a, b) in back.rows.iter().zip(&t.rows) {
            for (x, y) in [(a.bias, b.bias), (a.sd, b.sd), (a.mse, b.mse), (a.rmse, b.rmse), (a.beta0, b.beta0)] {
                assert!((x - y).abs() <= 1e-12);
            }
            assert_eq!((a.n, a.reps, a.failed), (b.n, b.reps, b.failed));
        }
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(EstimateReport::parse("a,b\n1,2\n").is_err());
    }
}
