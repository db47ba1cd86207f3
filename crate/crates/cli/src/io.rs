//! CSV input and atomic file output.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use ivcox::{Dataset, Observation};

use crate::config::{ColumnMap, TreatmentColumns};
use crate::{CliError, Result};

/// Reads the analysis file. Treatment and instrument levels are the sorted
/// distinct labels (numerically when every label is a number); the first
/// treatment level is the reference and gets the zero dummy vector.
pub fn read_dataset(path: &Path, columns: &ColumnMap) -> Result<Dataset<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_dataset(&text, path, columns)
}

pub fn parse_dataset(text: &str, path: &Path, columns: &ColumnMap) -> Result<Dataset<f64>> {
    let schema = |message: String| CliError::Schema { path: path.to_path_buf(), message };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::Parse { path: path.to_path_buf(), line: 1, message: e.to_string() })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(CliError::EmptyFile(path.to_path_buf()));
    }
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| schema(format!("missing column `{name}`")))
    };
    let (iy, id, ix, iw) = (find(&columns.y)?, find(&columns.delta)?, find(&columns.x)?, find(&columns.w)?);
    let treatment: Vec<usize> = match &columns.z {
        TreatmentColumns::Level(name) => vec![find(name)?],
        TreatmentColumns::Dummies(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
    };

    struct Row {
        y: f64,
        delta: bool,
        z: String,
        x: f64,
        w: String,
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| CliError::Parse { path: path.to_path_buf(), line, message };
        let field = |i: usize, name: &str| -> Result<&str> {
            match record.get(i) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(bad(format!("empty value in column `{name}`"))),
            }
        };
        let number = |i: usize, name: &str| -> Result<f64> {
            let v = field(i, name)?;
            match v.parse::<f64>() {
                Ok(n) if n.is_finite() => Ok(n),
                _ => Err(bad(format!("`{v}` in column `{name}` is not a finite number"))),
            }
        };
        let y = number(iy, &columns.y)?;
        if y < 0.0 {
            return Err(bad(format!("negative duration {y}")));
        }
        let delta = match field(id, &columns.delta)? {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("`{other}` in column `{}` must be 0 or 1", columns.delta))),
        };
        let z = match &columns.z {
            TreatmentColumns::Level(name) => field(treatment[0], name)?.to_string(),
            TreatmentColumns::Dummies(names) => {
                let mut code = String::new();
                for (&i, name) in treatment.iter().zip(names) {
                    match field(i, name)? {
                        "0" => code.push('0'),
                        "1" => code.push('1'),
                        other => return Err(bad(format!("`{other}` in dummy column `{name}` must be 0 or 1"))),
                    }
                }
                if code.matches('1').count() > 1 {
                    return Err(bad("more than one treatment dummy is 1".into()));
                }
                code
            }
        };
        let x = number(ix, &columns.x)?;
        let w = field(iw, &columns.w)?.to_string();
        rows.push(Row { y, delta, z, x, w });
    }
    if rows.is_empty() {
        return Err(CliError::EmptyFile(path.to_path_buf()));
    }

    let (z_labels, z_codebook): (Vec<String>, Vec<Vec<f64>>) = match &columns.z {
        TreatmentColumns::Level(_) => {
            let labels = sorted_labels(rows.iter().map(|r| r.z.as_str()));
            let d = labels.len().saturating_sub(1);
            let codebook = (0..labels.len())
                .map(|l| (0..d).map(|j| if l == j + 1 { 1.0 } else { 0.0 }).collect())
                .collect();
            (labels, codebook)
        }
        TreatmentColumns::Dummies(names) => {
            // The all-zero code is the reference, then the dummies in column order.
            let seen: BTreeSet<&str> = rows.iter().map(|r| r.z.as_str()).collect();
            let d = names.len();
            let mut labels = Vec::new();
            let mut codebook = Vec::new();
            let reference = "0".repeat(d);
            if seen.contains(reference.as_str()) {
                labels.push("reference".to_string());
                codebook.push(vec![0.0; d]);
            }
            for (j, name) in names.iter().enumerate() {
                let mut code = reference.clone().into_bytes();
                code[j] = b'1';
                if seen.contains(std::str::from_utf8(&code).expect("ascii")) {
                    labels.push(name.clone());
                    codebook.push((0..d).map(|k| if k == j { 1.0 } else { 0.0 }).collect());
                }
            }
            if labels.len() != d + 1 {
                return Err(schema(format!(
                    "{d} dummy columns need {} observed treatment levels, found {}",
                    d + 1,
                    labels.len()
                )));
            }
            (labels, codebook)
        }
    };
    let w_labels = sorted_labels(rows.iter().map(|r| r.w.as_str()));
    if w_labels.len() != z_labels.len() {
        return Err(schema(format!(
            "treatment has {} levels but instrument has {}; the model needs the same number of modalities",
            z_labels.len(),
            w_labels.len()
        )));
    }
    if z_labels.len() < 2 {
        return Err(schema("treatment and instrument need at least two levels".into()));
    }

    let z_index = |code: &str| -> usize {
        match &columns.z {
            TreatmentColumns::Level(_) => z_labels.iter().position(|l| l == code).expect("observed label"),
            TreatmentColumns::Dummies(names) => match code.find('1') {
                None => 0,
                Some(j) => z_labels.iter().position(|l| *l == names[j]).expect("observed dummy"),
            },
        }
    };
    let obs = rows
        .iter()
        .map(|r| Observation {
            y: r.y,
            delta: r.delta,
            z: z_index(&r.z),
            x: r.x,
            w: w_labels.iter().position(|l| *l == r.w).expect("observed label"),
        })
        .collect();
    Dataset::new(obs, z_codebook, z_labels, w_labels).map_err(|e| schema(e.to_string()))
}

/// Distinct labels, numerically sorted when all parse as numbers.
fn sorted_labels<'a>(labels: impl Iterator<Item = &'a str>) -> Vec<String> {
    let distinct: BTreeSet<&str> = labels.collect();
    let mut out: Vec<String> = distinct.into_iter().map(str::to_string).collect();
    if out.iter().all(|l| l.parse::<f64>().is_ok()) {
        out.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    }
    out
}

/// Writes `contents` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    tmp.write_all(contents).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Shortest representation that parses back to the same value; `NA` for NaN.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() { "NA".into() } else { format!("{v}") }
}

pub fn parse_num(s: &str) -> Option<f64> {
    match s.trim() {
        "NA" => Some(f64::NAN),
        t => t.parse().ok(),
    }
}

/// CSV text from a header and rows of already formatted fields.
pub fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| CliError::io("<csv>", std::io::Error::other(e));
    w.write_record(header).map_err(io_err)?;
    for r in rows {
        w.write_record(r).map_err(io_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io("<csv>", std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("utf-8 fields"))
}
