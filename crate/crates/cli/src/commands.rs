//! The `estimate`, `bootstrap` and `simulate` commands.

use std::path::{Path, PathBuf};

use ivcox::coxph::{naive_cox, CoxFit, CoxOptions};
use ivcox::inference::{bootstrap_sd, normal_quantile};
use ivcox::linalg::{Cholesky, SquareMatrix};
use ivcox::pipeline::{build_map, estimate_with_map, proxies_for, Estimate, PipelineConfig, ProxyDraws};
use ivcox::phi::QuantileMap;
use ivcox::sim::{run_monte_carlo, MonteCarloOptions};
use ivcox::Dataset;

use crate::config::{Command, RunConfig};
use crate::io::{csv_text, fmt_num, read_dataset, write_atomic};
use crate::report::{resamples_csv, ComponentRow, EstimateReport, SimTable};
use crate::{CliError, Result};

/// Optional diagnostic files written by `estimate` and `bootstrap`.
#[derive(Debug, Clone, Default)]
pub struct Dumps {
    /// `x,u,level,phi,residual` for every solved covariate value.
    pub phi: Option<PathBuf>,
    /// The first proxy set.
    pub proxies: Option<PathBuf>,
    /// Sub-distribution estimates at one covariate value.
    pub cdf: Option<(PathBuf, f64)>,
}

/// Everything a command produces, before it is written anywhere.
#[derive(Debug, Clone)]
pub struct Output {
    pub csv: String,
    pub text: String,
    /// Extra files keyed by path.
    pub files: Vec<(PathBuf, String)>,
}

impl Output {
    /// Writes the CSV to `path`, the aligned text next to it with a `.txt`
    /// extension, then the extra files.
    pub fn write(&self, path: Option<&Path>) -> Result<()> {
        if let Some(path) = path {
            write_atomic(path, self.csv.as_bytes())?;
            write_atomic(&path.with_extension("txt"), self.text.as_bytes())?;
        }
        for (p, body) in &self.files {
            write_atomic(p, body.as_bytes())?;
        }
        Ok(())
    }
}

pub fn run(cfg: &RunConfig, dumps: &Dumps) -> Result<Output> {
    cfg.validate()?;
    match cfg.command {
        Command::Estimate | Command::Bootstrap => run_estimate(cfg, dumps),
        Command::Simulate => run_simulate(cfg),
    }
}

/// Coefficient names: one per non-reference treatment level, then `x`.
pub fn component_names(data: &Dataset<f64>) -> Vec<String> {
    let mut names: Vec<String> = data.z_labels()[1..].iter().map(|l| format!("z:{l}")).collect();
    names.push("x".into());
    names
}

pub fn run_estimate(cfg: &RunConfig, dumps: &Dumps) -> Result<Output> {
    let input = cfg.input.as_deref().ok_or_else(|| CliError::Config("no input file".into()))?;
    let data = read_dataset(input, &cfg.columns)?;
    let pipeline = cfg.pipeline()?;
    let (map, order, solver) = build_map(&data, &pipeline, cfg.seed)?;
    let est = estimate_with_map(&data, &map, order, solver, &pipeline, cfg.seed, ProxyDraws::Fresh)?;
    let naive = naive_cox(&data, &CoxOptions::default())?;
    let names = component_names(&data);

    let mut files = diagnostic_files(&data, &map, &pipeline, cfg, dumps)?;
    let z = normal_quantile(cfg.level)?;
    let p = est.beta.len();
    let (sd, resamples) = if cfg.bootstrap >= 2 {
        let boot = bootstrap_sd(&data, &pipeline, cfg.bootstrap, cfg.seed)?;
        if let Some(component) = boot.sd.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(ivcox::Error::DegenerateSd { component }.into());
        }
        (boot.sd, Some((boot.estimates, boot.failed)))
    } else {
        (vec![f64::NAN; p], None)
    };
    let naive_sd = inverse_diagonal(&naive.observed_information).into_iter().map(f64::sqrt).collect::<Vec<_>>();

    let rows = (0..p)
        .map(|j| ComponentRow {
            component: names[j].clone(),
            est: est.beta[j],
            sd: sd[j],
            ci_lo: est.beta[j] - z * sd[j],
            ci_hi: est.beta[j] + z * sd[j],
            naive_est: naive.beta[j],
            naive_sd: naive_sd[j],
            naive_ci_lo: naive.beta[j] - z * naive_sd[j],
            naive_ci_hi: naive.beta[j] + z * naive_sd[j],
        })
        .collect();

    let mut audit = cfg.describe();
    audit.push(("n".into(), data.n().to_string()));
    audit.push(("levels".into(), data.z_labels().join("|")));
    audit.push(("instrument_levels".into(), data.w_labels().join("|")));
    audit.extend(estimate_audit(&est, &data));
    audit.extend(fit_audit("naive", &naive));
    if let Some((estimates, failed)) = &resamples {
        audit.push(("bootstrap_failed".into(), failed.to_string()));
        if cfg.command == Command::Bootstrap {
            let path = resamples_path(cfg);
            if let Some(path) = path {
                files.push((path, resamples_csv(&names, estimates)?));
            }
        }
    }
    let report = EstimateReport { audit, rows };
    Ok(Output { csv: report.to_csv()?, text: report.to_text(), files })
}

fn resamples_path(cfg: &RunConfig) -> Option<PathBuf> {
    cfg.output.as_ref().map(|p| p.with_extension("resamples.csv"))
}

fn estimate_audit(est: &Estimate<f64>, data: &Dataset<f64>) -> Vec<(String, String)> {
    let a = &est.audit;
    let mut out = vec![
        ("estimate.seed".to_string(), a.seed.to_string()),
        ("estimate.tbar".into(), fmt_num(a.tbar)),
        ("estimate.solver".into(), a.solver.to_string()),
    ];
    if let Some(order) = &a.order {
        let labels = |idx: &[usize], names: &[String]| idx.iter().map(|&i| names[i].clone()).collect::<Vec<_>>().join("<");
        out.push(("estimate.order.z".into(), labels(&order.z, data.z_labels())));
        out.push(("estimate.order.w".into(), labels(&order.w, data.w_labels())));
    }
    let bw: Vec<String> = a
        .bandwidths
        .iter()
        .map(|b| {
            let key = match b.key {
                ivcox::kernels::CellKey::Joint { z, w } => format!("z{z}w{w}"),
                ivcox::kernels::CellKey::Instrument { w } => format!("w{w}"),
            };
            format!("{key}:{}", fmt_num(b.h))
        })
        .collect();
    out.push(("estimate.bandwidths".into(), bw.join(" ")));
    out.push(("estimate.bandwidth_fallbacks".into(), a.bandwidth_fallbacks.len().to_string()));
    for (i, f) in a.bandwidth_fallbacks.iter().enumerate() {
        out.push((format!("estimate.bandwidth_fallback.{i}"), f.clone()));
    }
    out.push(("estimate.widened".into(), a.widened.to_string()));
    out.push(("estimate.proxies".into(), a.proxies.to_string()));
    out.push(("estimate.saturation_drops".into(), a.dropped.to_string()));
    out.push(("estimate.rank_deficient".into(), a.rank_deficient.to_string()));
    out.extend(fit_audit("estimate", &est.fit));
    out
}

fn fit_audit(prefix: &str, fit: &CoxFit<f64>) -> Vec<(String, String)> {
    vec![
        (format!("{prefix}.iterations"), fit.iterations.to_string()),
        (format!("{prefix}.score_norm"), fmt_num(fit.score_norm)),
        (format!("{prefix}.converged"), fit.converged.to_string()),
        (format!("{prefix}.events"), fit.n_events.to_string()),
    ]
}

/// Diagonal of the inverse; NaN when the matrix is not positive definite.
fn inverse_diagonal(m: &SquareMatrix<f64>) -> Vec<f64> {
    match Cholesky::new(m, 1e-12) {
        Some(c) => (0..m.dim)
            .map(|j| {
                let mut e = vec![0.0; m.dim];
                e[j] = 1.0;
                c.solve(&e)[j]
            })
            .collect(),
        None => vec![f64::NAN; m.dim],
    }
}

fn diagnostic_files(
    data: &Dataset<f64>,
    map: &QuantileMap<f64>,
    pipeline: &PipelineConfig<f64>,
    cfg: &RunConfig,
    dumps: &Dumps,
) -> Result<Vec<(PathBuf, String)>> {
    let mut files = Vec::new();
    if let Some(path) = &dumps.proxies {
        let px = proxies_for(data, map, pipeline, cfg.seed, 0, ProxyDraws::Fresh)?;
        let rows: Vec<Vec<String>> = px
            .rows()
            .iter()
            .map(|r| {
                vec![
                    fmt_num(r.y),
                    u8::from(r.delta).to_string(),
                    fmt_num(r.u_tilde),
                    data.z_labels()[r.z].clone(),
                    fmt_num(r.x),
                    r.source.to_string(),
                ]
            })
            .collect();
        files.push((path.clone(), csv_text(&["y", "delta", "u_tilde", "z", "x", "source"], &rows)?));
    }
    if let Some(path) = &dumps.phi {
        // Proxy generation fills the slice cache; make sure it is populated.
        for o in data.observations() {
            map.slice(o.x)?;
        }
        let mut rows = Vec::new();
        for s in map.cached_slices() {
            for (level, values) in s.phi.iter().enumerate() {
                for (i, v) in values.iter().enumerate() {
                    rows.push(vec![
                        fmt_num(s.x),
                        fmt_num(s.grid[i]),
                        data.z_labels()[level].clone(),
                        fmt_num(*v),
                        s.residual.get(i).copied().flatten().map_or("NA".into(), fmt_num),
                    ]);
                }
            }
        }
        files.push((path.clone(), csv_text(&["x", "u", "level", "phi", "residual"], &rows)?));
    }
    if let Some((path, x)) = &dumps.cdf {
        let bundle = map.stage().bundle_at(*x, pipeline.ubar)?;
        let mut rows = Vec::new();
        for z in 0..bundle.levels() {
            for w in 0..bundle.levels() {
                for (t, v) in bundle.entry(z, w).points(pipeline.grid_points) {
                    rows.push(vec![data.z_labels()[z].clone(), data.w_labels()[w].clone(), fmt_num(t), fmt_num(v)]);
                }
            }
        }
        files.push((path.clone(), csv_text(&["z", "w", "t", "value"], &rows)?));
    }
    Ok(files)
}

pub fn run_simulate(cfg: &RunConfig) -> Result<Output> {
    let design = cfg.design.ok_or_else(|| CliError::Config("simulate needs a design".into()))?;
    let pipeline = cfg.pipeline()?;
    let opts = MonteCarloOptions {
        reps: cfg.reps,
        seed: cfg.seed,
        warp_speed: cfg.warp_speed,
        level: cfg.level,
        ..Default::default()
    };
    let mc = run_monte_carlo(design, cfg.censoring, cfg.n, &pipeline, &opts)?;
    let levels = design.levels();
    let mut names: Vec<String> =
        if levels == 2 { vec!["z".into()] } else { (1..levels).map(|l| format!("z{l}")).collect() };
    names.push("x".into());
    let mut audit = cfg.describe();
    audit.push(("failures".into(), mc.failures.len().to_string()));
    for (rep, err) in &mc.failures {
        audit.push((format!("failure.{rep}"), err.replace('\n', " ")));
    }
    let table = SimTable::from_reports(audit, &[&mc.proposed, &mc.naive], &names);
    Ok(Output { csv: table.to_csv()?, text: table.to_text(), files: Vec::new() })
}
