//! Flat `key = value` run configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ivcox::kernels::{BandwidthMethod, BandwidthScope};
use ivcox::pipeline::{PipelineConfig, SolverChoice};
use ivcox::sim::{Censoring, SimDesign};
use ivcox::{BandwidthPlan, KernelFamily, KernelSpec};

use crate::CliError;

/// Keys accepted in config files and by `--set`.
pub const KEYS: &[&str] = &[
    "input",
    "output",
    "column.y",
    "column.delta",
    "column.z",
    "column.z_dummies",
    "column.x",
    "column.w",
    "kernel.family",
    "kernel.order",
    "bandwidth.method",
    "bandwidth.value",
    "bandwidth.scope",
    "time.epsilon",
    "ubar",
    "tbar",
    "tau",
    "seed",
    "bootstrap",
    "level",
    "solver",
    "grid.points",
    "proxy.replicates",
    "proxy.max_drop",
    "design",
    "censoring",
    "n",
    "reps",
    "warp_speed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Estimate,
    Simulate,
    Bootstrap,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Estimate => "estimate",
            Command::Simulate => "simulate",
            Command::Bootstrap => "bootstrap",
        })
    }
}

/// How the treatment is stored in the input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreatmentColumns {
    /// One column holding a level label.
    Level(String),
    /// One 0/1 column per non-reference level.
    Dummies(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub y: String,
    pub delta: String,
    pub z: TreatmentColumns,
    pub x: String,
    pub w: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            y: "y".into(),
            delta: "delta".into(),
            z: TreatmentColumns::Level("z".into()),
            x: "x".into(),
            w: "w".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub columns: ColumnMap,
    pub kernel: KernelFamily,
    pub kernel_order: Option<usize>,
    pub bandwidth_method: String,
    pub bandwidth_value: Option<f64>,
    pub bandwidth_scope: BandwidthScope,
    pub epsilon: f64,
    pub ubar: f64,
    pub tbar: Option<f64>,
    pub tau: f64,
    pub seed: u64,
    pub bootstrap: usize,
    pub level: f64,
    pub solver: SolverChoice,
    pub grid_points: usize,
    pub replicates: usize,
    pub max_drop: f64,
    pub design: Option<SimDesign>,
    pub censoring: Censoring,
    pub n: usize,
    pub reps: usize,
    pub warp_speed: bool,
    z_level_set: bool,
    z_dummies_set: bool,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            input: None,
            output: None,
            columns: ColumnMap::default(),
            kernel: KernelFamily::Epanechnikov,
            kernel_order: None,
            bandwidth_method: "rule-of-thumb".into(),
            bandwidth_value: None,
            bandwidth_scope: BandwidthScope::PerCell,
            epsilon: 0.0,
            ubar: 0.9,
            tbar: None,
            tau: 0.0,
            seed: 0,
            bootstrap: if command == Command::Simulate { 0 } else { 200 },
            level: 0.95,
            solver: SolverChoice::Auto,
            grid_points: 101,
            replicates: 1,
            max_drop: 0.05,
            design: None,
            censoring: Censoring::Twenty,
            n: 500,
            reps: 100,
            warp_speed: true,
            z_level_set: false,
            z_dummies_set: false,
        }
    }

    /// Applies every `key = value` line of `text`; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{origin}:{}: expected `key = value`", i + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| CliError::Config(format!("{origin}:{}: {}", i + 1, e.message())))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// `key=value` as given to `--set`.
    pub fn apply_override(&mut self, pair: &str) -> Result<(), CliError> {
        let (key, value) =
            pair.split_once('=').ok_or_else(|| CliError::Config(format!("`--set {pair}` is not `key=value`")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let bad = |what: &str| CliError::Config(format!("{key}: {what} `{value}`"));
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "output" => self.output = Some(PathBuf::from(value)),
            "column.y" => self.columns.y = value.into(),
            "column.delta" => self.columns.delta = value.into(),
            "column.z" => {
                self.columns.z = TreatmentColumns::Level(value.into());
                self.z_level_set = true;
            }
            "column.z_dummies" => {
                let cols: Vec<String> =
                    value.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect();
                if cols.is_empty() {
                    return Err(bad("expected a comma-separated column list, got"));
                }
                self.columns.z = TreatmentColumns::Dummies(cols);
                self.z_dummies_set = true;
            }
            "column.x" => self.columns.x = value.into(),
            "column.w" => self.columns.w = value.into(),
            "kernel.family" => self.kernel = value.parse().map_err(|_| bad("unknown kernel family"))?,
            "kernel.order" => self.kernel_order = Some(parse(value).map_err(|_| bad("expected an integer, got"))?),
            "bandwidth.method" => self.bandwidth_method = value.to_ascii_lowercase(),
            "bandwidth.value" => self.bandwidth_value = Some(parse(value).map_err(|_| bad("expected a number, got"))?),
            "bandwidth.scope" => self.bandwidth_scope = value.parse().map_err(|_| bad("unknown scope"))?,
            "time.epsilon" => self.epsilon = parse(value).map_err(|_| bad("expected a number, got"))?,
            "ubar" => self.ubar = parse(value).map_err(|_| bad("expected a number, got"))?,
            "tbar" => self.tbar = Some(parse(value).map_err(|_| bad("expected a number, got"))?),
            "tau" => self.tau = parse(value).map_err(|_| bad("expected a number, got"))?,
            "seed" => self.seed = parse(value).map_err(|_| bad("expected an unsigned integer, got"))?,
            "bootstrap" => self.bootstrap = parse(value).map_err(|_| bad("expected an integer, got"))?,
            "level" => self.level = parse(value).map_err(|_| bad("expected a number, got"))?,
            "solver" => self.solver = value.parse().map_err(|_| bad("unknown solver"))?,
            "grid.points" => self.grid_points = parse(value).map_err(|_| bad("expected an integer, got"))?,
            "proxy.replicates" => self.replicates = parse(value).map_err(|_| bad("expected an integer, got"))?,
            "proxy.max_drop" => self.max_drop = parse(value).map_err(|_| bad("expected a number, got"))?,
            "design" => self.design = Some(value.parse().map_err(|_| bad("unknown design"))?),
            "censoring" => self.censoring = value.parse().map_err(|_| bad("censoring must be 20 or 40, got"))?,
            "n" => self.n = parse(value).map_err(|_| bad("expected an integer, got"))?,
            "reps" => self.reps = parse(value).map_err(|_| bad("expected an integer, got"))?,
            "warp_speed" => self.warp_speed = parse_bool(value).ok_or_else(|| bad("expected true or false, got"))?,
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Cross-field checks that do not need the data.
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |m: String| Err(CliError::Config(m));
        if !(self.ubar > 0.0 && self.ubar < 1.0) {
            return fail(format!("ubar = {} must lie in (0, 1)", self.ubar));
        }
        if !(self.tau >= 0.0 && self.tau <= self.ubar) {
            return fail(format!("tau = {} must lie in [0, ubar]", self.tau));
        }
        if let Some(t) = self.tbar {
            if !(t > 0.0 && t.is_finite()) {
                return fail(format!("tbar = {t} must be positive"));
            }
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return fail("time.epsilon must be a finite number >= 0".into());
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return fail(format!("level = {} must lie in (0, 1)", self.level));
        }
        if self.z_level_set && self.z_dummies_set {
            return fail("give exactly one of column.z and column.z_dummies".into());
        }
        if self.grid_points < 2 {
            return fail("grid.points must be at least 2".into());
        }
        if self.replicates == 0 {
            return fail("proxy.replicates must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.max_drop) {
            return fail("proxy.max_drop must lie in [0, 1]".into());
        }
        self.kernel_spec()?;
        self.bandwidth_plan()?;
        match self.command {
            Command::Estimate | Command::Bootstrap => {
                if self.input.is_none() {
                    return fail(format!("{} needs an input file", self.command));
                }
                if self.command == Command::Bootstrap && self.bootstrap < 2 {
                    return fail("the bootstrap needs B >= 2".into());
                }
                if self.bootstrap == 1 {
                    return fail("bootstrap must be 0 (off) or at least 2".into());
                }
            }
            Command::Simulate => {
                if self.design.is_none() {
                    return fail("simulate needs a design".into());
                }
                if self.n == 0 || self.reps == 0 {
                    return fail("n and reps must be positive".into());
                }
                if self.warp_speed && self.reps < 2 {
                    return fail("warp-speed coverage needs at least 2 replications".into());
                }
            }
        }
        Ok(())
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec<f64>, CliError> {
        let family = match (self.kernel, self.kernel_order) {
            (f, None) => f,
            (KernelFamily::Epanechnikov, Some(4)) | (KernelFamily::ConstructedOrder4, Some(4)) => KernelFamily::ConstructedOrder4,
            (KernelFamily::Epanechnikov, Some(2)) => KernelFamily::Epanechnikov,
            (f, Some(o)) => return Err(CliError::Config(format!("kernel {f} is not available with order {o}"))),
        };
        KernelSpec::from_family(family).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn bandwidth_plan(&self) -> Result<BandwidthPlan<f64>, CliError> {
        let method: BandwidthMethod<f64> = BandwidthPlan::parse_method(&self.bandwidth_method, self.bandwidth_value)
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(BandwidthPlan { method, scope: self.bandwidth_scope, ..BandwidthPlan::default() })
    }

    pub fn pipeline(&self) -> Result<PipelineConfig<f64>, CliError> {
        let mut cfg = PipelineConfig::<f64>::default();
        let kernel = self.kernel_spec()?;
        cfg.first_stage.kernel = kernel.clone();
        cfg.first_stage.time_kernel = kernel;
        cfg.first_stage.epsilon = self.epsilon;
        cfg.first_stage.bandwidth = self.bandwidth_plan()?;
        cfg.first_stage.tbar = self.tbar;
        cfg.ubar = self.ubar;
        cfg.grid_points = self.grid_points;
        cfg.solver = self.solver;
        cfg.tau = self.tau;
        cfg.replicates = self.replicates;
        cfg.max_drop_fraction = self.max_drop;
        Ok(cfg)
    }

    /// Effective settings, one `(key, value)` per line of the audit block.
    pub fn describe(&self) -> Vec<(String, String)> {
        let mut out = vec![("command".to_string(), self.command.to_string())];
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        if let Some(p) = &self.input {
            push("input", p.display().to_string());
        }
        push("kernel.family", self.kernel.to_string());
        if let Some(o) = self.kernel_order {
            push("kernel.order", o.to_string());
        }
        push("bandwidth.method", self.bandwidth_method.clone());
        if let Some(v) = self.bandwidth_value {
            push("bandwidth.value", v.to_string());
        }
        push(
            "bandwidth.scope",
            match self.bandwidth_scope {
                BandwidthScope::PerCell => "per-cell".into(),
                BandwidthScope::PerQuery => "per-query".into(),
            },
        );
        push("time.epsilon", self.epsilon.to_string());
        push("ubar", self.ubar.to_string());
        push("tau", self.tau.to_string());
        push("seed", self.seed.to_string());
        push("solver", self.solver.to_string());
        push("grid.points", self.grid_points.to_string());
        push("proxy.replicates", self.replicates.to_string());
        push("level", self.level.to_string());
        match self.command {
            Command::Simulate => {
                push("design", self.design.map(|d| d.to_string()).unwrap_or_default());
                push("censoring", self.censoring.to_string());
                push("n", self.n.to_string());
                push("reps", self.reps.to_string());
                push("warp_speed", self.warp_speed.to_string());
            }
            _ => push("bootstrap", self.bootstrap.to_string()),
        }
        out
    }
}

fn parse<T: FromStr>(value: &str) -> Result<T, T::Err> {
    value.trim().parse()
}

fn parse_bool(value: &str) -> Option<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Some(true),
        "false" | "no" | "0" | "off" => Some(false),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_override() {
        let mut c = RunConfig::new(Command::Estimate);
        c.apply_text("# run\ninput = data.csv\nubar = 0.5 # as in the application\ntbar=26\n", "run.cfg").unwrap();
        c.apply_override("ubar=0.6").unwrap();
        assert_eq!(c.input, Some(PathBuf::from("data.csv")));
        assert_eq!(c.ubar, 0.6);
        assert_eq!(c.tbar, Some(26.0));
        c.validate().unwrap();
    }

    #[test]
    fn ubar_out_of_range() {
        let mut c = RunConfig::new(Command::Estimate);
        c.set("input", "d.csv").unwrap();
        c.set("ubar", "1.2").unwrap();
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_key_and_line_numbers() {
        let mut c = RunConfig::new(Command::Estimate);
        let err = c.apply_text("seed = 1\nspeed = 2\n", "x.cfg").unwrap_err();
        assert!(err.to_string().contains("x.cfg:2"), "{err}");
    }

    #[test]
    fn treatment_columns_are_exclusive() {
        let mut c = RunConfig::new(Command::Estimate);
        c.set("input", "d.csv").unwrap();
        c.set("column.z", "arm").unwrap();
        c.set("column.z_dummies", "jsie, hie").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_design() {
        let mut c = RunConfig::new(Command::Simulate);
        assert!(c.set("design", "lognormal").is_err());
    }

    #[test]
    fn kernel_order_selects_family() {
        let mut c = RunConfig::new(Command::Estimate);
        c.set("kernel.order", "4").unwrap();
        assert_eq!(c.kernel_spec().unwrap().order(), 4);
        c.set("kernel.order", "3").unwrap();
        assert!(c.kernel_spec().is_err());
    }

    #[test]
    fn every_key_is_settable() {
        let samples = [
            ("input", "a.csv"),
            ("output", "b.csv"),
            ("column.y", "time"),
            ("column.delta", "event"),
            ("column.z", "arm"),
            ("column.z_dummies", "a,b"),
            ("column.x", "age"),
            ("column.w", "assigned"),
            ("kernel.family", "epanechnikov"),
            ("kernel.order", "2"),
            ("bandwidth.method", "fixed"),
            ("bandwidth.value", "0.3"),
            ("bandwidth.scope", "per-query"),
            ("time.epsilon", "0.1"),
            ("ubar", "0.5"),
            ("tbar", "26"),
            ("tau", "0.1"),
            ("seed", "7"),
            ("bootstrap", "50"),
            ("level", "0.9"),
            ("solver", "general"),
            ("grid.points", "51"),
            ("proxy.replicates", "2"),
            ("proxy.max_drop", "0.1"),
            ("design", "discrete-bernoulli"),
            ("censoring", "40"),
            ("n", "300"),
            ("reps", "20"),
            ("warp_speed", "false"),
        ];
        assert_eq!(samples.len(), KEYS.len());
        let mut c = RunConfig::new(Command::Estimate);
        for (k, v) in samples {
            assert!(KEYS.contains(&k));
            c.set(k, v).unwrap();
        }
    }
}
