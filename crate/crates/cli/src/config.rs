//! TOML experiment configuration with `key=value` overrides.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    TrapezoidSweep,
    TorusCompare,
    TopomapTrain,
    BoundCheck,
    GradientCheck,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    experiment: ExperimentKind,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
    #[serde(default)]
    params: Table,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrapezoidSweep {
    pub n: Vec<usize>,
    /// Ring length, one neuron per unit.
    pub length: usize,
    pub p0: f64,
    /// Golden-section bracket width.
    pub search_tol: f64,
    pub s_tol: f64,
    pub value_tol: f64,
    pub nodes_per_panel: usize,
}

impl Default for TrapezoidSweep {
    fn default() -> Self {
        Self {
            n: vec![1, 2, 4, 10],
            length: 8,
            p0: 1.0,
            search_tol: 1e-6,
            s_tol: 1e-3,
            value_tol: 1e-6,
            nodes_per_panel: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TorusCompare {
    pub m: usize,
    pub n: Vec<usize>,
    pub nodes_per_panel: usize,
    /// Zero skips the Monte-Carlo column.
    pub mc_samples: usize,
    pub quadrature_tol: f64,
    pub monte_carlo_tol: f64,
}

impl Default for TorusCompare {
    fn default() -> Self {
        Self {
            m: 16,
            n: vec![1, 4, 1000],
            nodes_per_panel: 64,
            mc_samples: 0,
            quadrature_tol: 1e-6,
            monte_carlo_tol: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopomapTrain {
    pub m: usize,
    /// Hidden-layer window half-width; 0 gives the identity kernel.
    pub half_width: usize,
    pub epochs: usize,
    pub samples_per_epoch: usize,
    pub step: f64,
    pub decay: f64,
    /// Initial codevectors lie within this distance of the density mean.
    pub spread: f64,
    /// Evenly spaced points on [0, 1].
    pub points: usize,
    /// Independent runs with seeds `seed, seed + 1, ...`.
    pub runs: usize,
    pub snapshots: bool,
    pub min_ordered_fraction: f64,
}

impl Default for TopomapTrain {
    fn default() -> Self {
        Self {
            m: 8,
            half_width: 2,
            epochs: 50,
            samples_per_epoch: 200,
            step: 0.3,
            decay: 0.85,
            spread: 0.01,
            points: 1000,
            runs: 1,
            snapshots: false,
            min_ordered_fraction: 0.95,
        }
    }
}

/// Size limits for random enumerable instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceLimits {
    pub max_m: usize,
    pub max_n: usize,
    pub max_dim: usize,
    pub max_points: usize,
}

impl Default for InstanceLimits {
    fn default() -> Self {
        Self {
            max_m: 4,
            max_n: 3,
            max_dim: 2,
            max_points: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundCheck {
    pub instances: usize,
    pub max_m: usize,
    pub max_n: usize,
    pub max_dim: usize,
    pub max_points: usize,
    pub tol: f64,
    /// Negative control: replace every codebook with NaNs.
    pub corrupt_codebook: bool,
}

impl Default for BoundCheck {
    fn default() -> Self {
        Self {
            instances: 100,
            max_m: 4,
            max_n: 3,
            max_dim: 2,
            max_points: 10,
            tol: 1e-9,
            corrupt_codebook: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradientCheck {
    pub instances: usize,
    pub max_m: usize,
    pub max_n: usize,
    pub max_dim: usize,
    pub max_points: usize,
    pub step: f64,
    pub tol: f64,
}

impl Default for GradientCheck {
    fn default() -> Self {
        Self {
            instances: 10,
            max_m: 4,
            max_n: 3,
            max_dim: 2,
            max_points: 10,
            step: 1e-5,
            tol: 1e-5,
        }
    }
}

macro_rules! limits_accessor {
    ($t:ty) => {
        impl $t {
            pub fn limits(&self) -> InstanceLimits {
                InstanceLimits {
                    max_m: self.max_m,
                    max_n: self.max_n,
                    max_dim: self.max_dim,
                    max_points: self.max_points,
                }
            }
        }
    };
}

limits_accessor!(BoundCheck);
limits_accessor!(GradientCheck);

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    TrapezoidSweep(TrapezoidSweep),
    TorusCompare(TorusCompare),
    TopomapTrain(TopomapTrain),
    BoundCheck(BoundCheck),
    GradientCheck(GradientCheck),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub params: Params,
}

impl ExperimentConfig {
    pub fn kind(&self) -> ExperimentKind {
        match self.params {
            Params::TrapezoidSweep(_) => ExperimentKind::TrapezoidSweep,
            Params::TorusCompare(_) => ExperimentKind::TorusCompare,
            Params::TopomapTrain(_) => ExperimentKind::TopomapTrain,
            Params::BoundCheck(_) => ExperimentKind::BoundCheck,
            Params::GradientCheck(_) => ExperimentKind::GradientCheck,
        }
    }
}

pub fn load(path: &Path, overrides: &[String]) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text, overrides)
}

pub fn parse(text: &str, overrides: &[String]) -> CliResult<ExperimentConfig> {
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| CliError::config("<file>", e.message()))?;
    for item in overrides {
        apply_override(&mut table, item)?;
    }
    let header: Header = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| {
            // the experiment kind is the only enum in the header
            if e.message().starts_with("unknown variant") {
                CliError::config("experiment", e.message())
            } else {
                decode_error("", e)
            }
        })?;
    let params = match header.experiment {
        ExperimentKind::TrapezoidSweep => Params::TrapezoidSweep(params(header.params)?),
        ExperimentKind::TorusCompare => Params::TorusCompare(params(header.params)?),
        ExperimentKind::TopomapTrain => Params::TopomapTrain(params(header.params)?),
        ExperimentKind::BoundCheck => Params::BoundCheck(params(header.params)?),
        ExperimentKind::GradientCheck => Params::GradientCheck(params(header.params)?),
    };
    let cfg = ExperimentConfig {
        seed: header.seed,
        output_dir: header.output_dir,
        params,
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn params<T: DeserializeOwned>(table: Table) -> CliResult<T> {
    Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| decode_error("params.", e))
}

/// Names the offending key when the decoder reports an unknown field.
fn decode_error(prefix: &str, e: toml::de::Error) -> CliError {
    let message = e.message().to_string();
    let field = message
        .strip_prefix("unknown field `")
        .and_then(|rest| rest.split('`').next())
        .map(|name| format!("{prefix}{name}"))
        .unwrap_or_else(|| if prefix.is_empty() { "<top level>".into() } else { prefix.trim_end_matches('.').into() });
    CliError::config(field, message)
}

/// `a.b.c=value`; the value is read as a TOML literal, falling back to a bare string.
fn apply_override(table: &mut Table, item: &str) -> CliResult<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::config(item, "override must look like key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::config(key, "empty path segment"));
    }
    let mut cursor = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cursor.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(key, format!("`{part}` is not a table")))?;
    }
    cursor.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn require(ok: bool, field: &str, message: &str) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(field, message))
    }
}

fn check_limits(l: &InstanceLimits) -> CliResult<()> {
    require(l.max_m >= 1, "params.max_m", "must be at least 1")?;
    require(l.max_n >= 1, "params.max_n", "must be at least 1")?;
    require(l.max_dim >= 1, "params.max_dim", "must be at least 1")?;
    require(l.max_points >= 1, "params.max_points", "must be at least 1")
}

fn validate(cfg: &ExperimentConfig) -> CliResult<()> {
    match &cfg.params {
        Params::TrapezoidSweep(p) => {
            require(!p.n.is_empty() && p.n.iter().all(|&n| n >= 1), "params.n", "needs at least one n >= 1")?;
            require(p.length >= 2, "params.length", "must be at least 2")?;
            require(p.p0.is_finite() && p.p0 > 0.0, "params.p0", "must be positive")?;
            require(p.search_tol > 0.0, "params.search_tol", "must be positive")?;
            require(p.nodes_per_panel >= 1, "params.nodes_per_panel", "must be at least 1")
        }
        Params::TorusCompare(p) => {
            require(!p.n.is_empty() && p.n.iter().all(|&n| n >= 1), "params.n", "needs at least one n >= 1")?;
            let root = (p.m as f64).sqrt().round() as usize;
            require(
                p.m >= 4 && p.m % 2 == 0 && root * root == p.m,
                "params.m",
                "must be an even perfect square",
            )?;
            require(p.nodes_per_panel >= 1, "params.nodes_per_panel", "must be at least 1")
        }
        Params::TopomapTrain(p) => {
            require(p.m >= 2, "params.m", "must be at least 2")?;
            require(p.epochs >= 1, "params.epochs", "must be at least 1")?;
            require(p.samples_per_epoch >= 1, "params.samples_per_epoch", "must be at least 1")?;
            require(p.step >= 0.0 && p.step.is_finite(), "params.step", "must be non-negative")?;
            require(p.decay > 0.0 && p.decay <= 1.0, "params.decay", "must lie in (0, 1]")?;
            require(p.points >= 1, "params.points", "must be at least 1")?;
            require(p.runs >= 1, "params.runs", "must be at least 1")?;
            require(
                (0.0..=1.0).contains(&p.min_ordered_fraction),
                "params.min_ordered_fraction",
                "must lie in [0, 1]",
            )
        }
        Params::BoundCheck(p) => {
            require(p.instances >= 1, "params.instances", "must be at least 1")?;
            require(p.tol >= 0.0, "params.tol", "must be non-negative")?;
            check_limits(&p.limits())
        }
        Params::GradientCheck(p) => {
            require(p.instances >= 1, "params.instances", "must be at least 1")?;
            require(p.step > 0.0, "params.step", "must be positive")?;
            require(p.tol > 0.0, "params.tol", "must be positive")?;
            check_limits(&p.limits())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_params() {
        let cfg = parse("experiment = \"trapezoid-sweep\"", &[]).unwrap();
        assert_eq!(cfg.params, Params::TrapezoidSweep(TrapezoidSweep::default()));
        assert_eq!(cfg.output_dir, PathBuf::from("results"));
    }

    #[test]
    fn unknown_keys_name_the_field() {
        let err = parse("experiment = \"bound-check\"\n[params]\ninstancez = 3\n", &[]).unwrap_err();
        assert!(matches!(&err, CliError::Config { field, .. } if field == "params.instancez"), "{err}");
        assert_eq!(err.exit_code(), 1);
        let err = parse("experiment = \"bound-check\"\ncolour = 1\n", &[]).unwrap_err();
        assert!(matches!(&err, CliError::Config { field, .. } if field == "colour"), "{err}");
    }

    #[test]
    fn overrides_replace_nested_values() {
        let cfg = parse(
            "experiment = \"torus-compare\"\n[params]\nm = 16\n",
            &["params.n=[2, 3]".into(), "seed=9".into(), "output_dir=out/x".into()],
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.output_dir, PathBuf::from("out/x"));
        match cfg.params {
            Params::TorusCompare(p) => assert_eq!(p.n, vec![2, 3]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_values_name_the_field() {
        let err = parse("experiment = \"torus-compare\"\n[params]\nm = 15\n", &[]).unwrap_err();
        assert!(err.to_string().contains("params.m"));
        let err = parse("experiment = \"bound-check\"", &["params.max_m=0".into()]).unwrap_err();
        assert!(err.to_string().contains("params.max_m"));
        assert!(parse("experiment = \"nope\"", &[]).is_err());
        assert!(parse("experiment = \"bound-check\"", &["noequals".into()]).is_err());
    }
}
