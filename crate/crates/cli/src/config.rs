//! Job configuration: a TOML file with optional sections, overridden by flags.

use canon_core::io::{read_file, read_weight};
use canon_core::{SpectralMeasure, Weight};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

/// Invalid configuration or command line; exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    /// `key=value` lines.
    #[default]
    Kv,
    /// A header row of keys and a row of values, tab separated.
    Tsv,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub r: Option<f64>,
    pub n: Option<usize>,
    pub h: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    pub tol_weyl: Option<f64>,
    pub eps_density: Option<f64>,
    pub x_truncation: Option<f64>,
}

/// Contents of a configuration file; every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<ReportFormat>,
    pub weight: Option<toml::Table>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).map_err(|e| config_err(format!("config: {}", e.message())))
    }
}

/// A named closed-form weight or a weight file.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    Named {
        kind: String,
        params: BTreeMap<String, f64>,
    },
    File(PathBuf),
}

const KINDS: [(&str, &[&str]); 4] = [
    ("constant", &["value"]),
    ("step", &["inner", "outer", "half_width"]),
    ("cosine-bump", &["amplitude", "half_width"]),
    ("sinc-squared", &["amplitude", "scale"]),
];

impl WeightSpec {
    /// `kind:key=value,...` or `file:path`.
    pub fn parse(s: &str) -> anyhow::Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        if kind == "file" {
            return Ok(WeightSpec::File(PathBuf::from(rest)));
        }
        let mut params = BTreeMap::new();
        for item in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| config_err(format!("weight parameter `{item}` is not key=value")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| config_err(format!("weight parameter `{item}` is not a number")))?;
            params.insert(k.trim().to_string(), v);
        }
        Self::named(kind, params)
    }

    pub fn from_table(t: &toml::Table) -> anyhow::Result<Self> {
        if let Some(p) = t.get("path") {
            let p = p
                .as_str()
                .ok_or_else(|| config_err("weight.path must be a string"))?;
            if t.len() > 1 + usize::from(t.contains_key("kind")) {
                return Err(config_err("a weight file takes no parameters"));
            }
            return Ok(WeightSpec::File(PathBuf::from(p)));
        }
        let kind = t
            .get("kind")
            .and_then(|k| k.as_str())
            .ok_or_else(|| config_err("weight.kind must be a string"))?;
        let mut params = BTreeMap::new();
        for (k, v) in t.iter().filter(|(k, _)| *k != "kind") {
            let x = v
                .as_float()
                .or_else(|| v.as_integer().map(|i| i as f64))
                .ok_or_else(|| config_err(format!("weight.{k} must be a number")))?;
            params.insert(k.clone(), x);
        }
        Self::named(kind, params)
    }

    fn named(kind: &str, params: BTreeMap<String, f64>) -> anyhow::Result<Self> {
        let allowed = KINDS
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, a)| *a)
            .ok_or_else(|| {
                config_err(format!(
                    "unknown weight `{kind}` (constant, step, cosine-bump, sinc-squared, file)"
                ))
            })?;
        if let Some(bad) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(config_err(format!(
                "weight `{kind}` has no parameter `{bad}`"
            )));
        }
        Ok(WeightSpec::Named {
            kind: kind.to_string(),
            params,
        })
    }

    pub fn measure(&self) -> anyhow::Result<SpectralMeasure> {
        let weight = match self {
            WeightSpec::File(path) => Weight::Sampled(read_weight(&read_file(path)?)?),
            WeightSpec::Named { kind, params } => {
                let get = |k: &str, d: f64| params.get(k).copied().unwrap_or(d);
                match kind.as_str() {
                    "constant" => Weight::Constant(get("value", 1.0)),
                    "step" => {
                        Weight::step(get("inner", 2.0), get("outer", 1.0), get("half_width", 1.0))
                    }
                    "cosine-bump" => Weight::CosineBump {
                        amplitude: get("amplitude", 1.0),
                        half_width: get("half_width", 1.0),
                    },
                    "sinc-squared" => Weight::SincSquared {
                        amplitude: get("amplitude", 0.5),
                        scale: get("scale", 1.0),
                    },
                    other => return Err(config_err(format!("unknown weight `{other}`"))),
                }
            }
        };
        Ok(SpectralMeasure::new(weight))
    }
}

/// Fully resolved job parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct JobConfig {
    pub command: String,
    pub weight: Option<WeightSpec>,
    pub r: f64,
    pub n: usize,
    pub h: f64,
    pub tol_weyl: f64,
    pub eps_density: f64,
    pub x_truncation: f64,
    pub output: PathBuf,
    pub format: ReportFormat,
    pub seed: u64,
}

/// Command-line values that override the file.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct Overrides {
    /// Configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Weight as `kind:key=value,...` or `file:path`.
    #[arg(long, global = true)]
    pub weight: Option<String>,
    /// Interval length R.
    #[arg(long, global = true)]
    pub r: Option<f64>,
    /// Number of cells N.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Step h = R / N.
    #[arg(long, global = true)]
    pub h: Option<f64>,
    #[arg(long, global = true)]
    pub tol_weyl: Option<f64>,
    #[arg(long, global = true)]
    pub eps_density: Option<f64>,
    #[arg(long, global = true)]
    pub x_truncation: Option<f64>,
    /// Output directory.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<ReportFormat>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

impl JobConfig {
    pub fn resolve(command: &str, file: FileConfig, o: &Overrides) -> anyhow::Result<Self> {
        let weight = match (&o.weight, &file.weight) {
            (Some(s), _) => Some(WeightSpec::parse(s)?),
            (None, Some(t)) => Some(WeightSpec::from_table(t)?),
            (None, None) => None,
        };
        let r = o.r.or(file.grid.r);
        let n = o.n.or(file.grid.n);
        let h = o.h.or(file.grid.h);
        let (r, n, h) = match (r, n, h) {
            (Some(r), Some(n), Some(h)) => {
                if ((n as f64) * h - r).abs() > 1e-12 * r.abs().max(1.0) {
                    return Err(config_err(format!(
                        "inconsistent grid: N h = {} but R = {r}",
                        n as f64 * h
                    )));
                }
                (r, n, h)
            }
            (Some(r), Some(n), None) => (r, n, r / n as f64),
            (None, Some(n), Some(h)) => (n as f64 * h, n, h),
            (Some(r), None, Some(h)) => {
                let n = (r / h).round() as usize;
                (r, n, r / n.max(1) as f64)
            }
            (r, n, _) => {
                let (r, n) = (r.unwrap_or(20.0), n.unwrap_or(256));
                (r, n, r / n as f64)
            }
        };
        let cfg = JobConfig {
            command: command.to_string(),
            weight,
            r,
            n,
            h,
            tol_weyl: o.tol_weyl.or(file.tolerances.tol_weyl).unwrap_or(1e-9),
            eps_density: o
                .eps_density
                .or(file.tolerances.eps_density)
                .unwrap_or(0.05),
            x_truncation: o
                .x_truncation
                .or(file.tolerances.x_truncation)
                .unwrap_or(1e3),
            output: o
                .output
                .clone()
                .or(file.output)
                .unwrap_or_else(|| PathBuf::from(".")),
            format: o.format.or(file.format).unwrap_or_default(),
            seed: o.seed.or(file.seed).unwrap_or(0),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.n < 2 {
            return Err(config_err(format!("N must be at least 2, got {}", self.n)));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(config_err(format!("R must be positive, got {}", self.r)));
        }
        for (name, v) in [
            ("tol_weyl", self.tol_weyl),
            ("eps_density", self.eps_density),
            ("x_truncation", self.x_truncation),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn measure(&self) -> anyhow::Result<SpectralMeasure> {
        self.weight
            .as_ref()
            .ok_or_else(|| {
                config_err(format!(
                    "`{}` needs a weight (--weight or [weight])",
                    self.command
                ))
            })?
            .measure()
    }
}
