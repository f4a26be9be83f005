//! Run configuration: command-line flags layered over an optional TOML file
//! (or the `config` field of a previous run's JSON manifest).

use std::path::{Path, PathBuf};

use airy_edge::{Beta, Potential};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PotentialSpec {
    Preset(String),
    Coefficients(Vec<f64>),
}

impl PotentialSpec {
    pub fn parse_flag(s: &str) -> PotentialSpec {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        match parts.iter().map(|p| p.parse::<f64>()).collect::<Result<Vec<f64>, _>>() {
            Ok(c) => PotentialSpec::Coefficients(c),
            Err(_) => PotentialSpec::Preset(s.trim().to_string()),
        }
    }

    pub fn build(&self) -> Result<Potential, CliError> {
        match self {
            PotentialSpec::Preset(name) => Potential::preset(name)
                .ok_or_else(|| CliError::Usage(format!("unknown potential preset `{name}`"))),
            PotentialSpec::Coefficients(c) => {
                Potential::new(c.clone()).map_err(|e| CliError::Usage(e.to_string()))
            }
        }
    }
}

/// Every setting, all optional; shared by the config file and the flags.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<u32>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "N_ladder", skip_serializing_if = "Option::is_none")]
    pub n_ladder: Option<Vec<usize>>,
    #[serde(rename = "L0", skip_serializing_if = "Option::is_none")]
    pub l0: Option<f64>,
    #[serde(rename = "L1", skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jmax: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Settings {
    /// Fields set in `over` win.
    fn merge(self, over: Settings) -> Settings {
        Settings {
            potential: over.potential.or(self.potential),
            beta: over.beta.or(self.beta),
            n: over.n.or(self.n),
            n_ladder: over.n_ladder.or(self.n_ladder),
            l0: over.l0.or(self.l0),
            l1: over.l1.or(self.l1),
            step: over.step.or(self.step),
            order: over.order.or(self.order),
            seed: over.seed.or(self.seed),
            count: over.count.or(self.count),
            jmax: over.jmax.or(self.jmax),
            tol: over.tol.or(self.tol),
            out: over.out.or(self.out),
        }
    }
}

#[derive(Args, Clone, Debug, Default)]
pub struct Flags {
    /// TOML config, or a JSON manifest from an earlier run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Preset name (hermite, quartic) or ascending coefficients `c0,c1,…`.
    #[arg(long, global = true)]
    pub potential: Option<String>,
    #[arg(long, global = true)]
    pub beta: Option<u32>,
    #[arg(long = "N", global = true)]
    pub n: Option<usize>,
    #[arg(long = "N-ladder", global = true, value_delimiter = ',')]
    pub n_ladder: Option<Vec<usize>>,
    #[arg(long = "L0", global = true, allow_hyphen_values = true)]
    pub l0: Option<f64>,
    #[arg(long = "L1", global = true, allow_hyphen_values = true)]
    pub l1: Option<f64>,
    #[arg(long, global = true)]
    pub step: Option<f64>,
    /// Gauss–Legendre order of the Fredholm discretization.
    #[arg(long, global = true)]
    pub order: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of retained Monte Carlo samples.
    #[arg(long, global = true)]
    pub count: Option<usize>,
    /// Recurrence table length.
    #[arg(long, global = true)]
    pub jmax: Option<usize>,
    /// Tolerance on the orthonormality residual.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl Flags {
    fn settings(&self) -> Settings {
        Settings {
            potential: self.potential.as_deref().map(PotentialSpec::parse_flag),
            beta: self.beta,
            n: self.n,
            n_ladder: self.n_ladder.clone(),
            l0: self.l0,
            l1: self.l1,
            step: self.step,
            order: self.order,
            seed: self.seed,
            count: self.count,
            jmax: self.jmax,
            tol: self.tol,
            out: self.out.clone(),
        }
    }
}

pub fn read_settings(path: &Path) -> Result<Settings, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Missing(format!("config {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let inner = value.get("config").cloned().unwrap_or(value);
        serde_json::from_value(inner).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

/// Inclusive grid `L0, L0 + step, …, L1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub l0: f64,
    pub l1: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        airy_edge::convergence::uniform_grid(self.l0, self.l1, self.step)
            .expect("grid validated at parse time")
    }
}

/// Validated configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub potential: Potential,
    pub beta: Beta,
    pub n: Option<usize>,
    pub n_ladder: Vec<usize>,
    pub grid: Option<GridSpec>,
    pub order: usize,
    pub seed: u64,
    pub count: usize,
    pub jmax: Option<usize>,
    pub tol: f64,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<RunConfig, CliError> {
        let file = match &flags.config {
            Some(p) => read_settings(p)?,
            None => Settings::default(),
        };
        Self::from_settings(file.merge(flags.settings()))
    }

    pub fn from_settings(settings: Settings) -> Result<RunConfig, CliError> {
        let potential = settings
            .potential
            .clone()
            .unwrap_or(PotentialSpec::Preset("hermite".into()))
            .build()?;
        let beta = Beta::try_from(settings.beta.unwrap_or(2)).map_err(|e| CliError::Usage(e.to_string()))?;
        let n_ladder = settings.n_ladder.clone().unwrap_or_default();
        let needs_even = beta != Beta::Unitary;
        for &n in settings.n.iter().chain(&n_ladder) {
            if n == 0 {
                return Err(CliError::Usage("N must be positive".into()));
            }
            if needs_even && n % 2 == 1 {
                return Err(CliError::Usage(format!("β={beta} requires even N, got {n}")));
            }
        }
        let grid = match (settings.l0, settings.l1, settings.step) {
            (None, None, None) => None,
            (l0, l1, step) => {
                let g = GridSpec { l0: l0.unwrap_or(-4.0), l1: l1.unwrap_or(4.0), step: step.unwrap_or(0.5) };
                if !(g.l0 < g.l1 && g.step > 0.0 && g.l0.is_finite() && g.l1.is_finite()) {
                    return Err(CliError::Usage(format!(
                        "grid needs L0 < L1 and step > 0, got L0={} L1={} step={}",
                        g.l0, g.l1, g.step
                    )));
                }
                Some(g)
            }
        };
        let order = settings.order.unwrap_or(airy_edge::fredholm::DEFAULT_ORDER);
        if order < 4 {
            return Err(CliError::Usage("order must be at least 4".into()));
        }
        let count = settings.count.unwrap_or(10_000);
        if count == 0 {
            return Err(CliError::Usage("count must be positive".into()));
        }
        Ok(RunConfig {
            potential,
            beta,
            n: settings.n,
            n_ladder,
            grid,
            order,
            seed: settings.seed.unwrap_or(2024),
            count,
            jmax: settings.jmax,
            tol: settings.tol.unwrap_or(1e-10),
            out: settings.out.clone().unwrap_or_else(|| PathBuf::from("out")),
        })
    }

    pub fn require_n(&self) -> Result<usize, CliError> {
        self.n.ok_or_else(|| CliError::Usage("this command needs --N".into()))
    }

    pub fn grid_or(&self, l0: f64, l1: f64, step: f64) -> GridSpec {
        self.grid.unwrap_or(GridSpec { l0, l1, step })
    }

    /// The configuration echoed into manifests, with every default filled in.
    pub fn echo(&self) -> Settings {
        let grid = self.grid;
        Settings {
            potential: Some(PotentialSpec::Coefficients(self.potential.coefficients().to_vec())),
            beta: Some(self.beta.value()),
            n: self.n,
            n_ladder: (!self.n_ladder.is_empty()).then(|| self.n_ladder.clone()),
            l0: grid.map(|g| g.l0),
            l1: grid.map(|g| g.l1),
            step: grid.map(|g| g.step),
            order: Some(self.order),
            seed: Some(self.seed),
            count: Some(self.count),
            jmax: self.jmax,
            tol: Some(self.tol),
            out: Some(self.out.clone()),
        }
    }
}
