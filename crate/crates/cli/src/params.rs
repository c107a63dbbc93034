//! Flags shared by every subcommand, and their merge with a config file.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use glassotto::ensemble::ScalingQuantity;
use glassotto::Boundary;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryArg {
    Abc,
    Pbc,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Abc => Boundary::Antiperiodic,
            BoundaryArg::Pbc => Boundary::Periodic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Engine,
    Refrigerator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantityArg {
    W,
    Pi,
    Pir,
}

impl From<QuantityArg> for ScalingQuantity {
    fn from(q: QuantityArg) -> Self {
        match q {
            QuantityArg::W => ScalingQuantity::W,
            QuantityArg::Pi => ScalingQuantity::Pi,
            QuantityArg::Pir => ScalingQuantity::PiR,
        }
    }
}

/// Every key may come from the command line or from the config file; the
/// command line wins. Keys that a subcommand does not use are ignored.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Params {
    /// Hot bath temperature.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub th: Option<f64>,

    /// Fixed cold bath temperature.
    #[arg(long, conflicts_with = "tc_ratio")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tc: Option<f64>,

    /// Cold bath temperature as a fraction of the hot one.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tc_ratio: Option<f64>,

    /// Single chain length.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,

    /// Comma-separated chain lengths.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,

    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi_min: Option<f64>,

    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi_max: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi_points: Option<usize>,

    /// Quench size `h_f - h_i` [default: 0.5].
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dh: Option<f64>,

    /// Disorder realizations per chain length [default: 512].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realizations: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// Worker threads; 0 picks one per core.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,

    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryArg>,

    /// Replace the Gaussian couplings by J_i = 1.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub uniform_baseline: bool,

    /// Output directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeArg>,

    /// Samples per size for the critical field.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,

    /// Cold bath grid size of a regime map, over `[0, th]`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tc_points: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub th_min: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub th_max: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub th_points: Option<usize>,

    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantity: Option<QuantityArg>,

    /// Sweep table to re-analyze.
    #[arg(long = "in")]
    #[serde(rename = "in", skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,

    /// Replace the ensemble by curves whose peak totals scale exactly as
    /// `N^alpha` (pipeline self-test).
    #[arg(long, hide = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planted_alpha: Option<f64>,

    /// TOML file with the same keys, or a manifest.json from an earlier run.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

macro_rules! overlay {
    ($top:ident, $base:ident; $($field:ident),*) => {
        Params {
            $($field: $top.$field.or($base.$field),)*
            uniform_baseline: $top.uniform_baseline || $base.uniform_baseline,
            config: $top.config,
        }
    };
}

impl Params {
    /// Command-line values over file values.
    pub fn over(self, file: Params) -> Params {
        overlay!(self, file; th, tc, tc_ratio, n, n_list, hi_min, hi_max, hi_points, dh,
            realizations, seed, threads, boundary, out, mode, samples, tc_points,
            th_min, th_max, th_points, quantity, input, planted_alpha)
    }

    /// Loads the config file named by `--config` (if any) underneath these flags.
    pub fn resolve(self) -> Result<Params, CliError> {
        match self.config.clone() {
            None => Ok(self),
            Some(path) => Ok(self.over(load_config(&path)?)),
        }
    }
}

fn load_config(path: &Path) -> Result<Params, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    if path.extension().is_some_and(|e| e == "json") {
        // A manifest keeps its parameters under "params".
        let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if let Some(params) = value.get_mut("params") {
            value = params.take();
        }
        serde_json::from_value(value).map_err(|e| bad(e.to_string()))
    } else {
        toml::from_str(&text).map_err(|e| bad(e.to_string()))
    }
}
