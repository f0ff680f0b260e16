//! Flag and config-file handling. Flags override the file; the seed has no
//! default.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use stablefield::{Budget, SetFamily, SpaceKind, SpacePoint};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] stablefield::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type CliResult<T> = Result<T, CliError>;

pub fn config_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    R1,
    R2,
    R3,
    S2,
    H2,
    Box,
}

impl Space {
    pub fn family(self, box_dim: usize) -> SetFamily {
        match self {
            Space::R1 => SetFamily::separating(SpaceKind::Euclidean { dim: 1 }),
            Space::R2 => SetFamily::separating(SpaceKind::Euclidean { dim: 2 }),
            Space::R3 => SetFamily::separating(SpaceKind::Euclidean { dim: 3 }),
            Space::S2 => SetFamily::separating(SpaceKind::Sphere2),
            Space::H2 => SetFamily::separating(SpaceKind::HyperbolicDisc),
            Space::Box => SetFamily::Box { dim: box_dim },
        }
    }
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Flat key = value TOML file mirroring the flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub space: Option<Space>,
    /// Dimension of the box family
    #[arg(long, global = true)]
    pub box_dim: Option<usize>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub alpha_prime: Option<f64>,
    /// JSON file with a list of coordinate arrays
    #[arg(long, global = true)]
    pub points: Option<PathBuf>,
    /// Number of random points when no file is given
    #[arg(long, global = true)]
    pub npoints: Option<usize>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Per-cell absolute tolerance of quadrature tables
    #[arg(long, global = true)]
    pub budget: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Comma-separated intensities for karlin-converge
    #[arg(long, global = true, value_delimiter = ',')]
    pub rhos: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub realizations: Option<usize>,
    /// Poisson intensity for parity-check
    #[arg(long, global = true)]
    pub rate: Option<f64>,
    /// Pareto tail constant for karlin-converge with α < 2
    #[arg(long, global = true)]
    pub tail_constant: Option<f64>,
    /// Random group elements tried by invariance
    #[arg(long, global = true)]
    pub trials: Option<usize>,
}

/// Config-file mirror of [`CommonArgs`].
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    space: Option<Space>,
    box_dim: Option<usize>,
    alpha: Option<f64>,
    beta: Option<f64>,
    alpha_prime: Option<f64>,
    points: Option<PathBuf>,
    npoints: Option<usize>,
    samples: Option<usize>,
    seed: Option<u64>,
    budget: Option<f64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
    rhos: Option<Vec<f64>>,
    realizations: Option<usize>,
    rate: Option<f64>,
    tail_constant: Option<f64>,
    trials: Option<usize>,
}

/// Fully resolved settings, embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub space: Space,
    pub box_dim: usize,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub alpha_prime: Option<f64>,
    pub points: Option<PathBuf>,
    pub npoints: Option<usize>,
    pub samples: Option<usize>,
    pub seed: u64,
    pub budget: Budget,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub rhos: Option<Vec<f64>>,
    pub realizations: Option<usize>,
    pub rate: Option<f64>,
    pub tail_constant: Option<f64>,
    pub trials: Option<usize>,
}

macro_rules! merge {
    ($flags:expr, $file:expr, $($field:ident),*) => {
        ($($flags.$field.clone().or($file.$field.clone())),*)
    };
}

impl Settings {
    pub fn resolve(flags: &CommonArgs) -> CliResult<Self> {
        let file = match &flags.config {
            Some(path) => {
                let text = read(path)?;
                toml::from_str::<FileConfig>(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };
        let (space, box_dim, alpha, beta, alpha_prime, points, npoints, samples, seed, budget, out) =
            merge!(flags, file, space, box_dim, alpha, beta, alpha_prime, points, npoints, samples, seed, budget, out);
        let (threads, rhos, realizations, rate, tail_constant, trials) =
            merge!(flags, file, threads, rhos, realizations, rate, tail_constant, trials);
        let Some(seed) = seed else {
            return config_err("--seed is required (no default, for reproducibility)");
        };
        let mut b = Budget::default();
        if let Some(tol) = budget {
            if !(tol > 0.0) {
                return config_err(format!("--budget must be positive, got {tol}"));
            }
            b.tol = tol;
        }
        if threads == Some(0) {
            return config_err("--threads must be at least 1");
        }
        if samples == Some(0) {
            return config_err("--samples must be at least 1");
        }
        Ok(Settings {
            space: space.unwrap_or(Space::R2),
            box_dim: box_dim.unwrap_or(2),
            alpha,
            beta,
            alpha_prime,
            points,
            npoints,
            samples,
            seed,
            budget: b,
            out: out.unwrap_or_else(|| PathBuf::from(".")),
            threads,
            rhos,
            realizations,
            rate,
            tail_constant,
            trials,
        })
    }

    pub fn family(&self) -> SetFamily {
        self.space.family(self.box_dim)
    }

    /// Points from `--points`, or `None` when random points should be drawn.
    pub fn load_points(&self) -> CliResult<Option<Vec<SpacePoint>>> {
        let Some(path) = &self.points else { return Ok(None) };
        let text = read(path)?;
        let coords: Vec<Vec<f64>> = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: expected a JSON list of coordinate arrays: {e}", path.display())))?;
        let kind = self.family().point_kind();
        let pts = coords.iter().map(|c| SpacePoint::from_coords(kind, c)).collect::<Result<Vec<_>, _>>()?;
        if pts.is_empty() {
            return config_err("points file is empty");
        }
        Ok(Some(pts))
    }
}

pub fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}
