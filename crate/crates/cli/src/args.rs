use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use twistecho::{DeSettings, SymmetryClass};

use crate::grid::{Angle, Grid};

#[derive(Parser, Debug)]
#[command(
    name = "twistecho",
    version,
    about = "Two-twist Ramsey echo protocols: optimization, sweeps and figures of merit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "command")]
pub enum Command {
    /// Optimized sensitivity on a μ1–μ2 grid.
    Landscape(LandscapeArgs),
    /// Optimize the axes at one (μ1, μ2).
    Optimize(OptimizeArgs),
    /// Signal, variance and slope versus the imprinted phase.
    Signal(SignalArgs),
    /// Quantum Fisher information of the twisted input state.
    Qfi(QfiArgs),
    /// Best sensitivity over μ2 and axes versus μ1, with √F_Q.
    Curve(CurveArgs),
    /// Effective measurement variance versus prior width.
    Emv(EmvArgs),
    /// Named protocol families and regions.
    Catalog(CatalogArgs),
    /// Sensitivity change under N → N ± 1.
    Stability(StabilityArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    Anti,
    Sym,
}

impl From<Symmetry> for SymmetryClass {
    fn from(s: Symmetry) -> Self {
        match s {
            Symmetry::Anti => SymmetryClass::AntiSymmetric,
            Symmetry::Sym => SymmetryClass::Symmetric,
        }
    }
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct SearchArgs {
    /// Base seed of the differential evolution.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value_t = 32)]
    pub population: usize,
    #[arg(long, default_value_t = 200)]
    pub generations: usize,
}

impl SearchArgs {
    pub fn settings(&self) -> DeSettings {
        DeSettings {
            population_size: self.population,
            max_generations: self.generations,
            rng_seed: self.seed,
            ..DeSettings::default()
        }
    }
}

/// A protocol given as a JSON file or a catalog entry.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct ProtocolSource {
    /// Protocol JSON (a bare config or an object with a `config` field).
    #[arg(long, conflicts_with = "name")]
    pub config: Option<PathBuf>,
    /// Catalog entry; needs --n and --mu1.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu1: Option<Angle>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu2: Option<Angle>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct LandscapeArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "anti")]
    pub symmetry: Symmetry,
    #[arg(long, allow_hyphen_values = true)]
    pub mu1: Grid,
    #[arg(long, allow_hyphen_values = true)]
    pub mu2: Grid,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub source: ProtocolSource,
    /// Overrides the class of a loaded config.
    #[arg(long, value_enum)]
    pub symmetry: Option<Symmetry>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct SignalArgs {
    #[command(flatten)]
    pub source: ProtocolSource,
    #[arg(long, allow_hyphen_values = true, default_value = "-pi:pi:257")]
    pub phi: Grid,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct QfiArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub mu1: Grid,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct CurveArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "anti")]
    pub symmetry: Symmetry,
    #[arg(long, allow_hyphen_values = true)]
    pub mu1: Grid,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gain {
    Fixed,
    Optimized,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct EmvArgs {
    /// Protocol JSON files; repeatable.
    #[arg(long)]
    pub config: Vec<PathBuf>,
    /// Catalog entries built at --n, --mu1, --mu2; repeatable.
    #[arg(long)]
    pub name: Vec<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu1: Option<Angle>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu2: Option<Angle>,
    /// Prior widths δφ.
    #[arg(long)]
    pub widths: Grid,
    /// Space the widths geometrically.
    #[arg(long)]
    pub log: bool,
    #[arg(long, default_value_t = twistecho::bayes::DEFAULT_NODES)]
    pub nodes: usize,
    /// Keep exactly --nodes instead of raising it for wide priors.
    #[arg(long)]
    pub fixed_nodes: bool,
    #[arg(long, value_enum, default_value = "optimized")]
    pub gain: Gain,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct CatalogArgs {
    #[command(subcommand)]
    pub action: CatalogAction,
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "action")]
pub enum CatalogAction {
    /// Literature families, one name per line.
    List {
        /// Include variants and regions.
        #[arg(long)]
        all: bool,
        /// Also write the entries as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Highlighted regions of the μ1–μ2 plane.
    Regions {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a configuration from an entry.
    Build {
        #[arg(long)]
        name: String,
        #[arg(long)]
        n: usize,
        #[arg(long, allow_hyphen_values = true)]
        mu1: Angle,
        #[arg(long, allow_hyphen_values = true)]
        mu2: Option<Angle>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
    },
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub source: ProtocolSource,
    #[arg(long, default_value_t = twistecho::search::DEFAULT_STABILITY_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write the primary output here instead of the recorded path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the recorded worker count.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Landscape(_) => "landscape",
            Command::Optimize(_) => "optimize",
            Command::Signal(_) => "signal",
            Command::Qfi(_) => "qfi",
            Command::Curve(_) => "curve",
            Command::Emv(_) => "emv",
            Command::Catalog(_) => "catalog",
            Command::Stability(_) => "stability",
            Command::Replay(_) => "replay",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Command::Landscape(a) => Some(a.search.seed),
            Command::Optimize(a) => Some(a.search.seed),
            Command::Curve(a) => Some(a.search.seed),
            Command::Emv(a) => Some(a.search.seed),
            Command::Signal(a) => Some(a.seed),
            Command::Stability(a) => Some(a.seed),
            Command::Catalog(CatalogArgs { action: CatalogAction::Build { search, .. } }) => Some(search.seed),
            _ => None,
        }
    }

    /// Redirects the primary output, returning false when there is none.
    pub fn set_out(&mut self, path: PathBuf) -> bool {
        let slot = match self {
            Command::Landscape(a) => &mut a.out,
            Command::Optimize(a) => &mut a.out,
            Command::Signal(a) => &mut a.out,
            Command::Qfi(a) => &mut a.out,
            Command::Curve(a) => &mut a.out,
            Command::Emv(a) => &mut a.out,
            Command::Stability(a) => &mut a.out,
            Command::Catalog(CatalogArgs { action: CatalogAction::Build { out, .. } }) => out,
            Command::Catalog(CatalogArgs {
                action: CatalogAction::List { out, .. } | CatalogAction::Regions { out },
            }) => {
                *out = Some(path);
                return true;
            }
            Command::Replay(_) => return false,
        };
        *slot = path;
        true
    }

    pub fn set_workers(&mut self, workers: usize) {
        match self {
            Command::Landscape(a) => a.search.workers = workers,
            Command::Curve(a) => a.search.workers = workers,
            Command::Emv(a) => a.search.workers = workers,
            _ => {}
        }
    }
}
