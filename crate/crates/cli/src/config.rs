//! Config loading: explicit file, embedded preset, or a subcommand default,
//! then command-line overrides on top.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use gadc_core::harness::{DataSource, ExperimentConfig};
use gadc_core::{Gallery, NormKind, TransitionOption};

use crate::error::CliError;

mod embedded {
    include!(concat!(env!("OUT_DIR"), "/presets.rs"));
}

pub use embedded::PRESETS;

pub fn preset_text(name: &str) -> Result<&'static str, CliError> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| CliError::UnknownPreset(name.to_string()))
}

fn parse(text: &str, origin: &Path) -> Result<ExperimentConfig, CliError> {
    toml::from_str(text).map_err(|source| CliError::Config {
        path: origin.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Args)]
pub struct Source {
    /// TOML experiment config
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Name of a shipped preset (see `gadc presets`)
    #[arg(long)]
    pub preset: Option<String>,
}

impl Source {
    /// Falls back to `default_preset` when neither flag is given.
    pub fn load(&self, default_preset: Option<&str>) -> Result<Option<ExperimentConfig>, CliError> {
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| gadc_core::Error::Io {
                path: path.clone(),
                source: e,
            })?;
            return parse(&text, path).map(Some);
        }
        match self.preset.as_deref().or(default_preset) {
            Some(name) => parse(preset_text(name)?, Path::new(&format!("preset:{name}"))).map(Some),
            None => Ok(None),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Base seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of paired runs
    #[arg(long)]
    pub runs: Option<usize>,
    /// Transition option: plain, 1, 2, 3 or 4
    #[arg(long, value_parser = parse_option)]
    pub option: Option<TransitionOption>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Truncation order of the diffusion series
    #[arg(long = "K")]
    pub k: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Adjacency normalization: sym or row
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<NormKind>,
    /// Drop the k = 0 and k = 1 terms of the series
    #[arg(long)]
    pub drop_low_order: bool,
    /// Feature noise level (Gaussian scale or flip probability)
    #[arg(long)]
    pub noise_level: Option<f64>,
    /// Comma-separated ε grid for the heterophily sweep
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
}

fn parse_option(s: &str) -> Result<TransitionOption, String> {
    s.parse().map_err(|e: gadc_core::Error| e.to_string())
}

fn parse_kind(s: &str) -> Result<NormKind, String> {
    s.parse().map_err(|e: gadc_core::Error| e.to_string())
}

pub fn parse_gallery(s: &str) -> Result<Gallery, String> {
    s.parse().map_err(|e: gadc_core::Error| e.to_string())
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), CliError> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        let d = &mut cfg.diffusion;
        if let Some(o) = self.option {
            d.option = o;
            if o == TransitionOption::Plain && self.epsilon.is_none() {
                d.epsilon = 0.0;
            }
        }
        if let Some(l) = self.lambda {
            d.lambda = l;
        }
        if let Some(k) = self.k {
            d.k = k;
        }
        if let Some(e) = self.epsilon {
            d.epsilon = e;
        }
        if let Some(kind) = self.kind {
            d.kind = kind;
        }
        d.drop_low_order |= self.drop_low_order;
        if let Some(level) = self.noise_level {
            match cfg.noise.as_mut() {
                Some(n) => n.level = level,
                None => {
                    return Err(CliError::Usage(
                        "--noise-level needs a config with a [noise] section".into(),
                    ))
                }
            }
        }
        if let Some(eps) = &self.epsilons {
            cfg.epsilons = eps.clone();
        }
        Ok(())
    }
}

/// Data given directly on the command line, for `diffuse`.
pub fn direct_source(
    gallery: Option<Gallery>,
    graph: Option<&Path>,
    features: Option<&Path>,
) -> Result<Option<DataSource>, CliError> {
    match (gallery, graph, features) {
        (Some(which), None, None) => Ok(Some(DataSource::Gallery { which })),
        (None, Some(g), Some(f)) => Ok(Some(DataSource::Files {
            graph: g.to_path_buf(),
            features: f.to_path_buf(),
            labels: None,
            splits: None,
        })),
        (None, None, None) => Ok(None),
        (None, Some(_), None) | (None, None, Some(_)) => {
            Err(CliError::Usage("--graph and --features must be given together".into()))
        }
        _ => Err(CliError::Usage(
            "--gallery cannot be combined with --graph/--features".into(),
        )),
    }
}
