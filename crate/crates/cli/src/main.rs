//! `gadc`: diffusion precomputation, benches and theory checks from the
//! command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gadc_core::harness::Scenario;
use gadc_core::verify::Level;
use gadc_core::Gallery;

mod commands;
mod config;
mod error;

use config::{parse_gallery, Overrides, Source};
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "gadc",
    version,
    about = "Adversarial graph diffusion: precompute, bench, verify"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute F = S·X and write it with a diffusion report
    Diffuse {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
        /// Built-in topology with identity features
        #[arg(long, value_parser = parse_gallery)]
        gallery: Option<Gallery>,
        /// Tab-separated edge list: `src<TAB>dst[<TAB>weight]` per line
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Features as CSV or GADCMAT1 binary
        #[arg(long)]
        features: Option<PathBuf>,
        /// L1-normalize feature rows before diffusing
        #[arg(long)]
        row_normalize: bool,
        #[arg(long, default_value = "gadc-out")]
        out: PathBuf,
    },
    /// Noisy features: configured diffusion vs ε = 0 vs no diffusion
    DenoiseBench(BenchArgs),
    /// Perturbed structure: option IV vs the plain transition
    AttackBench(BenchArgs),
    /// Option I over an ε grid with a fresh split per run
    HeterophilySweep(BenchArgs),
    /// Run the scenario named in a config or preset
    Run(BenchArgs),
    /// Executable theory checks; exits 1 if any check fails
    Verify {
        #[arg(default_value = "fast", value_parser = parse_level)]
        level: Level,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write verify.json here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List shipped presets, or print one
    Presets { name: Option<String> },
}

#[derive(Debug, clap::Args)]
struct BenchArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, default_value = "gadc-out")]
    out: PathBuf,
}

fn parse_level(s: &str) -> Result<Level, String> {
    s.parse().map_err(|e: gadc_core::Error| e.to_string())
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Diffuse {
            source,
            overrides,
            gallery,
            graph,
            features,
            row_normalize,
            out,
        } => commands::diffuse(
            &source,
            &overrides,
            &out,
            commands::DiffuseArgs {
                gallery,
                graph: graph.as_deref(),
                features: features.as_deref(),
                row_normalize,
            },
        ),
        Command::DenoiseBench(a) => commands::bench(Scenario::Denoise, &a.source, &a.overrides, &a.out),
        Command::AttackBench(a) => commands::bench(Scenario::Attack, &a.source, &a.overrides, &a.out),
        Command::HeterophilySweep(a) => commands::bench(Scenario::Heterophily, &a.source, &a.overrides, &a.out),
        Command::Run(a) => commands::run(&a.source, &a.overrides, &a.out),
        Command::Verify { level, seed, out } => commands::verify(level, seed, out.as_deref()),
        Command::Presets { name } => commands::presets(name.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gadc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
