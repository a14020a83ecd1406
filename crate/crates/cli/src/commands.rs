use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gadc_core::harness::{run_diffuse, run_experiment, BenchReport, DataSource, ExperimentConfig, Scenario};
use gadc_core::io::write_matrix_file;
use gadc_core::verify::{run_checks, Level};
use gadc_core::{row_normalize_features, Gallery};
use serde_json::json;

use crate::config::{direct_source, Overrides, Source};
use crate::error::CliError;

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(&path, contents).map_err(|source| CliError::Output { path, source })
}

fn ensure_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|source| CliError::Output {
        path: out.to_path_buf(),
        source,
    })
}

fn print_summary(rep: &BenchReport) {
    for c in &rep.cells {
        println!(
            "{:<14} mean {:.4}  std {:.4}  ({} runs)",
            c.cell,
            c.mean,
            c.std,
            c.accuracies.len()
        );
    }
    if let Some(best) = &rep.best_cell {
        println!("best cell: {best}");
    }
}

pub fn bench(scenario: Scenario, src: &Source, ov: &Overrides, out: &Path) -> Result<(), CliError> {
    let default = match scenario {
        Scenario::Plain => "sbm-sanity",
        Scenario::Denoise => "sbm-denoise",
        Scenario::Attack => "sbm-attack",
        Scenario::Heterophily => "sbm-heterophily",
    };
    let mut cfg = src.load(Some(default))?.expect("default preset");
    cfg.scenario = scenario;
    ov.apply(&mut cfg)?;
    let rep = run_experiment(&cfg)?;
    ensure_dir(out)?;
    write(out.join("report.json"), rep.to_json() + "\n")?;
    write(out.join("summary.csv"), rep.summary_csv())?;
    write(out.join("timings.json"), rep.timings_json() + "\n")?;
    print_summary(&rep);
    Ok(())
}

/// Runs whatever scenario the config names.
pub fn run(src: &Source, ov: &Overrides, out: &Path) -> Result<(), CliError> {
    let cfg = src
        .load(None)?
        .ok_or_else(|| CliError::Usage("`run` needs --config or --preset".into()))?;
    bench(cfg.scenario, src, ov, out)
}

pub struct DiffuseArgs<'a> {
    pub gallery: Option<Gallery>,
    pub graph: Option<&'a Path>,
    pub features: Option<&'a Path>,
    pub row_normalize: bool,
}

pub fn diffuse(src: &Source, ov: &Overrides, out: &Path, args: DiffuseArgs<'_>) -> Result<(), CliError> {
    let direct = direct_source(args.gallery, args.graph, args.features)?;
    let mut cfg = match (src.load(None)?, direct) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "give either a config/preset or data flags, not both".into(),
            ));
        }
        (Some(cfg), None) => cfg,
        (None, Some(data)) => ExperimentConfig::new(Scenario::Plain, data),
        (None, None) => {
            return Err(CliError::Usage(
                "diffuse needs --config, --preset, --gallery or --graph with --features".into(),
            ));
        }
    };
    ov.apply(&mut cfg)?;
    cfg.diffusion.validate()?;

    let t0 = Instant::now();
    let data = gadc_core::harness::load_data(&cfg.data, cfg.seed)?;
    let load_ms = t0.elapsed().as_secs_f64() * 1e3;
    let x = if args.row_normalize {
        row_normalize_features(&data.features)
    } else {
        data.features
    };
    let t1 = Instant::now();
    let (f, report) = run_diffuse(&data.graph, &x, &cfg.diffusion, cfg.dense_cap)?;
    let diffuse_ms = t1.elapsed().as_secs_f64() * 1e3;

    ensure_dir(out)?;
    write_matrix_file(&out.join("features.bin"), f.view())?;
    let data_echo = match &cfg.data {
        DataSource::Gallery { which } => json!({ "source": "gallery", "which": which.as_str() }),
        other => serde_json::to_value(other).expect("serializable"),
    };
    let doc = json!({
        "n": f.n(),
        "d": f.d(),
        "row_normalized": args.row_normalize,
        "diffusion": report,
        "config": { "data": data_echo, "diffusion": cfg.diffusion, "dense_cap": cfg.dense_cap, "seed": cfg.seed },
    });
    write(
        out.join("report.json"),
        serde_json::to_string_pretty(&doc).expect("json") + "\n",
    )?;
    let timings = json!({ "load": load_ms, "diffuse": diffuse_ms });
    write(
        out.join("timings.json"),
        serde_json::to_string_pretty(&timings).expect("json") + "\n",
    )?;

    print!("n = {}, d = {}, beta = {:.12}", f.n(), f.d(), report.beta);
    match report.tau {
        Some(tau) => println!(", tau = {tau:.12}"),
        None => println!(", tau not computed"),
    }
    Ok(())
}

pub fn verify(level: Level, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let rep = run_checks(level, seed)?;
    for c in &rep.checks {
        println!("{c}");
    }
    if let Some(out) = out {
        ensure_dir(out)?;
        write(
            out.join("verify.json"),
            serde_json::to_string_pretty(&rep).expect("json") + "\n",
        )?;
    }
    let failed = rep.checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::CheckFailed(failed));
    }
    Ok(())
}

pub fn presets(show: Option<&str>) -> Result<(), CliError> {
    // Ignore write errors so piping into `head` does not panic.
    let mut stdout = std::io::stdout().lock();
    match show {
        Some(name) => {
            let _ = write!(stdout, "{}", crate::config::preset_text(name)?);
        }
        None => {
            for (name, text) in crate::config::PRESETS {
                let about = text.lines().next().unwrap_or("").trim_start_matches("# ");
                let _ = writeln!(stdout, "{name:<36} {about}");
            }
        }
    }
    Ok(())
}
