//! Experiment pipelines: data loading, the decoupled diffuse-then-train
//! pipeline, and the denoising, attack and heterophily benches.
//!
//! Every bench is a pure function of its [`ExperimentConfig`]. Runs execute in
//! parallel but each run draws only from its own seeds, and paired cells of a
//! run share the same noise, split and head seed.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_split, LabeledDataset, Split};
use crate::diffusion::{
    connectivity_factor, diffuse_features, materialize_s, DiffusionConfig, DiffusionReport, DENSE_VERIFY_CAP,
};
use crate::error::{Error, Result};
use crate::features::{row_normalize_features, FeatureMatrix};
use crate::graph::{normalize, Graph};
use crate::io::{read_features_file, read_graph_file, read_labels_file, read_splits_file};
use crate::model::{evaluate, train_head, HeadConfig};
use crate::perturb::{
    generate_gallery, generate_sbm, perturb_structure, Gallery, NoiseSpec, PerturbMode, PerturbSummary, SbmSpec,
};
use crate::seed::{rng, rng_indexed, splitmix64, Stream};
use crate::transition::{
    build_transition, compute_phi, reconstruct_option4, TransitionMatrix, TransitionOption, DEFAULT_DENSE_CAP,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[default]
    Plain,
    Denoise,
    Attack,
    Heterophily,
}

/// Where nodes, features and labels come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Sbm(SbmSpec),
    /// Edge list, features (CSV or binary), `node_id,label` CSV and optional
    /// split JSON. Without splits a stratified 60/20/20 split is drawn.
    Files {
        graph: PathBuf,
        features: PathBuf,
        #[serde(default)]
        labels: Option<PathBuf>,
        #[serde(default)]
        splits: Option<PathBuf>,
    },
    /// A fixed topology with identity features and no labels.
    Gallery {
        which: Gallery,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub rate: f64,
    #[serde(default)]
    pub mode: PerturbMode,
    /// Externally perturbed edge list; replaces the generated perturbation.
    #[serde(default)]
    pub perturbed_graph: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scenario: Scenario,
    pub data: DataSource,
    #[serde(default)]
    pub diffusion: DiffusionConfig,
    #[serde(default)]
    pub head: HeadConfig,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub attack: Option<AttackSpec>,
    /// ε grid for the heterophily sweep.
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dense_cap")]
    pub dense_cap: usize,
}

fn default_epsilons() -> Vec<f64> {
    vec![0.0, 1.0, 2.0, 3.0, 4.0]
}

fn default_runs() -> usize {
    10
}

fn default_dense_cap() -> usize {
    DEFAULT_DENSE_CAP
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario, data: DataSource) -> Self {
        Self {
            scenario,
            data,
            diffusion: DiffusionConfig::default(),
            head: HeadConfig::default(),
            noise: None,
            attack: None,
            epsilons: default_epsilons(),
            runs: default_runs(),
            seed: 0,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidParameter("runs must be >= 1".into()));
        }
        self.diffusion.validate()?;
        self.head.validate()?;
        match self.scenario {
            Scenario::Denoise if self.noise.is_none() => Err(Error::InvalidParameter(
                "the denoise scenario needs a [noise] section".into(),
            )),
            Scenario::Attack if self.attack.is_none() => Err(Error::InvalidParameter(
                "the attack scenario needs an [attack] section".into(),
            )),
            Scenario::Heterophily if self.epsilons.is_empty() => Err(Error::InvalidParameter(
                "the heterophily sweep needs a non-empty epsilon grid".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// A graph with its features and, when available, labels and splits.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub dataset: Option<LabeledDataset>,
}

pub fn load_data(src: &DataSource, seed: u64) -> Result<LoadedData> {
    match src {
        DataSource::Sbm(spec) => {
            let (graph, ds) = generate_sbm(spec)?;
            Ok(LoadedData {
                graph,
                features: ds.features.clone(),
                dataset: Some(ds),
            })
        }
        DataSource::Gallery { which } => {
            let graph = generate_gallery(*which);
            let n = graph.n();
            Ok(LoadedData {
                graph,
                features: FeatureMatrix::new(Array2::eye(n))?,
                dataset: None,
            })
        }
        DataSource::Files {
            graph,
            features,
            labels,
            splits,
        } => {
            let x = read_features_file(features)?;
            let g = read_graph_file(graph, x.n())?;
            let dataset = match labels {
                None => None,
                Some(lp) => {
                    let labels = read_labels_file(lp, x.n())?;
                    let sp = match splits {
                        Some(sp) => read_splits_file(sp)?,
                        None => stratified_split(&labels, 0.6, 0.2, &mut rng(seed, Stream::Split)),
                    };
                    Some(LabeledDataset::new(x.clone(), labels, sp)?)
                }
            };
            Ok(LoadedData {
                graph: g,
                features: x,
                dataset,
            })
        }
    }
}

/// The operator for `cfg.option` on `g`, with Φ computed from `x`.
///
/// Option IV ignores `cfg.kind` and `cfg.epsilon`: it always rebuilds a
/// symmetrically normalized operator from clamped cosines.
pub fn transition_for(
    g: &Graph,
    x: &FeatureMatrix,
    cfg: &DiffusionConfig,
    dense_cap: usize,
) -> Result<TransitionMatrix> {
    match cfg.option {
        TransitionOption::Plain => {
            if cfg.epsilon != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "the plain option means ε = 0, got ε = {}",
                    cfg.epsilon
                )));
            }
            Ok(TransitionMatrix::plain(&normalize(g, cfg.kind)))
        }
        TransitionOption::OptionIV => reconstruct_option4(g, x),
        option => {
            let na = normalize(g, cfg.kind);
            let phi = compute_phi(option, g, x, dense_cap)?;
            build_transition(&na, phi.as_ref(), cfg.epsilon, option)
        }
    }
}

/// Materializes S (when `n` is within the dense cap) to fill in τ.
/// τ stays `None` when S has negative entries.
pub fn diffusion_report(t: &TransitionMatrix, cfg: &DiffusionConfig, per_node: bool) -> Result<DiffusionReport> {
    let mut report = DiffusionReport {
        beta: cfg.beta(),
        ..Default::default()
    };
    if t.n() > 0 && t.n() <= DENSE_VERIFY_CAP {
        let s = materialize_s(t, cfg, DENSE_VERIFY_CAP)?;
        if let Ok((tau, tau_i)) = connectivity_factor(s.view()) {
            report.tau = Some(tau);
            if per_node {
                report.tau_per_node = Some(tau_i);
            }
        }
    }
    Ok(report)
}

/// Precomputation only: `F = S·X` plus its report.
pub fn run_diffuse(
    g: &Graph,
    x: &FeatureMatrix,
    cfg: &DiffusionConfig,
    dense_cap: usize,
) -> Result<(FeatureMatrix, DiffusionReport)> {
    let t = transition_for(g, x, cfg, dense_cap)?;
    let f = diffuse_features(&t, x, cfg)?;
    let report = diffusion_report(&t, cfg, true)?;
    Ok((f, report))
}

/// One cell of a bench: a pipeline variant evaluated over all runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub cell: String,
    pub option: Option<TransitionOption>,
    pub epsilon: Option<f64>,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of `accuracies`.
    pub std: f64,
    /// Diffusion report for the first run; absent for the no-diffusion cell.
    pub diffusion: Option<DiffusionReport>,
}

impl RunReport {
    fn new(
        cell: &str,
        diff: Option<&DiffusionConfig>,
        accuracies: Vec<f64>,
        diffusion: Option<DiffusionReport>,
    ) -> Self {
        let (mean, std) = mean_std(&accuracies);
        Self {
            cell: cell.to_string(),
            option: diff.map(|d| d.option),
            epsilon: diff.map(|d| d.epsilon),
            accuracies,
            mean,
            std,
            diffusion,
        }
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scenario: Scenario,
    pub runs: usize,
    pub seed: u64,
    pub cells: Vec<RunReport>,
    /// Structure perturbation applied in each run (attack scenario only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Vec<PerturbSummary>>,
    /// Cell with the highest mean accuracy (heterophily sweep only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_cell: Option<String>,
    pub config: ExperimentConfig,
    /// Wall-clock milliseconds per stage. Not part of the deterministic JSON.
    #[serde(skip)]
    pub timings_ms: BTreeMap<String, f64>,
}

impl BenchReport {
    pub fn cell(&self, name: &str) -> Option<&RunReport> {
        self.cells.iter().find(|c| c.cell == name)
    }

    /// Report JSON without timings: byte-identical across re-runs.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn timings_json(&self) -> String {
        serde_json::to_string_pretty(&self.timings_ms).expect("timings serialize")
    }

    /// `cell,option,epsilon,mean,std,runs`
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("cell,option,epsilon,mean,std,runs\n");
        for c in &self.cells {
            let opt = c.option.map(|o| o.to_string()).unwrap_or_default();
            let eps = c.epsilon.map(|e| format!("{e:?}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{:?},{:?},{}\n",
                c.cell,
                opt,
                eps,
                c.mean,
                c.std,
                c.accuracies.len()
            ));
        }
        out
    }
}

/// Seed for run `r`: base + r, the convention every scenario shares.
pub fn run_seed(base: u64, r: usize) -> u64 {
    base.wrapping_add(r as u64)
}

fn head_for_run(head: &HeadConfig, base: u64, r: usize) -> HeadConfig {
    HeadConfig {
        seed: splitmix64(head.seed ^ run_seed(base, r)),
        ..*head
    }
}

fn require_dataset(data: &LoadedData) -> Result<&LabeledDataset> {
    data.dataset
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("this scenario needs labelled data".into()))
}

struct Timer(BTreeMap<String, f64>);

impl Timer {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        *self.0.entry(stage.to_string()).or_default() += t0.elapsed().as_secs_f64() * 1e3;
        out
    }
}

/// Diffuse `x` on `g` under `cfg`, train a head, report test accuracy.
fn pipeline_accuracy(
    g: &Graph,
    x: &FeatureMatrix,
    ds: &LabeledDataset,
    diff: Option<&DiffusionConfig>,
    head: &HeadConfig,
    dense_cap: usize,
    with_report: bool,
) -> Result<(f64, Option<DiffusionReport>)> {
    let (f, report) = match diff {
        None => (x.clone(), None),
        Some(cfg) => {
            let t = transition_for(g, x, cfg, dense_cap)?;
            let f = diffuse_features(&t, x, cfg)?;
            let report = if with_report {
                Some(diffusion_report(&t, cfg, false)?)
            } else {
                None
            };
            (f, report)
        }
    };
    let trained = train_head(&f, ds, head)?;
    Ok((evaluate(&trained, &f, ds, Split::Test)?, report))
}

/// Collects per-run, per-cell accuracies into cell reports.
fn assemble(
    names: &[(String, Option<DiffusionConfig>)],
    per_run: Vec<Vec<(f64, Option<DiffusionReport>)>>,
) -> Vec<RunReport> {
    names
        .iter()
        .enumerate()
        .map(|(c, (name, diff))| {
            let accs = per_run.iter().map(|run| run[c].0).collect();
            let report = per_run.first().and_then(|run| run[c].1.clone());
            RunReport::new(name, diff.as_ref(), accs, report)
        })
        .collect()
}

/// Noise is drawn with seed `base + r`, features are row-normalized, Φ is
/// computed from the noisy normalized features. Cells: `gadc` (the configured
/// diffusion), `eps0` (plain diffusion, same λ and K) and `no_diffusion`.
pub fn denoise_bench(cfg: &ExperimentConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let noise = cfg
        .noise
        .ok_or_else(|| Error::InvalidParameter("missing noise spec".into()))?;
    let mut timer = Timer(BTreeMap::new());
    let data = timer.time("load", || load_data(&cfg.data, cfg.seed))?;
    let ds = require_dataset(&data)?;
    let eps0 = DiffusionConfig {
        option: TransitionOption::Plain,
        epsilon: 0.0,
        ..cfg.diffusion
    };
    let cells = vec![
        ("gadc".to_string(), Some(cfg.diffusion)),
        ("eps0".to_string(), Some(eps0)),
        ("no_diffusion".to_string(), None),
    ];
    let t0 = Instant::now();
    let per_run: Vec<Vec<_>> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| {
            let spec = NoiseSpec {
                seed: run_seed(cfg.seed, r),
                ..noise
            };
            let x = row_normalize_features(&spec.apply(&data.features)?);
            let ds_r = ds.with_features(x.clone())?;
            let head = head_for_run(&cfg.head, cfg.seed, r);
            cells
                .iter()
                .map(|(_, diff)| pipeline_accuracy(&data.graph, &x, &ds_r, diff.as_ref(), &head, cfg.dense_cap, r == 0))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    timer.0.insert("runs".into(), t0.elapsed().as_secs_f64() * 1e3);
    Ok(BenchReport {
        scenario: Scenario::Denoise,
        runs: cfg.runs,
        seed: cfg.seed,
        cells: assemble(&cells, per_run),
        perturbation: None,
        best_cell: None,
        config: cfg.clone(),
        timings_ms: timer.0,
    })
}

/// Option IV on the perturbed graph against the plain transition on the same
/// graph. A generated perturbation is redrawn per run with seed `base + r`;
/// an external perturbed edge list is used as-is in every run.
pub fn attack_bench(cfg: &ExperimentConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let attack = cfg
        .attack
        .clone()
        .ok_or_else(|| Error::InvalidParameter("missing attack spec".into()))?;
    let mut timer = Timer(BTreeMap::new());
    let data = timer.time("load", || load_data(&cfg.data, cfg.seed))?;
    let ds = require_dataset(&data)?;
    let external = match &attack.perturbed_graph {
        Some(p) => Some(read_graph_file(p, data.graph.n())?),
        None => None,
    };
    let x = row_normalize_features(&data.features);
    let ds = ds.with_features(x.clone())?;
    let opt4 = DiffusionConfig {
        option: TransitionOption::OptionIV,
        ..cfg.diffusion
    };
    let plain = DiffusionConfig {
        option: TransitionOption::Plain,
        epsilon: 0.0,
        ..cfg.diffusion
    };
    let cells = vec![("option4".to_string(), Some(opt4)), ("plain".to_string(), Some(plain))];
    let t0 = Instant::now();
    let per_run: Vec<(Vec<_>, PerturbSummary)> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| {
            let (g, summary) = match &external {
                Some(g) => (g.clone(), PerturbSummary::default()),
                None => perturb_structure(&data.graph, &ds.labels, attack.rate, attack.mode, run_seed(cfg.seed, r))?,
            };
            let head = head_for_run(&cfg.head, cfg.seed, r);
            let accs = cells
                .iter()
                .map(|(_, diff)| pipeline_accuracy(&g, &x, &ds, diff.as_ref(), &head, cfg.dense_cap, r == 0))
                .collect::<Result<Vec<_>>>()?;
            Ok((accs, summary))
        })
        .collect::<Result<_>>()?;
    timer.0.insert("runs".into(), t0.elapsed().as_secs_f64() * 1e3);
    let (per_run, summaries): (Vec<_>, Vec<_>) = per_run.into_iter().unzip();
    Ok(BenchReport {
        scenario: Scenario::Attack,
        runs: cfg.runs,
        seed: cfg.seed,
        cells: assemble(&cells, per_run),
        perturbation: Some(summaries),
        best_cell: None,
        config: cfg.clone(),
        timings_ms: timer.0,
    })
}

/// Option I over an ε grid. Every run draws a fresh stratified 60/20/20
/// split (shared by all ε cells of that run).
pub fn heterophily_sweep(cfg: &ExperimentConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let mut timer = Timer(BTreeMap::new());
    let data = timer.time("load", || load_data(&cfg.data, cfg.seed))?;
    let ds = require_dataset(&data)?;
    let x = row_normalize_features(&data.features);
    let cells: Vec<(String, Option<DiffusionConfig>)> = cfg
        .epsilons
        .iter()
        .map(|&eps| {
            let d = DiffusionConfig {
                option: TransitionOption::OptionI,
                epsilon: eps,
                ..cfg.diffusion
            };
            (format!("eps={eps:?}"), Some(d))
        })
        .collect();
    let t0 = Instant::now();
    let per_run: Vec<Vec<_>> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| {
            let splits = stratified_split(
                &ds.labels,
                0.6,
                0.2,
                &mut rng_indexed(cfg.seed, Stream::Split, r as u64),
            );
            let ds_r = LabeledDataset::new(x.clone(), ds.labels.clone(), splits)?;
            let head = head_for_run(&cfg.head, cfg.seed, r);
            cells
                .iter()
                .map(|(_, diff)| pipeline_accuracy(&data.graph, &x, &ds_r, diff.as_ref(), &head, cfg.dense_cap, r == 0))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    timer.0.insert("runs".into(), t0.elapsed().as_secs_f64() * 1e3);
    let cells = assemble(&cells, per_run);
    let best_cell = cells
        .iter()
        .fold(None::<&RunReport>, |best, c| match best {
            Some(b) if b.mean >= c.mean => Some(b),
            _ => Some(c),
        })
        .map(|c| c.cell.clone());
    Ok(BenchReport {
        scenario: Scenario::Heterophily,
        runs: cfg.runs,
        seed: cfg.seed,
        cells,
        perturbation: None,
        best_cell,
        config: cfg.clone(),
        timings_ms: timer.0,
    })
}

/// The configured diffusion plus head on clean row-normalized features.
pub fn plain_bench(cfg: &ExperimentConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let mut timer = Timer(BTreeMap::new());
    let data = timer.time("load", || load_data(&cfg.data, cfg.seed))?;
    let ds = require_dataset(&data)?;
    let x = row_normalize_features(&data.features);
    let ds = ds.with_features(x.clone())?;
    let cells = vec![("gadc".to_string(), Some(cfg.diffusion))];
    let t0 = Instant::now();
    let per_run: Vec<Vec<_>> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| {
            let head = head_for_run(&cfg.head, cfg.seed, r);
            Ok(vec![pipeline_accuracy(
                &data.graph,
                &x,
                &ds,
                Some(&cfg.diffusion),
                &head,
                cfg.dense_cap,
                r == 0,
            )?])
        })
        .collect::<Result<_>>()?;
    timer.0.insert("runs".into(), t0.elapsed().as_secs_f64() * 1e3);
    Ok(BenchReport {
        scenario: Scenario::Plain,
        runs: cfg.runs,
        seed: cfg.seed,
        cells: assemble(&cells, per_run),
        perturbation: None,
        best_cell: None,
        config: cfg.clone(),
        timings_ms: timer.0,
    })
}

/// Dispatches on `cfg.scenario`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<BenchReport> {
    match cfg.scenario {
        Scenario::Plain => plain_bench(cfg),
        Scenario::Denoise => denoise_bench(cfg),
        Scenario::Attack => attack_bench(cfg),
        Scenario::Heterophily => heterophily_sweep(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HeadKind;

    fn small_sbm() -> DataSource {
        DataSource::Sbm(SbmSpec {
            n: 80,
            blocks: 2,
            p_in: 0.15,
            p_out: 0.02,
            d: 4,
            feature_separation: 1.5,
            seed: 3,
        })
    }

    fn quick(scenario: Scenario) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(scenario, small_sbm());
        cfg.runs = 3;
        cfg.head = HeadConfig {
            epochs: 20,
            lr: 0.05,
            ..Default::default()
        };
        cfg.diffusion.k = 4;
        cfg.diffusion.lambda = 4.0;
        cfg
    }

    #[test]
    fn mean_std_population() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn denoise_emits_three_paired_cells() {
        let mut cfg = quick(Scenario::Denoise);
        cfg.noise = Some(NoiseSpec::gaussian(0.5, 0));
        cfg.diffusion.option = TransitionOption::OptionIII;
        cfg.diffusion.epsilon = 1.0;
        let r = denoise_bench(&cfg).unwrap();
        let names: Vec<_> = r.cells.iter().map(|c| c.cell.as_str()).collect();
        assert_eq!(names, ["gadc", "eps0", "no_diffusion"]);
        for c in &r.cells {
            assert_eq!(c.accuracies.len(), 3);
            let (m, s) = mean_std(&c.accuracies);
            assert!((m - c.mean).abs() < 1e-12 && (s - c.std).abs() < 1e-12);
        }
        assert_eq!(r.to_json(), denoise_bench(&cfg).unwrap().to_json());
    }

    #[test]
    fn zero_noise_matches_clean_pipeline() {
        let mut cfg = quick(Scenario::Denoise);
        cfg.noise = Some(NoiseSpec::gaussian(0.0, 0));
        let noisy = denoise_bench(&cfg).unwrap();
        let mut clean = cfg.clone();
        clean.scenario = Scenario::Plain;
        clean.noise = None;
        let plain = plain_bench(&clean).unwrap();
        assert_eq!(noisy.cell("gadc").unwrap().accuracies, plain.cells[0].accuracies);
    }

    #[test]
    fn attack_and_sweep_shapes() {
        let mut cfg = quick(Scenario::Attack);
        cfg.attack = Some(AttackSpec {
            rate: 0.5,
            mode: PerturbMode::AddCrossClass,
            perturbed_graph: None,
        });
        cfg.head.kind = HeadKind::Mlp2;
        let r = attack_bench(&cfg).unwrap();
        assert_eq!(r.cells.len(), 2);
        assert!(r.perturbation.as_ref().unwrap().iter().all(|p| p.added > 0));

        let mut cfg = quick(Scenario::Heterophily);
        cfg.diffusion.lambda = 1.0;
        let r = heterophily_sweep(&cfg).unwrap();
        assert_eq!(r.cells.len(), 5);
        assert!(r.best_cell.is_some());
        assert_eq!(r.cells[0].epsilon, Some(0.0));
    }

    #[test]
    fn plain_with_epsilon_is_rejected() {
        let g = generate_gallery(Gallery::Star4);
        let x = FeatureMatrix::new(Array2::eye(4)).unwrap();
        let cfg = DiffusionConfig {
            epsilon: 1.0,
            ..Default::default()
        };
        assert!(transition_for(&g, &x, &cfg, 10).is_err());
    }

    #[test]
    fn config_from_toml() {
        let text = r#"
            scenario = "denoise"
            runs = 2
            seed = 7
            [data]
            source = "sbm"
            n = 50
            blocks = 2
            p_in = 0.1
            p_out = 0.01
            d = 3
            feature_separation = 1.0
            seed = 1
            [diffusion]
            lambda = 32.0
            K = 16
            option = "2"
            epsilon = 1.0
            [head]
            lr = 0.2
            [noise]
            kind = "gaussian"
            level = 1.0
            seed = 0
        "#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.diffusion.option, TransitionOption::OptionII);
        assert!(matches!(cfg.data, DataSource::Sbm(SbmSpec { n: 50, .. })));
        cfg.validate().unwrap();
    }
}
