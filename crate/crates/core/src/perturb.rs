//! Noise injection, synthetic graphs and label-aware structure perturbation.
//!
//! Every generator is a pure function of its inputs and seed. Each kind of
//! draw uses its own seed stream (see [`crate::seed`]).

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_split, LabeledDataset};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::Graph;
use crate::seed::{rng, Stream};

/// Gaussian noise levels ξ used on the citation graphs.
pub const XI_CITATION: [f64; 6] = [0.1, 0.2, 0.3, 0.4, 0.5, 100.0];
/// Gaussian noise levels ξ used on the larger, denser-featured citation graph.
pub const XI_PUBMED: [f64; 6] = [0.01, 0.02, 0.03, 0.04, 0.05, 100.0];
/// Structure perturbation rates.
pub const PERTURB_RATES: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Flip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// ξ for Gaussian noise, flip probability for flip noise.
    pub level: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn gaussian(level: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            level,
            seed,
        }
    }

    pub fn flip(level: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Flip,
            level,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            NoiseKind::Gaussian => self.level >= 0.0 && self.level.is_finite(),
            NoiseKind::Flip => (0.0..=1.0).contains(&self.level),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "bad {:?} noise level {}",
                self.kind, self.level
            )))
        }
    }

    /// Dispatches on `kind`.
    pub fn apply(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        match self.kind {
            NoiseKind::Gaussian => add_gaussian_noise(x, self),
            NoiseKind::Flip => add_flip_noise(x, self),
        }
    }
}

fn expect_kind(spec: &NoiseSpec, kind: NoiseKind) -> Result<()> {
    spec.validate()?;
    if spec.kind != kind {
        return Err(Error::InvalidParameter(format!(
            "expected {kind:?} noise, got {:?}",
            spec.kind
        )));
    }
    Ok(())
}

/// `X + ξΥ` with `Υ` iid standard normal.
pub fn add_gaussian_noise(x: &FeatureMatrix, spec: &NoiseSpec) -> Result<FeatureMatrix> {
    expect_kind(spec, NoiseKind::Gaussian)?;
    if spec.level == 0.0 {
        return Ok(x.clone());
    }
    let mut r = rng(spec.seed, Stream::GaussianNoise);
    let mut out = x.as_array().clone();
    for v in out.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut r);
        *v += spec.level * z;
    }
    FeatureMatrix::new(out)
}

/// Flips each entry of a binary matrix with probability `level`.
pub fn add_flip_noise(x: &FeatureMatrix, spec: &NoiseSpec) -> Result<FeatureMatrix> {
    add_flip_noise_with_mask(x, spec).map(|(f, _)| f)
}

/// Like [`add_flip_noise`], also returning which entries were flipped.
pub fn add_flip_noise_with_mask(x: &FeatureMatrix, spec: &NoiseSpec) -> Result<(FeatureMatrix, Array2<bool>)> {
    expect_kind(spec, NoiseKind::Flip)?;
    if let Some(((i, j), v)) = x.as_array().indexed_iter().find(|(_, &v)| v != 0.0 && v != 1.0) {
        return Err(Error::Domain(format!(
            "flip noise needs binary features, found {v} at ({i},{j})"
        )));
    }
    let mut r = rng(spec.seed, Stream::FlipNoise);
    let mask = Array2::from_shape_simple_fn(x.as_array().raw_dim(), || r.random_bool(spec.level));
    let mut out = x.as_array().clone();
    out.zip_mut_with(&mask, |v, &m| {
        if m {
            *v = 1.0 - *v;
        }
    });
    Ok((FeatureMatrix::from_trusted(out), mask))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbmSpec {
    pub n: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub d: usize,
    pub feature_separation: f64,
    pub seed: u64,
}

impl SbmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.n < self.blocks {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= blocks <= n, got blocks = {}, n = {}",
                self.blocks, self.n
            )));
        }
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{name} = {p} is not a probability")));
            }
        }
        if self.d < self.blocks {
            return Err(Error::InvalidParameter(format!(
                "class means use one basis direction per block, so d = {} must be >= blocks = {}",
                self.d, self.blocks
            )));
        }
        if !self.feature_separation.is_finite() {
            return Err(Error::InvalidParameter("feature_separation must be finite".into()));
        }
        Ok(())
    }

    pub fn is_homophilous(&self) -> bool {
        self.p_in > self.p_out
    }
}

/// Stochastic block model with Gaussian features around one-hot class means.
///
/// Node `i` is in block `i mod C`, so block sizes differ by at most one.
/// Features are `separation · e_c + N(0, I)`. The split is stratified
/// 60/20/20.
pub fn generate_sbm(spec: &SbmSpec) -> Result<(Graph, LabeledDataset)> {
    spec.validate()?;
    let n = spec.n;
    let labels: Vec<usize> = (0..n).map(|i| i % spec.blocks).collect();

    let mut er = rng(spec.seed, Stream::GraphEdges);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { spec.p_in } else { spec.p_out };
            if er.random_bool(p) {
                edges.push((i, j, 1.0));
            }
        }
    }
    let g = Graph::from_edges(n, edges)?;

    let mut fr = rng(spec.seed, Stream::Features);
    let mut x = Array2::<f64>::zeros((n, spec.d));
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        for v in row.iter_mut() {
            *v = StandardNormal.sample(&mut fr);
        }
        row[labels[i]] += spec.feature_separation;
    }

    let splits = stratified_split(&labels, 0.6, 0.2, &mut rng(spec.seed, Stream::Split));
    let ds = LabeledDataset::new(FeatureMatrix::new(x)?, labels, splits)?;
    Ok((g, ds))
}

/// Erdős–Rényi `G(n, p)` without self-loops.
pub fn random_graph<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("edge probability {p}")));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j, 1.0));
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// Fraction of edges (between distinct nodes) whose endpoints share a label.
/// `None` for an edgeless graph.
pub fn homophily_ratio(g: &Graph, labels: &[usize]) -> Option<f64> {
    let (mut same, mut total) = (0usize, 0usize);
    for (i, j, _) in g.edges() {
        total += 1;
        same += usize::from(labels[i] == labels[j]);
    }
    (total > 0).then(|| same as f64 / total as f64)
}

/// Small fixed topologies for connectivity checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gallery {
    /// 4 nodes, no edges.
    Isolated,
    /// Centre 0 joined to 1, 2, 3.
    Star4,
    /// K4.
    Complete4,
    /// 12-node ring where each node also links to its second neighbours.
    Decentralized12,
}

impl Gallery {
    pub const ALL: [Gallery; 4] = [
        Gallery::Isolated,
        Gallery::Star4,
        Gallery::Complete4,
        Gallery::Decentralized12,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Gallery::Isolated => "isolated",
            Gallery::Star4 => "star4",
            Gallery::Complete4 => "complete4",
            Gallery::Decentralized12 => "decentralized12",
        }
    }
}

impl fmt::Display for Gallery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gallery {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Gallery::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown gallery graph {s:?}")))
    }
}

pub fn generate_gallery(which: Gallery) -> Graph {
    let edges: Vec<(usize, usize, f64)> = match which {
        Gallery::Isolated => vec![],
        Gallery::Star4 => (1..4).map(|j| (0, j, 1.0)).collect(),
        Gallery::Complete4 => (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j, 1.0))).collect(),
        Gallery::Decentralized12 => (0..12)
            .flat_map(|i| [(i, (i + 1) % 12, 1.0), (i, (i + 2) % 12, 1.0)])
            .collect(),
    };
    let n = if which == Gallery::Decentralized12 { 12 } else { 4 };
    Graph::from_edges(n, edges).expect("fixed topology is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PerturbMode {
    #[default]
    AddCrossClass,
    RemoveWithinClass,
    Mixed,
}

impl FromStr for PerturbMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "add_cross_class" | "add" => Ok(Self::AddCrossClass),
            "remove_within_class" | "remove" => Ok(Self::RemoveWithinClass),
            "mixed" => Ok(Self::Mixed),
            other => Err(Error::InvalidParameter(format!("unknown perturbation mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct PerturbSummary {
    /// `⌊rate·|E|⌋`
    pub requested: usize,
    pub added: usize,
    pub removed: usize,
}

impl PerturbSummary {
    pub fn is_partial(&self) -> bool {
        self.added + self.removed < self.requested
    }
}

/// Adds cross-class edges and/or removes within-class edges, `⌊rate·|E|⌋` in
/// total. When there are not enough candidates the perturbation is partial
/// and the summary says how many were applied.
pub fn perturb_structure(
    g: &Graph,
    labels: &[usize],
    rate: f64,
    mode: PerturbMode,
    seed: u64,
) -> Result<(Graph, PerturbSummary)> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::InvalidParameter(format!("perturbation rate {rate}")));
    }
    if labels.len() != g.n() {
        return Err(Error::Shape(format!("{} labels for {} nodes", labels.len(), g.n())));
    }
    let requested = (rate * g.edge_count() as f64).floor() as usize;
    let (n_add, n_remove) = match mode {
        PerturbMode::AddCrossClass => (requested, 0),
        PerturbMode::RemoveWithinClass => (0, requested),
        PerturbMode::Mixed => (requested / 2, requested - requested / 2),
    };
    let mut r = rng(seed, Stream::Attack);

    // Remove first, from the sorted within-class edge list.
    let mut within: Vec<(usize, usize)> = g
        .edges()
        .filter(|&(i, j, _)| labels[i] == labels[j])
        .map(|(i, j, _)| (i, j))
        .collect();
    within.shuffle(&mut r);
    within.truncate(n_remove);
    let removed: HashSet<(usize, usize)> = within.into_iter().collect();

    let existing: HashSet<(usize, usize)> = g.edges().map(|(i, j, _)| (i, j)).collect();
    let added = sample_cross_pairs(g.n(), labels, &existing, n_add, &mut r);

    let kept = g
        .adjacency()
        .iter()
        .filter(|&(i, j, _)| i <= j && !removed.contains(&(i, j)));
    let new_edges = kept.chain(added.iter().map(|&(i, j)| (i, j, 1.0)));
    let out = Graph::from_edges(g.n(), new_edges)?;
    Ok((
        out,
        PerturbSummary {
            requested,
            added: added.len(),
            removed: removed.len(),
        },
    ))
}

fn sample_cross_pairs<R: Rng + ?Sized>(
    n: usize,
    labels: &[usize],
    existing: &HashSet<(usize, usize)>,
    want: usize,
    r: &mut R,
) -> Vec<(usize, usize)> {
    if want == 0 || n < 2 {
        return Vec::new();
    }
    let mut class_sizes = std::collections::HashMap::<usize, usize>::new();
    for &l in labels {
        *class_sizes.entry(l).or_default() += 1;
    }
    let same_pairs: usize = class_sizes.values().map(|&c| c * (c - 1) / 2).sum();
    let cross_total = n * (n - 1) / 2 - same_pairs;
    let cross_existing = existing.iter().filter(|&&(i, j)| labels[i] != labels[j]).count();
    let available = cross_total - cross_existing;

    if want >= available || available <= 4 * want {
        // Dense regime: enumerate and shuffle.
        let mut all: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| labels[i] != labels[j] && !existing.contains(&(i, j)))
            .collect();
        all.shuffle(r);
        all.truncate(want);
        return all;
    }
    let mut chosen = Vec::with_capacity(want);
    let mut seen = HashSet::with_capacity(want);
    while chosen.len() < want {
        let a = r.random_range(0..n);
        let b = r.random_range(0..n);
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        if i == j || labels[i] == labels[j] || existing.contains(&(i, j)) || !seen.insert((i, j)) {
            continue;
        }
        chosen.push((i, j));
    }
    chosen
}
