//! Modified transition matrices `T = 𝒜̃ − εΦ`.
//!
//! Φ comes in three flavours:
//!
//! * option I: cosine similarity of endpoint features on every edge,
//! * option II: the full Gram matrix `XXᵀ` scaled by `‖XXᵀ‖_F` (dense),
//! * option III: option II restricted to the edge set.
//!
//! Option IV is the large-ε limit of option I. Instead of subtracting a huge
//! multiple of Φ it rebuilds the operator from clamped cosine weights on the
//! (possibly attacked) edge set, then renormalizes symmetrically.
//!
//! Φ never has entries on the diagonal for options I and III; the edge set is
//! the graph's edges between distinct nodes.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::features::{frobenius, FeatureMatrix};
use crate::graph::{Graph, NormKind, NormalizedAdjacency};
use crate::sparse::{dense_mul, CsrMatrix};

/// Default node cap for option II's dense Gram matrix.
pub const DEFAULT_DENSE_CAP: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TransitionOption {
    /// ε = 0: the classic diffusion transition.
    #[default]
    Plain,
    OptionI,
    OptionII,
    OptionIII,
    OptionIV,
}

impl TransitionOption {
    pub fn as_str(self) -> &'static str {
        match self {
            TransitionOption::Plain => "plain",
            TransitionOption::OptionI => "1",
            TransitionOption::OptionII => "2",
            TransitionOption::OptionIII => "3",
            TransitionOption::OptionIV => "4",
        }
    }
}

impl fmt::Display for TransitionOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransitionOption {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plain" | "0" | "none" => Ok(Self::Plain),
            "1" | "i" | "option1" => Ok(Self::OptionI),
            "2" | "ii" | "option2" => Ok(Self::OptionII),
            "3" | "iii" | "option3" => Ok(Self::OptionIII),
            "4" | "iv" | "option4" => Ok(Self::OptionIV),
            other => Err(Error::InvalidParameter(format!("unknown transition option {other:?}"))),
        }
    }
}

impl Serialize for TransitionOption {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for TransitionOption {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(i) => i.to_string().parse().map_err(serde::de::Error::custom),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// A square operator, either sparse or dense.
#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    Sparse(CsrMatrix),
    Dense(Array2<f64>),
}

impl Operator {
    pub fn n(&self) -> usize {
        match self {
            Operator::Sparse(m) => m.n_rows(),
            Operator::Dense(m) => m.nrows(),
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, Operator::Dense(_))
    }

    /// `self · x`
    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match self {
            Operator::Sparse(m) => m.mul_dense(x),
            Operator::Dense(m) => {
                if m.ncols() != x.nrows() {
                    return Err(Error::Shape(format!(
                        "dense {}x{} times {}x{}",
                        m.nrows(),
                        m.ncols(),
                        x.nrows(),
                        x.ncols()
                    )));
                }
                Ok(dense_mul(m.view(), x))
            }
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match self {
            Operator::Sparse(m) => m.to_dense(),
            Operator::Dense(m) => m.clone(),
        }
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        match self {
            Operator::Sparse(m) => m.value(i, j),
            Operator::Dense(m) => m[[i, j]],
        }
    }

    /// Iterates stored entries (every entry for dense).
    pub fn entries(&self) -> Box<dyn Iterator<Item = (usize, usize, f64)> + '_> {
        match self {
            Operator::Sparse(m) => Box::new(m.iter()),
            Operator::Dense(m) => Box::new(m.indexed_iter().map(|((i, j), &v)| (i, j, v))),
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        match self {
            Operator::Sparse(m) => m.max_asymmetry(),
            Operator::Dense(m) => {
                let n = m.nrows();
                let mut worst = 0.0f64;
                for i in 0..n {
                    for j in i + 1..n {
                        worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
                    }
                }
                worst
            }
        }
    }

    /// Writes `row,col,value` for every stored entry.
    pub fn write_triplets_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        match self {
            Operator::Sparse(m) => m.write_triplets_csv(w),
            Operator::Dense(_) => {
                writeln!(w, "row,col,value")?;
                for (r, c, v) in self.entries() {
                    writeln!(w, "{r},{c},{v:e}")?;
                }
                Ok(())
            }
        }
    }
}

/// The operator raised to powers in the diffusion series, plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub op: Operator,
    pub option: TransitionOption,
    /// ε used to build `op`; `f64::INFINITY` for option IV.
    pub epsilon: f64,
    pub base_kind: NormKind,
}

impl TransitionMatrix {
    pub fn n(&self) -> usize {
        self.op.n()
    }

    pub fn dense_flag(&self) -> bool {
        self.op.is_dense()
    }

    /// The plain transition, `T = 𝒜̃`.
    pub fn plain(na: &NormalizedAdjacency) -> Self {
        Self {
            op: Operator::Sparse(na.matrix.clone()),
            option: TransitionOption::Plain,
            epsilon: 0.0,
            base_kind: na.kind,
        }
    }
}

fn check_rows(g: &Graph, x: &FeatureMatrix) -> Result<()> {
    if g.n() != x.n() {
        return Err(Error::Shape(format!(
            "graph has {} nodes, features have {} rows",
            g.n(),
            x.n()
        )));
    }
    Ok(())
}

/// Edge mask (distinct endpoints only) with entries produced by `value`.
fn on_edges(g: &Graph, mut value: impl FnMut(usize, usize) -> f64) -> CsrMatrix {
    let trip = g
        .adjacency()
        .iter()
        .filter(|&(i, j, _)| i != j)
        .map(|(i, j, _)| (i, j, value(i, j)))
        .collect();
    CsrMatrix::from_triplets(g.n(), g.n(), trip)
}

fn cosine(x: &FeatureMatrix, norms: &[f64], i: usize, j: usize) -> f64 {
    if norms[i] == 0.0 || norms[j] == 0.0 {
        return 0.0;
    }
    let a = x.as_array().row(i);
    let b = x.as_array().row(j);
    a.dot(&b) / (norms[i] * norms[j])
}

/// Option I: `Φ_ij = cos(X_i, X_j)` on edges, 0 elsewhere and on the diagonal.
/// Rows with zero norm give 0.
pub fn phi_option1(g: &Graph, x: &FeatureMatrix) -> Result<CsrMatrix> {
    check_rows(g, x)?;
    let norms = x.row_norms();
    Ok(on_edges(g, |i, j| cosine(x, &norms, i, j)))
}

/// `‖XXᵀ‖_F`, computed as `‖XᵀX‖_F` so that no `n × n` matrix is formed.
pub fn gram_frobenius(x: &FeatureMatrix) -> f64 {
    let xt = x.view().reversed_axes();
    frobenius(dense_mul(xt, x.view()).view())
}

/// Option II: `Φ = XXᵀ / ‖XXᵀ‖_F` over all pairs. All zeros when `X = 0`.
pub fn phi_option2(x: &FeatureMatrix, dense_cap: usize) -> Result<Array2<f64>> {
    let n = x.n();
    if n > dense_cap {
        return Err(Error::Capacity {
            what: "option II dense Gram matrix",
            n,
            cap: dense_cap,
            advice: Some("use option III, which keeps Φ on the edge set"),
        });
    }
    let gram = dense_mul(x.view(), x.view().reversed_axes());
    let fro = frobenius(gram.view());
    if fro == 0.0 {
        return Ok(gram);
    }
    Ok(gram.mapv(|v| v / fro))
}

/// Option III: option II values on the edge set only. The scale is the
/// Frobenius norm of the full Gram matrix, not of the masked one.
pub fn phi_option3(g: &Graph, x: &FeatureMatrix) -> Result<CsrMatrix> {
    check_rows(g, x)?;
    let fro = gram_frobenius(x);
    let xa = x.as_array();
    Ok(on_edges(g, |i, j| {
        if fro == 0.0 {
            0.0
        } else {
            xa.row(i).dot(&xa.row(j)) / fro
        }
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Phi {
    Sparse(CsrMatrix),
    Dense(Array2<f64>),
}

/// Computes Φ for `option` (None for Plain and option IV, which have no Φ).
pub fn compute_phi(option: TransitionOption, g: &Graph, x: &FeatureMatrix, dense_cap: usize) -> Result<Option<Phi>> {
    Ok(match option {
        TransitionOption::Plain | TransitionOption::OptionIV => None,
        TransitionOption::OptionI => Some(Phi::Sparse(phi_option1(g, x)?)),
        TransitionOption::OptionII => {
            check_rows(g, x)?;
            Some(Phi::Dense(phi_option2(x, dense_cap)?))
        }
        TransitionOption::OptionIII => Some(Phi::Sparse(phi_option3(g, x)?)),
    })
}

/// `T = 𝒜̃ − εΦ`. No clamping: entries may go negative.
pub fn build_transition(
    na: &NormalizedAdjacency,
    phi: Option<&Phi>,
    epsilon: f64,
    option: TransitionOption,
) -> Result<TransitionMatrix> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be finite and >= 0, got {epsilon}"
        )));
    }
    let n = na.n();
    let op = match (option, phi) {
        (TransitionOption::Plain, None) => return Ok(TransitionMatrix::plain(na)),
        (TransitionOption::Plain, Some(_)) => {
            return Err(Error::InvalidParameter("the plain option takes no Φ".into()));
        }
        (TransitionOption::OptionIV, _) => {
            return Err(Error::InvalidParameter(
                "option IV is built by reconstruct_option4, not by subtraction".into(),
            ));
        }
        (_, None) => {
            return Err(Error::InvalidParameter(format!("option {option} needs a Φ matrix")));
        }
        (TransitionOption::OptionII, Some(Phi::Sparse(_))) => {
            return Err(Error::InvalidParameter("option II expects a dense Φ".into()));
        }
        (_, Some(Phi::Dense(_))) if option != TransitionOption::OptionII => {
            return Err(Error::InvalidParameter(format!("option {option} expects a sparse Φ")));
        }
        (_, Some(Phi::Dense(p))) => {
            if p.dim() != (n, n) {
                return Err(Error::Shape(format!("Φ is {:?}, adjacency is {n}x{n}", p.dim())));
            }
            let mut t = na.matrix.to_dense();
            t.zip_mut_with(p, |a, &b| *a -= epsilon * b);
            Operator::Dense(t)
        }
        (_, Some(Phi::Sparse(p))) => Operator::Sparse(na.matrix.add_scaled(-epsilon, p)?),
    };
    Ok(TransitionMatrix {
        op,
        option,
        epsilon,
        base_kind: na.kind,
    })
}

/// Option IV: cosine-reweighted adjacency on the given (possibly attacked)
/// edge set, negative cosines clamped to 0, unit self-loops, then symmetric
/// normalization by the reweighted degrees.
///
/// Input self-loops are replaced by the unit self-similarity. Clamped edges
/// stay in the pattern as explicit zeros.
pub fn reconstruct_option4(g_perturbed: &Graph, x: &FeatureMatrix) -> Result<TransitionMatrix> {
    let raw = option4_weights(g_perturbed, x)?;
    let deg = raw.row_sums();
    let inv_sqrt: Vec<f64> = deg.iter().map(|&d| 1.0 / d.sqrt()).collect();
    let op = raw.map_values(|i, j, w| w * inv_sqrt[i] * inv_sqrt[j]);
    Ok(TransitionMatrix {
        op: Operator::Sparse(op),
        option: TransitionOption::OptionIV,
        epsilon: f64::INFINITY,
        base_kind: NormKind::Symmetric,
    })
}

/// The clamped cosine weights of option IV before normalization.
pub fn option4_weights(g: &Graph, x: &FeatureMatrix) -> Result<CsrMatrix> {
    check_rows(g, x)?;
    let norms = x.row_norms();
    let mut trip: Vec<(usize, usize, f64)> = g
        .adjacency()
        .iter()
        .filter(|&(i, j, _)| i != j)
        .map(|(i, j, _)| (i, j, cosine(x, &norms, i, j).max(0.0)))
        .collect();
    trip.extend((0..g.n()).map(|i| (i, i, 1.0)));
    Ok(CsrMatrix::from_triplets(g.n(), g.n(), trip))
}
