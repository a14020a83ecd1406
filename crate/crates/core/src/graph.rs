//! Undirected graphs in CSR layout, the renormalization trick, and the
//! normalized adjacency / Laplacian operators built from them.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Undirected graph stored as a symmetric CSR adjacency.
///
/// Weights default to 1. Column indices within each row are ascending and
/// unique, and entry `(i, j)` is present exactly when `(j, i)` is, with the
/// same weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adj: CsrMatrix,
    weighted: bool,
    renormalized: bool,
}

impl Graph {
    /// Builds from undirected edges. Each `(i, j, w)` with `i != j` contributes
    /// `w` to both `(i, j)` and `(j, i)`; a self-loop `(i, i, w)` contributes
    /// `w` once. Repeated pairs are summed.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut trip = Vec::new();
        let mut weighted = false;
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i},{j}) out of range for n = {n}"
                )));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidParameter(format!("edge ({i},{j}) has weight {w}")));
            }
            weighted |= w != 1.0;
            trip.push((i, j, w));
            if i != j {
                trip.push((j, i, w));
            }
        }
        let adj = CsrMatrix::from_triplets(n, n, trip);
        weighted |= adj.values().iter().any(|&w| w != 1.0);
        Ok(Self {
            adj,
            weighted,
            renormalized: false,
        })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            adj: CsrMatrix::zeros(n, n),
            weighted: false,
            renormalized: false,
        }
    }

    pub fn n(&self) -> usize {
        self.adj.n_rows()
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adj
    }

    /// Whether any stored weight differs from 1.
    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    /// Whether [`add_self_loops`] has been applied.
    pub fn is_renormalized(&self) -> bool {
        self.renormalized
    }

    pub fn is_undirected(&self) -> bool {
        true
    }

    /// Stored directed entries, self-loops included.
    pub fn nnz(&self) -> usize {
        self.adj.nnz()
    }

    /// Undirected edges between distinct nodes.
    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&(i, j, _)| i < j).count()
    }

    pub fn self_loop_count(&self) -> usize {
        self.adj.iter().filter(|&(i, j, _)| i == j).count()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj.get(i, j).is_some()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        self.adj.row(i).0
    }

    /// Weighted degree `sum_j A_ij`.
    pub fn degrees(&self) -> Vec<f64> {
        self.adj.row_sums()
    }

    /// Undirected edges `(i, j, w)` with `i < j`, in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adj.iter().filter(|&(i, j, _)| i < j)
    }

    /// Writes the edge list in the same format [`load_graph`] reads.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (i, j, v) in self.adj.iter().filter(|&(i, j, _)| i <= j) {
            if self.weighted {
                writeln!(w, "{i}\t{j}\t{v:?}")?;
            } else {
                writeln!(w, "{i}\t{j}")?;
            }
        }
        Ok(())
    }
}

/// Parses a tab-separated edge list (`i<TAB>j[<TAB>w]`, `#` comments).
///
/// `source_name` only labels error messages.
pub fn load_graph<R: BufRead>(reader: R, n: usize, source_name: &str) -> Result<Graph> {
    let mut edges = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::input(source_name, Some(lineno), e.to_string()))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::input(
                source_name,
                Some(lineno),
                format!("expected 2 or 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let parse_idx = |s: &str| -> Result<usize> {
            let v: usize = s
                .trim()
                .parse()
                .map_err(|_| Error::input(source_name, Some(lineno), format!("bad node index {s:?}")))?;
            if v >= n {
                return Err(Error::input(
                    source_name,
                    Some(lineno),
                    format!("node index {v} out of range for n = {n}"),
                ));
            }
            Ok(v)
        };
        let i = parse_idx(fields[0])?;
        let j = parse_idx(fields[1])?;
        let w = match fields.get(2) {
            Some(s) => {
                let w: f64 = s
                    .trim()
                    .parse()
                    .map_err(|_| Error::input(source_name, Some(lineno), format!("bad weight {s:?}")))?;
                if !w.is_finite() {
                    return Err(Error::input(
                        source_name,
                        Some(lineno),
                        format!("non-finite weight {s}"),
                    ));
                }
                if w < 0.0 {
                    return Err(Error::input(source_name, Some(lineno), format!("negative weight {s}")));
                }
                w
            }
            None => 1.0,
        };
        edges.push((i, j, w));
    }
    Graph::from_edges(n, edges)
}

/// `Ã = A + I`. An existing diagonal entry is incremented by 1.
pub fn add_self_loops(g: &Graph) -> Graph {
    let n = g.n();
    let eye = CsrMatrix::identity(n);
    let adj = g.adj.add_scaled(1.0, &eye).expect("same shape");
    let weighted = adj.values().iter().any(|&w| w != 1.0);
    Graph {
        adj,
        weighted,
        renormalized: true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// `D̃^{-1/2} Ã D̃^{-1/2}`
    #[default]
    Symmetric,
    /// `D̃^{-1} Ã`
    RowStochastic,
}

impl std::str::FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sym" | "symmetric" => Ok(NormKind::Symmetric),
            "row" | "row_stochastic" | "rw" => Ok(NormKind::RowStochastic),
            other => Err(Error::InvalidParameter(format!("unknown normalization kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    pub matrix: CsrMatrix,
    pub kind: NormKind,
    pub self_loops_added: bool,
}

impl NormalizedAdjacency {
    pub fn n(&self) -> usize {
        self.matrix.n_rows()
    }
}

/// Normalizes `Ã`. Self-loops are added first unless `g` already went
/// through [`add_self_loops`]; the sparsity pattern equals that of `Ã`.
pub fn normalize(g: &Graph, kind: NormKind) -> NormalizedAdjacency {
    let looped;
    let g = if g.renormalized {
        g
    } else {
        looped = add_self_loops(g);
        &looped
    };
    let deg = g.degrees();
    let matrix = match kind {
        NormKind::Symmetric => {
            let inv_sqrt: Vec<f64> = deg.iter().map(|&d| 1.0 / d.sqrt()).collect();
            g.adj.map_values(|i, j, w| w * inv_sqrt[i] * inv_sqrt[j])
        }
        NormKind::RowStochastic => g.adj.map_values(|i, _, w| w / deg[i]),
    };
    NormalizedAdjacency {
        matrix,
        kind,
        self_loops_added: true,
    }
}

/// `L̃ = I − 𝒜̃` on the pattern of `na` (which always holds the diagonal).
pub fn laplacian(na: &NormalizedAdjacency) -> CsrMatrix {
    na.matrix.map_values(|i, j, v| if i == j { 1.0 - v } else { -v })
}
