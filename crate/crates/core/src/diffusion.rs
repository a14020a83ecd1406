//! The truncated diffusion series
//!
//! ```text
//! S = α Σ_{k=k0}^{K} (c·T)^k,    α = 1/(λ+1),  c = λ/(λ+1)
//! ```
//!
//! and the quantities used to reason about it: the row-sum constant
//! `β = 1 − c^{K+1}`, the connectivity factor τ, the sub-Gaussian noise bound
//! and a dense closed-form reference solve.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2, Zip};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{frobenius, FeatureMatrix};
use crate::graph::{laplacian, Graph, NormKind, NormalizedAdjacency};
use crate::seed::{rng_indexed, Stream};
use crate::transition::{build_transition, compute_phi, phi_option2, TransitionMatrix, TransitionOption};

/// Node cap for [`materialize_s`] and [`closed_form_oracle`].
pub const DENSE_VERIFY_CAP: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionConfig {
    pub lambda: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub epsilon: f64,
    pub option: TransitionOption,
    pub kind: NormKind,
    /// Drop the k = 0 and k = 1 terms, keeping the 1/(λ+1) prefactor.
    pub drop_low_order: bool,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            lambda: 32.0,
            k: 16,
            epsilon: 0.0,
            option: TransitionOption::Plain,
            kind: NormKind::Symmetric,
            drop_low_order: false,
        }
    }
}

impl DiffusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        if self.drop_low_order && self.k < 2 {
            return Err(Error::InvalidParameter(format!(
                "drop_low_order needs K >= 2, got K = {}",
                self.k
            )));
        }
        Ok(())
    }

    /// α = 1/(λ+1)
    pub fn alpha(&self) -> f64 {
        1.0 / (self.lambda + 1.0)
    }

    /// c = λ/(λ+1)
    pub fn ratio(&self) -> f64 {
        self.lambda / (self.lambda + 1.0)
    }

    /// β = 1 − c^{K+1}
    pub fn beta(&self) -> f64 {
        beta(self.lambda, self.k)
    }

    fn first_power(&self) -> usize {
        if self.drop_low_order {
            2
        } else {
            0
        }
    }
}

pub fn beta(lambda: f64, k: usize) -> f64 {
    let c = lambda / (lambda + 1.0);
    1.0 - c.powi(k as i32 + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DiffusionReport {
    pub beta: f64,
    /// Absent when S has negative entries (ε > 0) or was not materialized.
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_per_node: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical_norms: Option<Vec<f64>>,
}

fn check_consistent(t: &TransitionMatrix, cfg: &DiffusionConfig) -> Result<()> {
    cfg.validate()?;
    if t.option != cfg.option {
        return Err(Error::InvalidParameter(format!(
            "transition was built for option {} but the config asks for {}",
            t.option, cfg.option
        )));
    }
    Ok(())
}

/// `F = S·X` by a running power `P ← c·T·P`, one operator product per order.
pub fn diffuse_features(t: &TransitionMatrix, x: &FeatureMatrix, cfg: &DiffusionConfig) -> Result<FeatureMatrix> {
    check_consistent(t, cfg)?;
    if t.n() != x.n() {
        return Err(Error::Shape(format!(
            "operator is {0}x{0}, features have {1} rows",
            t.n(),
            x.n()
        )));
    }
    let out = diffuse_view(t, x.view(), cfg)?;
    Ok(FeatureMatrix::from_trusted(out))
}

fn diffuse_view(t: &TransitionMatrix, x: ArrayView2<'_, f64>, cfg: &DiffusionConfig) -> Result<Array2<f64>> {
    let alpha = cfg.alpha();
    let c = cfg.ratio();
    let k0 = cfg.first_power();
    let mut f = Array2::<f64>::zeros(x.raw_dim());
    let mut p = x.to_owned();
    for k in 0..=cfg.k {
        if k > 0 {
            p = t.op.apply(p.view())?;
            p.mapv_inplace(|v| v * c);
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite value in diffusion term at power k = {k}"
                )));
            }
        }
        if k >= k0 {
            f.scaled_add(alpha, &p);
        }
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite diffused features after power k = {}",
            cfg.k
        )));
    }
    Ok(f)
}

/// Explicit dense S, for small graphs.
pub fn materialize_s(t: &TransitionMatrix, cfg: &DiffusionConfig, cap: usize) -> Result<Array2<f64>> {
    check_consistent(t, cfg)?;
    let n = t.n();
    if n > cap {
        return Err(Error::Capacity {
            what: "dense diffusion matrix",
            n,
            cap,
            advice: None,
        });
    }
    diffuse_view(t, Array2::eye(n).view(), cfg)
}

/// Dense solve of `(I + λL̃ + λεXXᵀ/‖XXᵀ‖_F) F = X`.
pub fn closed_form_oracle(
    na: &NormalizedAdjacency,
    x: &FeatureMatrix,
    lambda: f64,
    epsilon: f64,
) -> Result<FeatureMatrix> {
    let n = na.n();
    if n > DENSE_VERIFY_CAP {
        return Err(Error::Capacity {
            what: "closed-form oracle",
            n,
            cap: DENSE_VERIFY_CAP,
            advice: None,
        });
    }
    if x.n() != n {
        return Err(Error::Shape(format!(
            "adjacency is {n}x{n}, features have {} rows",
            x.n()
        )));
    }
    let mut m = laplacian(na).to_dense();
    m.mapv_inplace(|v| lambda * v);
    for i in 0..n {
        m[[i, i]] += 1.0;
    }
    if epsilon != 0.0 {
        let phi = phi_option2(x, DENSE_VERIFY_CAP)?;
        m.scaled_add(lambda * epsilon, &phi);
    }
    let a = DMatrix::from_row_slice(n, n, m.as_standard_layout().as_slice().expect("standard layout"));
    let d = x.d();
    let b = DMatrix::from_row_slice(n, d, x.as_array().as_slice().expect("standard layout"));
    let singular = || {
        let smin = a.clone().singular_values().min();
        Error::Numeric(format!(
            "closed-form system is singular (smallest singular value {smin:e})"
        ))
    };
    let sol = a.clone().lu().solve(&b).ok_or_else(singular)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(singular());
    }
    let out = Array2::from_shape_fn((n, d), |(i, j)| sol[(i, j)]);
    Ok(FeatureMatrix::from_trusted(out))
}

/// `‖F − S·X‖_F` with S built from the given transition.
pub fn residual_norm(f: &FeatureMatrix, t: &TransitionMatrix, x: &FeatureMatrix, cfg: &DiffusionConfig) -> Result<f64> {
    if f.as_array().dim() != x.as_array().dim() {
        return Err(Error::Shape(format!(
            "candidate is {:?}, features are {:?}",
            f.as_array().dim(),
            x.as_array().dim()
        )));
    }
    let sx = diffuse_features(t, x, cfg)?;
    Ok(frobenius((f.as_array() - sx.as_array()).view()))
}

/// Residual of the self-consistent equation: Φ is built from the candidate
/// `F` itself, `T(F) = 𝒜̃ − εΦ(F)`, and the result is `‖F − S(F)·X‖_F`.
///
/// This is the quantity that separates a good approximate solution from a
/// random matrix; [`residual_norm`] with `T` built from `X` is zero by
/// construction at `F = S·X`.
pub fn self_consistency_residual(
    g: &Graph,
    na: &NormalizedAdjacency,
    f: &FeatureMatrix,
    x: &FeatureMatrix,
    cfg: &DiffusionConfig,
    dense_cap: usize,
) -> Result<f64> {
    let t = match cfg.option {
        TransitionOption::Plain => TransitionMatrix::plain(na),
        TransitionOption::OptionIV => crate::transition::reconstruct_option4(g, f)?,
        option => {
            let phi = compute_phi(option, g, f, dense_cap)?;
            build_transition(na, phi.as_ref(), cfg.epsilon, option)?
        }
    };
    residual_norm(f, &t, x, cfg)
}

/// `τ_i = n Σ_j s_ij² / (Σ_j s_ij)²` and `τ = max_i τ_i`.
pub fn connectivity_factor(s: ArrayView2<'_, f64>) -> Result<(f64, Vec<f64>)> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::Shape(format!("S must be square, got {:?}", s.dim())));
    }
    if n == 0 {
        return Err(Error::Domain("connectivity factor of an empty matrix".into()));
    }
    if let Some(((i, j), v)) = s.indexed_iter().find(|(_, &v)| v < 0.0) {
        return Err(Error::Domain(format!(
            "connectivity factor needs a nonnegative S, found S[{i},{j}] = {v:e}"
        )));
    }
    let mut per_node = Vec::with_capacity(n);
    for (i, row) in s.rows().into_iter().enumerate() {
        let sum: f64 = row.sum();
        if sum <= 0.0 {
            return Err(Error::Domain(format!("row {i} of S sums to zero")));
        }
        let sq: f64 = row.iter().map(|v| v * v).sum();
        per_node.push(n as f64 * sq / (sum * sum));
    }
    let tau = per_node.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((tau, per_node))
}

/// `2τβ²σ²(4 ln n + ln 2d)/n`
pub fn noise_bound(n: usize, d: usize, tau: f64, lambda: f64, k: usize, sigma: f64) -> f64 {
    let b = beta(lambda, k);
    let n = n as f64;
    2.0 * tau * b * b * sigma * sigma * (4.0 * n.ln() + (2.0 * d as f64).ln()) / n
}

/// One Monte-Carlo draw of `Υ ~ N(0, σ²)^{n×d}` pushed through S.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrial {
    /// `‖SΥ‖_F²`
    pub diffused_sq: f64,
    /// `‖Υ‖_F²`
    pub raw_sq: f64,
    /// `max_ij [SΥ]_ij²`
    pub max_entry_sq: f64,
}

/// Per-trial statistics; trial `r` draws from its own derived stream, so the
/// result does not depend on scheduling.
pub fn empirical_noise_trials(
    t: &TransitionMatrix,
    cfg: &DiffusionConfig,
    d: usize,
    sigma: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<NoiseTrial>> {
    check_consistent(t, cfg)?;
    let n = t.n();
    (0..trials)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_indexed(seed, Stream::MonteCarlo, r as u64);
            let noise = Array2::from_shape_simple_fn((n, d), || {
                let z: f64 = StandardNormal.sample(&mut rng);
                sigma * z
            });
            let sy = diffuse_view(t, noise.view(), cfg)?;
            let mut diffused_sq = 0.0;
            let mut max_entry_sq = 0.0f64;
            Zip::from(&sy).for_each(|&v| {
                diffused_sq += v * v;
                max_entry_sq = max_entry_sq.max(v * v);
            });
            Ok(NoiseTrial {
                diffused_sq,
                raw_sq: noise.iter().map(|v| v * v).sum(),
                max_entry_sq,
            })
        })
        .collect()
}

/// `‖SΥ‖_F²` for each trial.
pub fn empirical_noise_norm(
    t: &TransitionMatrix,
    cfg: &DiffusionConfig,
    d: usize,
    sigma: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    Ok(empirical_noise_trials(t, cfg, d, sigma, trials, seed)?
        .into_iter()
        .map(|tr| tr.diffused_sq)
        .collect())
}

/// Plain row-stochastic transition on `g`, the regime where the row-sum
/// identity holds.
pub fn plain_row_stochastic(g: &Graph) -> (NormalizedAdjacency, TransitionMatrix) {
    let na = crate::graph::normalize(g, NormKind::RowStochastic);
    let t = TransitionMatrix::plain(&na);
    (na, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{load_graph, normalize};
    use crate::sparse::CsrMatrix;
    use crate::transition::Operator;
    use ndarray::array;

    fn cfg(lambda: f64, k: usize) -> DiffusionConfig {
        DiffusionConfig {
            lambda,
            k,
            ..Default::default()
        }
    }

    fn identity_t(n: usize) -> TransitionMatrix {
        TransitionMatrix {
            op: Operator::Sparse(CsrMatrix::identity(n)),
            option: TransitionOption::Plain,
            epsilon: 0.0,
            base_kind: NormKind::RowStochastic,
        }
    }

    #[test]
    fn zeroth_order_only() {
        let x = FeatureMatrix::new(array![[3.0, -1.0], [0.5, 2.0]]).unwrap();
        let f = diffuse_features(&identity_t(2), &x, &cfg(2.0, 0)).unwrap();
        assert_eq!(f.as_array(), &(x.as_array() / 3.0));
    }

    #[test]
    fn identity_operator_scales_by_beta() {
        let x = FeatureMatrix::new(array![[1.0], [2.0], [-4.0]]).unwrap();
        let c = cfg(32.0, 16);
        let f = diffuse_features(&identity_t(3), &x, &c).unwrap();
        let b = 1.0 - (32.0f64 / 33.0).powi(17);
        for (a, e) in f.as_array().iter().zip(x.as_array().iter()) {
            assert!((a - b * e).abs() < 1e-14);
        }
    }

    #[test]
    fn two_term_path_expansion() {
        let g = load_graph("0\t1\n1\t2\n".as_bytes(), 3, "p").unwrap();
        let na = normalize(&g, NormKind::RowStochastic);
        let t = TransitionMatrix::plain(&na);
        let x = FeatureMatrix::new(array![[1.0], [0.0], [0.0]]).unwrap();
        let mut c = cfg(1.0, 1);
        c.kind = NormKind::RowStochastic;
        let f = diffuse_features(&t, &x, &c).unwrap();
        assert!((f.as_array()[[1, 0]] - 0.25 / 3.0).abs() < 1e-15);
        assert!((f.as_array()[[0, 0]] - (0.5 + 0.25 * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn single_isolated_node_s_is_beta() {
        let na = normalize(&Graph::empty(1), NormKind::RowStochastic);
        let s = materialize_s(&TransitionMatrix::plain(&na), &cfg(4.0, 3), 10).unwrap();
        assert!((s[[0, 0]] - beta(4.0, 3)).abs() < 1e-15);
    }

    #[test]
    fn materialize_respects_cap() {
        let na = normalize(&Graph::empty(5), NormKind::Symmetric);
        let err = materialize_s(&TransitionMatrix::plain(&na), &cfg(1.0, 1), 4).unwrap_err();
        assert!(matches!(err, Error::Capacity { n: 5, cap: 4, .. }));
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0.0, 1).validate().is_err());
        let mut c = cfg(1.0, 1);
        c.drop_low_order = true;
        assert!(c.validate().is_err());
        c.k = 2;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn option_mismatch_is_rejected() {
        let na = normalize(&Graph::empty(2), NormKind::Symmetric);
        let mut c = cfg(1.0, 1);
        c.option = TransitionOption::OptionI;
        let x = FeatureMatrix::zeros(2, 1);
        assert!(diffuse_features(&TransitionMatrix::plain(&na), &x, &c).is_err());
    }

    #[test]
    fn overflow_names_the_power() {
        let t = TransitionMatrix {
            op: Operator::Dense(array![[1e300]]),
            option: TransitionOption::Plain,
            epsilon: 0.0,
            base_kind: NormKind::Symmetric,
        };
        let x = FeatureMatrix::new(array![[1.0]]).unwrap();
        let err = diffuse_features(&t, &x, &cfg(1.0, 5)).unwrap_err();
        assert!(err.to_string().contains("k = 2"), "{err}");
    }

    #[test]
    fn oracle_on_single_node_returns_x() {
        let na = normalize(&Graph::empty(1), NormKind::Symmetric);
        let x = FeatureMatrix::new(array![[2.5, -1.0]]).unwrap();
        let f = closed_form_oracle(&na, &x, 7.0, 0.0).unwrap();
        assert!((f.as_array() - x.as_array()).iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn oracle_reports_singular_system() {
        let g = Graph::from_edges(2, [(0, 1, 1.0)]).unwrap();
        let na = normalize(&g, NormKind::Symmetric);
        // L̃ has eigenvalues 0 and 1, so λ = −1 makes I + λL̃ singular.
        let err = closed_form_oracle(&na, &FeatureMatrix::new(array![[1.0], [0.0]]).unwrap(), -1.0, 0.0).unwrap_err();
        assert!(err.to_string().contains("singular"), "{err}");
    }

    #[test]
    fn tau_extremes() {
        let (tau, per) = connectivity_factor(Array2::<f64>::eye(4).view()).unwrap();
        assert_eq!(tau, 4.0);
        assert_eq!(per, vec![4.0; 4]);
        let (tau, _) = connectivity_factor(Array2::<f64>::from_elem((3, 3), 0.2).view()).unwrap();
        assert!((tau - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tau_rejects_negative_and_zero_rows() {
        assert!(matches!(
            connectivity_factor(array![[1.0, -0.1], [0.0, 1.0]].view()),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            connectivity_factor(array![[0.0, 0.0], [0.0, 1.0]].view()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn noise_bound_scaling() {
        let a = noise_bound(100, 10, 1.0, 32.0, 16, 1.0);
        let b = noise_bound(100, 10, 1.0, 32.0, 16, 2.0);
        assert!((b / a - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_sigma_gives_zero_norms() {
        let na = normalize(&Graph::empty(3), NormKind::RowStochastic);
        let v = empirical_noise_norm(&TransitionMatrix::plain(&na), &cfg(1.0, 2), 2, 0.0, 5, 9).unwrap();
        assert_eq!(v, vec![0.0; 5]);
    }

    #[test]
    fn report_json_shape() {
        let r = DiffusionReport {
            beta: 0.5,
            ..Default::default()
        };
        assert_eq!(serde_json::to_string(&r).unwrap(), r#"{"beta":0.5,"tau":null}"#);
    }
}
