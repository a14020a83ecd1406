use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Dense `n × d` node feature matrix; row `i` belongs to node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(Array2<f64>);

impl FeatureMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let d = values.ncols().max(1);
            return Err(Error::Numeric(format!(
                "non-finite feature at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self(values.as_standard_layout().into_owned()))
    }

    /// Wraps without the finiteness scan. Callers guarantee finite input.
    pub(crate) fn from_trusted(values: Array2<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self(values)
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        Self(Array2::zeros((n, d)))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn d(&self) -> usize {
        self.0.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(self.0.view())
    }

    /// Euclidean norm of every row.
    pub fn row_norms(&self) -> Vec<f64> {
        self.0.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect()
    }

    pub fn is_binary(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

pub(crate) fn frobenius(m: ArrayView2<'_, f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Scales every nonzero row to unit L1 norm; all-zero rows are left alone.
pub fn row_normalize_features(x: &FeatureMatrix) -> FeatureMatrix {
    let mut out = x.0.clone();
    for mut row in out.rows_mut() {
        let l1: f64 = row.iter().map(|v| v.abs()).sum();
        if l1 > 0.0 {
            row.mapv_inplace(|v| v / l1);
        }
    }
    FeatureMatrix(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn row_normalization_examples() {
        let x = FeatureMatrix::new(array![[2.0, 2.0, 0.0], [0.0, 0.0, 0.0], [1.0, -1.0, 2.0]]).unwrap();
        let y = row_normalize_features(&x);
        assert_eq!(y.as_array().row(0).to_vec(), vec![0.5, 0.5, 0.0]);
        assert_eq!(y.as_array().row(1).to_vec(), vec![0.0, 0.0, 0.0]);
        assert_eq!(y.as_array().row(2).to_vec(), vec![0.25, -0.25, 0.5]);
    }

    #[test]
    fn rejects_non_finite() {
        let err = FeatureMatrix::new(array![[1.0, f64::NAN]]).unwrap_err();
        assert!(err.to_string().contains("column 1"));
    }
}
