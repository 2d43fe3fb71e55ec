//! Dense f64 kernels shared by the model, the risk estimator and the testbed.
//!
//! Everything here is single-threaded with a fixed accumulation order so that
//! two runs with the same inputs are bit-identical.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite matrix entry at {i}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let cols = self.cols;
        &mut self.data[r * cols..(r + 1) * cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// `self · x` for a column vector `x` of length `cols`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }
}

/// Standard matrix product with a fixed `k`-inner accumulation order.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::Shape(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for j in 0..b.cols {
            let mut acc = 0.0;
            for k in 0..a.cols {
                acc += a.data[i * a.cols + k] * b.data[k * b.cols + j];
            }
            out.data[i * b.cols + j] = acc;
        }
    }
    Ok(out)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// A probability distribution over a finite index set.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Wraps `values` after checking they form a distribution (sum within 1e-9).
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty distribution".into()));
        }
        if values.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidInput("probabilities must be finite and >= 0".into()));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("probabilities sum to {total}")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Result<ProbVector> {
    if logits.is_empty() {
        return Err(Error::InvalidInput("softmax of an empty vector".into()));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("softmax input must be finite".into()));
    }
    Ok(ProbVector(softmax_unchecked(logits)))
}

/// Softmax without the finiteness check. Callers guarantee finite input.
pub(crate) fn softmax_unchecked(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `p · ln p` with the `0 · ln 0 = 0` convention.
pub fn xlogx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// Normalizes `x` to zero mean and unit variance (population variance).
pub fn layer_norm(x: &[f64], eps: f64) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let denom = (var + eps).sqrt();
    if denom == 0.0 {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - mean) / denom).collect()
}

/// Layer norm followed by an elementwise affine transform.
pub fn layer_norm_affine(x: &[f64], gain: &[f64], bias: &[f64], eps: f64) -> Vec<f64> {
    layer_norm(x, eps)
        .into_iter()
        .zip(gain.iter().zip(bias))
        .map(|(v, (g, b))| v * g + b)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn softmax_symmetric_pair() {
        let p = softmax(&[0.0, 0.0]).unwrap();
        assert_eq!(p.values(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_large_equal_logits() {
        let p = softmax(&[1000.0, 1000.0, 1000.0]).unwrap();
        for v in p.values() {
            assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn softmax_ln2() {
        // e^{ln 2} / (e^{ln 2} + e^0) = 2/3
        let p = softmax(&[2f64.ln(), 0.0]).unwrap();
        assert_abs_diff_eq!(p.values()[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.values()[1], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn softmax_rejects_non_finite() {
        assert!(matches!(softmax(&[0.0, f64::NAN]), Err(Error::InvalidInput(_))));
        assert!(matches!(softmax(&[f64::INFINITY]), Err(Error::InvalidInput(_))));
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn argmax_lowest_index_tie() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0, 2.0]), 0);
    }

    #[test]
    fn matmul_cases() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![5.0], vec![6.0]]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.data(), &[17.0, 39.0]);

        assert_eq!(matmul(&Matrix::identity(2), &a).unwrap(), a);
        assert_eq!(matmul(&Matrix::zeros(2, 2), &a).unwrap(), Matrix::zeros(2, 2));
        assert!(matches!(matmul(&b, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn matrix_rejects_bad_data() {
        assert!(Matrix::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Matrix::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn layer_norm_cases() {
        assert_eq!(layer_norm(&[3.0, 3.0, 3.0], 1e-5), vec![0.0, 0.0, 0.0]);
        assert_eq!(layer_norm(&[0.0, 2.0], 0.0), vec![-1.0, 1.0]);
        let y = layer_norm(&[1.0, -1.0], 1e-12);
        assert_abs_diff_eq!(y[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(y[1], -1.0, epsilon = 1e-9);
        // zero variance with eps = 0
        assert_eq!(layer_norm(&[5.0, 5.0], 0.0), vec![0.0, 0.0]);
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(vec![0.5, 0.5]).is_ok());
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![-0.1, 1.1]).is_err());
    }

    #[test]
    fn log_sum_exp_matches_naive() {
        let xs = [0.1, -2.0, 3.5];
        let naive = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert_abs_diff_eq!(log_sum_exp(&xs), naive, epsilon = 1e-12);
        assert_abs_diff_eq!(log_sum_exp(&[1000.0, 1000.0]), 1000.0 + 2f64.ln(), epsilon = 1e-9);
    }
}
