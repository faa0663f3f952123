//! Numerically stabilized activation and normalization functions.

use crate::tensor::Tensor2D;

/// Row-wise softmax, stabilized by subtracting each row's maximum.
pub fn softmax(logits: &Tensor2D) -> Tensor2D {
    let cols = logits.cols();
    let mut data = Vec::with_capacity(logits.rows() * cols);
    for i in 0..logits.rows() {
        let row = logits.row(i);
        let m = row_max(row);
        let exps: Vec<f64> = row.iter().map(|&v| (v - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        data.extend(exps.into_iter().map(|e| e / z));
    }
    Tensor2D::from_raw(logits.rows(), cols, data)
}

/// Row-wise log-softmax: `x - logsumexp(x)` per row.
pub fn log_softmax(logits: &Tensor2D) -> Tensor2D {
    let cols = logits.cols();
    let mut data = Vec::with_capacity(logits.rows() * cols);
    for i in 0..logits.rows() {
        let row = logits.row(i);
        let lse = logsumexp(row);
        data.extend(row.iter().map(|&v| v - lse));
    }
    Tensor2D::from_raw(logits.rows(), cols, data)
}

/// Elementwise logistic sigmoid.
pub fn sigmoid(logits: &Tensor2D) -> Tensor2D {
    logits.map(sigmoid_scalar)
}

#[inline]
pub fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Stabilized logsumexp of one slice.
pub fn logsumexp(row: &[f64]) -> f64 {
    let m = row_max(row);
    let s: f64 = row.iter().map(|&v| (v - m).exp()).sum();
    m + s.ln()
}

/// Stabilized logsumexp of every row.
pub fn logsumexp_rows(logits: &Tensor2D) -> Vec<f64> {
    (0..logits.rows()).map(|i| logsumexp(logits.row(i))).collect()
}

fn row_max(row: &[f64]) -> f64 {
    row.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_uniform_on_equal_logits() {
        let t = Tensor2D::new(1, 2, vec![0.0, 0.0]).unwrap();
        let s = softmax(&t);
        assert_eq!(s.data(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let t = Tensor2D::new(2, 3, vec![3.0, -1.0, 0.5, 100.0, 100.0, -50.0]).unwrap();
        let s = softmax(&t);
        for i in 0..2 {
            let sum: f64 = s.row(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(s.row(i).iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn sigmoid_midpoint_and_range() {
        assert_eq!(sigmoid_scalar(0.0), 0.5);
        // Strictly inside (0, 1) until f64 saturates (around |v| = 37).
        for v in [-36.0, -3.0, 0.1, 10.0, 36.0] {
            let s = sigmoid_scalar(v);
            assert!(s > 0.0 && s < 1.0, "sigmoid({v}) = {s}");
        }
        for v in [-700.0, 700.0] {
            let s = sigmoid_scalar(v);
            assert!((0.0..=1.0).contains(&s) && s.is_finite());
        }
    }

    #[test]
    fn logsumexp_does_not_overflow() {
        assert!((logsumexp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        let t = Tensor2D::new(1, 2, vec![1000.0, 1000.0]).unwrap();
        assert!((logsumexp_rows(&t)[0] - 1000.0 - 2f64.ln()).abs() < 1e-12);
    }
}
