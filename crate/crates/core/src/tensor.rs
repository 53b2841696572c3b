//! Dense row-major matrices and the value-level primitives shared by the
//! differentiable tape and the inference path.

use serde::{Deserialize, Serialize};

use crate::error::{HanError, Result};

/// Layer-norm epsilon used by every encoder layer.
pub const LN_EPS: f64 = 1e-5;

/// Row-major dense matrix of `f64`. Vectors are `1 x n` matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Mat {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(HanError::Dimension {
                op: "from_vec",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        Ok(Mat { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(HanError::Dimension {
                    op: "from_rows",
                    left: (1, cols),
                    right: (1, r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Mat {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn row_vector(data: Vec<f64>) -> Self {
        Mat {
            rows: 1,
            cols: data.len(),
            data,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Mat::row_vector(vec![value])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Scalar value of a `1 x 1` matrix.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(HanError::Dimension {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.cols {
            return Err(HanError::Dimension {
                op: "matmul_t",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = Mat::zeros(self.rows, other.rows);
        for r in 0..self.rows {
            let a = self.row(r);
            for c in 0..other.rows {
                out.data[r * other.rows + c] = dot(a, other.row(c));
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Mat) -> Result<Mat> {
        if self.rows != other.rows {
            return Err(HanError::Dimension {
                op: "t_matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = Mat::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let b = other.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &bv) in out_row.iter_mut().zip(b) {
                    *o += a * bv;
                }
            }
        }
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &Mat) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&self, s: f64) -> Mat {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Copies the selected rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Mat {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Mat {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.cols {
            return Err(HanError::Dimension {
                op: "vstack",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Mat {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    /// Places `other` to the right of `self`.
    pub fn hstack(&self, other: &Mat) -> Result<Mat> {
        if self.rows != other.rows {
            return Err(HanError::Dimension {
                op: "hstack",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(Mat {
            rows: self.rows,
            cols,
            data,
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out[r] = x[r]·W + b`.
pub fn linear(x: &Mat, w: &Mat, b: &[f64]) -> Result<Mat> {
    if b.len() != w.cols() {
        return Err(HanError::Dimension {
            op: "linear(bias)",
            left: w.shape(),
            right: (1, b.len()),
        });
    }
    let mut out = x.matmul(w)?;
    for r in 0..out.rows() {
        for (o, bv) in out.row_mut(r).iter_mut().zip(b) {
            *o += bv;
        }
    }
    Ok(out)
}

pub fn relu(x: &Mat) -> Mat {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Softmax over the unmasked positions; masked positions are exactly zero.
pub fn softmax_masked(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if logits.len() != mask.len() {
        return Err(HanError::Dimension {
            op: "softmax_masked",
            left: (1, logits.len()),
            right: (1, mask.len()),
        });
    }
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(HanError::DegenerateMask);
    }
    let mut out: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&l, &m)| if m { (l - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    Ok(out)
}

/// Normalization statistics of one vector: `(mean, 1/sqrt(var + eps))`.
pub(crate) fn ln_stats(x: &[f64], eps: f64) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, 1.0 / (var + eps).sqrt())
}

/// `gain ⊙ (x − mean) / sqrt(var + eps) + bias`, population variance.
pub fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64], eps: f64) -> Vec<f64> {
    assert!(
        x.len() == gain.len() && x.len() == bias.len(),
        "layer_norm length mismatch"
    );
    let (mean, inv_std) = ln_stats(x, eps);
    x.iter()
        .zip(gain.iter().zip(bias))
        .map(|(v, (g, b))| g * (v - mean) * inv_std + b)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn linear_examples() {
        let x = Mat::from_rows(&[[1.0, 2.0]]).unwrap();
        let eye = Mat::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(linear(&x, &eye, &[0.0, 0.0]).unwrap().data(), &[1.0, 2.0]);
        let zero = Mat::zeros(2, 2);
        assert_eq!(linear(&x, &zero, &[3.0, 4.0]).unwrap().data(), &[3.0, 4.0]);
        let x = Mat::from_rows(&[[1.0, 1.0]]).unwrap();
        let w = Mat::from_rows(&[[2.0, 1.0], [1.0, 3.0]]).unwrap();
        // [1+... ] = [2+1, 1+3] + [1, 1]
        assert_eq!(linear(&x, &w, &[1.0, 1.0]).unwrap().data(), &[4.0, 5.0]);
    }

    #[test]
    fn linear_shape_error_names_shapes() {
        let x = Mat::zeros(1, 3);
        let w = Mat::zeros(2, 2);
        let err = linear(&x, &w, &[0.0, 0.0]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(1, 3)") && msg.contains("(2, 2)"), "{msg}");
        assert!(linear(&Mat::zeros(1, 2), &w, &[0.0]).is_err());
    }

    #[test]
    fn relu_examples() {
        let x = Mat::row_vector(vec![-1.0, 0.0, 2.0]);
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let neg = Mat::row_vector(vec![-3.0, -0.5]);
        assert!(relu(&neg).data().iter().all(|&v| v == 0.0));
        let pos = Mat::row_vector(vec![0.25, 7.0]);
        assert_eq!(relu(&pos), pos);
    }

    #[test]
    fn softmax_examples() {
        let s = softmax_masked(&[0.0, 0.0, 0.0], &[true; 3]).unwrap();
        assert!(close(&s, &[1.0 / 3.0; 3], 1e-15));
        assert_eq!(softmax_masked(&[5.0], &[true]).unwrap(), vec![1.0]);
        let s = softmax_masked(&[0.7071, 0.0], &[true, true]).unwrap();
        assert!(close(&s, &[0.6698, 0.3302], 1e-4), "{s:?}");
    }

    #[test]
    fn softmax_mask_behaviour() {
        let s = softmax_masked(&[1.0, 100.0, 2.0], &[true, false, true]).unwrap();
        assert_eq!(s[1], 0.0);
        assert!((s[0] + s[2] - 1.0).abs() < 1e-12);
        assert!(matches!(
            softmax_masked(&[1.0, 2.0], &[false, false]),
            Err(HanError::DegenerateMask)
        ));
        assert!(softmax_masked(&[1.0], &[true, true]).is_err());
    }

    #[test]
    fn layer_norm_examples() {
        let ones = [1.0; 3];
        let zeros = [0.0; 3];
        let out = layer_norm(&[2.5, 2.5, 2.5], &ones, &zeros, LN_EPS);
        assert!(out.iter().all(|&v| v == 0.0));
        let out = layer_norm(&[1.0, -1.0], &[1.0; 2], &[0.0; 2], 1e-300);
        assert!(close(&out, &[1.0, -1.0], 1e-12));
        let out = layer_norm(&[1.0, 2.0, 3.0], &ones, &zeros, 0.0);
        assert!(close(&out, &[-1.2247, 0.0, 1.2247], 1e-4), "{out:?}");
    }

    #[test]
    fn matmul_variants_agree() {
        let a = Mat::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let b = Mat::from_rows(&[[1.0, 0.5], [-1.0, 2.0], [0.0, 1.0]]).unwrap();
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab.data(), &[-1.0, 7.5, -1.0, 18.0]);
        assert_eq!(a.matmul_t(&b.transpose()).unwrap(), ab);
        assert_eq!(a.transpose().t_matmul(&b).unwrap(), ab);
    }
}
