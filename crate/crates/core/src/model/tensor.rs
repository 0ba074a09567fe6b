use serde::{Deserialize, Serialize};

/// Dense row-major `f64` tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {shape:?} does not match {} elements",
            data.len()
        );
        Tensor { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![value; n],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Leading dimension; 1 for scalars.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            0 => 1,
            _ => self.shape[0],
        }
    }

    /// Product of all trailing dimensions.
    pub fn cols(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }
}

/// Strided matrix view handed to [`gemm`].
#[derive(Clone, Copy)]
pub(crate) struct Mat<'a> {
    pub data: &'a [f64],
    pub offset: usize,
    pub row_stride: usize,
    pub col_stride: usize,
}

impl<'a> Mat<'a> {
    pub fn rows(data: &'a [f64], offset: usize, row_stride: usize) -> Self {
        Mat {
            data,
            offset,
            row_stride,
            col_stride: 1,
        }
    }

    /// Transposed view of a row-major block.
    pub fn transposed(data: &'a [f64], offset: usize, row_stride: usize) -> Self {
        Mat {
            data,
            offset,
            row_stride: 1,
            col_stride: row_stride,
        }
    }
}

/// `C[m x n] = alpha * A[m x k] * B[k x n] + beta * C`, where `C` is a
/// row-major block of `out` starting at `c_offset` with row stride `c_rs`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: Mat<'_>,
    b: Mat<'_>,
    beta: f64,
    out: &mut [f64],
    c_offset: usize,
    c_rs: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    let span = |mat: &Mat<'_>, r: usize, c: usize| {
        mat.offset + (r.max(1) - 1) * mat.row_stride + (c.max(1) - 1) * mat.col_stride
    };
    assert!(k == 0 || span(&a, m, k) < a.data.len(), "gemm: A out of bounds");
    assert!(k == 0 || span(&b, k, n) < b.data.len(), "gemm: B out of bounds");
    assert!(c_offset + (m - 1) * c_rs + n - 1 < out.len(), "gemm: C out of bounds");
    if k == 0 {
        for i in 0..m {
            for v in &mut out[c_offset + i * c_rs..c_offset + i * c_rs + n] {
                *v *= beta;
            }
        }
        return;
    }
    // SAFETY: every element touched by the kernel lies inside the slices, as
    // checked by the bounds assertions above; `out` does not alias `a`/`b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr().add(a.offset),
            a.row_stride as isize,
            a.col_stride as isize,
            b.data.as_ptr().add(b.offset),
            b.row_stride as isize,
            b.col_stride as isize,
            beta,
            out.as_mut_ptr().add(c_offset),
            c_rs as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_naive_product_with_strides() {
        let a: Vec<f64> = (0..6).map(|v| v as f64 - 2.0).collect(); // 2 x 3
        let b: Vec<f64> = (0..12).map(|v| (v as f64 * 0.5).sin()).collect(); // 3 x 4
        let mut c = vec![1.0; 8];
        gemm(2, 3, 4, 2.0, Mat::rows(&a, 0, 3), Mat::rows(&b, 0, 4), 1.0, &mut c, 0, 4);
        for i in 0..2 {
            for j in 0..4 {
                let naive: f64 = (0..3).map(|t| a[i * 3 + t] * b[t * 4 + j]).sum();
                assert!((c[i * 4 + j] - (1.0 + 2.0 * naive)).abs() < 1e-12);
            }
        }
        // A^T (3 x 2) times a 2 x 4 block
        let mut d = vec![0.0; 12];
        gemm(3, 2, 4, 1.0, Mat::transposed(&a, 0, 3), Mat::rows(&c, 0, 4), 0.0, &mut d, 0, 4);
        for i in 0..3 {
            for j in 0..4 {
                let naive: f64 = (0..2).map(|t| a[t * 3 + i] * c[t * 4 + j]).sum();
                assert!((d[i * 4 + j] - naive).abs() < 1e-12);
            }
        }
    }
}
