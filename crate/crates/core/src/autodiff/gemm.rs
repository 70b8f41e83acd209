//! Strided `f64` matrix multiply backed by `matrixmultiply`.

#[derive(Clone, Copy, Debug)]
pub(crate) struct Layout {
    row_stride: isize,
    col_stride: isize,
}

impl Layout {
    /// Row-major storage with `cols` columns.
    pub fn row_major(cols: usize) -> Self {
        Self {
            row_stride: cols as isize,
            col_stride: 1,
        }
    }

    /// Transposed view of a row-major matrix that has `stored_cols` columns.
    pub fn transposed(stored_cols: usize) -> Self {
        Self {
            row_stride: 1,
            col_stride: stored_cols as isize,
        }
    }
}

/// `c = a @ b + beta * c` where `a` is `m x k`, `b` is `k x n` and `c` is row-major `m x n`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    la: Layout,
    b: &[f64],
    lb: Layout,
    c: &mut [f64],
    beta: f64,
) {
    assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || a.len() >= m * k && b.len() >= k * n);
    // SAFETY: extents and strides describe memory inside the checked slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            la.row_stride,
            la.col_stride,
            b.as_ptr(),
            lb.row_stride,
            lb.col_stride,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
