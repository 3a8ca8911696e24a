//! Strided GEMM wrapper around `matrixmultiply`.

/// A read-only strided matrix view: `rows × cols` starting at `data[0]`.
#[derive(Clone, Copy)]
pub(crate) struct MatRef<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

impl<'a> MatRef<'a> {
    /// Row-major contiguous matrix.
    pub fn dense(data: &'a [f64], rows: usize, cols: usize) -> Self {
        Self { data, rows, cols, rs: cols, cs: 1 }
    }

    pub fn t(self) -> Self {
        Self { data: self.data, rows: self.cols, cols: self.rows, rs: self.cs, cs: self.rs }
    }

    fn span(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            0
        } else {
            (self.rows - 1) * self.rs + (self.cols - 1) * self.cs + 1
        }
    }
}

/// `c += a · b` where `c` is a strided `a.rows × b.cols` view into `out`.
pub(crate) fn gemm_acc(a: MatRef<'_>, b: MatRef<'_>, out: &mut [f64], rsc: usize, csc: usize) {
    assert_eq!(a.cols, b.rows, "gemm inner dimension");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    assert!(a.span() <= a.data.len() && b.span() <= b.data.len(), "gemm operand out of bounds");
    assert!((m - 1) * rsc + (n - 1) * csc < out.len(), "gemm output out of bounds");
    // SAFETY: every element touched lies inside the slices, as asserted above,
    // and `out` does not alias the inputs (distinct borrows).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            1.0,
            out.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Dense `c += a · b` with all operands row-major contiguous.
pub(crate) fn matmul_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    gemm_acc(MatRef::dense(a, m, k), MatRef::dense(b, k, n), c, n, 1);
}
