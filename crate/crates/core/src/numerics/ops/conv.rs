//! Channels-last convolutions.
//!
//! A 1-D convolution runs along one axis of a tensor whose last axis holds
//! channels. The tensor is viewed as `(outer, len, mid, channels)`, where
//! `mid` collects the axes between the convolved axis and the channel axis,
//! so e.g. a frequency convolution of `[B, F, T, C]` broadcasts over time.
//! Weights are laid out `[K, C_in, C_out]`.

use super::super::graph::{Graph, Var};
use super::super::linalg::{gemm_acc, MatRef};
use super::super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Geom {
    outer: usize,
    len_in: usize,
    len_out: usize,
    mid: usize,
    cin: usize,
    cout: usize,
    k: usize,
    stride: usize,
    pad_left: usize,
}

impl Geom {
    /// Output positions `p` whose tap `k` lands inside the input.
    fn p_range(&self, k: usize) -> (usize, usize) {
        let lo = if self.pad_left > k { (self.pad_left - k).div_ceil(self.stride) } else { 0 };
        let hi_num = self.len_in + self.pad_left;
        let hi = if hi_num > k { ((hi_num - 1 - k) / self.stride + 1).min(self.len_out) } else { 0 };
        (lo, hi.max(lo))
    }

    fn l_of(&self, p: usize, k: usize) -> usize {
        p * self.stride + k - self.pad_left
    }

    fn x_at(&self, o: usize, l: usize, m: usize) -> usize {
        ((o * self.len_in + l) * self.mid + m) * self.cin
    }

    fn y_at(&self, o: usize, p: usize, m: usize) -> usize {
        ((o * self.len_out + p) * self.mid + m) * self.cout
    }

    fn w_k<'a>(&self, w: &'a [f64], k: usize) -> MatRef<'a> {
        MatRef::dense(&w[k * self.cin * self.cout..(k + 1) * self.cin * self.cout], self.cin, self.cout)
    }

    /// Loop over `m` inside the GEMM rows when it is at least as long as the
    /// output sequence; otherwise use strided rows over `p`.
    fn rows_over_mid(&self) -> bool {
        self.mid >= self.len_out
    }
}

/// `y[o,p] += x[o,l] · W[k]`
fn conv_fwd(g: &Geom, x: &[f64], w: &[f64], y: &mut [f64]) {
    for o in 0..g.outer {
        for k in 0..g.k {
            let (p0, p1) = g.p_range(k);
            if p0 >= p1 {
                continue;
            }
            let wk = g.w_k(w, k);
            if g.rows_over_mid() {
                for p in p0..p1 {
                    let xi = g.x_at(o, g.l_of(p, k), 0);
                    let a = MatRef::dense(&x[xi..xi + g.mid * g.cin], g.mid, g.cin);
                    let yi = g.y_at(o, p, 0);
                    gemm_acc(a, wk, &mut y[yi..], g.cout, 1);
                }
            } else {
                for m in 0..g.mid {
                    let xi = g.x_at(o, g.l_of(p0, k), m);
                    let a = MatRef { data: &x[xi..], rows: p1 - p0, cols: g.cin, rs: g.stride * g.mid * g.cin, cs: 1 };
                    let yi = g.y_at(o, p0, m);
                    gemm_acc(a, wk, &mut y[yi..], g.mid * g.cout, 1);
                }
            }
        }
    }
}

/// `dx[o,l] += dy[o,p] · W[k]ᵀ`
fn conv_bwd_data(g: &Geom, dy: &[f64], w: &[f64], dx: &mut [f64]) {
    for o in 0..g.outer {
        for k in 0..g.k {
            let (p0, p1) = g.p_range(k);
            if p0 >= p1 {
                continue;
            }
            let wkt = g.w_k(w, k).t();
            if g.rows_over_mid() {
                for p in p0..p1 {
                    let yi = g.y_at(o, p, 0);
                    let a = MatRef::dense(&dy[yi..yi + g.mid * g.cout], g.mid, g.cout);
                    let xi = g.x_at(o, g.l_of(p, k), 0);
                    gemm_acc(a, wkt, &mut dx[xi..], g.cin, 1);
                }
            } else {
                for m in 0..g.mid {
                    let yi = g.y_at(o, p0, m);
                    let a = MatRef { data: &dy[yi..], rows: p1 - p0, cols: g.cout, rs: g.mid * g.cout, cs: 1 };
                    let xi = g.x_at(o, g.l_of(p0, k), m);
                    gemm_acc(a, wkt, &mut dx[xi..], g.stride * g.mid * g.cin, 1);
                }
            }
        }
    }
}

/// `dW[k] += x[o,l]ᵀ · dy[o,p]`
fn conv_bwd_weight(g: &Geom, x: &[f64], dy: &[f64], dw: &mut [f64]) {
    for o in 0..g.outer {
        for k in 0..g.k {
            let (p0, p1) = g.p_range(k);
            if p0 >= p1 {
                continue;
            }
            let dwk = &mut dw[k * g.cin * g.cout..(k + 1) * g.cin * g.cout];
            if g.rows_over_mid() {
                for p in p0..p1 {
                    let xi = g.x_at(o, g.l_of(p, k), 0);
                    let a = MatRef::dense(&x[xi..xi + g.mid * g.cin], g.mid, g.cin).t();
                    let yi = g.y_at(o, p, 0);
                    let b = MatRef::dense(&dy[yi..yi + g.mid * g.cout], g.mid, g.cout);
                    gemm_acc(a, b, dwk, g.cout, 1);
                }
            } else {
                for m in 0..g.mid {
                    let xi = g.x_at(o, g.l_of(p0, k), m);
                    let a = MatRef { data: &x[xi..], rows: p1 - p0, cols: g.cin, rs: g.stride * g.mid * g.cin, cs: 1 };
                    let yi = g.y_at(o, p0, m);
                    let b = MatRef { data: &dy[yi..], rows: p1 - p0, cols: g.cout, rs: g.mid * g.cout, cs: 1 };
                    gemm_acc(a.t(), b, dwk, g.cout, 1);
                }
            }
        }
    }
}

/// Splits `shape` for a convolution along `axis` with channels last.
fn layout(op: &'static str, shape: &[usize], axis: usize) -> Result<(usize, usize, usize, usize)> {
    if shape.len() < 2 || axis + 1 >= shape.len() {
        return Err(Error::shape(op, format!("axis {axis} must precede the channel axis of {shape:?}")));
    }
    let outer = shape[..axis].iter().product();
    let mid = shape[axis + 1..shape.len() - 1].iter().product();
    Ok((outer, shape[axis], mid, shape[shape.len() - 1]))
}

fn kernel_dims(op: &'static str, w: &Tensor) -> Result<(usize, usize, usize)> {
    match *w.shape() {
        [k, cin, cout] if k > 0 => Ok((k, cin, cout)),
        _ => Err(Error::shape(op, format!("kernel must be [K, C_in, C_out], got {:?}", w.shape()))),
    }
}

/// Output length of a strided convolution, if at least one position fits.
pub fn conv_out_len(len: usize, k: usize, stride: usize, pad_left: usize, pad_right: usize) -> Option<usize> {
    let padded = len + pad_left + pad_right;
    (stride >= 1 && padded >= k).then(|| (padded - k) / stride + 1)
}

impl Graph {
    /// Cross-correlation along `axis` with zero padding on both sides.
    pub fn conv1d(
        &mut self,
        x: Var,
        kernel: Var,
        axis: usize,
        stride: usize,
        pad_left: usize,
        pad_right: usize,
    ) -> Result<Var> {
        const OP: &str = "conv1d";
        let (outer, len_in, mid, cin) = layout(OP, self.shape(x), axis)?;
        let (k, kcin, cout) = kernel_dims(OP, self.value(kernel))?;
        if kcin != cin {
            return Err(Error::shape(OP, format!("input has {cin} channels, kernel expects {kcin}")));
        }
        if stride == 0 {
            return Err(Error::dim(OP, "stride must be >= 1"));
        }
        let len_out = conv_out_len(len_in, k, stride, pad_left, pad_right)
            .ok_or_else(|| Error::dim(OP, format!("length {len_in} + padding is shorter than kernel {k}")))?;
        let g = Geom { outer, len_in, len_out, mid, cin, cout, k, stride, pad_left };
        let mut shape = self.shape(x).to_vec();
        shape[axis] = len_out;
        *shape.last_mut().unwrap() = cout;
        let mut y = Tensor::zeros(&shape);
        conv_fwd(&g, self.value(x).data(), self.value(kernel).data(), y.data_mut());
        self.push(OP, y, &[x, kernel], || {
            Box::new(move |ctx| {
                let (xv, wv) = (ctx.inputs[0].data(), ctx.inputs[1].data());
                let dx = ctx.needs[0].then(|| {
                    let mut dx = vec![0.0; xv.len()];
                    conv_bwd_data(&g, ctx.grad, wv, &mut dx);
                    dx
                });
                let dw = ctx.needs[1].then(|| {
                    let mut dw = vec![0.0; wv.len()];
                    conv_bwd_weight(&g, xv, ctx.grad, &mut dw);
                    dw
                });
                vec![dx, dw]
            })
        })
    }

    /// Adjoint of [`Graph::conv1d`] (no left padding) with the result cropped
    /// or zero-extended to `target_len`. The kernel is the forward
    /// convolution's `[K, C_in, C_out]`; this maps `C_out` channels to `C_in`.
    pub fn conv1d_transposed(
        &mut self,
        x: Var,
        kernel: Var,
        axis: usize,
        stride: usize,
        target_len: usize,
    ) -> Result<Var> {
        const OP: &str = "conv1d_transposed";
        let (outer, len_out, mid, cout) = layout(OP, self.shape(x), axis)?;
        let (k, cin, kcout) = kernel_dims(OP, self.value(kernel))?;
        if kcout != cout {
            return Err(Error::shape(OP, format!("input has {cout} channels, kernel expects {kcout}")));
        }
        if stride == 0 {
            return Err(Error::dim(OP, "stride must be >= 1"));
        }
        // target_len must be a length that some right padding in [0, K) maps
        // forward onto exactly `len_out` positions.
        let consistent = target_len >= 1 && (0..k).any(|r| conv_out_len(target_len, k, stride, 0, r) == Some(len_out));
        if !consistent {
            return Err(Error::dim(
                OP,
                format!("target length {target_len} does not invert {len_out} positions at stride {stride}, kernel {k}"),
            ));
        }
        let g = Geom { outer, len_in: target_len, len_out, mid, cin, cout, k, stride, pad_left: 0 };
        let mut shape = self.shape(x).to_vec();
        shape[axis] = target_len;
        *shape.last_mut().unwrap() = cin;
        let mut y = Tensor::zeros(&shape);
        conv_bwd_data(&g, self.value(x).data(), self.value(kernel).data(), y.data_mut());
        self.push(OP, y, &[x, kernel], || {
            Box::new(move |ctx| {
                let (xv, wv) = (ctx.inputs[0].data(), ctx.inputs[1].data());
                let dx = ctx.needs[0].then(|| {
                    let mut dx = vec![0.0; xv.len()];
                    conv_fwd(&g, ctx.grad, wv, &mut dx);
                    dx
                });
                let dw = ctx.needs[1].then(|| {
                    let mut dw = vec![0.0; wv.len()];
                    conv_bwd_weight(&g, ctx.grad, xv, &mut dw);
                    dw
                });
                vec![dx, dw]
            })
        })
    }

    /// Stride-1, same-padded 2-D convolution over axes 1 and 2 of a
    /// `[B, H, W, C_in]` tensor with a `[KH, KW, C_in, C_out]` kernel (odd sizes).
    pub fn conv2d_same(&mut self, x: Var, kernel: Var) -> Result<Var> {
        const OP: &str = "conv2d_same";
        let (b, h, w, cin) = match *self.shape(x) {
            [b, h, w, c] => (b, h, w, c),
            ref s => return Err(Error::shape(OP, format!("expected rank-4 input, got {s:?}"))),
        };
        let (kh, kw, kcin, cout) = match *self.value(kernel).shape() {
            [kh, kw, ci, co] if kh % 2 == 1 && kw % 2 == 1 => (kh, kw, ci, co),
            ref s => return Err(Error::shape(OP, format!("kernel must be [odd, odd, C_in, C_out], got {s:?}"))),
        };
        if kcin != cin {
            return Err(Error::shape(OP, format!("input has {cin} channels, kernel expects {kcin}")));
        }
        let g = Geom2 { b, h, w, cin, cout, kh, kw };
        let mut y = Tensor::zeros(&[b, h, w, cout]);
        g.visit(|xi, yi, wi, rows| {
            let a = MatRef::dense(&self.value(x).data()[xi..xi + rows * cin], rows, cin);
            let wk = MatRef::dense(&self.value(kernel).data()[wi..wi + cin * cout], cin, cout);
            gemm_acc(a, wk, &mut y.data_mut()[yi..], cout, 1);
        });
        self.push(OP, y, &[x, kernel], || {
            Box::new(move |ctx| {
                let (xv, wv) = (ctx.inputs[0].data(), ctx.inputs[1].data());
                let dx = ctx.needs[0].then(|| {
                    let mut dx = vec![0.0; xv.len()];
                    g.visit(|xi, yi, wi, rows| {
                        let a = MatRef::dense(&ctx.grad[yi..yi + rows * cout], rows, cout);
                        let wk = MatRef::dense(&wv[wi..wi + cin * cout], cin, cout).t();
                        gemm_acc(a, wk, &mut dx[xi..], cin, 1);
                    });
                    dx
                });
                let dw = ctx.needs[1].then(|| {
                    let mut dw = vec![0.0; wv.len()];
                    g.visit(|xi, yi, wi, rows| {
                        let a = MatRef::dense(&xv[xi..xi + rows * cin], rows, cin).t();
                        let d = MatRef::dense(&ctx.grad[yi..yi + rows * cout], rows, cout);
                        gemm_acc(a, d, &mut dw[wi..], cout, 1);
                    });
                    dw
                });
                vec![dx, dw]
            })
        })
    }

    /// `x · W` over the last axis with `W: [C_in, C_out]`.
    pub fn linear(&mut self, x: Var, weight: Var) -> Result<Var> {
        const OP: &str = "linear";
        let xs = self.shape(x).to_vec();
        let (cin, cout) = match *self.value(weight).shape() {
            [ci, co] => (ci, co),
            ref s => return Err(Error::shape(OP, format!("weight must be [C_in, C_out], got {s:?}"))),
        };
        if xs.last() != Some(&cin) {
            return Err(Error::shape(OP, format!("input {xs:?} vs weight [{cin}, {cout}]")));
        }
        let rows = self.value(x).numel() / cin;
        let mut shape = xs;
        *shape.last_mut().unwrap() = cout;
        let mut y = Tensor::zeros(&shape);
        super::super::linalg::matmul_acc(self.value(x).data(), self.value(weight).data(), y.data_mut(), rows, cin, cout);
        self.push(OP, y, &[x, weight], || {
            Box::new(move |ctx| {
                let (xv, wv) = (ctx.inputs[0].data(), ctx.inputs[1].data());
                let dx = ctx.needs[0].then(|| {
                    let mut dx = vec![0.0; xv.len()];
                    let d = MatRef::dense(ctx.grad, rows, cout);
                    gemm_acc(d, MatRef::dense(wv, cin, cout).t(), &mut dx, cin, 1);
                    dx
                });
                let dw = ctx.needs[1].then(|| {
                    let mut dw = vec![0.0; wv.len()];
                    let d = MatRef::dense(ctx.grad, rows, cout);
                    gemm_acc(MatRef::dense(xv, rows, cin).t(), d, &mut dw, cout, 1);
                    dw
                });
                vec![dx, dw]
            })
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Geom2 {
    b: usize,
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
    kh: usize,
    kw: usize,
}

impl Geom2 {
    /// Calls `f(x_offset, y_offset, w_offset, rows)` for each contiguous run
    /// of output columns sharing one kernel tap.
    fn visit(&self, mut f: impl FnMut(usize, usize, usize, usize)) {
        let (ph, pw) = (self.kh / 2, self.kw / 2);
        for b in 0..self.b {
            for h in 0..self.h {
                for th in 0..self.kh {
                    let Some(hi) = (h + th).checked_sub(ph).filter(|&v| v < self.h) else { continue };
                    for tw in 0..self.kw {
                        // output columns c with c + tw - pw in [0, w)
                        let c0 = pw.saturating_sub(tw);
                        let c1 = (self.w + pw).saturating_sub(tw).min(self.w);
                        if c0 >= c1 {
                            continue;
                        }
                        let xi = ((b * self.h + hi) * self.w + (c0 + tw - pw)) * self.cin;
                        let yi = ((b * self.h + h) * self.w + c0) * self.cout;
                        let wi = (th * self.kw + tw) * self.cin * self.cout;
                        f(xi, yi, wi, c1 - c0);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    fn seq(g: &mut Graph, v: &[f64]) -> Var {
        g.constant(Tensor::new(&[v.len(), 1], v.to_vec()).unwrap())
    }

    #[test]
    fn strided_pair_sum() {
        let mut g = Graph::new();
        let x = seq(&mut g, &[1.0, 2.0, 3.0, 4.0]);
        let w = g.constant(Tensor::new(&[2, 1, 1], vec![1.0, 1.0]).unwrap());
        let y = g.conv1d(x, w, 0, 2, 0, 0).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, 7.0]);
    }

    #[test]
    fn transposed_duplicates() {
        let mut g = Graph::new();
        let x = seq(&mut g, &[3.0, 7.0]);
        let w = g.constant(Tensor::new(&[2, 1, 1], vec![1.0, 1.0]).unwrap());
        let y = g.conv1d_transposed(x, w, 0, 2, 4).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, 3.0, 7.0, 7.0]);
        assert!(matches!(g.conv1d_transposed(x, w, 0, 2, 7), Err(Error::Dimension { .. })));
    }

    #[test]
    fn identity_kernel() {
        let mut g = Graph::new();
        let mut r = RngState::new(1);
        let x = g.constant(Tensor::randn(&[2, 6, 3, 1], &mut r));
        let w = g.constant(Tensor::ones(&[1, 1, 1]));
        let y = g.conv1d(x, w, 1, 1, 0, 0).unwrap();
        assert_eq!(g.value(y), g.value(x));
        let z = g.conv1d_transposed(x, w, 1, 1, 6).unwrap();
        assert_eq!(g.value(z), g.value(x));
    }

    #[test]
    fn too_short_is_dimension_error() {
        let mut g = Graph::new();
        let x = seq(&mut g, &[1.0, 2.0]);
        let w = g.constant(Tensor::ones(&[4, 1, 1]));
        assert!(matches!(g.conv1d(x, w, 0, 1, 0, 0), Err(Error::Dimension { .. })));
        let w2 = g.constant(Tensor::ones(&[1, 2, 1]));
        assert!(matches!(g.conv1d(x, w2, 0, 1, 0, 0), Err(Error::Shape { .. })));
    }

    /// Direct-loop reference for the two GEMM traversal orders.
    fn reference_conv(x: &Tensor, w: &Tensor, axis: usize, stride: usize, pl: usize, pr: usize) -> Tensor {
        let s = x.shape();
        let (outer, len, cin) = (s[..axis].iter().product::<usize>(), s[axis], *s.last().unwrap());
        let mid: usize = s[axis + 1..s.len() - 1].iter().product();
        let (k, _, cout) = (w.shape()[0], w.shape()[1], w.shape()[2]);
        let lo = (len + pl + pr - k) / stride + 1;
        let mut out = vec![0.0; outer * lo * mid * cout];
        for o in 0..outer {
            for p in 0..lo {
                for m in 0..mid {
                    for co in 0..cout {
                        let mut acc = 0.0;
                        for t in 0..k {
                            let l = (p * stride + t) as isize - pl as isize;
                            if l < 0 || l as usize >= len {
                                continue;
                            }
                            for ci in 0..cin {
                                acc += x.data()[((o * len + l as usize) * mid + m) * cin + ci]
                                    * w.data()[(t * cin + ci) * cout + co];
                            }
                        }
                        out[((o * lo + p) * mid + m) * cout + co] = acc;
                    }
                }
            }
        }
        let mut shape = s.to_vec();
        shape[axis] = lo;
        *shape.last_mut().unwrap() = cout;
        Tensor::new(&shape, out).unwrap()
    }

    #[test]
    fn matches_direct_loops_in_both_traversals() {
        let mut r = RngState::new(9);
        // mid >= len_out and mid < len_out
        for &(shape, axis) in &[(&[2usize, 7, 9, 3][..], 1usize), (&[2, 3, 11, 2][..], 2)] {
            for &(k, stride, pl, pr) in &[(3, 1, 1, 1), (4, 4, 0, 1), (2, 3, 2, 0)] {
                let x = Tensor::randn(shape, &mut r);
                let w = Tensor::randn(&[k, shape[3], 5], &mut r);
                let mut g = Graph::new();
                let (xv, wv) = (g.constant(x.clone()), g.constant(w.clone()));
                let y = g.conv1d(xv, wv, axis, stride, pl, pr).unwrap();
                let want = reference_conv(&x, &w, axis, stride, pl, pr);
                assert!(g.value(y).max_abs_diff(&want) < 1e-12);
            }
        }
    }

    #[test]
    fn conv2d_center_tap_is_pointwise() {
        let mut r = RngState::new(4);
        let mut g = Graph::new();
        let x = g.constant(Tensor::randn(&[1, 4, 5, 2], &mut r));
        let mut k = Tensor::zeros(&[3, 3, 2, 2]);
        // centre tap identity
        k.data_mut()[(4 * 2) * 2] = 1.0;
        k.data_mut()[(4 * 2 + 1) * 2 + 1] = 1.0;
        let kv = g.constant(k);
        let y = g.conv2d_same(x, kv).unwrap();
        assert!(g.value(y).max_abs_diff(g.value(x)) < 1e-15);
    }
}
