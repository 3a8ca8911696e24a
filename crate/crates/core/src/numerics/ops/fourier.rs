//! Real-input DFT along one axis, as differentiable linear maps.
//!
//! Forward transform is unnormalized (`X_k = Σ x_n e^{-2πikn/L}`); the
//! inverse divides by `L`, so the pair round-trips exactly.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::super::graph::{Graph, Var};
use super::super::tensor::Tensor;
use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn fft_forward(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

pub(crate) fn fft_inverse(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Number of non-redundant bins for a length-`len` real signal.
pub fn half_len(len: usize) -> usize {
    len / 2 + 1
}

/// Weight of bin `k` when folding the half spectrum back to a full one.
fn fold_weight(k: usize, len: usize) -> f64 {
    if k == 0 || (len.is_multiple_of(2) && k == len / 2) {
        1.0
    } else {
        2.0
    }
}

/// Lines of a tensor along `axis`: `(outer, len, inner)`, with element
/// `(o, n, i)` at `(o·len + n)·inner + i`.
#[derive(Debug, Clone, Copy)]
struct Lines {
    outer: usize,
    inner: usize,
}

impl Lines {
    fn gather(&self, x: &[f64], len: usize) -> Vec<Complex64> {
        let mut buf = Vec::with_capacity(self.outer * self.inner * len);
        for o in 0..self.outer {
            for i in 0..self.inner {
                buf.extend((0..len).map(|n| Complex64::new(x[(o * len + n) * self.inner + i], 0.0)));
            }
        }
        buf
    }
}

/// Unnormalized real DFT of each line; returns `(re, im)` with `K = L/2+1`
/// entries per line, laid out like the input with `L` replaced by `K`.
fn rfft_lines(x: &[f64], lines: Lines, len: usize) -> (Vec<f64>, Vec<f64>) {
    let k = half_len(len);
    let mut buf = lines.gather(x, len);
    fft_forward(len).process(&mut buf);
    let mut re = vec![0.0; lines.outer * k * lines.inner];
    let mut im = vec![0.0; re.len()];
    for o in 0..lines.outer {
        for i in 0..lines.inner {
            let line = &buf[(o * lines.inner + i) * len..][..len];
            for (b, z) in line.iter().take(k).enumerate() {
                let dst = (o * k + b) * lines.inner + i;
                re[dst] = z.re;
                im[dst] = z.im;
            }
        }
    }
    (re, im)
}

/// `Re(Σ_{k<K} (a_k + i·b_k) e^{+2πikn/L})` per line: the adjoint of
/// [`rfft_lines`] applied to a gradient `(a, b)`.
fn rfft_adjoint_lines(a: &[f64], b: &[f64], lines: Lines, len: usize) -> Vec<f64> {
    let k = half_len(len);
    let mut buf = vec![Complex64::new(0.0, 0.0); lines.outer * lines.inner * len];
    for o in 0..lines.outer {
        for i in 0..lines.inner {
            let line = &mut buf[(o * lines.inner + i) * len..][..len];
            for (bin, z) in line.iter_mut().take(k).enumerate() {
                let src = (o * k + bin) * lines.inner + i;
                *z = Complex64::new(a[src], b[src]);
            }
        }
    }
    fft_inverse(len).process(&mut buf);
    scatter_real(&buf, lines, len, 1.0)
}

/// Inverse real DFT of half spectra (imaginary parts of DC and Nyquist are
/// ignored) to `len` samples per line.
fn irfft_lines(re: &[f64], im: &[f64], lines: Lines, len: usize) -> Vec<f64> {
    let k = half_len(len);
    let mut buf = vec![Complex64::new(0.0, 0.0); lines.outer * lines.inner * len];
    for o in 0..lines.outer {
        for i in 0..lines.inner {
            let line = &mut buf[(o * lines.inner + i) * len..][..len];
            for bin in 0..k {
                let src = (o * k + bin) * lines.inner + i;
                let self_conjugate = bin == 0 || (len.is_multiple_of(2) && bin == len / 2);
                let z = Complex64::new(re[src], if self_conjugate { 0.0 } else { im[src] });
                line[bin] = z;
                if !self_conjugate {
                    line[len - bin] = z.conj();
                }
            }
        }
    }
    fft_inverse(len).process(&mut buf);
    scatter_real(&buf, lines, len, 1.0 / len as f64)
}

fn scatter_real(buf: &[Complex64], lines: Lines, len: usize, scale: f64) -> Vec<f64> {
    let mut out = vec![0.0; buf.len()];
    for o in 0..lines.outer {
        for i in 0..lines.inner {
            let line = &buf[(o * lines.inner + i) * len..][..len];
            for (n, z) in line.iter().enumerate() {
                out[(o * len + n) * lines.inner + i] = z.re * scale;
            }
        }
    }
    out
}

fn interleave_features(re: &[f64], im: &[f64], c: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(re.len() * 2);
    for (r, i) in re.chunks_exact(c).zip(im.chunks_exact(c)) {
        out.extend_from_slice(r);
        out.extend_from_slice(i);
    }
    out
}

fn split_features(x: &[f64], c: usize) -> (Vec<f64>, Vec<f64>) {
    let mut re = Vec::with_capacity(x.len() / 2);
    let mut im = Vec::with_capacity(x.len() / 2);
    for row in x.chunks_exact(2 * c) {
        re.extend_from_slice(&row[..c]);
        im.extend_from_slice(&row[c..]);
    }
    (re, im)
}

impl Graph {
    /// Real DFT along `axis` of a channels-last tensor `[..., L, ..., C]`.
    /// Output is `[..., L/2+1, ..., 2C]` with real parts in features `[0, C)`
    /// and imaginary parts in `[C, 2C)`.
    pub fn rfft_features(&mut self, x: Var, axis: usize) -> Result<Var> {
        const OP: &str = "rfft_features";
        let shape = self.shape(x).to_vec();
        if shape.len() < 2 || axis + 1 >= shape.len() {
            return Err(Error::shape(OP, format!("axis {axis} must precede the feature axis of {shape:?}")));
        }
        let len = shape[axis];
        if len < 2 {
            return Err(Error::dim(OP, format!("transform length {len} < 2")));
        }
        let c = shape[shape.len() - 1];
        let lines = Lines { outer: shape[..axis].iter().product(), inner: shape[axis + 1..].iter().product() };
        let (re, im) = rfft_lines(self.value(x).data(), lines, len);
        let mut out_shape = shape;
        out_shape[axis] = half_len(len);
        *out_shape.last_mut().unwrap() = 2 * c;
        let y = Tensor::new(&out_shape, interleave_features(&re, &im, c))?;
        self.push(OP, y, &[x], || {
            Box::new(move |ctx| {
                let (gr, gi) = split_features(ctx.grad, c);
                vec![Some(rfft_adjoint_lines(&gr, &gi, lines, len))]
            })
        })
    }

    /// Inverse of [`Graph::rfft_features`]: `[..., K, ..., 2C]` to
    /// `[..., target_len, ..., C]`, requiring `K == target_len/2 + 1`.
    pub fn irfft_features(&mut self, x: Var, axis: usize, target_len: usize) -> Result<Var> {
        const OP: &str = "irfft_features";
        let shape = self.shape(x).to_vec();
        if shape.len() < 2 || axis + 1 >= shape.len() {
            return Err(Error::shape(OP, format!("axis {axis} must precede the feature axis of {shape:?}")));
        }
        let c2 = shape[shape.len() - 1];
        if !c2.is_multiple_of(2) {
            return Err(Error::shape(OP, format!("feature extent {c2} must be even")));
        }
        if target_len < 2 || shape[axis] != half_len(target_len) {
            return Err(Error::dim(
                OP,
                format!("{} bins cannot be inverted to length {target_len}", shape[axis]),
            ));
        }
        let c = c2 / 2;
        let mut line_shape = shape.clone();
        *line_shape.last_mut().unwrap() = c;
        let lines = Lines { outer: shape[..axis].iter().product(), inner: line_shape[axis + 1..].iter().product() };
        let (re, im) = split_features(self.value(x).data(), c);
        let mut out_shape = line_shape;
        out_shape[axis] = target_len;
        let y = Tensor::new(&out_shape, irfft_lines(&re, &im, lines, target_len))?;
        self.push(OP, y, &[x], move || {
            Box::new(move |ctx| {
                let (mut gr, mut gi) = rfft_lines(ctx.grad, lines, target_len);
                let k = half_len(target_len);
                for (idx, (r, i)) in gr.iter_mut().zip(gi.iter_mut()).enumerate() {
                    let bin = (idx / lines.inner) % k;
                    let w = fold_weight(bin, target_len) / target_len as f64;
                    *r *= w;
                    *i *= w;
                }
                vec![Some(interleave_features(&gr, &gi, c))]
            })
        })
    }

    /// Real DFT along any axis, returned as separate real and imaginary parts.
    pub fn rfft_axis(&mut self, x: Var, axis: usize) -> Result<(Var, Var)> {
        let mut shape = self.shape(x).to_vec();
        shape.push(1);
        let x1 = self.reshape(x, &shape)?;
        let y = self.rfft_features(x1, axis)?;
        let rank = shape.len();
        let re = self.slice(y, rank - 1, 0, 1)?;
        let im = self.slice(y, rank - 1, 1, 1)?;
        let mut out = shape[..rank - 1].to_vec();
        out[axis] = half_len(shape[axis]);
        Ok((self.reshape(re, &out)?, self.reshape(im, &out)?))
    }

    /// Inverse of [`Graph::rfft_axis`].
    pub fn irfft_axis(&mut self, re: Var, im: Var, axis: usize, target_len: usize) -> Result<Var> {
        if self.shape(re) != self.shape(im) {
            return Err(Error::shape("irfft_axis", format!("{:?} vs {:?}", self.shape(re), self.shape(im))));
        }
        let mut shape = self.shape(re).to_vec();
        if axis >= shape.len() {
            return Err(Error::dim("irfft_axis", format!("axis {axis} for rank {}", shape.len())));
        }
        shape.push(1);
        let r1 = self.reshape(re, &shape)?;
        let i1 = self.reshape(im, &shape)?;
        let packed = self.concat(&[r1, i1], shape.len() - 1)?;
        let y = self.irfft_features(packed, axis, target_len)?;
        let mut out = shape[..shape.len() - 1].to_vec();
        out[axis] = target_len;
        self.reshape(y, &out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    fn dft_oracle(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let l = x.len();
        (0..half_len(l))
            .map(|k| {
                x.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, &v)| {
                    let th = 2.0 * std::f64::consts::PI * (k * n) as f64 / l as f64;
                    (re + v * th.cos(), im - v * th.sin())
                })
            })
            .unzip()
    }

    #[test]
    fn impulse_and_constant() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::new(&[4], vec![1.0, 0.0, 0.0, 0.0]).unwrap());
        let (re, im) = g.rfft_axis(x, 0).unwrap();
        assert_eq!(g.value(re).data(), &[1.0, 1.0, 1.0]);
        assert!(g.value(im).data().iter().all(|v| v.abs() < 1e-15));
        let c = g.constant(Tensor::full(&[4], 2.5));
        let (re, im) = g.rfft_axis(c, 0).unwrap();
        assert!(g.value(re).max_abs_diff(&Tensor::new(&[3], vec![10.0, 0.0, 0.0]).unwrap()) < 1e-12);
        assert!(g.value(im).data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn matches_direct_summation() {
        let mut r = RngState::new(8);
        for l in [2, 3, 7, 8, 15] {
            let x = Tensor::randn(&[l], &mut r);
            let (want_re, want_im) = dft_oracle(x.data());
            let mut g = Graph::new();
            let xv = g.constant(x);
            let (re, im) = g.rfft_axis(xv, 0).unwrap();
            for (a, b) in g.value(re).data().iter().zip(&want_re).chain(g.value(im).data().iter().zip(&want_im)) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_spectrum_gives_zero_signal() {
        let mut g = Graph::new();
        let z = g.constant(Tensor::zeros(&[2, 4, 6]));
        let y = g.irfft_features(z, 1, 6).unwrap();
        assert_eq!(g.shape(y), &[2, 6, 3]);
        assert!(g.value(y).data().iter().all(|&v| v == 0.0));
        assert!(matches!(g.irfft_features(z, 1, 9), Err(Error::Dimension { .. })));
    }
}
