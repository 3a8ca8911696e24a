//! Shape plumbing, elementwise arithmetic and reductions.

use super::super::graph::{Graph, Var};
use super::super::tensor::Tensor;
use crate::error::{Error, Result};

impl Graph {
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        self.push("add", out, &[a, b], || Box::new(|ctx| vec![Some(ctx.grad.to_vec()), Some(ctx.grad.to_vec())]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y)?;
        self.push("sub", out, &[a, b], || {
            Box::new(|ctx| vec![Some(ctx.grad.to_vec()), Some(ctx.grad.iter().map(|g| -g).collect())])
        })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        self.push("mul", out, &[a, b], || {
            Box::new(|ctx| {
                let (a, b) = (ctx.inputs[0].data(), ctx.inputs[1].data());
                vec![
                    ctx.needs[0].then(|| ctx.grad.iter().zip(b).map(|(g, y)| g * y).collect()),
                    ctx.needs[1].then(|| ctx.grad.iter().zip(a).map(|(g, x)| g * x).collect()),
                ]
            })
        })
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var> {
        let out = self.value(x).map(|v| v * s);
        self.push("scale", out, &[x], || Box::new(move |ctx| vec![Some(ctx.grad.iter().map(|g| g * s).collect())]))
    }

    /// Adds a `[C]` bias along the last axis.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let xs = self.value(x);
        let c = *xs.shape().last().ok_or_else(|| Error::shape("add_bias", "rank 0 input"))?;
        if self.value(bias).shape() != [c] {
            return Err(Error::shape("add_bias", format!("bias {:?} for input {:?}", self.shape(bias), xs.shape())));
        }
        let b = self.value(bias).data();
        let mut out = xs.clone();
        out.set_requires_grad(false);
        for row in out.data_mut().chunks_exact_mut(c) {
            row.iter_mut().zip(b).for_each(|(v, bv)| *v += bv);
        }
        self.push("add_bias", out, &[x, bias], || {
            Box::new(move |ctx| {
                let db = ctx.needs[1].then(|| {
                    let mut db = vec![0.0; c];
                    for row in ctx.grad.chunks_exact(c) {
                        db.iter_mut().zip(row).for_each(|(d, g)| *d += g);
                    }
                    db
                });
                vec![Some(ctx.grad.to_vec()), db]
            })
        })
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(x).sum());
        let n = self.value(x).numel();
        self.push("sum", out, &[x], || Box::new(move |ctx| vec![Some(vec![ctx.grad[0]; n])]))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).numel();
        let s = self.sum(x)?;
        self.scale(s, 1.0 / n as f64)
    }

    /// `Σ x ⊙ w` for a fixed weight tensor; used to build scalar probes.
    pub fn dot_const(&mut self, x: Var, w: &Tensor) -> Result<Var> {
        let xs = self.value(x);
        if xs.shape() != w.shape() {
            return Err(Error::shape("dot_const", format!("{:?} vs {:?}", xs.shape(), w.shape())));
        }
        let out = Tensor::scalar(xs.dot(w));
        let w = w.data().to_vec();
        self.push("dot_const", out, &[x], || Box::new(move |ctx| vec![Some(w.iter().map(|v| v * ctx.grad[0]).collect())]))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = Tensor::new(shape, self.value(x).data().to_vec())
            .map_err(|_| Error::shape("reshape", format!("{:?} -> {shape:?}", self.shape(x))))?;
        self.push("reshape", out, &[x], || Box::new(|ctx| vec![Some(ctx.grad.to_vec())]))
    }

    /// `len` entries of `axis` starting at `start`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let xs = self.value(x);
        if axis >= xs.rank() || start + len > xs.shape()[axis] || len == 0 {
            return Err(Error::dim(
                "slice",
                format!("axis {axis} range {start}..{} of {:?}", start + len, xs.shape()),
            ));
        }
        let (outer, n, inner) = xs.split_at_axis(axis);
        let mut shape = xs.shape().to_vec();
        shape[axis] = len;
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * n + start) * inner;
            data.extend_from_slice(&xs.data()[base..base + len * inner]);
        }
        let out = Tensor::new(&shape, data)?;
        self.push("slice", out, &[x], || {
            Box::new(move |ctx| {
                let mut dx = vec![0.0; outer * n * inner];
                for o in 0..outer {
                    let base = (o * n + start) * inner;
                    let src = &ctx.grad[o * len * inner..(o + 1) * len * inner];
                    dx[base..base + len * inner].copy_from_slice(src);
                }
                vec![Some(dx)]
            })
        })
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let first = self.value(*xs.first().ok_or_else(|| Error::shape("concat", "no inputs"))?).shape().to_vec();
        if axis >= first.len() {
            return Err(Error::dim("concat", format!("axis {axis} for rank {}", first.len())));
        }
        let mut lens = Vec::with_capacity(xs.len());
        for &v in xs {
            let s = self.shape(v);
            let compatible =
                s.len() == first.len() && s.iter().zip(&first).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(Error::shape("concat", format!("{s:?} vs {first:?} on axis {axis}")));
            }
            lens.push(s[axis]);
        }
        let total: usize = lens.iter().sum();
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();
        let mut shape = first.clone();
        shape[axis] = total;
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (&v, &l) in xs.iter().zip(&lens) {
                data.extend_from_slice(&self.value(v).data()[o * l * inner..(o + 1) * l * inner]);
            }
        }
        let out = Tensor::new(&shape, data)?;
        self.push("concat", out, xs, || {
            Box::new(move |ctx| {
                let mut grads: Vec<Vec<f64>> = lens.iter().map(|&l| Vec::with_capacity(outer * l * inner)).collect();
                let mut pos = 0;
                for _ in 0..outer {
                    for (g, &l) in grads.iter_mut().zip(&lens) {
                        g.extend_from_slice(&ctx.grad[pos..pos + l * inner]);
                        pos += l * inner;
                    }
                }
                grads.into_iter().zip(&ctx.needs).map(|(g, &n)| n.then_some(g)).collect()
            })
        })
    }

    /// Permutes axes: output axis `i` is input axis `perm[i]`.
    pub fn permute(&mut self, x: Var, perm: &[usize]) -> Result<Var> {
        let xs = self.value(x);
        let rank = xs.rank();
        let mut seen = vec![false; rank];
        if perm.len() != rank || perm.iter().any(|&p| p >= rank || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::shape("permute", format!("{perm:?} for rank {rank}")));
        }
        let in_shape = xs.shape().to_vec();
        let out_shape: Vec<usize> = perm.iter().map(|&p| in_shape[p]).collect();
        let src_index = permutation_index(&in_shape, perm);
        let data = src_index.iter().map(|&i| xs.data()[i]).collect();
        let out = Tensor::new(&out_shape, data)?;
        self.push("permute", out, &[x], || {
            Box::new(move |ctx| {
                let mut dx = vec![0.0; ctx.grad.len()];
                for (o, &i) in src_index.iter().enumerate() {
                    dx[i] = ctx.grad[o];
                }
                vec![Some(dx)]
            })
        })
    }
}

/// For each output position of a permuted tensor, the flat input index.
fn permutation_index(in_shape: &[usize], perm: &[usize]) -> Vec<usize> {
    let rank = in_shape.len();
    let mut in_strides = vec![1; rank];
    for i in (0..rank.saturating_sub(1)).rev() {
        in_strides[i] = in_strides[i + 1] * in_shape[i + 1];
    }
    let out_shape: Vec<usize> = perm.iter().map(|&p| in_shape[p]).collect();
    let strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let n: usize = in_shape.iter().product();
    let mut idx = vec![0usize; rank];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(idx.iter().zip(&strides).map(|(i, s)| i * s).sum());
        for d in (0..rank).rev() {
            idx[d] += 1;
            if idx[d] < out_shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slice_concat_inverse() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_fn(&[2, 5, 3], |i| i as f64));
        let a = g.slice(x, 1, 0, 2).unwrap();
        let b = g.slice(x, 1, 2, 3).unwrap();
        let y = g.concat(&[a, b], 1).unwrap();
        assert_eq!(g.value(y), g.value(x));
    }

    #[test]
    fn permute_transposes() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::new(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let y = g.permute(x, &[1, 0]).unwrap();
        assert_eq!(g.value(y).data(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert!(g.permute(x, &[0, 0]).is_err());
    }

    #[test]
    fn slice_out_of_range_is_dimension_error() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[4, 2]));
        assert!(matches!(g.slice(x, 0, 3, 2), Err(Error::Dimension { .. })));
    }
}
