use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::super::graph::{Graph, Var};
use super::super::tensor::Tensor;
use crate::error::{Error, Result};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Exact (erf-based) GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    cdf + x * pdf
}

impl Graph {
    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let y = self.value(x).map(gelu);
        self.push("gelu", y, &[x], || {
            Box::new(|ctx| {
                let xs = ctx.inputs[0].data();
                vec![Some(ctx.grad.iter().zip(xs).map(|(g, &v)| g * gelu_grad(v)).collect())]
            })
        })
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let y = self.value(x).map(sigmoid);
        self.push("sigmoid", y, &[x], || {
            Box::new(|ctx| {
                let ys = ctx.output.data();
                vec![Some(ctx.grad.iter().zip(ys).map(|(g, &s)| g * s * (1.0 - s)).collect())]
            })
        })
    }

    /// Gated linear unit over the last axis: first half times sigmoid of the second.
    pub fn glu(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let c2 = *shape.last().ok_or_else(|| Error::shape("glu", "rank 0 input"))?;
        if c2 % 2 != 0 {
            return Err(Error::shape("glu", format!("feature extent {c2} is odd")));
        }
        let c = c2 / 2;
        let mut out_shape = shape;
        *out_shape.last_mut().unwrap() = c;
        let xv = self.value(x).data();
        let mut y = Vec::with_capacity(xv.len() / 2);
        for row in xv.chunks_exact(c2) {
            let (a, b) = row.split_at(c);
            y.extend(a.iter().zip(b).map(|(&a, &b)| a * sigmoid(b)));
        }
        let y = Tensor::new(&out_shape, y)?;
        self.push("glu", y, &[x], || {
            Box::new(move |ctx| {
                let xv = ctx.inputs[0].data();
                let mut dx = vec![0.0; xv.len()];
                for ((row, drow), g) in xv.chunks_exact(c2).zip(dx.chunks_exact_mut(c2)).zip(ctx.grad.chunks_exact(c)) {
                    for j in 0..c {
                        let (a, s) = (row[j], sigmoid(row[c + j]));
                        drow[j] = g[j] * s;
                        drow[c + j] = g[j] * a * s * (1.0 - s);
                    }
                }
                vec![Some(dx)]
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_points() {
        assert_eq!(gelu(0.0), 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((gelu(1.0) - 0.841_344_746_068_542_9).abs() < 1e-12);
    }

    #[test]
    fn glu_with_zero_gate_halves() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::new(&[1, 4], vec![2.0, -6.0, 0.0, 0.0]).unwrap());
        let y = g.glu(x).unwrap();
        assert_eq!(g.value(y).data(), &[1.0, -3.0]);
    }

    #[test]
    fn glu_of_duplicated_input_is_swish() {
        let a = [-2.0, -0.3, 0.0, 0.7, 3.1];
        let mut g = Graph::new();
        let x = g.constant(Tensor::new(&[1, 10], a.iter().chain(&a).copied().collect()).unwrap());
        let y = g.glu(x).unwrap();
        for (v, &ai) in g.value(y).data().iter().zip(&a) {
            assert!((v - ai * sigmoid(ai)).abs() < 1e-15);
        }
    }

    #[test]
    fn glu_rejects_odd_features() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[2, 3]));
        assert!(matches!(g.glu(x), Err(Error::Shape { .. })));
    }
}
