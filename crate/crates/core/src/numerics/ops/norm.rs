use super::super::graph::{Graph, Var};
use super::super::tensor::Tensor;
use crate::error::{Error, Result};

pub const GROUP_NORM_EPS: f64 = 1e-5;

impl Graph {
    /// Group normalization over a channels-last tensor.
    ///
    /// Statistics are taken per (index on axis 0, channel group) over every
    /// remaining position, so each batch item is normalized independently.
    pub fn group_norm(&mut self, x: Var, groups: usize, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        const OP: &str = "group_norm";
        let shape = self.shape(x).to_vec();
        if shape.len() < 2 {
            return Err(Error::shape(OP, format!("need rank >= 2, got {shape:?}")));
        }
        let c = shape[shape.len() - 1];
        if groups == 0 || !c.is_multiple_of(groups) {
            return Err(Error::config("groups", format!("{groups} does not divide {c} channels")));
        }
        if self.shape(gamma) != [c] || self.shape(beta) != [c] {
            return Err(Error::shape(OP, format!("affine params must be [{c}]")));
        }
        let batch = shape[0];
        let pos = self.value(x).numel() / (batch * c);
        let cg = c / groups;
        let n = (pos * cg) as f64;

        let xv = self.value(x).data();
        let (gv, bv) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = vec![0.0; xv.len()];
        let mut inv_std = vec![0.0; batch * groups];
        let mut out = vec![0.0; xv.len()];
        for b in 0..batch {
            let base = b * pos * c;
            for gi in 0..groups {
                let elems = || (0..pos).flat_map(move |p| (0..cg).map(move |j| base + p * c + gi * cg + j));
                let mean = elems().map(|i| xv[i]).sum::<f64>() / n;
                let var = elems().map(|i| (xv[i] - mean).powi(2)).sum::<f64>() / n;
                let istd = 1.0 / (var + eps).sqrt();
                inv_std[b * groups + gi] = istd;
                for i in elems() {
                    let ch = i % c;
                    xhat[i] = (xv[i] - mean) * istd;
                    out[i] = gv[ch] * xhat[i] + bv[ch];
                }
            }
        }
        let y = Tensor::new(&shape, out)?;
        self.push(OP, y, &[x, gamma, beta], || {
            Box::new(move |ctx| {
                let gv = ctx.inputs[1].data();
                let dy = ctx.grad;
                let dx = ctx.needs[0].then(|| {
                    let mut dx = vec![0.0; dy.len()];
                    for b in 0..batch {
                        let base = b * pos * c;
                        for gi in 0..groups {
                            let elems = || (0..pos).flat_map(move |p| (0..cg).map(move |j| base + p * c + gi * cg + j));
                            let (mut m1, mut m2) = (0.0, 0.0);
                            for i in elems() {
                                let dxh = dy[i] * gv[i % c];
                                m1 += dxh;
                                m2 += dxh * xhat[i];
                            }
                            m1 /= n;
                            m2 /= n;
                            let istd = inv_std[b * groups + gi];
                            for i in elems() {
                                let dxh = dy[i] * gv[i % c];
                                dx[i] = istd * (dxh - m1 - xhat[i] * m2);
                            }
                        }
                    }
                    dx
                });
                let mut dgamma = vec![0.0; c];
                let mut dbeta = vec![0.0; c];
                if ctx.needs[1] || ctx.needs[2] {
                    for (i, &g) in dy.iter().enumerate() {
                        dgamma[i % c] += g * xhat[i];
                        dbeta[i % c] += g;
                    }
                }
                vec![dx, ctx.needs[1].then_some(dgamma), ctx.needs[2].then_some(dbeta)]
            })
        })
    }
}
