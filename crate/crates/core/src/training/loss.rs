use crate::error::{Error, Result};
use crate::numerics::{Graph, Tensor, Var};

/// Added under each square root so the loss stays differentiable at zero
/// error.
pub const RMSE_EPS: f64 = 1e-8;

fn check(op: &'static str, est: &[usize], reference: &[usize]) -> Result<()> {
    if est != reference {
        return Err(Error::shape(op, format!("estimate {est:?} vs reference {reference:?}")));
    }
    match est.last() {
        Some(c) if c % 2 == 0 => Ok(()),
        _ => Err(Error::shape(op, format!("last axis of {est:?} must hold re/im pairs"))),
    }
}

/// Mean over re/im pairs of `sqrt((r − r̂)² + (i − î)² + ε)`.
pub fn rmse_loss(est: &Tensor, reference: &Tensor) -> Result<f64> {
    check("rmse_loss", est.shape(), reference.shape())?;
    let pairs = est.numel() / 2;
    let terms = est
        .data()
        .chunks_exact(2)
        .zip(reference.data().chunks_exact(2))
        .map(|(e, r)| ((e[0] - r[0]).powi(2) + (e[1] - r[1]).powi(2) + RMSE_EPS).sqrt());
    Ok(compensated_sum(terms) / pairs as f64)
}

/// Neumaier summation; keeps the mean of many equal terms exact to the ulp.
fn compensated_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        c += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + c
}

impl Graph {
    /// Differentiable [`rmse_loss`]; gradients flow to both operands.
    pub fn rmse_loss(&mut self, est: Var, reference: Var) -> Result<Var> {
        let (e, r) = (self.value(est), self.value(reference));
        check("rmse_loss", e.shape(), r.shape())?;
        let value = rmse_loss(e, r)?;
        let pairs = e.numel() / 2;
        self.push("rmse_loss", Tensor::scalar(value), &[est, reference], || {
            Box::new(move |ctx| {
                let (e, r) = (ctx.inputs[0].data(), ctx.inputs[1].data());
                let scale = ctx.grad[0] / pairs as f64;
                let mut d = vec![0.0; e.len()];
                for ((dp, ep), rp) in d.chunks_exact_mut(2).zip(e.chunks_exact(2)).zip(r.chunks_exact(2)) {
                    let (dr, di) = (ep[0] - rp[0], ep[1] - rp[1]);
                    let m = (dr * dr + di * di + RMSE_EPS).sqrt();
                    dp[0] = scale * dr / m;
                    dp[1] = scale * di / m;
                }
                let neg = ctx.needs[1].then(|| d.iter().map(|v| -v).collect());
                vec![ctx.needs[0].then_some(d), neg]
            })
        })
    }
}
