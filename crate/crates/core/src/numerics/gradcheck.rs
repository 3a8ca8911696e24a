//! Reverse-mode gradients versus central finite differences.

use super::graph::{Graph, Var};
use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::Result;

pub const FD_STEP: f64 = 1e-4;

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Check at most this many coordinates per tensor (evenly strided);
    /// `None` checks all of them.
    pub max_coords: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { step: FD_STEP, max_coords: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// (tensor index, element index, analytic, numeric) of the worst entry.
    pub worst: Option<(usize, usize, f64, f64)>,
    pub checked: usize,
}

impl GradCheckReport {
    fn new() -> Self {
        Self { max_rel_err: 0.0, worst: None, checked: 0 }
    }

    fn record(&mut self, tensor: usize, elem: usize, a: f64, n: f64) {
        let e = relative_error(a, n);
        self.checked += 1;
        if e > self.max_rel_err || self.worst.is_none() {
            self.max_rel_err = self.max_rel_err.max(e);
            if e >= self.max_rel_err {
                self.worst = Some((tensor, elem, a, n));
            }
        }
    }
}

fn coords(n: usize, max: Option<usize>) -> Vec<usize> {
    match max {
        Some(m) if m < n => {
            let stride = n as f64 / m as f64;
            // offset so the first checked entry is not always index 0
            (0..m).map(|i| ((i as f64 + 0.5) * stride) as usize).collect()
        }
        _ => (0..n).collect(),
    }
}

fn scalar(g: &Graph, v: Var) -> f64 {
    g.value(v).data()[0]
}

/// Checks `f` with respect to each tensor in `inputs`.
pub fn grad_check<F>(inputs: &[Tensor], f: F, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let root = f(&mut g, &vars)?;
    let grads = g.backward(root)?;
    let eval = |ts: &[Tensor]| -> Result<f64> {
        let mut g = Graph::inference();
        let vars: Vec<Var> = ts.iter().map(|t| g.constant(t.clone())).collect();
        let r = f(&mut g, &vars)?;
        Ok(scalar(&g, r))
    };
    let mut report = GradCheckReport::new();
    let mut work = inputs.to_vec();
    for (ti, &v) in vars.iter().enumerate() {
        let analytic = grads.wrt(v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; inputs[ti].numel()]);
        for i in coords(inputs[ti].numel(), opts.max_coords) {
            let orig = work[ti].data()[i];
            work[ti].data_mut()[i] = orig + opts.step;
            let fp = eval(&work)?;
            work[ti].data_mut()[i] = orig - opts.step;
            let fm = eval(&work)?;
            work[ti].data_mut()[i] = orig;
            report.record(ti, i, analytic[i], (fp - fm) / (2.0 * opts.step));
        }
    }
    Ok(report)
}

/// Checks `f` with respect to every parameter in `store` (or those in `only`).
pub fn grad_check_params<F>(
    store: &ParamStore,
    only: Option<&[ParamId]>,
    f: F,
    opts: GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var>,
{
    let mut g = Graph::new();
    let root = f(&mut g, store)?;
    let grads = g.backward(root)?;
    let mut analytic: Vec<Vec<f64>> = store.ids().map(|id| vec![0.0; store.get(id).numel()]).collect();
    for (id, gr) in grads.params() {
        analytic[id.index()].iter_mut().zip(gr).for_each(|(a, b)| *a += b);
    }
    drop(g);
    let ids: Vec<ParamId> = only.map(<[ParamId]>::to_vec).unwrap_or_else(|| store.ids().collect());
    let mut work = store.clone();
    let mut report = GradCheckReport::new();
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut g = Graph::inference();
        let r = f(&mut g, s)?;
        Ok(scalar(&g, r))
    };
    for id in ids {
        for i in coords(store.get(id).numel(), opts.max_coords) {
            let orig = store.get(id).data()[i];
            work.get_mut(id).data_mut()[i] = orig + opts.step;
            let fp = eval(&work)?;
            work.get_mut(id).data_mut()[i] = orig - opts.step;
            let fm = eval(&work)?;
            work.get_mut(id).data_mut()[i] = orig;
            report.record(id.index(), i, analytic[id.index()][i], (fp - fm) / (2.0 * opts.step));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    #[test]
    fn sum_has_exact_unit_gradient() {
        let mut r = RngState::new(1);
        let x = Tensor::randn(&[3, 4], &mut r);
        let rep = grad_check(&[x], |g, v| g.sum(v[0]), GradCheckOptions::default()).unwrap();
        assert!(rep.max_rel_err < 1e-9, "{rep:?}");
        assert_eq!(rep.checked, 12);
    }

    #[test]
    fn sigmoid_slope_at_zero_is_quarter() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(&[5]));
        let s = g.sigmoid(x).unwrap();
        let y = g.sum(s).unwrap();
        let grads = g.backward(y).unwrap();
        assert!(grads.wrt(x).unwrap().iter().all(|&d| (d - 0.25).abs() < 1e-15));
        let rep = grad_check(
            &[Tensor::zeros(&[5])],
            |g, v| {
                let s = g.sigmoid(v[0])?;
                g.sum(s)
            },
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(rep.max_rel_err < 1e-6);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1e-9, 0.0) - 0.1).abs() < 1e-12);
    }
}
