use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias-corrected moments; one `(m, v)` pair per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub hyper: AdamHyper,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> = store.ids().map(|id| vec![0.0; store.get(id).numel()]).collect();
        Self { hyper: AdamHyper::default(), step: 0, m: zeros.clone(), v: zeros }
    }

    /// Applies one update from the gradients accumulated in `store`, then
    /// clears them. Parameters without a gradient are left alone.
    pub fn step(&mut self, store: &mut ParamStore, lr: f64) -> Result<()> {
        if self.m.len() != store.len() {
            return Err(Error::Checkpoint(format!(
                "optimizer state covers {} tensors, model has {}",
                self.m.len(),
                store.len()
            )));
        }
        self.step += 1;
        let AdamHyper { beta1, beta2, eps } = self.hyper;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        let ids: Vec<ParamId> = store.ids().collect();
        for id in ids {
            let i = id.index();
            let Some(grad) = store.get(id).grad().map(<[f64]>::to_vec) else { continue };
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let p = store.get_mut(id);
            for (((w, g), m), v) in p.data_mut().iter_mut().zip(&grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
            p.zero_grad();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    #[test]
    fn first_step_moves_by_lr_sign() {
        let mut store = ParamStore::new();
        let id = store.insert("w", Tensor::new(&[3], vec![1.0, 2.0, 3.0]).unwrap());
        store.get_mut(id).accumulate_grad(&[0.5, -2.0, 1e-3]);
        let mut adam = Adam::new(&store);
        adam.step(&mut store, 0.1).unwrap();
        let d = store.get(id).data();
        assert!((d[0] - 0.9).abs() < 1e-6);
        assert!((d[1] - 2.1).abs() < 1e-6);
        assert!((d[2] - 2.9).abs() < 1e-4);
        assert!(store.get(id).grad().is_none_or(|g| g.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn zero_grad_leaves_params() {
        let mut store = ParamStore::new();
        let id = store.insert("w", Tensor::new(&[2], vec![1.0, -1.0]).unwrap());
        store.get_mut(id).accumulate_grad(&[0.0, 0.0]);
        let mut adam = Adam::new(&store);
        adam.step(&mut store, 0.1).unwrap();
        assert_eq!(store.get(id).data(), &[1.0, -1.0]);
    }
}
