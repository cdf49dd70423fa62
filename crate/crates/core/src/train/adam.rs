use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Bias-corrected Adam.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn second_moment(&self, name: &str) -> Option<&[f64]> {
        self.v.get(name).map(Vec::as_slice)
    }

    /// Applies one update to every parameter. Each parameter must have a
    /// gradient of the same shape.
    pub fn step<'a>(
        &mut self,
        params: impl IntoIterator<Item = (&'a String, &'a mut Tensor)>,
        grads: &BTreeMap<String, Tensor>,
    ) -> Result<()> {
        let params: Vec<_> = params.into_iter().collect();
        for (name, p) in &params {
            let g = grads
                .get(*name)
                .ok_or_else(|| Error::MissingGradient((*name).clone()))?;
            if g.shape() != p.shape() {
                return Err(Error::DimensionMismatch {
                    op: "adam gradient",
                    left: p.shape(),
                    right: g.shape(),
                });
            }
        }

        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (name, p) in params {
            let g = grads[name].data();
            let m = self
                .m
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; g.len()]);
            let v = self
                .v
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; g.len()]);
            for (i, theta) in p.data_mut().iter_mut().enumerate() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                *theta -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    fn single(v: f64) -> BTreeMap<String, Tensor> {
        BTreeMap::from([("theta".to_string(), Tensor::scalar(v))])
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params = single(0.3);
        let mut adam = AdamState::new(2e-4);
        adam.step(params.iter_mut(), &single(1.0)).unwrap();
        let moved = 0.3 - params["theta"].item();
        assert!((moved - 2e-4).abs() < 1e-10, "{moved}");
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut params = single(0.3);
        let mut adam = AdamState::new(2e-4);
        for _ in 0..5 {
            adam.step(params.iter_mut(), &single(0.0)).unwrap();
        }
        assert_eq!(params["theta"].item(), 0.3);
    }

    #[test]
    fn quadratic_bowl() {
        // f(theta) = theta^2, gradient 2 theta
        let mut params = single(1.0);
        let mut adam = AdamState::new(0.01);
        for _ in 0..200 {
            let g = 2.0 * params["theta"].item();
            adam.step(params.iter_mut(), &single(g)).unwrap();
        }
        assert!(params["theta"].item().abs() < 0.1);
    }

    #[test]
    fn missing_gradient_is_reported() {
        let mut params = single(1.0);
        params.insert("other".into(), Tensor::zeros(Shape::new(1, 1, 1, 2)));
        let err = AdamState::new(1e-3)
            .step(params.iter_mut(), &single(1.0))
            .unwrap_err();
        assert!(matches!(err, Error::MissingGradient(ref n) if n == "other"));
    }

    #[test]
    fn update_is_bounded_for_huge_gradients() {
        let shape = Shape::new(1, 1, 1, 8);
        let mut params = BTreeMap::from([("w".to_string(), Tensor::zeros(shape))]);
        let mut adam = AdamState::new(2e-4);
        for step in 0..50 {
            let before = params["w"].clone();
            let g = Tensor::from_fn(shape, |_, _, _, x| {
                1e6 * ((x as f64 + 1.0) * (step as f64 + 0.5)).sin()
            });
            let grads = BTreeMap::from([("w".to_string(), g)]);
            adam.step(params.iter_mut(), &grads).unwrap();
            for (a, b) in params["w"].data().iter().zip(before.data()) {
                assert!((a - b).abs() <= 2e-4 * 10.0 * (1.0 + 1e-9));
            }
            assert!(adam.second_moment("w").unwrap().iter().all(|&v| v >= 0.0));
        }
    }
}
