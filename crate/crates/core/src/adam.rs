use crate::error::{Result, TensorError};
use crate::{Scalar, Tensor};

/// Per-parameter Adam moments plus hyperparameters.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[Tensor<T>], beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState {
            beta1,
            beta2,
            eps,
            step: 0,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    /// beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
    pub fn standard(params: &[Tensor<T>]) -> Self {
        Self::new(params, 0.9, 0.999, 1e-8)
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor<T>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Tensor<T>] {
        &self.v
    }
}

/// One bias-corrected Adam update applied in place.
pub fn adam_step<T: Scalar>(
    params: &mut [Tensor<T>],
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(TensorError::invalid(
            "adam_step",
            format!(
                "{} params, {} grads, {} moment slots",
                params.len(),
                grads.len(),
                state.m.len()
            ),
        ));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        if p.shape() != g.shape() || p.shape() != m.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "adam_step",
                lhs: p.shape(),
                rhs: g.shape(),
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::lit(state.beta1), T::lit(state.beta2));
    let c1 = T::lit(1.0 - state.beta1.powi(t));
    let c2 = T::lit(1.0 - state.beta2.powi(t));
    let (lr, eps) = (T::lit(lr), T::lit(state.eps));
    let one = T::one();
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for (((p, &g), m), v) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let zero = vec![Tensor::<f64>::zeros([1, 1, 1, 3])];
        let mut fresh = vec![Tensor::full([1, 1, 1, 3], 0.7)];
        let mut st = AdamState::standard(&fresh);
        adam_step(&mut fresh, &zero, &mut st, 0.1).unwrap();
        assert_eq!(fresh[0], Tensor::full([1, 1, 1, 3], 0.7));

        // After a real gradient, zero gradients shrink both moments.
        adam_step(&mut fresh, &[Tensor::full([1, 1, 1, 3], 1.0)], &mut st, 0.1).unwrap();
        let m0 = st.first_moments()[0].data()[0];
        let v0 = st.second_moments()[0].data()[0];
        adam_step(&mut fresh, &zero, &mut st, 0.1).unwrap();
        assert!(st.first_moments()[0].data()[0] < m0);
        assert!(st.second_moments()[0].data()[0] < v0);
        assert_eq!(st.step(), 3);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut p = vec![Tensor::<f64>::from_vec([1, 1, 1, 4], vec![0.0; 4]).unwrap()];
        let g = vec![Tensor::from_vec([1, 1, 1, 4], vec![3.0, -0.2, 1e-3, -50.0]).unwrap()];
        let mut st = AdamState::standard(&p);
        adam_step(&mut p, &g, &mut st, 0.01).unwrap();
        // m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
        for (u, gi) in p[0].data().iter().zip(g[0].data()) {
            let expected = -0.01 * gi / (gi.abs() + 1e-8);
            assert!((u - expected).abs() < 1e-12, "{u} vs {expected}");
            assert!((u.abs() - 0.01).abs() < 1e-6);
        }
    }

    #[test]
    fn quadratic_descends() {
        let mut p = vec![Tensor::<f64>::scalar(1.0)];
        let mut st = AdamState::standard(&p);
        for _ in 0..200 {
            let g = vec![p[0].map(|w| 2.0 * w)];
            adam_step(&mut p, &g, &mut st, 0.01).unwrap();
        }
        assert!(p[0].data()[0].abs() < 0.5);
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let mut p = vec![Tensor::<f32>::zeros([1, 1, 2, 2])];
        let mut st = AdamState::standard(&p);
        let g = vec![Tensor::zeros([1, 1, 1, 4])];
        assert!(adam_step(&mut p, &g, &mut st, 0.1).is_err());
        assert_eq!(st.step(), 0);
    }
}
