use super::{NumericError, ParamStore, Parameter, Tensor};

/// First/second moment estimates for one parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first_moment: Tensor,
    pub second_moment: Tensor,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn for_shape(shape: &[usize]) -> Self {
        AdamState {
            first_moment: Tensor::zeros(shape),
            second_moment: Tensor::zeros(shape),
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of `param` from its current gradient.
pub fn adam_step(
    param: &mut Parameter,
    state: &mut AdamState,
    learning_rate: f64,
) -> Result<(), NumericError> {
    if state.first_moment.shape() != param.value().shape() {
        return Err(NumericError::Shape {
            op: "adam_step",
            left: param.value().shape().to_vec(),
            right: state.first_moment.shape().to_vec(),
        });
    }
    param.mask_frozen();
    if !param.grad().is_finite() {
        return Err(NumericError::NonFinite(param.name().to_string()));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);

    let grad = param.grad().data().to_vec();
    let m = state.first_moment.data_mut();
    let v = state.second_moment.data_mut();
    let value = param.value_mut().data_mut();
    for i in 0..grad.len() {
        let g = grad[i];
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        value[i] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Adam over every parameter of a store.
#[derive(Clone, Debug)]
pub struct Adam {
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new(store: &ParamStore) -> Self {
        Adam {
            states: store
                .iter()
                .map(|p| AdamState::for_shape(p.value().shape()))
                .collect(),
        }
    }

    pub fn step(&mut self, store: &mut ParamStore, learning_rate: f64) -> Result<(), NumericError> {
        for (param, state) in store.iter_mut().zip(&mut self.states) {
            adam_step(param, state, learning_rate)?;
        }
        Ok(())
    }

    pub fn states(&self) -> &[AdamState] {
        &self.states
    }
}
