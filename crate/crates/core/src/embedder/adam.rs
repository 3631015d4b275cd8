use ndarray::{Array2, Zip};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates for an `n x m` parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Array2<f64>,
    pub second_moment: Array2<f64>,
}

impl AdamState {
    pub fn zeros(shape: (usize, usize)) -> Self {
        AdamState {
            first_moment: Array2::zeros(shape),
            second_moment: Array2::zeros(shape),
        }
    }
}

/// One bias-corrected Adam step, in place. `step` counts from 1.
pub fn adam_update(
    params: &mut Array2<f64>,
    grad: &Array2<f64>,
    state: &mut AdamState,
    learning_rate: f64,
    step: u32,
) {
    assert!(step >= 1, "Adam step index starts at 1");
    assert_eq!(params.dim(), grad.dim());
    let bias1 = 1.0 - BETA1.powi(step as i32);
    let bias2 = 1.0 - BETA2.powi(step as i32);
    Zip::from(params)
        .and(grad)
        .and(&mut state.first_moment)
        .and(&mut state.second_moment)
        .for_each(|p, &g, m, v| {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + EPSILON);
        });
}
