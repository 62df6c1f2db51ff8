use crate::autodiff::Matrix;
use crate::error::{Error, Result};

/// Adam moments with decoupled weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: Vec<Matrix>,
    pub second: Vec<Matrix>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new<'a>(shapes: impl IntoIterator<Item = &'a Matrix>) -> Self {
        let zeros: Vec<Matrix> = shapes.into_iter().map(|m| Matrix::zeros(m.rows(), m.cols())).collect();
        Self {
            first: zeros.clone(),
            second: zeros,
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected update:
/// `θ ← θ − lr·(m̂/(√v̂ + ε) + wd·θ)`.
pub fn adam_step(params: &mut [&mut Matrix], grads: &[Matrix], state: &mut AdamState, lr: f64, wd: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} parameters, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.first.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.first) {
        if p.shape() != g.shape() || p.shape() != m.shape() {
            return Err(Error::ShapeMismatch {
                op: "adam_step",
                lhs: p.shape(),
                rhs: g.shape(),
            });
        }
    }
    state.step += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let t = i32::try_from(state.step).unwrap_or(i32::MAX);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    for (i, param) in params.iter_mut().enumerate() {
        let m = state.first[i].as_mut_slice();
        let v = state.second[i].as_mut_slice();
        for (k, (theta, &g)) in param.as_mut_slice().iter_mut().zip(grads[i].as_slice()).enumerate() {
            m[k] = b1 * m[k] + (1.0 - b1) * g;
            v[k] = b2 * v[k] + (1.0 - b2) * g * g;
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            *theta -= lr * (m_hat / (v_hat.sqrt() + eps) + wd * *theta);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_no_decay_is_noop() {
        let mut p = Matrix::from_rows(&[[0.3, -1.0]]).unwrap();
        let before = p.clone();
        let mut st = AdamState::new([&p]);
        adam_step(&mut [&mut p], &[Matrix::zeros(1, 2)], &mut st, 0.1, 0.0).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = Matrix::scalar(0.0);
        let mut st = AdamState::new([&p]);
        adam_step(&mut [&mut p], &[Matrix::scalar(1.0)], &mut st, 0.1, 0.0).unwrap();
        assert!((p.as_slice()[0] + 0.1).abs() < 1e-8);
    }

    #[test]
    fn deterministic_trajectory() {
        let run = || {
            let mut p = Matrix::from_rows(&[[1.0, 2.0, -3.0]]).unwrap();
            let mut st = AdamState::new([&p]);
            for k in 0..50 {
                let g = p.map(|x| 2.0 * x + (k as f64 * 0.1).sin());
                adam_step(&mut [&mut p], &[g], &mut st, 0.05, 1e-3).unwrap();
            }
            p
        };
        assert_eq!(run().as_slice(), run().as_slice());
    }

    #[test]
    fn shape_mismatch() {
        let mut p = Matrix::zeros(2, 2);
        let mut st = AdamState::new([&p]);
        assert!(adam_step(&mut [&mut p], &[Matrix::zeros(1, 2)], &mut st, 0.1, 0.0).is_err());
        assert!(adam_step(&mut [&mut p], &[], &mut st, 0.1, 0.0).is_err());
    }
}
