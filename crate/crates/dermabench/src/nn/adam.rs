//! Adam optimizer with the standard published defaults.

use ndarray::ArrayD;

use crate::nn::{Param, Trainable};
use crate::scalar::Real;

pub struct Adam<S: Real> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first_moment: Vec<ArrayD<S>>,
    second_moment: Vec<ArrayD<S>>,
}

impl<S: Real> Adam<S> {
    pub fn new(learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    /// Apply one update from the accumulated gradients. Parameters are
    /// visited in the model's stable order; state slots are matched by
    /// position. Frozen parameters keep a slot but are not updated.
    pub fn step<M: Trainable<S>>(&mut self, model: &mut M) {
        self.step += 1;
        let t = self.step as i32;
        let b1 = S::from_f64_c(self.beta1);
        let b2 = S::from_f64_c(self.beta2);
        let lr = S::from_f64_c(self.learning_rate);
        let eps = S::from_f64_c(self.epsilon);
        let bc1 = S::from_f64_c(1.0 - self.beta1.powi(t));
        let bc2 = S::from_f64_c(1.0 - self.beta2.powi(t));
        let one = S::one();

        let mut idx = 0usize;
        let (m_store, v_store) = (&mut self.first_moment, &mut self.second_moment);
        model.visit_params(&mut |p: &mut Param<S>| {
            if m_store.len() == idx {
                m_store.push(ArrayD::zeros(p.value.raw_dim()));
                v_store.push(ArrayD::zeros(p.value.raw_dim()));
            }
            if p.trainable {
                let m = &mut m_store[idx];
                let v = &mut v_store[idx];
                ndarray::Zip::from(&mut p.value)
                    .and(m)
                    .and(v)
                    .and(&p.grad)
                    .for_each(|w, m, v, &g| {
                        *m = *m * b1 + g * (one - b1);
                        *v = *v * b2 + g * g * (one - b2);
                        let m_hat = *m / bc1;
                        let v_hat = *v / bc2;
                        *w -= lr * m_hat / (v_hat.sqrt() + eps);
                    });
            }
            idx += 1;
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    struct Quadratic {
        p: Param<f64>,
    }

    impl Trainable<f64> for Quadratic {
        fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<f64>)) {
            f(&mut self.p);
        }
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        // f(w) = (w - 3)^2, gradient 2(w - 3)
        let mut model = Quadratic {
            p: Param::new(ArrayD::zeros(IxDyn(&[1]))),
        };
        let mut opt = Adam::new(0.1);
        for _ in 0..500 {
            let w = model.p.value[[0]];
            model.p.grad[[0]] = 2.0 * (w - 3.0);
            opt.step(&mut model);
        }
        assert!((model.p.value[[0]] - 3.0).abs() < 1e-3);
    }

    #[test]
    fn frozen_params_do_not_move() {
        let mut model = Quadratic {
            p: Param::new(ArrayD::ones(IxDyn(&[2]))),
        };
        model.p.trainable = false;
        model.p.grad.fill(10.0);
        let mut opt = Adam::new(0.5);
        opt.step(&mut model);
        assert_eq!(model.p.value[[0]], 1.0);
    }

    #[test]
    fn first_step_moves_by_about_lr() {
        // Adam's bias-corrected first step is ~lr * sign(g)
        let mut model = Quadratic {
            p: Param::new(ArrayD::zeros(IxDyn(&[1]))),
        };
        model.p.grad[[0]] = 0.42;
        let mut opt = Adam::new(1e-3);
        opt.step(&mut model);
        assert!((model.p.value[[0]] + 1e-3).abs() < 1e-6);
    }
}
