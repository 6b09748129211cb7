use super::params::{NmtConfig, Params};

/// One Adadelta update of a single coordinate. Returns the applied delta.
pub fn adadelta_update(theta: &mut f64, g: f64, eg2: &mut f64, ed2: &mut f64, rho: f64, eps: f64) -> f64 {
    *eg2 = rho * *eg2 + (1.0 - rho) * g * g;
    let delta = -((*ed2 + eps).sqrt() / (*eg2 + eps).sqrt()) * g;
    *ed2 = rho * *ed2 + (1.0 - rho) * delta * delta;
    *theta += delta;
    delta
}

/// Running averages of squared gradients and squared updates.
#[derive(Debug, Clone, PartialEq)]
pub struct Adadelta {
    pub rho: f64,
    pub epsilon: f64,
    pub sq_grad: Params,
    pub sq_delta: Params,
}

impl Adadelta {
    pub fn new(cfg: &NmtConfig, rho: f64, epsilon: f64) -> Self {
        Adadelta {
            rho,
            epsilon,
            sq_grad: Params::zeros(cfg),
            sq_delta: Params::zeros(cfg),
        }
    }

    pub fn step(&mut self, params: &mut Params, grads: &Params) {
        let (rho, eps) = (self.rho, self.epsilon);
        let p = params.tensors_mut();
        let g = grads.tensors();
        let a = self.sq_grad.tensors_mut();
        let d = self.sq_delta.tensors_mut();
        for ((((_, p), (_, g)), (_, a)), (_, d)) in p.into_iter().zip(g).zip(a).zip(d) {
            for i in 0..p.data.len() {
                adadelta_update(&mut p.data[i], g.data[i], &mut a.data[i], &mut d.data[i], rho, eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_by_hand() {
        let (mut th, mut eg, mut ed) = (0.0, 0.0, 0.0);
        let d = adadelta_update(&mut th, 1.0, &mut eg, &mut ed, 0.95, 1e-6);
        assert!((eg - 0.05).abs() < 1e-15);
        assert!((d - -(1e-6f64 / 0.050001).sqrt()).abs() < 1e-15);
        assert!((d + 4.4721e-3).abs() < 1e-7);
        assert_eq!(th, d);
    }

    #[test]
    fn zero_gradient_decays_accumulators() {
        let (mut th, mut eg, mut ed) = (1.5, 0.4, 0.2);
        adadelta_update(&mut th, 0.0, &mut eg, &mut ed, 0.9, 1e-6);
        assert_eq!(th, 1.5);
        assert!((eg - 0.36).abs() < 1e-15);
        assert!((ed - 0.18).abs() < 1e-15);
    }

    #[test]
    fn two_steps_on_quadratic() {
        // f(x) = x^2 / 2 from x = 3, so g = x
        let (rho, eps) = (0.95f64, 1e-6f64);
        let (mut th, mut eg, mut ed) = (3.0, 0.0, 0.0);
        for _ in 0..2 {
            let g = th;
            adadelta_update(&mut th, g, &mut eg, &mut ed, rho, eps);
        }
        let eg1 = 0.05 * 9.0;
        let d1 = -(eps.sqrt() / (eg1 + eps).sqrt()) * 3.0;
        let ed1 = 0.05 * d1 * d1;
        let x1 = 3.0 + d1;
        let eg2 = rho * eg1 + 0.05 * x1 * x1;
        let d2 = -((ed1 + eps).sqrt() / (eg2 + eps).sqrt()) * x1;
        assert!((th - (x1 + d2)).abs() < 1e-12);
        assert!((ed - (rho * ed1 + 0.05 * d2 * d2)).abs() < 1e-12);
    }
}
