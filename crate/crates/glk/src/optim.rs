//! Adaptive gradient descent with decoupled weight decay.
//!
//! Small fixed-size parameter vectors only; no learning-rate schedules.

/// First/second-moment adaptive optimizer with bias correction and decoupled
/// weight decay.
///
/// Update per step t (elementwise):
/// ```text
/// m ← β1·m + (1−β1)·g          v ← β2·v + (1−β2)·g²
/// m̂ = m/(1−β1ᵗ)                v̂ = v/(1−β2ᵗ)
/// θ ← θ − lr·( m̂/(√v̂ + eps) + weight_decay·θ )
/// ```
#[derive(Debug, Clone)]
pub struct AdamW {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamW {
    pub fn new(learning_rate: f64, dim: usize) -> Self {
        AdamW::with_hyper(learning_rate, 0.9, 0.999, 0.0, dim)
    }

    pub fn with_hyper(
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        weight_decay: f64,
        dim: usize,
    ) -> Self {
        assert!(learning_rate > 0.0, "learning rate must be positive");
        assert!((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2));
        AdamW {
            learning_rate,
            beta1,
            beta2,
            eps: 1e-8,
            weight_decay,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    /// Applies one update in place. `grad.len()` must equal the dimension the
    /// optimizer was built with.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for k in 0..params.len() {
            let g = grad[k];
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[k] / bc1;
            let v_hat = self.v[k] / bc2;
            params[k] -= self.learning_rate
                * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * params[k]);
        }
    }
}
