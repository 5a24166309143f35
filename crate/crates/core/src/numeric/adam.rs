/// Adam hyperparameters. `beta1`, `beta2` and `eps` default to the usual
/// 0.9 / 0.999 / 1e-8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..AdamConfig::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam optimizer state: step counter and first/second moments per parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, sizes: &[usize]) -> Self {
        Adam {
            config,
            step: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of every buffer in `params`.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), self.m.len(), "parameter buffer count changed");
        assert_eq!(grads.len(), self.m.len(), "gradient buffer count mismatch");
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            assert_eq!(p.len(), g.len());
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.5, -2.0];
        let mut adam = Adam::new(AdamConfig::with_lr(0.1), &[2]);
        adam.step(&mut [&mut p], &[&[0.0, 0.0]]);
        assert_eq!(p, vec![1.5, -2.0]);
    }

    #[test]
    fn single_step_hand_recurrence() {
        // m = 0.1, v = 0.001; m_hat = 1, v_hat = 1; step = lr / (1 + eps).
        let mut p = vec![0.0];
        let mut adam = Adam::new(AdamConfig::with_lr(0.1), &[1]);
        adam.step(&mut [&mut p], &[&[1.0]]);
        let expected = -0.1 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15, "{} vs {expected}", p[0]);
    }

    #[test]
    fn zero_lr_is_identity() {
        let mut p = vec![0.3, 0.4, -7.0];
        let mut adam = Adam::new(AdamConfig::with_lr(0.0), &[3]);
        for _ in 0..10 {
            adam.step(&mut [&mut p], &[&[1.0, -2.0, 3.0]]);
        }
        assert_eq!(p, vec![0.3, 0.4, -7.0]);
    }

    #[test]
    fn descends_convex_bowl() {
        // f(x) = sum (x_i - c_i)^2
        let c = [1.0, -3.0, 0.5];
        let f = |x: &[f64]| x.iter().zip(&c).map(|(x, c)| (x - c) * (x - c)).sum::<f64>();
        let mut x = vec![5.0, 5.0, 5.0];
        let mut adam = Adam::new(AdamConfig::with_lr(0.05), &[3]);
        let mut prev = f(&x);
        for _ in 0..100 {
            let g: Vec<f64> = x.iter().zip(&c).map(|(x, c)| 2.0 * (x - c)).collect();
            adam.step(&mut [&mut x], &[&g]);
            let now = f(&x);
            assert!(now < prev);
            prev = now;
        }
    }
}
