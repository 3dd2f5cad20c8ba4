use serde::{Deserialize, Serialize};

/// Running mean and variance of observations (parallel-merge update).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningNorm {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: f64,
    pub clip: f64,
    pub eps: f64,
}

impl RunningNorm {
    pub fn new(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], var: vec![1.0; dim], count: 1e-4, clip: 10.0, eps: 1e-8 }
    }

    pub fn update(&mut self, x: &[f64]) {
        let total = self.count + 1.0;
        for i in 0..x.len() {
            let delta = x[i] - self.mean[i];
            let new_mean = self.mean[i] + delta / total;
            let m2 = self.var[i] * self.count + delta * delta * self.count / total;
            self.mean[i] = new_mean;
            self.var[i] = m2 / total;
        }
        self.count = total;
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.var))
            .map(|(v, (m, s2))| ((v - m) / (s2 + self.eps).sqrt()).clamp(-self.clip, self.clip))
            .collect()
    }
}
