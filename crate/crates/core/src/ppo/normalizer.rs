use serde::{Deserialize, Serialize};

const VAR_EPS: f64 = 1e-8;

/// Running mean/variance (Welford) used to standardize rewards.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardNormalizer {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl RewardNormalizer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Population variance of the samples seen so far.
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.mean) / (self.variance() + VAR_EPS).sqrt()
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        z * (self.variance() + VAR_EPS).sqrt() + self.mean
    }

    /// Feeds each raw reward in order and returns its normalized value under
    /// the statistics that include it.
    pub fn normalize_stream(&mut self, rewards: &[f64]) -> Vec<f64> {
        rewards
            .iter()
            .map(|&r| {
                self.update(r);
                self.normalize(r)
            })
            .collect()
    }
}
