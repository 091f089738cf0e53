/// A Monte Carlo probability estimate from `successes` out of `trials`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub successes: u64,
    pub trials: u64,
}

impl Estimate {
    pub fn new(successes: u64, trials: u64) -> Self {
        assert!(successes <= trials);
        Self { successes, trials }
    }

    pub fn p(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    /// Binomial standard error sqrt(p(1-p)/n).
    pub fn stderr(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let p = self.p();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// Wilson score interval at the given z (1.96 for 95 %).
    pub fn wilson(&self, z: f64) -> (f64, f64) {
        wilson_interval(self.successes, self.trials, z)
    }

    /// Merge two estimates over disjoint trials.
    pub fn merge(self, other: Estimate) -> Estimate {
        Estimate::new(self.successes + other.successes, self.trials + other.trials)
    }
}

pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Gaussian-equivalent full width at half maximum, 2·sqrt(2 ln 2)·σ.
pub fn fwhm_from_samples(samples: &[f64]) -> Option<f64> {
    if samples.len() < 2 {
        return None;
    }
    let n = samples.len() as f64;
    // shift by the first sample so identical inputs give exactly zero
    let origin = samples[0];
    let mean = samples.iter().map(|x| x - origin).sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - origin - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some(FWHM_PER_SIGMA * var.sqrt())
}

/// Count, mean and sum of squared deviations, mergeable across disjoint
/// sample sets in any grouping.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        Moments {
            n,
            mean: self.mean + d * w,
            m2: self.m2 + other.m2 + d * d * self.n as f64 * w,
        }
    }

    pub fn std_dev(&self) -> Option<f64> {
        (self.n >= 2).then(|| (self.m2.max(0.0) / (self.n - 1) as f64).sqrt())
    }

    /// Gaussian-equivalent FWHM of the samples seen so far.
    pub fn fwhm(&self) -> Option<f64> {
        self.std_dev().map(|s| FWHM_PER_SIGMA * s)
    }
}

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;
