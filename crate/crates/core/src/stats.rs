use serde::{Deserialize, Serialize};

/// Binomial proportion `count / total` with standard error `sqrt(p(1-p)/N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub count: u64,
    pub total: u64,
}

impl Estimate {
    /// `None` when `total` is zero (rate undefined).
    pub fn binomial(count: u64, total: u64) -> Option<Self> {
        (total > 0).then(|| {
            let p = count as f64 / total as f64;
            Estimate {
                value: p,
                se: (p * (1.0 - p) / total as f64).sqrt(),
                count,
                total,
            }
        })
    }

    /// Standard error a proportion `p` would have at this sample size.
    pub fn se_at(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.total as f64).sqrt()
    }

    /// `(value - expected) / se`, using the larger of the observed and
    /// expected standard errors. Zero when both agree exactly.
    pub fn z_score(&self, expected: f64) -> Option<f64> {
        let diff = self.value - expected;
        let se = self.se.max(self.se_at(expected));
        if diff == 0.0 {
            Some(0.0)
        } else if se > 0.0 {
            Some(diff / se)
        } else {
            None
        }
    }

    /// `|value - expected| <= k * se` with the observed standard error.
    pub fn within(&self, expected: f64, k: f64) -> bool {
        (self.value - expected).abs() <= k * self.se
    }
}
