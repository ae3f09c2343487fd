//! Mergeable running moments. Merging follows Chan et al.'s pairwise update,
//! so folding per-packet partials in packet order gives the same bits no
//! matter how the partials were computed.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        self.mean += d * w;
        self.m2 += other.m2 + d * d * self.n as f64 * w;
        self.n = n;
    }

    /// Population variance (divides by n).
    pub fn variance(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.m2 / self.n as f64
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for v in iter {
            m.push(v);
        }
        m
    }
}

/// Joint first and second moments of paired samples `(a, b)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CoMoments {
    pub n: u64,
    pub mean_a: f64,
    pub mean_b: f64,
    m2_a: f64,
    m2_b: f64,
    c_ab: f64,
}

impl CoMoments {
    pub fn push(&mut self, a: f64, b: f64) {
        self.n += 1;
        let n = self.n as f64;
        let da = a - self.mean_a;
        let db = b - self.mean_b;
        self.mean_a += da / n;
        self.mean_b += db / n;
        self.m2_a += da * (a - self.mean_a);
        self.m2_b += db * (b - self.mean_b);
        self.c_ab += da * (b - self.mean_b);
    }

    pub fn merge(&mut self, other: &CoMoments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let w = other.n as f64 / n as f64;
        let cross = self.n as f64 * w;
        let da = other.mean_a - self.mean_a;
        let db = other.mean_b - self.mean_b;
        self.mean_a += da * w;
        self.mean_b += db * w;
        self.m2_a += other.m2_a + da * da * cross;
        self.m2_b += other.m2_b + db * db * cross;
        self.c_ab += other.c_ab + da * db * cross;
        self.n = n;
    }

    pub fn variance_a(&self) -> f64 {
        self.per_n(self.m2_a)
    }

    pub fn variance_b(&self) -> f64 {
        self.per_n(self.m2_b)
    }

    pub fn covariance(&self) -> f64 {
        self.per_n(self.c_ab)
    }

    fn per_n(&self, v: f64) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            v / self.n as f64
        }
    }
}
