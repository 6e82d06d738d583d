//! Scalar accumulators for Monte-Carlo means. Merging in a fixed order keeps
//! ensemble statistics bit-reproducible.

/// Running sum, sum of squares, and count.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningMoments {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl RunningMoments {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: RunningMoments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn sum(&self) -> f64 {
        self.sum
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.sum / self.n as f64
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        let n = self.n as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    /// Standard error of the mean.
    pub fn std_err(&self) -> f64 {
        if self.n < 2 {
            f64::NAN
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    /// z-score of the mean against a hypothesized value.
    pub fn z_score(&self, hypothesis: f64) -> f64 {
        (self.mean() - hypothesis) / self.std_err()
    }
}

/// Binary success counter with the binomial standard error.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Counter {
    hits: u64,
    total: u64,
}

impl Counter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, hit: bool) {
        self.total += 1;
        self.hits += u64::from(hit);
    }

    pub fn merge(&mut self, other: Counter) {
        self.hits += other.hits;
        self.total += other.total;
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn rate(&self) -> f64 {
        self.hits as f64 / self.total as f64
    }

    pub fn std_err(&self) -> f64 {
        let p = self.rate();
        (p * (1.0 - p) / self.total as f64).sqrt()
    }
}
