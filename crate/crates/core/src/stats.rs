//! Streaming means, variances and delta-method errors.

use crate::sampling::Merge;

/// Per-feature mean and variance (Welford, Chan merge).
#[derive(Debug, Clone)]
pub struct MeanVar {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl MeanVar {
    pub fn new(k: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; k],
            m2: vec![0.0; k],
        }
    }

    #[inline]
    pub fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    /// Sample variance of feature `i`.
    pub fn variance(&self, i: usize) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.m2[i] / (self.count - 1) as f64
    }

    /// Standard error of the mean of feature `i`.
    pub fn std_error(&self, i: usize) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        (self.variance(i) / self.count as f64).sqrt()
    }
}

impl Merge for MeanVar {
    fn merge(&mut self, later: Self) {
        if later.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = later;
            return;
        }
        let na = self.count as f64;
        let nb = later.count as f64;
        let n = na + nb;
        for i in 0..self.mean.len() {
            let d = later.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += later.m2[i] + d * d * na * nb / n;
        }
        self.count += later.count;
    }
}

/// Mean vector and full covariance of a small feature vector.
#[derive(Debug, Clone)]
pub struct MeanCov {
    k: usize,
    count: u64,
    mean: Vec<f64>,
    comoment: Vec<f64>,
    scratch: Vec<f64>,
}

impl MeanCov {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            count: 0,
            mean: vec![0.0; k],
            comoment: vec![0.0; k * k],
            scratch: vec![0.0; k],
        }
    }

    #[inline]
    pub fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for i in 0..self.k {
            self.scratch[i] = x[i] - self.mean[i];
            self.mean[i] += self.scratch[i] / n;
        }
        for i in 0..self.k {
            let after = x[i] - self.mean[i];
            for j in 0..self.k {
                self.comoment[i * self.k + j] += after * self.scratch[j];
            }
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    pub fn means(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.comoment[i * self.k + j] / (self.count - 1) as f64
    }

    /// Standard error of g(means) given ∇g, by the delta method.
    pub fn delta_std_error(&self, grad: &[f64]) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let mut v = 0.0;
        for i in 0..self.k {
            for j in 0..self.k {
                v += grad[i] * grad[j] * self.covariance(i, j);
            }
        }
        (v.max(0.0) / self.count as f64).sqrt()
    }
}

impl Merge for MeanCov {
    fn merge(&mut self, later: Self) {
        if later.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = later;
            return;
        }
        let na = self.count as f64;
        let nb = later.count as f64;
        let n = na + nb;
        let d: Vec<f64> = (0..self.k).map(|i| later.mean[i] - self.mean[i]).collect();
        for i in 0..self.k {
            for j in 0..self.k {
                self.comoment[i * self.k + j] +=
                    later.comoment[i * self.k + j] + d[i] * d[j] * na * nb / n;
            }
        }
        for i in 0..self.k {
            self.mean[i] += d[i] * nb / n;
        }
        self.count += later.count;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merged_equals_sequential() {
        let data: Vec<[f64; 2]> = (0..100)
            .map(|i| [(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos() * 3.0])
            .collect();
        let mut whole = MeanCov::new(2);
        let mut a = MeanCov::new(2);
        let mut b = MeanCov::new(2);
        let mut wv = MeanVar::new(2);
        let mut av = MeanVar::new(2);
        let mut bv = MeanVar::new(2);
        for (i, x) in data.iter().enumerate() {
            whole.push(x);
            wv.push(x);
            if i < 37 {
                a.push(x);
                av.push(x);
            } else {
                b.push(x);
                bv.push(x);
            }
        }
        a.merge(b);
        av.merge(bv);
        for i in 0..2 {
            assert!((a.mean(i) - whole.mean(i)).abs() < 1e-14);
            assert!((av.variance(i) - wv.variance(i)).abs() < 1e-12);
            for j in 0..2 {
                assert!((a.covariance(i, j) - whole.covariance(i, j)).abs() < 1e-12);
            }
            assert!((whole.covariance(i, i) - wv.variance(i)).abs() < 1e-12);
        }
    }
}
