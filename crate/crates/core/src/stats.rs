//! Comparison statistics between Monte Carlo samples and analytic targets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts of discrete outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram<K: Ord> {
    counts: BTreeMap<K, u64>,
    total: u64,
}

impl<K: Ord> Default for Histogram<K> {
    fn default() -> Self {
        Histogram {
            counts: BTreeMap::new(),
            total: 0,
        }
    }
}

impl<K: Ord + Clone> Histogram<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, key: K) {
        *self.counts.entry(key).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &Histogram<K>) {
        for (k, c) in &other.counts {
            *self.counts.entry(k.clone()).or_insert(0) += c;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, key: &K) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn frequency(&self, key: &K) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(key) as f64 / self.total as f64
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, u64)> {
        self.counts.iter().map(|(k, c)| (k, *c))
    }

    /// Total variation distance between two empirical laws.
    pub fn tv_distance(&self, other: &Histogram<K>) -> Result<f64> {
        if self.total == 0 || other.total == 0 {
            return Err(Error::EmptySample);
        }
        let mut sum = 0.0;
        for (k, _) in self.iter() {
            sum += (self.frequency(k) - other.frequency(k)).abs();
        }
        for (k, _) in other.iter() {
            if self.count(k) == 0 {
                sum += other.frequency(k);
            }
        }
        Ok(0.5 * sum)
    }
}

impl<K: Ord + Clone> FromIterator<K> for Histogram<K> {
    fn from_iter<I: IntoIterator<Item = K>>(iter: I) -> Self {
        let mut h = Histogram::new();
        for k in iter {
            h.add(k);
        }
        h
    }
}

/// Empirical histogram against an analytic pmf on an integer window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmfComparison {
    pub window: (u64, u64),
    pub samples: u64,
    /// `½ Σ_{n in window} |p̂(n) - p(n)|`.
    pub tv: f64,
    pub empirical_outside: f64,
    pub target_outside: f64,
}

pub fn compare_distributions<F>(empirical: &Histogram<u64>, pmf: F, window: (u64, u64)) -> Result<PmfComparison>
where
    F: Fn(u64) -> f64,
{
    if empirical.total() == 0 {
        return Err(Error::EmptySample);
    }
    let (lo, hi) = window;
    let mut tv = 0.0;
    let mut inside_emp = 0.0;
    let mut inside_target = 0.0;
    for n in lo..=hi {
        let (e, p) = (empirical.frequency(&n), pmf(n));
        tv += (e - p).abs();
        inside_emp += e;
        inside_target += p;
    }
    Ok(PmfComparison {
        window,
        samples: empirical.total(),
        tv: 0.5 * tv,
        empirical_outside: (1.0 - inside_emp).max(0.0),
        target_outside: (1.0 - inside_target).max(0.0),
    })
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_statistic<F>(samples: &[f64], cdf: F) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// Two-sided z-score of `successes` out of `trials` against probability `p`.
pub fn binomial_z(successes: u64, trials: u64, p: f64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::EmptySample);
    }
    let n = trials as f64;
    let var = n * p * (1.0 - p);
    let diff = successes as f64 - n * p;
    Ok(if var > 0.0 {
        diff / var.sqrt()
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    })
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Linear-interpolation quantile, `q` in `[0, 1]`.
pub fn quantile(xs: &[f64], q: f64) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    Some(if i + 1 < v.len() { v[i] + frac * (v[i + 1] - v[i]) } else { v[i] })
}
