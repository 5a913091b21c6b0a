//! Edge-cardinality coefficient sequences and their generating functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROBABILITY_SLACK: f64 = 1e-9;

/// Coefficients `c_1..c_K` of `c(x) = Σ c_k x^k`.
///
/// As a probability law (`ρ`) the coefficients sum to one and give the
/// cardinality distribution of a process arrival. As an intensity (`β`) they
/// are arbitrary non-negative rates, typically `t·ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingDistribution {
    coeffs: Vec<f64>,
    is_probability: bool,
}

impl MixingDistribution {
    /// A cardinality law; `coeffs[0]` is the weight of cardinality one.
    pub fn probability(coeffs: Vec<f64>) -> Result<Self> {
        let m = Self::intensity(coeffs)?;
        let total = m.total();
        if (total - 1.0).abs() > PROBABILITY_SLACK {
            return Err(Error::Config(format!(
                "coefficients sum to {total}, expected 1"
            )));
        }
        Ok(MixingDistribution {
            is_probability: true,
            ..m
        })
    }

    /// Non-negative intensities; `coeffs[0]` is the rate of cardinality one.
    pub fn intensity(mut coeffs: Vec<f64>) -> Result<Self> {
        if let Some((i, c)) = coeffs
            .iter()
            .enumerate()
            .find(|(_, c)| !(c.is_finite() && **c >= 0.0))
        {
            return Err(Error::Config(format!(
                "coefficient of x^{} is {c}; coefficients must be finite and non-negative",
                i + 1
            )));
        }
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Ok(MixingDistribution {
            coeffs,
            is_probability: false,
        })
    }

    pub fn is_probability(&self) -> bool {
        self.is_probability
    }

    /// Coefficient of `x^k`; zero outside the support.
    pub fn coeff(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.coeffs.get(k - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Largest `k` with a non-zero coefficient.
    pub fn max_cardinality(&self) -> usize {
        self.coeffs.len()
    }

    pub fn total(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    /// The intensity `t·c`.
    pub fn scaled(&self, t: f64) -> MixingDistribution {
        MixingDistribution {
            coeffs: self.coeffs.iter().map(|c| c * t).collect(),
            is_probability: false,
        }
    }

    /// Checks `c_1 + c_2 > 0`; the fluid limits need mass on edges of size one or two.
    pub fn require_low_order_mass(&self) -> Result<()> {
        if self.coeff(1) + self.coeff(2) > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(
                "the coefficients of x and x^2 must not both vanish".into(),
            ))
        }
    }

    /// `(c(x), c'(x), c''(x))` for `x ∈ [0, 1]`.
    pub fn eval(&self, x: f64) -> Result<(f64, f64, f64)> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::DomainError(format!(
                "generating function evaluated at {x}, outside [0, 1]"
            )));
        }
        Ok(self.eval_unchecked(x))
    }

    /// Simultaneous Horner evaluation of the value and two derivatives.
    pub fn eval_unchecked(&self, x: f64) -> (f64, f64, f64) {
        let (mut p0, mut p1, mut p2) = (0.0, 0.0, 0.0);
        for &a in self.coeffs.iter().rev() {
            p2 = p2 * x + p1;
            p1 = p1 * x + p0;
            p0 = p0 * x + a;
        }
        // The loop evaluated Σ c_k x^(k-1); multiply through by x.
        let value = p0 * x;
        let first = p0 + x * p1;
        let second = 2.0 * p1 + 2.0 * x * p2;
        (value, first, second)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval_unchecked(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.eval_unchecked(x).1
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.eval_unchecked(x).2
    }

    /// Parses a JSON array of coefficients as a cardinality law.
    pub fn probability_from_json(text: &str) -> Result<Self> {
        let coeffs: Vec<f64> = serde_json::from_str(text)?;
        Self::probability(coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn eval_examples() {
        let sq = MixingDistribution::probability(vec![0.0, 1.0]).unwrap();
        let (v, d1, d2) = sq.eval(0.5).unwrap();
        assert!(close(v, 0.25) && close(d1, 1.0) && close(d2, 2.0));

        let m = MixingDistribution::probability(vec![0.2, 0.0, 0.8]).unwrap();
        assert_eq!(m.eval(0.0).unwrap(), (0.0, 0.2, 0.0));
        assert!(close(m.eval(1.0).unwrap().0, 1.0));
    }

    #[test]
    fn eval_matches_power_sums() {
        let m = MixingDistribution::intensity(vec![0.3, 0.1, 0.0, 0.25, 0.05]).unwrap();
        for &x in &[0.0, 0.1, 0.37, 0.8, 1.0] {
            let (v, d1, d2) = m.eval(x).unwrap();
            let mut ev = (0.0, 0.0, 0.0);
            for k in 1..=5 {
                let c = m.coeff(k);
                let k_f = k as f64;
                ev.0 += c * x.powi(k as i32);
                ev.1 += c * k_f * x.powi(k as i32 - 1);
                if k >= 2 {
                    ev.2 += c * k_f * (k_f - 1.0) * x.powi(k as i32 - 2);
                }
            }
            assert!(close(v, ev.0) && close(d1, ev.1) && close(d2, ev.2), "x = {x}");
        }
    }

    #[test]
    fn eval_rejects_outside_unit_interval() {
        let m = MixingDistribution::probability(vec![1.0]).unwrap();
        assert!(matches!(m.eval(1.5), Err(Error::DomainError(_))));
        assert!(matches!(m.eval(-0.1), Err(Error::DomainError(_))));
    }

    #[test]
    fn validation() {
        assert!(MixingDistribution::probability(vec![0.5, 0.4]).is_err());
        assert!(MixingDistribution::probability(vec![0.5, 0.5 + 1e-12]).is_ok());
        assert!(MixingDistribution::intensity(vec![-0.1]).is_err());
        assert!(MixingDistribution::intensity(vec![f64::NAN]).is_err());
        let m = MixingDistribution::probability(vec![0.0, 0.0, 1.0]).unwrap();
        assert!(m.require_low_order_mass().is_err());
        assert_eq!(m.max_cardinality(), 3);
        let trimmed = MixingDistribution::intensity(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(trimmed.max_cardinality(), 1);
    }

    #[test]
    fn json_round_trip() {
        let m = MixingDistribution::probability_from_json("[0.1, 0.2, 0.7]").unwrap();
        assert_eq!(m.coeff(3), 0.7);
        assert_eq!(m.coeff(4), 0.0);
        assert!(m.scaled(2.0).coeff(1) == 0.2 && !m.scaled(2.0).is_probability());
    }
}
