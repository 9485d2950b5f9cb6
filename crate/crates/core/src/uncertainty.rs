//! Uncertainty measures over a predicted class distribution.
//!
//! Margin is the only measure where a lower value means more uncertain; the
//! others grow with uncertainty. Entropy uses the natural logarithm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clamp applied to the margin before it is inverted.
pub const MARGIN_EPS: f64 = 1e-12;

const SUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Margin,
    Entropy,
    VarRatio,
    MarginEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyScore {
    pub value: f64,
    pub measure: Measure,
}

impl Measure {
    pub fn score(self, p: &[f64]) -> Result<UncertaintyScore> {
        let value = match self {
            Measure::Margin => margin(p)?,
            Measure::Entropy => entropy(p)?,
            Measure::VarRatio => varratio(p)?,
            Measure::MarginEntropy => margin_entropy(p)?,
        };
        Ok(UncertaintyScore {
            value,
            measure: self,
        })
    }

    /// Score oriented so that larger always means more uncertain.
    pub fn ranking_key(self, p: &[f64]) -> Result<f64> {
        let v = self.score(p)?.value;
        Ok(if self == Measure::Margin { -v } else { v })
    }
}

fn validate(p: &[f64]) -> Result<()> {
    if p.len() < 2 {
        return Err(Error::input("probability vector needs at least two classes"));
    }
    if let Some(x) = p.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(Error::input(format!("invalid probability {x}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::input(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

fn top_two(p: &[f64]) -> (f64, f64) {
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &x in p {
        if x > first {
            second = first;
            first = x;
        } else if x > second {
            second = x;
        }
    }
    (first, second)
}

/// `p(y1) - p(y2)` for the two most likely classes.
pub fn margin(p: &[f64]) -> Result<f64> {
    validate(p)?;
    let (a, b) = top_two(p);
    Ok(a - b)
}

/// `-sum p ln p`, with `0 ln 0 = 0`.
pub fn entropy(p: &[f64]) -> Result<f64> {
    validate(p)?;
    Ok(-p
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>())
}

/// `1 - max p`.
pub fn varratio(p: &[f64]) -> Result<f64> {
    validate(p)?;
    Ok(1.0 - top_two(p).0)
}

/// Inverse margin plus entropy. The margin is clamped at [`MARGIN_EPS`] so
/// an exact tie yields a large finite score.
pub fn margin_entropy(p: &[f64]) -> Result<f64> {
    Ok(1.0 / margin(p)?.max(MARGIN_EPS) + entropy(p)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ABC: [f64; 3] = [0.5, 0.3, 0.2];

    #[test]
    fn margin_examples() {
        assert!((margin(&ABC).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(margin(&[1.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(margin(&[0.25; 4]).unwrap(), 0.0);
        assert!(margin(&[1.0]).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&[0.0, 1.0, 0.0]).unwrap(), 0.0);
        let uniform = [1.0 / 9.0; 9];
        assert!((entropy(&uniform).unwrap() - 9f64.ln()).abs() < 1e-12);
        assert!((entropy(&ABC).unwrap() - 1.029_653_014_064_573_5).abs() < 1e-12);
        assert!(entropy(&[1.2, -0.2]).is_err());
    }

    #[test]
    fn varratio_examples() {
        assert_eq!(varratio(&[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(varratio(&[0.25; 4]).unwrap(), 0.75);
        assert_eq!(varratio(&ABC).unwrap(), 0.5);
    }

    #[test]
    fn margin_entropy_examples() {
        assert!((margin_entropy(&ABC).unwrap() - 6.029_653_014_064_573_5).abs() < 1e-9);
        assert_eq!(margin_entropy(&[0.0, 1.0, 0.0]).unwrap(), 1.0);
        let tied = margin_entropy(&[0.5, 0.5]).unwrap();
        assert!(tied.is_finite());
        assert!(tied > 1e11);
        assert!(tied > margin_entropy(&[0.5 + 1e-9, 0.5 - 1e-9]).unwrap());
    }

    #[test]
    fn sum_check() {
        assert!(margin(&[0.5, 0.4]).is_err());
        assert!(margin(&[0.5, 0.5 + 1e-7]).is_ok());
    }

    #[test]
    fn ranking_key_orients_margin() {
        let confident = Measure::Margin.ranking_key(&[0.9, 0.1]).unwrap();
        let unsure = Measure::Margin.ranking_key(&[0.6, 0.4]).unwrap();
        assert!(unsure > confident);
    }
}
