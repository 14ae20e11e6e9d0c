//! Evaluation metrics for shift forecasts.

use serde::{Deserialize, Serialize};

use crate::math::sqrt;
use crate::{Error, Result};

fn check_lengths(y: &[f64], yhat: &[f64], min: usize) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::ShapeMismatch {
            expected: y.len(),
            found: yhat.len(),
        });
    }
    if y.len() < min {
        return Err(Error::SeriesTooShort {
            needed: min,
            got: y.len(),
        });
    }
    Ok(())
}

/// Pearson correlation between observed and predicted values.
pub fn pearson(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_lengths(y, yhat, 2)?;
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let mp = yhat.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in y.iter().zip(yhat) {
        let da = a - my;
        let db = b - mp;
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sqrt(sxx) * sqrt(syy))).clamp(-1.0, 1.0))
}

/// Root mean squared error, raw units.
pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_lengths(y, yhat, 1)?;
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sqrt(sse / y.len() as f64))
}

/// `|(y - yhat) / y|`, or `None` when `y == 0`.
pub fn relative_error(y: f64, yhat: f64) -> Option<f64> {
    if y == 0.0 {
        None
    } else {
        Some(((y - yhat) / y).abs())
    }
}

/// Maximum absolute percent error over points with nonzero `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mape {
    /// `max |y - yhat| / |y| * 100`; 0 when every `y` is zero.
    pub value: f64,
    /// Points skipped because `y == 0`.
    pub excluded: usize,
}

pub fn mape(y: &[f64], yhat: &[f64]) -> Result<Mape> {
    check_lengths(y, yhat, 1)?;
    let mut value = 0.0f64;
    let mut excluded = 0;
    for (&a, &b) in y.iter().zip(yhat) {
        match relative_error(a, b) {
            Some(e) => value = value.max(e * 100.0),
            None => excluded += 1,
        }
    }
    Ok(Mape { value, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let y = [0.1, 0.4, 0.2, 0.9];
        assert!((pearson(&y, &y).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(rmse(&y, &y).unwrap(), 0.0);
        assert_eq!(mape(&y, &y).unwrap().value, 0.0);
    }

    #[test]
    fn negated_prediction() {
        let y = [0.1, 0.4, 0.2, 0.9];
        let n: alloc::vec::Vec<f64> = y.iter().map(|v| -v).collect();
        assert!((pearson(&y, &n).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn definitional_percent_errors() {
        assert_eq!(mape(&[2.0], &[1.0]).unwrap().value, 50.0);
        assert_eq!(relative_error(2.0, 1.0), Some(0.5));
        assert_eq!(relative_error(0.0, 1.0), None);
        let m = mape(&[0.0, 4.0], &[1.0, 3.0]).unwrap();
        assert_eq!(m.excluded, 1);
        assert_eq!(m.value, 25.0);
    }

    #[test]
    fn errors() {
        assert_eq!(pearson(&[1.0, 1.0], &[0.0, 2.0]), Err(Error::ZeroVariance));
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }
}
