//! Accuracy metrics. Regression-style accuracy is `100 - MAPE`, with MAPE taken
//! over points whose truth is nonzero; classification accuracy is percent correct.

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AccuracyError {
    #[error("empty holdout")]
    Empty,
    #[error("prediction and truth lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("MAPE undefined: every truth value is zero")]
    MapeUndefined,
}

pub fn mape_accuracy(predicted: &[f64], truth: &[f64]) -> Result<f64, AccuracyError> {
    if truth.is_empty() {
        return Err(AccuracyError::Empty);
    }
    if predicted.len() != truth.len() {
        return Err(AccuracyError::LengthMismatch(predicted.len(), truth.len()));
    }
    let (sum, n) = predicted
        .iter()
        .zip(truth)
        .filter(|(_, t)| **t != 0.0)
        .fold((0.0, 0usize), |(s, n), (p, t)| (s + ((p - t) / t).abs(), n + 1));
    if n == 0 {
        return Err(AccuracyError::MapeUndefined);
    }
    Ok(100.0 - 100.0 * sum / n as f64)
}

pub fn classification_accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64, AccuracyError> {
    if truth.is_empty() {
        return Err(AccuracyError::Empty);
    }
    if predicted.len() != truth.len() {
        return Err(AccuracyError::LengthMismatch(predicted.len(), truth.len()));
    }
    let ok = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(100.0 * ok as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_ten_percent_high() {
        let t = [10.0, 20.0, 40.0];
        assert_eq!(mape_accuracy(&t, &t).unwrap(), 100.0);
        let high: Vec<f64> = t.iter().map(|x| x * 1.1).collect();
        assert!((mape_accuracy(&high, &t).unwrap() - 90.0).abs() < 1e-9);
    }

    #[test]
    fn zeros_are_skipped_and_all_zero_is_undefined() {
        assert_eq!(mape_accuracy(&[5.0, 10.0], &[0.0, 10.0]).unwrap(), 100.0);
        assert_eq!(mape_accuracy(&[1.0], &[0.0]), Err(AccuracyError::MapeUndefined));
        assert_eq!(mape_accuracy(&[], &[]), Err(AccuracyError::Empty));
    }

    #[test]
    fn classification() {
        assert_eq!(classification_accuracy(&[0, 1, 2, 2], &[0, 1, 1, 2]).unwrap(), 75.0);
    }
}
