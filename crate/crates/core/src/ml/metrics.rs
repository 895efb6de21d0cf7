//! Split criteria and the F1 score.

use serde::{Deserialize, Serialize};

use super::MlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    /// Shannon entropy in bits.
    Entropy,
    /// Entropy in nats.
    LogLoss,
}

/// Impurity of a node with the given (possibly weighted) class counts.
pub fn impurity(counts: &[f64], criterion: Criterion) -> Result<f64, MlError> {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 || counts.iter().any(|c| *c < 0.0) {
        return Err(MlError::InvalidParams(format!(
            "class counts {counts:?} must be non-negative and not all zero"
        )));
    }
    Ok(impurity_unchecked(counts, total, criterion))
}

pub(crate) fn impurity_unchecked(counts: &[f64], total: f64, criterion: Criterion) -> f64 {
    match criterion {
        Criterion::Gini => 1.0 - counts.iter().map(|c| (c / total).powi(2)).sum::<f64>(),
        Criterion::Entropy | Criterion::LogLoss => {
            let nats: f64 = counts
                .iter()
                .filter(|c| **c > 0.0)
                .map(|c| {
                    let p = c / total;
                    -p * p.ln()
                })
                .sum();
            if criterion == Criterion::Entropy {
                nats / std::f64::consts::LN_2
            } else {
                nats
            }
        }
    }
}

/// F1 of the positive class (label 1). Zero when precision + recall is zero.
pub fn f1_score(y_true: &[u8], y_pred: &[u8]) -> Result<f64, MlError> {
    if y_true.len() != y_pred.len() {
        return Err(MlError::LengthMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (t, p) in y_true.iter().zip(y_pred) {
        match (*t == 1, *p == 1) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            _ => {}
        }
    }
    Ok(if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impurity_values() {
        assert!((impurity(&[5.0, 5.0], Criterion::Gini).unwrap() - 0.5).abs() < 1e-12);
        for c in [Criterion::Gini, Criterion::Entropy, Criterion::LogLoss] {
            assert_eq!(impurity(&[10.0, 0.0], c).unwrap(), 0.0);
        }
        assert!((impurity(&[3.0, 1.0], Criterion::Entropy).unwrap() - 0.811_278_124_459_132_8).abs() < 1e-12);
        assert!(impurity(&[0.0, 0.0], Criterion::Gini).is_err());
    }

    #[test]
    fn f1_values() {
        assert_eq!(f1_score(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        let f = f1_score(&[1, 1, 1, 0], &[1, 1, 0, 1]).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(f1_score(&[1, 0], &[0, 0]).unwrap(), 0.0);
        assert!(f1_score(&[1], &[1, 0]).is_err());
    }
}
