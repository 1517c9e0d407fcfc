//! Dataset bundles, hyperparameters and their validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// Labeled seen-class data: features `x` (p x m), label matrix `y`
/// (m x M, entries in {-1,+1}), label embeddings `a` (q x M).
#[derive(Debug, Clone)]
pub struct SeenDataset<S: Scalar> {
    pub x: DenseMatrix<S>,
    pub y: DenseMatrix<S>,
    pub a: DenseMatrix<S>,
    pub class_names: Vec<String>,
}

/// Unlabeled unseen-class data: features `x` (p x n), label embeddings `a`
/// (q x N). Truth labels, when present, are for evaluation only and are
/// never read by training or transduction.
#[derive(Debug, Clone)]
pub struct UnseenDataset<S: Scalar> {
    pub x: DenseMatrix<S>,
    pub a: DenseMatrix<S>,
    pub class_names: Vec<String>,
    pub truth_labels: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub mu: f64,
    pub latent_dim: usize,
    pub ridge_eps: f64,
    pub max_outer_iters: usize,
    pub outer_tol: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            lambda: 1.0,
            mu: 1.0,
            latent_dim: 0, // 0 = resolve to min(p, m) at training time
            ridge_eps: 1e-8,
            max_outer_iters: 100,
            outer_tol: 1e-5,
        }
    }
}

impl Hyperparams {
    pub fn gamma(&self) -> f64 {
        self.beta / self.alpha
    }

    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("ridge_eps", self.ridge_eps),
            ("outer_tol", self.outer_tol),
        ];
        for (name, v) in positives {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be strictly positive and finite, got {v}"
                )));
            }
        }
        if !self.gamma().is_finite() || self.gamma() <= 0.0 {
            return Err(Error::Config(format!(
                "gamma = beta/alpha must be positive and finite, got {}",
                self.gamma()
            )));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::Config("max_outer_iters must be >= 1".into()));
        }
        Ok(())
    }

    /// Latent dimension with the `0 = min(p, m)` default resolved.
    pub fn resolved_latent_dim(&self, p: usize, m: usize) -> usize {
        if self.latent_dim == 0 {
            p.min(m)
        } else {
            self.latent_dim
        }
    }
}

/// Builds the {-1,+1} one-hot label matrix: row i has +1 at `labels[i]`.
pub fn one_hot_pm<S: Scalar>(labels: &[usize], num_classes: usize) -> Result<DenseMatrix<S>> {
    for (position, &label) in labels.iter().enumerate() {
        if label >= num_classes {
            return Err(Error::LabelOutOfRange {
                label,
                bound: num_classes,
                position,
            });
        }
    }
    if labels.is_empty() || num_classes == 0 {
        return Err(Error::Dimension(
            "one_hot_pm needs at least one label and one class".into(),
        ));
    }
    Ok(DenseMatrix::from_fn(labels.len(), num_classes, |r, c| {
        if labels[r] == c {
            S::one()
        } else {
            -S::one()
        }
    }))
}

/// Checks every SeenDataset invariant; returns all violations found.
pub fn validate_seen<S: Scalar>(ds: &SeenDataset<S>) -> Vec<String> {
    let mut violations = Vec::new();
    let (m, num_classes) = (ds.y.rows(), ds.y.cols());

    if ds.x.cols() != m {
        violations.push(format!(
            "feature matrix has {} columns but label matrix has {} rows",
            ds.x.cols(),
            m
        ));
    }
    if ds.a.cols() != num_classes {
        violations.push(format!(
            "embedding matrix has {} columns but label matrix has {} classes",
            ds.a.cols(),
            num_classes
        ));
    }
    if ds.class_names.len() != num_classes {
        violations.push(format!(
            "{} class names for {} classes",
            ds.class_names.len(),
            num_classes
        ));
    }
    for r in 0..m {
        let mut pos = 0usize;
        let mut bad_value = false;
        for &v in ds.y.row(r) {
            if v == S::one() {
                pos += 1;
            } else if v != -S::one() {
                bad_value = true;
            }
        }
        if bad_value {
            violations.push(format!("label row {r} has entries outside {{-1,+1}}"));
        } else if pos != 1 {
            violations.push(format!("label row {r} has {pos} entries equal to +1, expected 1"));
        }
    }
    violations
}

/// Argmax decoding of a {-1,+1} label matrix back to class indices.
pub fn labels_from_one_hot<S: Scalar>(y: &DenseMatrix<S>) -> Vec<usize> {
    (0..y.rows())
        .map(|r| {
            let row = y.row(r);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type M = DenseMatrix<f64>;

    fn toy_seen(m: usize, num_classes: usize, p: usize, q: usize) -> SeenDataset<f64> {
        let labels: Vec<usize> = (0..m).map(|i| i % num_classes).collect();
        SeenDataset {
            x: M::from_fn(p, m, |r, c| (r * 3 + c) as f64 * 0.1),
            y: one_hot_pm(&labels, num_classes).unwrap(),
            a: M::from_fn(q, num_classes, |r, c| (r + c) as f64 * 0.2 - 0.5),
            class_names: (0..num_classes).map(|i| format!("class{i}")).collect(),
        }
    }

    #[test]
    fn one_hot_pm_examples() {
        let y: M = one_hot_pm(&[0, 1], 2).unwrap();
        assert_eq!(y.data(), &[1.0, -1.0, -1.0, 1.0]);
        let y: M = one_hot_pm(&[2], 3).unwrap();
        assert_eq!(y.data(), &[-1.0, -1.0, 1.0]);
    }

    #[test]
    fn one_hot_pm_out_of_range() {
        let err = one_hot_pm::<f64>(&[3], 3).unwrap_err();
        match err {
            Error::LabelOutOfRange { label, bound, position } => {
                assert_eq!((label, bound, position), (3, 3, 0));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn valid_dataset_has_no_violations() {
        assert!(validate_seen(&toy_seen(6, 3, 4, 2)).is_empty());
    }

    #[test]
    fn double_positive_row_reported() {
        let mut ds = toy_seen(4, 2, 3, 2);
        ds.y.set(1, 0, 1.0);
        ds.y.set(1, 1, 1.0);
        let v = validate_seen(&ds);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("row 1"), "{v:?}");
        assert!(v[0].contains("2 entries"), "{v:?}");
    }

    #[test]
    fn shape_mismatch_reported() {
        let mut ds = toy_seen(4, 2, 3, 2);
        ds.x = M::from_fn(3, 5, |_, _| 0.0);
        let v = validate_seen(&ds);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("5 columns"), "{v:?}");
    }

    proptest! {
        #[test]
        fn one_hot_rows_sum_to_two_minus_classes(
            num_classes in 1usize..12,
            labels in proptest::collection::vec(0usize..12, 1..20),
        ) {
            let labels: Vec<usize> = labels.into_iter().map(|l| l % num_classes).collect();
            let y: M = one_hot_pm(&labels, num_classes).unwrap();
            for r in 0..y.rows() {
                let s: f64 = y.row(r).iter().sum();
                prop_assert!((s - (2.0 - num_classes as f64)).abs() < 1e-12);
            }
        }

        #[test]
        fn constructed_datasets_validate(
            m in 1usize..12,
            num_classes in 1usize..6,
            p in 1usize..8,
            q in 1usize..5,
        ) {
            prop_assert!(validate_seen(&toy_seen(m, num_classes, p, q)).is_empty());
        }
    }
}
