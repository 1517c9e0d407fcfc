//! Compatibility scoring and latent-space exports for unseen instances.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct ScoreTable<S: Scalar> {
    /// n x N compatibility scores.
    pub scores: DenseMatrix<S>,
    /// Row-wise argmax, ties broken by lowest class index.
    pub predictions: Vec<usize>,
    /// Best minus second-best score per instance (0 for a single class).
    pub margins: Vec<S>,
}

/// Scores every instance against every class: scores[i][c] = x_i^T D V a_c.
pub fn score_all<S: Scalar>(
    d: &DenseMatrix<S>,
    v: &DenseMatrix<S>,
    x: &DenseMatrix<S>,
    a: &DenseMatrix<S>,
) -> Result<ScoreTable<S>> {
    check_chain(d, v, x, a)?;
    let instance_emb = d.t_matmul(x)?; // d x n
    let prototypes = v.matmul(a)?; // d x N
    let scores = instance_emb.t_matmul(&prototypes)?; // n x N
    let mut predictions = Vec::with_capacity(scores.rows());
    let mut margins = Vec::with_capacity(scores.rows());
    for i in 0..scores.rows() {
        let row = scores.row(i);
        let mut best = 0;
        for (c, &s) in row.iter().enumerate() {
            if s > row[best] {
                best = c;
            }
        }
        let mut second = S::neg_infinity();
        for (c, &s) in row.iter().enumerate() {
            if c != best && s > second {
                second = s;
            }
        }
        predictions.push(best);
        margins.push(if row.len() == 1 {
            S::zero()
        } else {
            row[best] - second
        });
    }
    Ok(ScoreTable {
        scores,
        predictions,
        margins,
    })
}

/// Latent embedding of instances: D^T X (d x n).
pub fn embed_instances<S: Scalar>(
    d: &DenseMatrix<S>,
    x: &DenseMatrix<S>,
) -> Result<DenseMatrix<S>> {
    if d.rows() != x.rows() {
        return Err(Error::shape(
            "embed_instances: feature dimension",
            format!("dictionary rows {}", d.rows()),
            format!("instance rows {}", x.rows()),
        ));
    }
    d.t_matmul(x)
}

/// Latent class prototypes: V A (d x N).
pub fn embed_prototypes<S: Scalar>(
    v: &DenseMatrix<S>,
    a: &DenseMatrix<S>,
) -> Result<DenseMatrix<S>> {
    if v.cols() != a.rows() {
        return Err(Error::shape(
            "embed_prototypes: embedding dimension",
            format!("compat cols {}", v.cols()),
            format!("embedding rows {}", a.rows()),
        ));
    }
    v.matmul(a)
}

fn check_chain<S: Scalar>(
    d: &DenseMatrix<S>,
    v: &DenseMatrix<S>,
    x: &DenseMatrix<S>,
    a: &DenseMatrix<S>,
) -> Result<()> {
    if x.rows() != d.rows() {
        return Err(Error::shape(
            "score_all: feature dimension p",
            format!("instances {}", x.rows()),
            format!("dictionary {}", d.rows()),
        ));
    }
    if d.cols() != v.rows() {
        return Err(Error::shape(
            "score_all: latent dimension d",
            format!("dictionary {}", d.cols()),
            format!("compat {}", v.rows()),
        ));
    }
    if v.cols() != a.rows() {
        return Err(Error::shape(
            "score_all: embedding dimension q",
            format!("compat {}", v.cols()),
            format!("embeddings {}", a.rows()),
        ));
    }
    Ok(())
}
