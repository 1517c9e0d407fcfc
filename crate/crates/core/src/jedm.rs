//! Joint embedding dictionary training: alternates a closed-form code
//! update, a closed-form compatibility update and the ADMM dictionary step
//! until the objective stalls.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::admm::{project_unit_ball, solve_dictionary};
use crate::dataset::{Hyperparams, SeenDataset};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::stream_rng;
use crate::scalar::Scalar;

/// ADMM knobs for the dictionary subproblem. The defaults are deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    /// Penalty; <= 0 auto-scales to the mean diagonal of C C^T.
    pub rho: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho: 0.0,
            tol: 1e-6,
            max_iters: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JedmModel<S: Scalar> {
    /// Seen dictionary, p x d, columns inside the unit ball.
    pub dictionary: DenseMatrix<S>,
    /// Compatibility matrix, d x q.
    pub compat: DenseMatrix<S>,
    pub hyper: Hyperparams,
    pub latent_dim: usize,
    pub seed: u64,
    pub objective_trace: Vec<S>,
}

/// The three Frobenius terms of the training objective:
/// ||X - D C||^2 + alpha ||C^T V A - Y||^2 + beta ||V A||^2.
pub fn jedm_objective<S: Scalar>(
    d: &DenseMatrix<S>,
    c: &DenseMatrix<S>,
    v: &DenseMatrix<S>,
    ds: &SeenDataset<S>,
    h: &Hyperparams,
) -> Result<S> {
    let recon = ds.x.sub(&d.matmul(c)?)?.frob_norm_sq();
    let va = v.matmul(&ds.a)?;
    let fit = c.t_matmul(&va)?.sub(&ds.y)?.frob_norm_sq();
    let reg = va.frob_norm_sq();
    Ok(recon + S::from_f64(h.alpha) * fit + S::from_f64(h.beta) * reg)
}

fn scaled_ridge<S: Scalar>(gram: &DenseMatrix<S>, ridge_eps: f64) -> S {
    let scale = gram.mean_abs_diag().max(S::one());
    S::from_f64(ridge_eps) * scale
}

/// Closed-form code update:
/// C = (D^T D + alpha V A A^T V^T)^-1 (D^T X + alpha V A Y^T).
pub fn update_codes<S: Scalar>(
    d: &DenseMatrix<S>,
    v: &DenseMatrix<S>,
    ds: &SeenDataset<S>,
    h: &Hyperparams,
) -> Result<DenseMatrix<S>> {
    let alpha = S::from_f64(h.alpha);
    let va = v.matmul(&ds.a)?;
    let mut gram = d.t_matmul(d)?.add(&va.matmul_t(&va)?.scale(alpha))?;
    gram.add_ridge(scaled_ridge(&gram, h.ridge_eps));
    let rhs = d.t_matmul(&ds.x)?.add(&va.matmul(&ds.y.transpose())?.scale(alpha))?;
    gram.solve_spd(&rhs, "code update")
}

/// Closed-form compatibility update:
/// V = (C C^T + gamma I)^-1 (C Y A^T) (A A^T)^-1, gamma = beta/alpha.
pub fn update_compat<S: Scalar>(
    c: &DenseMatrix<S>,
    ds: &SeenDataset<S>,
    h: &Hyperparams,
) -> Result<DenseMatrix<S>> {
    let mut left = c.matmul_t(c)?;
    left.add_ridge(S::from_f64(h.gamma()));
    left.add_ridge(scaled_ridge(&left, h.ridge_eps));
    let mut right = ds.a.matmul_t(&ds.a)?;
    right.add_ridge(scaled_ridge(&right, h.ridge_eps));
    let mid = c.matmul(&ds.y)?.matmul_t(&ds.a)?;
    let half = left.solve_spd(&mid, "compatibility update")?;
    right
        .solve_spd_right(&half, "compatibility update: embedding gram")
        .map_err(|e| match e {
            Error::Singular { cond, .. } => Error::Singular {
                context: format!(
                    "embedding gram A A^T ({}x{}) is rank deficient",
                    ds.a.rows(),
                    ds.a.rows()
                ),
                cond,
            },
            other => other,
        })
}

fn init_dictionary<S: Scalar>(p: usize, d: usize, seed: u64) -> DenseMatrix<S> {
    let mut rng = stream_rng(seed, "init");
    let raw = DenseMatrix::from_fn(p, d, |_, _| {
        S::from_f64(rng.sample::<f64, _>(StandardNormal))
    });
    project_unit_ball(&raw)
}

pub fn train_jedm<S: Scalar>(
    ds: &SeenDataset<S>,
    h: &Hyperparams,
    seed: u64,
) -> Result<JedmModel<S>> {
    train_jedm_with(ds, h, &AdmmConfig::default(), seed)
}

pub fn train_jedm_with<S: Scalar>(
    ds: &SeenDataset<S>,
    h: &Hyperparams,
    admm: &AdmmConfig,
    seed: u64,
) -> Result<JedmModel<S>> {
    h.validate()?;
    let violations = crate::dataset::validate_seen(ds);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    let p = ds.x.rows();
    let m = ds.x.cols();
    let latent_dim = h.resolved_latent_dim(p, m);
    if latent_dim < 1 || latent_dim > p {
        return Err(Error::Dimension(format!(
            "latent_dim {latent_dim} must satisfy 1 <= d <= p = {p}"
        )));
    }

    let mut dict = init_dictionary::<S>(p, latent_dim, seed);
    let mut compat = DenseMatrix::zeros(latent_dim, ds.a.rows());
    let mut trace = Vec::new();
    let mut prev_obj: Option<S> = None;

    for iter in 0..h.max_outer_iters {
        let step = |e: Error| Error::Solver {
            iter,
            message: e.to_string(),
        };
        let codes = update_codes(&dict, &compat, ds, h).map_err(step)?;
        compat = update_compat(&codes, ds, h).map_err(step)?;
        dict = solve_dictionary(
            &ds.x,
            &codes,
            &dict,
            S::from_f64(admm.rho),
            S::from_f64(admm.tol),
            admm.max_iters,
        )
        .map_err(step)?
        .dictionary;

        let obj = jedm_objective(&dict, &codes, &compat, ds, h)?;
        trace.push(obj);
        if let Some(prev) = prev_obj {
            let denom = prev.abs().max(S::from_f64(1e-300));
            if ((prev - obj) / denom).abs() < S::from_f64(h.outer_tol) {
                break;
            }
        }
        prev_obj = Some(obj);
    }

    Ok(JedmModel {
        dictionary: dict,
        compat,
        hyper: h.clone(),
        latent_dim,
        seed,
        objective_trace: trace,
    })
}
