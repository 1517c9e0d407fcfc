//! Transductive self-training: predict the unseen data, promote the
//! top-scored fraction of each predicted class to pseudo-labels, refit the
//! unseen dictionary against the frozen compatibility matrix, and repeat
//! over an increasing self-labeled rate schedule.

use crate::dataset::{Hyperparams, UnseenDataset};
use crate::error::{Error, Result};
use crate::inference::{score_all, ScoreTable};
use crate::jedm::JedmModel;
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// Per-class selection count: round(n * delta) away from zero at .5,
/// clamped to at least one instance for any non-empty class.
pub fn selection_count(n: usize, delta: f64) -> usize {
    if n == 0 {
        return 0;
    }
    ((n as f64 * delta + 0.5).floor() as usize).max(1)
}

#[derive(Debug, Clone)]
pub struct SelfLabeledSet<S: Scalar> {
    /// Unique, sorted indices into the unseen instance matrix.
    pub instance_indices: Vec<usize>,
    /// Predicted class per selected instance, parallel to `instance_indices`.
    pub assigned_labels: Vec<usize>,
    /// Score of each selected instance for its assigned class.
    pub scores: Vec<S>,
    /// Selected instances, p x k.
    pub x: DenseMatrix<S>,
    /// Label embeddings of the assigned classes, q x k.
    pub a: DenseMatrix<S>,
}

/// Ranks the instances predicted into each class by score and keeps the top
/// `selection_count(n_c, delta)` of every non-empty class.
pub fn select_self_labeled<S: Scalar>(
    table: &ScoreTable<S>,
    delta: f64,
    ut: &UnseenDataset<S>,
) -> SelfLabeledSet<S> {
    assert!(delta > 0.0 && delta <= 1.0, "delta must be in (0, 1]");
    let num_classes = table.scores.cols();
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &c) in table.predictions.iter().enumerate() {
        per_class[c].push(i);
    }

    let mut picked: Vec<(usize, usize, S)> = Vec::new();
    for (c, members) in per_class.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let mut ranked = members.clone();
        // Descending score, index ascending on exact ties.
        ranked.sort_by(|&i, &j| {
            table
                .scores
                .get(j, c)
                .partial_cmp(&table.scores.get(i, c))
                .unwrap()
                .then(i.cmp(&j))
        });
        for &i in ranked.iter().take(selection_count(members.len(), delta)) {
            picked.push((i, c, table.scores.get(i, c)));
        }
    }
    picked.sort_by_key(|&(i, _, _)| i);

    let k = picked.len();
    let p = ut.x.rows();
    let q = ut.a.rows();
    let mut x = DenseMatrix::zeros(p, k);
    let mut a = DenseMatrix::zeros(q, k);
    for (j, &(i, c, _)) in picked.iter().enumerate() {
        for r in 0..p {
            x.set(r, j, ut.x.get(r, i));
        }
        for r in 0..q {
            a.set(r, j, ut.a.get(r, c));
        }
    }
    SelfLabeledSet {
        instance_indices: picked.iter().map(|&(i, _, _)| i).collect(),
        assigned_labels: picked.iter().map(|&(_, c, _)| c).collect(),
        scores: picked.iter().map(|&(_, _, s)| s).collect(),
        x,
        a,
    }
}

/// Closed-form code refit: C = (D^T D + lambda I)^-1 (D^T X + lambda V A).
pub fn refine_codes<S: Scalar>(
    d: &DenseMatrix<S>,
    x: &DenseMatrix<S>,
    a: &DenseMatrix<S>,
    v: &DenseMatrix<S>,
    lambda: f64,
) -> Result<DenseMatrix<S>> {
    assert!(lambda > 0.0, "lambda must be positive");
    let lam = S::from_f64(lambda);
    let mut gram = d.t_matmul(d)?;
    gram.add_ridge(lam);
    let rhs = d.t_matmul(x)?.add(&v.matmul(a)?.scale(lam))?;
    gram.solve_spd(&rhs, "refine codes")
}

/// Closed-form anchored dictionary refit:
/// D = (X C^T + mu D_prev)(C C^T + mu I)^-1.
pub fn refine_dictionary<S: Scalar>(
    x: &DenseMatrix<S>,
    c: &DenseMatrix<S>,
    d_prev: &DenseMatrix<S>,
    mu: f64,
) -> Result<DenseMatrix<S>> {
    assert!(mu > 0.0, "mu must be positive");
    let mu_s = S::from_f64(mu);
    let mut gram = c.matmul_t(c)?;
    gram.add_ridge(mu_s);
    let rhs = x.matmul_t(c)?.add(&d_prev.scale(mu_s))?;
    gram.solve_spd_right(&rhs, "refine dictionary")
}

/// The refinement objective:
/// ||X - D C||^2 + lambda ||V A - C||^2 + mu ||D - D_prev||^2.
#[allow(clippy::too_many_arguments)]
pub fn refine_objective<S: Scalar>(
    d: &DenseMatrix<S>,
    c: &DenseMatrix<S>,
    x: &DenseMatrix<S>,
    a: &DenseMatrix<S>,
    v: &DenseMatrix<S>,
    d_prev: &DenseMatrix<S>,
    lambda: f64,
    mu: f64,
) -> Result<S> {
    let recon = x.sub(&d.matmul(c)?)?.frob_norm_sq();
    let pull = v.matmul(a)?.sub(c)?.frob_norm_sq();
    let anchor = d.sub(d_prev)?.frob_norm_sq();
    Ok(recon + S::from_f64(lambda) * pull + S::from_f64(mu) * anchor)
}

/// Snapshot of one transduction round.
#[derive(Debug, Clone)]
pub struct TstdRound<S: Scalar> {
    pub round: usize,
    pub delta: f64,
    /// Predictions used for this round's selection (made with the dictionary
    /// entering the round).
    pub predictions: Vec<usize>,
    pub selected: SelfLabeledSet<S>,
    /// Dictionary after this round's refit.
    pub dictionary: DenseMatrix<S>,
    pub refine_objective_trace: Vec<S>,
}

#[derive(Debug, Clone)]
pub struct TstdRun<S: Scalar> {
    pub rounds: Vec<TstdRound<S>>,
    /// Predictions with the final refitted dictionary.
    pub final_predictions: Vec<usize>,
    pub final_scores: DenseMatrix<S>,
}

pub fn validate_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::Config("delta schedule must be non-empty".into()));
    }
    let mut prev = 0.0;
    for &d in schedule {
        // NaN entries fail this test too.
        if !d.is_finite() || d <= prev {
            return Err(Error::Config(format!(
                "delta schedule must be strictly increasing and positive, got {schedule:?}"
            )));
        }
        prev = d;
    }
    if prev > 1.0 {
        return Err(Error::Config(format!(
            "delta schedule must end at <= 1, got {prev}"
        )));
    }
    Ok(())
}

pub fn run_tstd<S: Scalar>(
    model: &JedmModel<S>,
    ut: &UnseenDataset<S>,
    h: &Hyperparams,
    schedule: &[f64],
) -> Result<TstdRun<S>> {
    validate_schedule(schedule)?;
    let v = &model.compat;
    let mut dict = model.dictionary.clone();

    let mut rounds = Vec::with_capacity(schedule.len());
    for (round, &delta) in schedule.iter().enumerate() {
        let table = score_all(&dict, v, &ut.x, &ut.a)?;
        let selected = select_self_labeled(&table, delta, ut);

        let anchor = dict.clone();
        let mut trace = Vec::new();
        let mut prev_obj: Option<S> = None;
        for iter in 0..h.max_outer_iters {
            let step = |e: Error| Error::Solver {
                iter: round * 1000 + iter,
                message: format!("round {round}: {e}"),
            };
            let codes = refine_codes(&dict, &selected.x, &selected.a, v, h.lambda).map_err(step)?;
            dict = refine_dictionary(&selected.x, &codes, &anchor, h.mu).map_err(step)?;
            let obj = refine_objective(
                &dict,
                &codes,
                &selected.x,
                &selected.a,
                v,
                &anchor,
                h.lambda,
                h.mu,
            )?;
            trace.push(obj);
            if let Some(prev) = prev_obj {
                let denom = prev.abs().max(S::from_f64(1e-300));
                if ((prev - obj) / denom).abs() < S::from_f64(h.outer_tol) {
                    break;
                }
            }
            prev_obj = Some(obj);
        }

        rounds.push(TstdRound {
            round,
            delta,
            predictions: table.predictions,
            selected,
            dictionary: dict.clone(),
            refine_objective_trace: trace,
        });
    }

    let final_table = score_all(&dict, v, &ut.x, &ut.a)?;
    Ok(TstdRun {
        rounds,
        final_predictions: final_table.predictions,
        final_scores: final_table.scores,
    })
}
