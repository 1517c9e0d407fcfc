//! Evaluation metric, class-wise cross-validation grid search, and a
//! synthetic zero-shot benchmark generator with controllable domain shift.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{one_hot_pm, Hyperparams, SeenDataset, UnseenDataset};
use crate::error::{Error, Result};
use crate::inference::score_all;
use crate::jedm::train_jedm;
use crate::matrix::DenseMatrix;
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::tstd::run_tstd;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    /// (class index, accuracy) for every class with at least one instance.
    pub per_class_accuracy: Vec<(usize, f64)>,
    /// Unweighted mean over non-empty classes.
    pub mean_per_class_accuracy: f64,
    /// N x N counts, row = truth, column = prediction.
    pub confusion: Vec<Vec<usize>>,
    pub n_instances: usize,
}

impl EvalReport {
    pub fn confusion_matrix<S: Scalar>(&self) -> DenseMatrix<S> {
        let n = self.confusion.len();
        DenseMatrix::from_fn(n, n, |r, c| S::from_f64(self.confusion[r][c] as f64))
    }
}

/// Mean per-class top-1 accuracy.
pub fn per_class_top1(
    predictions: &[usize],
    truth: &[usize],
    num_classes: usize,
) -> Result<EvalReport> {
    if predictions.len() != truth.len() {
        return Err(Error::shape(
            "per_class_top1",
            format!("{} predictions", predictions.len()),
            format!("{} truth labels", truth.len()),
        ));
    }
    for (position, &label) in truth.iter().chain(predictions.iter()).enumerate() {
        if label >= num_classes {
            return Err(Error::LabelOutOfRange {
                label,
                bound: num_classes,
                position: position % predictions.len().max(1),
            });
        }
    }
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for (&p, &t) in predictions.iter().zip(truth) {
        confusion[t][p] += 1;
    }
    let mut per_class = Vec::new();
    for (c, row) in confusion.iter().enumerate() {
        let total: usize = row.iter().sum();
        if total > 0 {
            per_class.push((c, row[c] as f64 / total as f64));
        }
    }
    let mean = if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().map(|&(_, a)| a).sum::<f64>() / per_class.len() as f64
    };
    Ok(EvalReport {
        per_class_accuracy: per_class,
        mean_per_class_accuracy: mean,
        confusion,
        n_instances: predictions.len(),
    })
}

// ---------------------------------------------------------------------------
// Synthetic benchmark generator
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seen_classes: usize,
    pub unseen_classes: usize,
    pub m_per_class: usize,
    pub n_per_class: usize,
    pub feature_dim: usize,
    pub embed_dim: usize,
    pub latent_dim: usize,
    pub noise_sigma: f64,
    /// Latent translation applied to every unseen instance.
    pub shift_magnitude: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seen_classes: 10,
            unseen_classes: 5,
            m_per_class: 30,
            n_per_class: 30,
            feature_dim: 16,
            embed_dim: 16,
            latent_dim: 12,
            noise_sigma: 0.0,
            shift_magnitude: 0.0,
            seed: 42,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("seen_classes", self.seen_classes),
            ("unseen_classes", self.unseen_classes),
            ("m_per_class", self.m_per_class),
            ("n_per_class", self.n_per_class),
            ("feature_dim", self.feature_dim),
            ("embed_dim", self.embed_dim),
            ("latent_dim", self.latent_dim),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if self.latent_dim > self.feature_dim {
            return Err(Error::Config(format!(
                "latent_dim {} exceeds feature_dim {}",
                self.latent_dim, self.feature_dim
            )));
        }
        if self.latent_dim < self.seen_classes || self.embed_dim < self.seen_classes {
            return Err(Error::Config(format!(
                "latent_dim ({}) and embed_dim ({}) must be >= seen_classes ({}) \
                 so the class bases are orthonormal",
                self.latent_dim, self.embed_dim, self.seen_classes
            )));
        }
        if self.noise_sigma < 0.0 || self.shift_magnitude < 0.0 {
            return Err(Error::Config(
                "noise_sigma and shift_magnitude must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthData<S: Scalar> {
    pub seen: SeenDataset<S>,
    pub seen_labels: Vec<usize>,
    /// truth_labels is populated; strip it before handing to transduction
    /// code paths that must not see it.
    pub unseen: UnseenDataset<S>,
    /// Generating dictionary, p x d, orthonormal columns.
    pub dict_star: DenseMatrix<S>,
    /// Generating compatibility map, d x q.
    pub compat_star: DenseMatrix<S>,
    /// Latent class prototypes, d x (M + N), seen classes first.
    pub prototypes: DenseMatrix<S>,
    /// Minimum pairwise distance between latent prototypes.
    pub prototype_spacing: f64,
}

fn orthonormal_columns<S: Scalar>(
    rows: usize,
    cols: usize,
    rng: &mut impl Rng,
) -> DenseMatrix<S> {
    // Gram-Schmidt on a Gaussian matrix.
    let mut cols_vec: Vec<Vec<S>> = Vec::with_capacity(cols);
    while cols_vec.len() < cols {
        let mut v: Vec<S> = (0..rows)
            .map(|_| S::from_f64(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        for existing in &cols_vec {
            let dot: S = v.iter().zip(existing).map(|(&a, &b)| a * b).sum();
            for (vi, &ei) in v.iter_mut().zip(existing) {
                *vi -= dot * ei;
            }
        }
        let norm: S = v.iter().map(|&a| a * a).sum::<S>().sqrt();
        if norm.as_f64() < 1e-8 {
            continue; // degenerate draw, resample
        }
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        cols_vec.push(v);
    }
    DenseMatrix::from_fn(rows, cols, |r, c| cols_vec[c][r])
}

pub fn generate_synthetic<S: Scalar>(spec: &SynthSpec) -> Result<SynthData<S>> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, "synth");
    let (num_seen, num_unseen) = (spec.seen_classes, spec.unseen_classes);
    let total_classes = num_seen + num_unseen;
    let (p, q, d) = (spec.feature_dim, spec.embed_dim, spec.latent_dim);

    // Class coordinates w_c in R^M: seen classes sit on the standard basis,
    // unseen classes are random unit-norm mixtures of the seen directions.
    // Embeddings a_c = Q w_c and prototypes z_c = P w_c share those
    // coordinates through orthonormal bases Q (q x M) and P (d x M), so the
    // prototype map z = V* a with V* = P Q^T is linear, all prototypes have
    // equal norm, and unseen embeddings lie in the span of the seen ones.
    let seen_basis = orthonormal_columns::<S>(q, num_seen, &mut rng);
    let latent_basis = orthonormal_columns::<S>(d, num_seen, &mut rng);
    let compat_star = latent_basis.matmul(&seen_basis.transpose())?;

    let mut coords = DenseMatrix::zeros(num_seen, total_classes);
    for c in 0..num_seen {
        coords.set(c, c, S::one());
    }
    // Unseen coordinates share the seen ones' norm (1) and coordinate sum
    // (1), so any bilinear scorer fit on the seen one-vs-rest targets ranks
    // the true class first: w = 1/M + t g0 with g0 a unit zero-sum direction
    // and t = sqrt(1 - 1/M).
    let inv_m = 1.0 / num_seen as f64;
    let t = (1.0 - inv_m).sqrt();
    for u in 0..num_unseen {
        let g: Vec<f64> = (0..num_seen)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mean = g.iter().sum::<f64>() * inv_m;
        let g0: Vec<f64> = g.iter().map(|v| v - mean).collect();
        let norm = g0.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-10 {
            return Err(Error::Config(
                "degenerate class coordinate draw; choose another seed".into(),
            ));
        }
        for (r, v) in g0.iter().enumerate() {
            coords.set(r, num_seen + u, S::from_f64(inv_m + t * v / norm));
        }
    }
    let embeddings = seen_basis.matmul(&coords)?;
    let prototypes = latent_basis.matmul(&coords)?;

    let mut spacing = f64::INFINITY;
    for i in 0..total_classes {
        for j in (i + 1)..total_classes {
            let mut dist_sq = 0.0;
            for r in 0..d {
                dist_sq += (prototypes.get(r, i) - prototypes.get(r, j)).as_f64().powi(2);
            }
            spacing = spacing.min(dist_sq.sqrt());
        }
    }

    let dict_star = orthonormal_columns::<S>(p, d, &mut rng);

    let sigma = S::from_f64(spec.noise_sigma);
    let m = num_seen * spec.m_per_class;
    let mut seen_latent = DenseMatrix::zeros(d, m);
    let mut seen_labels = Vec::with_capacity(m);
    for c in 0..num_seen {
        for i in 0..spec.m_per_class {
            let col = c * spec.m_per_class + i;
            seen_labels.push(c);
            for r in 0..d {
                let noise = S::from_f64(rng.sample::<f64, _>(StandardNormal)) * sigma;
                seen_latent.set(r, col, prototypes.get(r, c) + noise);
            }
        }
    }

    let mut shift_dir: Vec<S> = (0..d)
        .map(|_| S::from_f64(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let norm: S = shift_dir.iter().map(|&a| a * a).sum::<S>().sqrt();
    let shift = S::from_f64(spec.shift_magnitude);
    for v in shift_dir.iter_mut() {
        *v = *v / norm * shift;
    }

    let n = num_unseen * spec.n_per_class;
    let mut unseen_latent = DenseMatrix::zeros(d, n);
    let mut truth = Vec::with_capacity(n);
    for c in 0..num_unseen {
        for i in 0..spec.n_per_class {
            let col = c * spec.n_per_class + i;
            truth.push(c);
            for (r, &shift_r) in shift_dir.iter().enumerate() {
                let noise = S::from_f64(rng.sample::<f64, _>(StandardNormal)) * sigma;
                unseen_latent.set(r, col, prototypes.get(r, num_seen + c) + shift_r + noise);
            }
        }
    }

    let seen = SeenDataset {
        x: dict_star.matmul(&seen_latent)?,
        y: one_hot_pm(&seen_labels, num_seen)?,
        a: sub_cols(&embeddings, 0, num_seen),
        class_names: (0..num_seen).map(|c| format!("seen_{c}")).collect(),
    };
    let unseen = UnseenDataset {
        x: dict_star.matmul(&unseen_latent)?,
        a: sub_cols(&embeddings, num_seen, total_classes),
        class_names: (0..num_unseen).map(|c| format!("unseen_{c}")).collect(),
        truth_labels: Some(truth),
    };

    Ok(SynthData {
        seen,
        seen_labels,
        unseen,
        dict_star,
        compat_star,
        prototypes,
        prototype_spacing: spacing,
    })
}

fn sub_cols<S: Scalar>(m: &DenseMatrix<S>, from: usize, to: usize) -> DenseMatrix<S> {
    DenseMatrix::from_fn(m.rows(), to - from, |r, c| m.get(r, from + c))
}

// ---------------------------------------------------------------------------
// Cross-validation grid search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvRecord {
    pub hyper: Hyperparams,
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
}

/// Class-wise fold assignment: shuffles the classes and hands each fold a
/// disjoint block of round(M * holdout_frac) held-out classes.
pub fn cv_split(
    num_classes: usize,
    folds: usize,
    holdout_frac: f64,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::Config("need at least 2 folds".into()));
    }
    let per_fold = (num_classes as f64 * holdout_frac + 0.5).floor() as usize;
    if per_fold < 2 {
        return Err(Error::Config(format!(
            "holdout of {per_fold} classes per fold is degenerate (need >= 2); \
             increase holdout_frac or the class count"
        )));
    }
    if per_fold * folds > num_classes {
        return Err(Error::Config(format!(
            "{folds} folds x {per_fold} held-out classes exceeds {num_classes} classes"
        )));
    }
    let mut order: Vec<usize> = (0..num_classes).collect();
    // Fisher-Yates with the dedicated shuffle stream.
    let mut rng = stream_rng(seed, "cv-shuffle");
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    Ok((0..folds)
        .map(|f| {
            let mut held: Vec<usize> = order[f * per_fold..(f + 1) * per_fold].to_vec();
            held.sort_unstable();
            held
        })
        .collect())
}

/// Splits a seen dataset into a training subset (classes not in `held_out`)
/// and a validation pseudo-unseen set built from the held-out classes.
pub fn split_by_classes<S: Scalar>(
    ds: &SeenDataset<S>,
    labels: &[usize],
    held_out: &[usize],
) -> Result<(SeenDataset<S>, UnseenDataset<S>)> {
    let num_classes = ds.a.cols();
    let is_held: Vec<bool> = (0..num_classes).map(|c| held_out.contains(&c)).collect();
    let train_classes: Vec<usize> = (0..num_classes).filter(|&c| !is_held[c]).collect();
    if train_classes.is_empty() {
        return Err(Error::Config("no classes left to train on".into()));
    }
    let remap: Vec<Option<usize>> = {
        let mut r = vec![None; num_classes];
        for (new, &old) in train_classes.iter().enumerate() {
            r[old] = Some(new);
        }
        for (new, &old) in held_out.iter().enumerate() {
            r[old] = Some(new);
        }
        r
    };

    let train_idx: Vec<usize> = (0..labels.len()).filter(|&i| !is_held[labels[i]]).collect();
    let valid_idx: Vec<usize> = (0..labels.len()).filter(|&i| is_held[labels[i]]).collect();
    if train_idx.is_empty() || valid_idx.is_empty() {
        return Err(Error::Config(
            "degenerate split: a side has no instances".into(),
        ));
    }

    let pick_x = |idx: &[usize]| {
        DenseMatrix::from_fn(ds.x.rows(), idx.len(), |r, c| ds.x.get(r, idx[c]))
    };
    let pick_a = |classes: &[usize]| {
        DenseMatrix::from_fn(ds.a.rows(), classes.len(), |r, c| ds.a.get(r, classes[c]))
    };

    let train_labels: Vec<usize> = train_idx
        .iter()
        .map(|&i| remap[labels[i]].unwrap())
        .collect();
    let train = SeenDataset {
        x: pick_x(&train_idx),
        y: one_hot_pm(&train_labels, train_classes.len())?,
        a: pick_a(&train_classes),
        class_names: train_classes
            .iter()
            .map(|&c| ds.class_names[c].clone())
            .collect(),
    };
    let valid_truth: Vec<usize> = valid_idx
        .iter()
        .map(|&i| remap[labels[i]].unwrap())
        .collect();
    let valid = UnseenDataset {
        x: pick_x(&valid_idx),
        a: pick_a(held_out),
        class_names: held_out
            .iter()
            .map(|&c| ds.class_names[c].clone())
            .collect(),
        truth_labels: Some(valid_truth),
    };
    Ok((train, valid))
}

/// Lexicographic (alpha, beta, lambda, mu) tie-break key.
fn hyper_key(h: &Hyperparams) -> [f64; 4] {
    [h.alpha, h.beta, h.lambda, h.mu]
}

/// Highest mean score wins; exact ties fall to the lexicographically
/// smallest (alpha, beta, lambda, mu).
pub fn pick_best(records: &[CvRecord]) -> Hyperparams {
    let mut best = &records[0];
    for r in &records[1..] {
        let better = r.mean_score > best.mean_score
            || (r.mean_score == best.mean_score
                && hyper_key(&r.hyper) < hyper_key(&best.hyper));
        if better {
            best = r;
        }
    }
    best.hyper.clone()
}

/// Inductive CV: trains the joint embedding model on the retained classes of
/// each fold and scores the held-out classes zero-shot.
pub fn cv_grid_search<S: Scalar>(
    ds: &SeenDataset<S>,
    grid: &[Hyperparams],
    folds: usize,
    holdout_frac: f64,
    seed: u64,
) -> Result<(Hyperparams, Vec<CvRecord>)> {
    cv_search_impl(ds, grid, folds, holdout_frac, seed, None)
}

/// Transductive CV: additionally runs the self-training loop on each fold's
/// held-out classes before scoring. Used to select lambda and mu.
pub fn cv_grid_search_transductive<S: Scalar>(
    ds: &SeenDataset<S>,
    grid: &[Hyperparams],
    folds: usize,
    holdout_frac: f64,
    schedule: &[f64],
    seed: u64,
) -> Result<(Hyperparams, Vec<CvRecord>)> {
    cv_search_impl(ds, grid, folds, holdout_frac, seed, Some(schedule))
}

fn cv_search_impl<S: Scalar>(
    ds: &SeenDataset<S>,
    grid: &[Hyperparams],
    folds: usize,
    holdout_frac: f64,
    seed: u64,
    schedule: Option<&[f64]>,
) -> Result<(Hyperparams, Vec<CvRecord>)> {
    if grid.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let labels = crate::dataset::labels_from_one_hot(&ds.y);
    let fold_sets = cv_split(ds.a.cols(), folds, holdout_frac, seed)?;

    let splits: Vec<(SeenDataset<S>, UnseenDataset<S>)> = fold_sets
        .iter()
        .map(|held| split_by_classes(ds, &labels, held))
        .collect::<Result<_>>()?;
    // CV must never train on a held-out class.
    for ((train, valid), held) in splits.iter().zip(&fold_sets) {
        debug_assert!(train.class_names.iter().all(|n| {
            !held.iter().any(|&c| &ds.class_names[c] == n)
        }));
        debug_assert_eq!(valid.class_names.len(), held.len());
    }

    let mut records = Vec::with_capacity(grid.len());
    for h in grid {
        let mut fold_scores = Vec::with_capacity(splits.len());
        for (f, (train, valid)) in splits.iter().enumerate() {
            let model = train_jedm(train, h, seed.wrapping_add(f as u64))?;
            let predictions = match schedule {
                None => score_all(&model.dictionary, &model.compat, &valid.x, &valid.a)?
                    .predictions,
                Some(sched) => {
                    let blind = UnseenDataset {
                        truth_labels: None,
                        ..valid.clone()
                    };
                    run_tstd(&model, &blind, h, sched)?.final_predictions
                }
            };
            let truth = valid.truth_labels.as_ref().unwrap();
            let report = per_class_top1(&predictions, truth, valid.a.cols())?;
            fold_scores.push(report.mean_per_class_accuracy);
        }
        let mean_score = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
        records.push(CvRecord {
            hyper: h.clone(),
            fold_scores,
            mean_score,
        });
    }
    Ok((pick_best(&records), records))
}

/// Staged search over one value list: (alpha, beta) first with the inductive
/// model, then (lambda, mu) transductively with the winners frozen.
pub fn staged_cv_search<S: Scalar>(
    ds: &SeenDataset<S>,
    values: &[f64],
    base: &Hyperparams,
    folds: usize,
    holdout_frac: f64,
    schedule: &[f64],
    seed: u64,
) -> Result<(Hyperparams, Vec<CvRecord>, Vec<CvRecord>)> {
    let mut stage1 = Vec::new();
    for &alpha in values {
        for &beta in values {
            stage1.push(Hyperparams {
                alpha,
                beta,
                ..base.clone()
            });
        }
    }
    let (best_ab, rec1) = cv_grid_search(ds, &stage1, folds, holdout_frac, seed)?;

    let mut stage2 = Vec::new();
    for &lambda in values {
        for &mu in values {
            stage2.push(Hyperparams {
                lambda,
                mu,
                ..best_ab.clone()
            });
        }
    }
    let (best, rec2) =
        cv_grid_search_transductive(ds, &stage2, folds, holdout_frac, schedule, seed)?;
    Ok((best, rec1, rec2))
}

/// Full 4-parameter cross product, scored transductively.
pub fn full_cv_search<S: Scalar>(
    ds: &SeenDataset<S>,
    values: &[f64],
    base: &Hyperparams,
    folds: usize,
    holdout_frac: f64,
    schedule: &[f64],
    seed: u64,
) -> Result<(Hyperparams, Vec<CvRecord>)> {
    let mut grid = Vec::new();
    for &alpha in values {
        for &beta in values {
            for &lambda in values {
                for &mu in values {
                    grid.push(Hyperparams {
                        alpha,
                        beta,
                        lambda,
                        mu,
                        ..base.clone()
                    });
                }
            }
        }
    }
    cv_grid_search_transductive(ds, &grid, folds, holdout_frac, schedule, seed)
}
