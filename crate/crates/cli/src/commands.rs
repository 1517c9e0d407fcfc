//! Command implementations. Every command writes its resolved configuration
//! into the output directory and is byte-for-byte reproducible under a fixed
//! seed.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;
use zsldict_core::dataset::Hyperparams;
use zsldict_core::eval::{
    cv_grid_search, cv_grid_search_transductive, generate_synthetic, per_class_top1, pick_best,
    CvRecord, SynthSpec,
};
use zsldict_core::inference::{embed_instances, score_all};
use zsldict_core::io::{load_model, load_seen, load_unseen, save_model, write_dmat, DatasetManifest};
use zsldict_core::jedm::train_jedm;
use zsldict_core::tstd::run_tstd;
use zsldict_core::{DenseMatrix, Error, SeenDataset, UnseenDataset};

use crate::{CvArgs, PredictArgs, SweepDeltaArgs, SynthArgs, TrainArgs, TransduceArgs};

pub const RUN_FORMAT_VERSION: &str = "zsldict-run/1";

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    /// A required input is absent (exit code 4), e.g. truth labels.
    Missing(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => e.fmt(f),
            CliError::Missing(m) => write!(f, "missing requirement: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CmdResult = Result<(), CliError>;

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Core(Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn prepare_out(dir: &Path, force: bool) -> CmdResult {
    if dir.exists() {
        let non_empty = fs::read_dir(dir)
            .map(|mut d| d.next().is_some())
            .unwrap_or(false);
        if non_empty && !force {
            return Err(Error::Config(format!(
                "output directory {} is not empty; pass --force to overwrite",
                dir.display()
            ))
            .into());
        }
    }
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_json(path: &Path, value: &serde_json::Value) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value).expect("json serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_config(dir: &Path, value: serde_json::Value) -> CmdResult {
    write_json(&dir.join("config.json"), &value)
}

fn write_predictions(path: &Path, predictions: &[usize], class_names: &[String]) -> CmdResult {
    let mut out = String::new();
    for &c in predictions {
        out.push_str(&class_names[c]);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Writes report.json when truth labels are available; returns the accuracy.
fn maybe_report(
    dir: &Path,
    predictions: &[usize],
    ut: &UnseenDataset<f64>,
) -> Result<Option<f64>, CliError> {
    let Some(truth) = &ut.truth_labels else {
        return Ok(None);
    };
    let report = per_class_top1(predictions, truth, ut.a.cols())?;
    write_json(
        &dir.join("report.json"),
        &serde_json::to_value(&report).expect("report serializes"),
    )?;
    Ok(Some(report.mean_per_class_accuracy))
}

pub fn cmd_train(a: TrainArgs) -> CmdResult {
    let ds: SeenDataset<f64> = load_seen(&a.manifest)?;
    let hyper = a.hyper.to_hyperparams();
    let model = train_jedm(&ds, &hyper, a.common.seed)?;
    log::info!(
        "trained in {} outer iterations, final objective {:.6}",
        model.objective_trace.len(),
        model.objective_trace.last().unwrap()
    );
    prepare_out(&a.common.out, a.common.force)?;
    save_model(&a.common.out, &model)?;
    write_config(
        &a.common.out,
        json!({
            "format_version": RUN_FORMAT_VERSION,
            "command": "train",
            "manifest": a.manifest,
            "hyper": model.hyper,
            "resolved_latent_dim": model.latent_dim,
            "seed": a.common.seed,
            "threads": a.common.threads,
        }),
    )
}

pub fn cmd_predict(a: PredictArgs) -> CmdResult {
    let model = load_model::<f64>(&a.model)?;
    let ut: UnseenDataset<f64> = load_unseen(&a.manifest)?;
    let table = score_all(&model.dictionary, &model.compat, &ut.x, &ut.a)?;
    let embedded = embed_instances(&model.dictionary, &ut.x)?;
    prepare_out(&a.common.out, a.common.force)?;
    write_predictions(&a.common.out.join("predictions.txt"), &table.predictions, &ut.class_names)?;
    write_dmat(&a.common.out.join("scores.dmat"), &table.scores)?;
    write_dmat(&a.common.out.join("embeddings.dmat"), &embedded)?;
    if let Some(acc) = maybe_report(&a.common.out, &table.predictions, &ut)? {
        log::info!("mean per-class accuracy {acc:.4}");
    }
    write_config(
        &a.common.out,
        json!({
            "format_version": RUN_FORMAT_VERSION,
            "command": "predict",
            "model": a.model,
            "manifest": a.manifest,
            "seed": a.common.seed,
            "threads": a.common.threads,
        }),
    )
}

fn transduce_hyper(
    stored: &Hyperparams,
    lambda: Option<f64>,
    mu: Option<f64>,
    tol: Option<f64>,
    max_iters: Option<usize>,
) -> Hyperparams {
    let mut h = stored.clone();
    if let Some(v) = lambda {
        h.lambda = v;
    }
    if let Some(v) = mu {
        h.mu = v;
    }
    if let Some(v) = tol {
        h.outer_tol = v;
    }
    if let Some(v) = max_iters {
        h.max_outer_iters = v;
    }
    h
}

pub fn cmd_transduce(a: TransduceArgs) -> CmdResult {
    let model = load_model::<f64>(&a.model)?;
    let ut: UnseenDataset<f64> = load_unseen(&a.manifest)?;
    let hyper = transduce_hyper(&model.hyper, a.lambda, a.mu, a.tol, a.max_iters);
    // The loop never sees evaluation truth.
    let blind = UnseenDataset {
        truth_labels: None,
        ..ut.clone()
    };
    let run = run_tstd(&model, &blind, &hyper, &a.schedule)?;

    prepare_out(&a.common.out, a.common.force)?;
    for round in &run.rounds {
        let rd = a.common.out.join(format!("round_{}", round.round));
        fs::create_dir_all(&rd).map_err(|e| io_err(&rd, e))?;
        write_predictions(&rd.join("predictions.txt"), &round.predictions, &ut.class_names)?;
        let mut sel = String::new();
        for ((&i, &c), &s) in round
            .selected
            .instance_indices
            .iter()
            .zip(&round.selected.assigned_labels)
            .zip(&round.selected.scores)
        {
            sel.push_str(&format!("{i} {} {s}\n", ut.class_names[c]));
        }
        let sel_path = rd.join("selected.txt");
        fs::write(&sel_path, sel).map_err(|e| io_err(&sel_path, e))?;
        write_dmat(&rd.join("D_t.dmat"), &round.dictionary)?;
    }
    write_predictions(
        &a.common.out.join("predictions.txt"),
        &run.final_predictions,
        &ut.class_names,
    )?;
    write_dmat(&a.common.out.join("scores.dmat"), &run.final_scores)?;
    if let Some(acc) = maybe_report(&a.common.out, &run.final_predictions, &ut)? {
        log::info!("final mean per-class accuracy {acc:.4}");
    }
    write_config(
        &a.common.out,
        json!({
            "format_version": RUN_FORMAT_VERSION,
            "command": "transduce",
            "model": a.model,
            "manifest": a.manifest,
            "schedule": a.schedule,
            "hyper": hyper,
            "seed": a.common.seed,
            "threads": a.common.threads,
        }),
    )
}

pub fn cmd_sweep_delta(a: SweepDeltaArgs) -> CmdResult {
    let model = load_model::<f64>(&a.model)?;
    let ut: UnseenDataset<f64> = load_unseen(&a.manifest)?;
    if ut.truth_labels.is_none() {
        return Err(CliError::Missing(format!(
            "sweep-delta needs truth labels; manifest {} has no `labels` key",
            a.manifest.display()
        )));
    }
    let hyper = transduce_hyper(&model.hyper, a.lambda, a.mu, None, None);

    let schedules: Vec<Vec<f64>> = if a.schedules.is_empty() {
        vec![vec![0.4], vec![0.6], vec![0.8], vec![1.0]]
    } else {
        a.schedules
            .iter()
            .map(|s| {
                s.split(',')
                    .map(|tok| {
                        tok.trim().parse::<f64>().map_err(|e| {
                            Error::Config(format!("bad schedule entry {tok:?}: {e}"))
                        })
                    })
                    .collect::<Result<Vec<f64>, Error>>()
            })
            .collect::<Result<_, _>>()?
    };

    let blind = UnseenDataset {
        truth_labels: None,
        ..ut.clone()
    };
    let truth = ut.truth_labels.as_ref().unwrap();
    let mut csv = String::from("schedule,delta,mean_per_class_accuracy\n");
    for schedule in &schedules {
        let run = run_tstd(&model, &blind, &hyper, schedule)?;
        let report = per_class_top1(&run.final_predictions, truth, ut.a.cols())?;
        let label = schedule
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(";");
        csv.push_str(&format!(
            "{label},{},{}\n",
            schedule.last().unwrap(),
            report.mean_per_class_accuracy
        ));
    }

    prepare_out(&a.common.out, a.common.force)?;
    let csv_path = a.common.out.join("sweep.csv");
    fs::write(&csv_path, csv).map_err(|e| io_err(&csv_path, e))?;
    write_config(
        &a.common.out,
        json!({
            "format_version": RUN_FORMAT_VERSION,
            "command": "sweep-delta",
            "model": a.model,
            "manifest": a.manifest,
            "schedules": schedules,
            "hyper": hyper,
            "seed": a.common.seed,
            "threads": a.common.threads,
        }),
    )
}

fn write_split(
    dir: &Path,
    x: &DenseMatrix<f64>,
    a: &DenseMatrix<f64>,
    labels: Option<(&[usize], &[String])>,
    classes: &[String],
) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_dmat(&dir.join("features.dmat"), x)?;
    write_dmat(&dir.join("embeddings.dmat"), a)?;
    let labels_path = labels.map(|(idx, names)| {
        let mut text = String::new();
        for &l in idx {
            text.push_str(&names[l]);
            text.push('\n');
        }
        (dir.join("labels.txt"), text)
    });
    if let Some((path, text)) = &labels_path {
        fs::write(path, text).map_err(|e| io_err(path, e))?;
    }
    let manifest = DatasetManifest {
        features: PathBuf::from("features.dmat"),
        labels: labels_path.map(|_| PathBuf::from("labels.txt")),
        embeddings: PathBuf::from("embeddings.dmat"),
        classes: classes.to_vec(),
    };
    manifest.save(&dir.join("manifest.json"))?;
    Ok(())
}

pub fn cmd_synth(a: SynthArgs) -> CmdResult {
    let spec = SynthSpec {
        seen_classes: a.seen_classes,
        unseen_classes: a.unseen_classes,
        m_per_class: a.m_per_class,
        n_per_class: a.n_per_class,
        feature_dim: a.feature_dim,
        embed_dim: a.embed_dim,
        latent_dim: a.latent_dim,
        noise_sigma: a.noise_sigma,
        shift_magnitude: a.shift_magnitude,
        seed: a.common.seed,
    };
    let data = generate_synthetic::<f64>(&spec)?;
    prepare_out(&a.common.out, a.common.force)?;
    write_split(
        &a.common.out.join("seen"),
        &data.seen.x,
        &data.seen.a,
        Some((&data.seen_labels, &data.seen.class_names)),
        &data.seen.class_names,
    )?;
    write_split(
        &a.common.out.join("unseen"),
        &data.unseen.x,
        &data.unseen.a,
        data.unseen
            .truth_labels
            .as_deref()
            .map(|t| (t, &data.unseen.class_names[..])),
        &data.unseen.class_names,
    )?;
    write_config(
        &a.common.out,
        json!({
            "format_version": RUN_FORMAT_VERSION,
            "command": "synth",
            "spec": spec,
            "prototype_spacing": data.prototype_spacing,
            "threads": a.common.threads,
        }),
    )
}

/// Evaluates every grid entry, fanning out over `threads` workers. Each
/// entry is scored independently via a singleton search, so the records are
/// identical to a sequential run.
fn eval_grid(
    ds: &SeenDataset<f64>,
    grid: &[Hyperparams],
    folds: usize,
    holdout_frac: f64,
    schedule: Option<&[f64]>,
    seed: u64,
    threads: usize,
) -> Result<Vec<CvRecord>, Error> {
    let search_one = |h: &Hyperparams| -> Result<CvRecord, Error> {
        let singleton = std::slice::from_ref(h);
        let (_, mut records) = match schedule {
            None => cv_grid_search(ds, singleton, folds, holdout_frac, seed)?,
            Some(s) => {
                cv_grid_search_transductive(ds, singleton, folds, holdout_frac, s, seed)?
            }
        };
        Ok(records.pop().unwrap())
    };

    if threads <= 1 {
        return grid.iter().map(search_one).collect();
    }
    let chunk = grid.len().div_ceil(threads);
    let mut slots: Vec<Option<Result<CvRecord, Error>>> = grid.iter().map(|_| None).collect();
    std::thread::scope(|scope| {
        for (grid_chunk, slot_chunk) in grid.chunks(chunk).zip(slots.chunks_mut(chunk)) {
            scope.spawn(|| {
                for (h, slot) in grid_chunk.iter().zip(slot_chunk.iter_mut()) {
                    *slot = Some(search_one(h));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.unwrap()).collect()
}

pub fn cmd_cv(a: CvArgs) -> CmdResult {
    let ds: SeenDataset<f64> = load_seen(&a.manifest)?;
    let base = a.hyper.to_hyperparams();
    if a.values.is_empty() {
        return Err(Error::Config("empty value list".into()).into());
    }

    let product = |assign: &dyn Fn(f64, f64, &Hyperparams) -> Hyperparams, b: &Hyperparams| {
        let mut grid = Vec::new();
        for &u in &a.values {
            for &v in &a.values {
                grid.push(assign(u, v, b));
            }
        }
        grid
    };

    let (best, stages) = if a.full {
        let mut grid = Vec::new();
        for &alpha in &a.values {
            for &beta in &a.values {
                for &lambda in &a.values {
                    for &mu in &a.values {
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
        let records = eval_grid(
            &ds,
            &grid,
            a.folds,
            a.holdout_frac,
            Some(&a.schedule),
            a.common.seed,
            a.common.threads,
        )?;
        (pick_best(&records), json!({ "full": records }))
    } else {
        // Stage 1: (alpha, beta) on the inductive model; stage 2: (lambda,
        // mu) transductively with the stage-1 winners frozen.
        let stage1 = product(
            &|alpha, beta, b| Hyperparams {
                alpha,
                beta,
                ..b.clone()
            },
            &base,
        );
        let rec1 = eval_grid(
            &ds,
            &stage1,
            a.folds,
            a.holdout_frac,
            None,
            a.common.seed,
            a.common.threads,
        )?;
        let best_ab = pick_best(&rec1);
        let stage2 = product(
            &|lambda, mu, b| Hyperparams {
                lambda,
                mu,
                ..b.clone()
            },
            &best_ab,
        );
        let rec2 = eval_grid(
            &ds,
            &stage2,
            a.folds,
            a.holdout_frac,
            Some(&a.schedule),
            a.common.seed,
            a.common.threads,
        )?;
        (pick_best(&rec2), json!({ "stage1": rec1, "stage2": rec2 }))
    };

    prepare_out(&a.common.out, a.common.force)?;
    write_json(
        &a.common.out.join("best.json"),
        &serde_json::to_value(&best).expect("hyperparams serialize"),
    )?;
    write_json(&a.common.out.join("records.json"), &stages)?;
    log::info!(
        "best hyperparameters: alpha {} beta {} lambda {} mu {}",
        best.alpha,
        best.beta,
        best.lambda,
        best.mu
    );
    write_config(
        &a.common.out,
        json!({
            "format_version": RUN_FORMAT_VERSION,
            "command": "cv",
            "manifest": a.manifest,
            "values": a.values,
            "folds": a.folds,
            "holdout_frac": a.holdout_frac,
            "schedule": a.schedule,
            "full": a.full,
            "base": base,
            "seed": a.common.seed,
            "threads": a.common.threads,
        }),
    )
}
