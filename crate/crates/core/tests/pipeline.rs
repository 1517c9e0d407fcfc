//! End-to-end library flows on generated fixtures.

use zsldict_core::eval::{generate_synthetic, per_class_top1, SynthSpec};
use zsldict_core::inference::score_all;
use zsldict_core::io::{load_model, save_model};
use zsldict_core::jedm::train_jedm;
use zsldict_core::tstd::run_tstd;
use zsldict_core::{Hyperparams, UnseenDataset};

fn hyper() -> Hyperparams {
    Hyperparams {
        latent_dim: 12,
        ..Hyperparams::default()
    }
}

fn accuracy(predictions: &[usize], ut: &UnseenDataset<f64>) -> f64 {
    let truth = ut.truth_labels.as_ref().unwrap();
    per_class_top1(predictions, truth, ut.a.cols())
        .unwrap()
        .mean_per_class_accuracy
}

#[test]
fn clean_fixture_recovers_unseen_classes() {
    let data = generate_synthetic::<f64>(&SynthSpec::default()).unwrap();
    let model = train_jedm(&data.seen, &hyper(), 1).unwrap();
    for w in model.objective_trace.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9), "trace increased: {w:?}");
    }
    let table = score_all(&model.dictionary, &model.compat, &data.unseen.x, &data.unseen.a).unwrap();
    let acc = accuracy(&table.predictions, &data.unseen);
    assert!(acc >= 0.99, "clean zero-shot accuracy {acc}");
}

#[test]
fn saved_model_reproduces_predictions() {
    let spec = SynthSpec {
        m_per_class: 10,
        n_per_class: 5,
        noise_sigma: 0.05,
        ..SynthSpec::default()
    };
    let data = generate_synthetic::<f64>(&spec).unwrap();
    let model = train_jedm(&data.seen, &hyper(), 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_model(dir.path(), &model).unwrap();
    let loaded = load_model::<f64>(dir.path()).unwrap();
    assert_eq!(loaded.dictionary, model.dictionary);
    assert_eq!(loaded.compat, model.compat);

    let before = score_all(&model.dictionary, &model.compat, &data.unseen.x, &data.unseen.a)
        .unwrap()
        .predictions;
    let after = score_all(&loaded.dictionary, &loaded.compat, &data.unseen.x, &data.unseen.a)
        .unwrap()
        .predictions;
    assert_eq!(before, after);
}

#[test]
fn transduction_without_shift_does_not_degrade() {
    let clean = generate_synthetic::<f64>(&SynthSpec::default()).unwrap();
    let spec = SynthSpec {
        noise_sigma: 0.25 * clean.prototype_spacing,
        ..SynthSpec::default()
    };
    let data = generate_synthetic::<f64>(&spec).unwrap();
    let model = train_jedm(&data.seen, &hyper(), 1).unwrap();

    let inductive = score_all(&model.dictionary, &model.compat, &data.unseen.x, &data.unseen.a)
        .unwrap()
        .predictions;
    let blind = UnseenDataset {
        truth_labels: None,
        ..data.unseen.clone()
    };
    let run = run_tstd(&model, &blind, &hyper(), &[0.4, 0.6, 0.8, 1.0]).unwrap();

    let ind_acc = accuracy(&inductive, &data.unseen);
    let tstd_acc = accuracy(&run.final_predictions, &data.unseen);
    assert!(
        tstd_acc >= ind_acc - 0.01,
        "self-training degraded a shift-free fixture: {ind_acc} -> {tstd_acc}"
    );
}
