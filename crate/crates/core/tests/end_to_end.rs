use intent_core::dataset::{load_dataset, synth_cohort, write_dataset, SynthConfig, TaskShape};
use intent_core::features::{assemble_setup, SetupId, SetupParts, ShapeTables, NUM_FEATURES};
use intent_core::models::{
    random_guess_accuracy, train_baseline, train_lstm, train_mlp, BaselineKind, LstmConfig, MlpConfig, Sequence,
    TrainedModel,
};
use intent_core::numcore::{Matrix, ModelContainer, Rng};
use intent_core::pipeline::{participant_records, run_two_step, PipelineConfig};

fn quick_config(seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        seed,
        ..PipelineConfig::default()
    };
    cfg.models.mlp.epochs = 20;
    cfg.models.lstm.epochs = 3;
    cfg.models.lstm.hidden_size = 12;
    cfg.random_guess_draws = 1000;
    cfg
}

#[test]
fn csv_round_trip_feeds_the_two_step_pipeline() {
    let recs = synth_cohort(11, 6, &TaskShape::ALL, &SynthConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &recs).unwrap();
    let loaded = load_dataset(dir.path(), Some(24)).unwrap();
    assert_eq!(loaded.len(), recs.len());

    for shape in TaskShape::ALL {
        let from_memory = participant_records(&recs, shape).unwrap();
        let from_disk = participant_records(&loaded, shape).unwrap();
        let a = run_two_step(&from_memory, &quick_config(3)).unwrap();
        let b = run_two_step(&from_disk, &quick_config(3)).unwrap();
        assert_eq!(a.step_one, b.step_one);
        assert_eq!(a.step_two, b.step_two);
        assert_eq!(a.provenance, b.provenance);
        assert!((0.0..=100.0).contains(&a.step_two.accuracy));
    }
}

#[test]
fn sixteen_participants_give_the_expected_table_shapes() {
    let recs = synth_cohort(5, 16, &[TaskShape::Diamond], &SynthConfig::default()).unwrap();
    let records = participant_records(&recs, TaskShape::Diamond).unwrap();
    let t = ShapeTables::build(&records, Default::default()).unwrap();
    assert_eq!((t.features.rows(), t.features.cols()), (624, NUM_FEATURES));
    assert_eq!((t.gaze.rows(), t.gaze.cols()), (624, 24));
    assert_eq!((t.raw.rows(), t.raw.cols()), (640, 1));

    let probs = Matrix::zeros(624, 4);
    let parts = SetupParts {
        features: Some(&t.features),
        gaze: Some(&t.gaze),
        probs: Some(&probs),
        raw: Some(&t.raw),
        window_labels: &t.window_labels,
        hit_labels: &t.hit_labels,
    };
    let widths = [1, 11, 24, 4, 35, 15, 28, 39];
    for (id, width) in SetupId::ALL.into_iter().zip(widths) {
        let d = assemble_setup(id, &parts).unwrap();
        assert_eq!(d.cols(), width, "{id}");
        assert_eq!(d.cols(), id.width(24), "{id}");
        assert_eq!(d.rows(), if id == SetupId::D1 { 640 } else { 624 }, "{id}");
        assert_eq!(d.sequences().len(), 16, "{id}");
    }
}

fn round_trip(model: &TrainedModel) {
    let text = model.to_container().to_json();
    let back = TrainedModel::from_container(&ModelContainer::from_json(&text).unwrap()).unwrap();
    assert_eq!(&back, model, "{}", model.kind().as_str());
}

#[test]
fn every_model_kind_survives_the_container() {
    let mut rng = Rng::new(9);
    let rows: Vec<Vec<f64>> = (0..40).map(|_| (0..5).map(|_| rng.standard_normal()).collect()).collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let y: Vec<usize> = (0..40).map(|i| i % 3).collect();

    let mlp = MlpConfig {
        hidden: vec![6],
        output: 3,
        epochs: 2,
        ..MlpConfig::default()
    };
    round_trip(&train_mlp(&x, &y, &mlp).unwrap());
    for kind in [
        BaselineKind::KNN,
        BaselineKind::LINEAR_SVM,
        BaselineKind::LOGISTIC_REGRESSION,
        BaselineKind::RandomGuess,
    ] {
        round_trip(&train_baseline(kind, &x, &y, 3, 1).unwrap());
    }

    let seqs: Vec<Sequence> = (0..4)
        .map(|i| Sequence {
            steps: x.select_rows(&(i * 10..i * 10 + 10).collect::<Vec<_>>()),
            label: i % 2,
            train_mask: vec![true; 10],
        })
        .collect();
    let lstm = LstmConfig {
        hidden_size: 4,
        epochs: 1,
        ..LstmConfig::default()
    };
    round_trip(&train_lstm(&seqs, &lstm).unwrap());
    assert!(random_guess_accuracy(&y, 3, 10, 0).is_ok());
}
