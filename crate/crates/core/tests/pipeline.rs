use roughnas::dataio::synthetic_task;
use roughnas::mlp::{train, TrainConfig};
use roughnas::pipeline::{
    initial_training_stage, load_artifact, prepare, refinement_stage, run_pipeline, save_artifact, search_stage,
    warm_start, with_stage1_column, FrozenModel, MIN_ROWS,
};
use roughnas::{
    Activation, ArchitectureSpec, Dataset, Error, ErrorClass, Loss, Matrix, MlpModel, PipelineArtifact,
    PipelineConfig, Rng,
};

fn small_spec() -> ArchitectureSpec {
    ArchitectureSpec {
        hidden_layers: 2,
        neurons_per_layer: 12,
        activation: Activation::Tanh,
        batch_size: 16,
        learning_rate: 3e-3,
        loss: Loss::L2,
    }
}

fn tiny_config(seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        multiplier: 0,
        poly_order: 1,
        search_epochs: Some(3),
        seed,
        ..PipelineConfig::default()
    };
    cfg.bo.budget = 2;
    cfg.bo.n_initial = 2;
    cfg.bo.n_candidates = 64;
    cfg.train.epochs = 5;
    cfg
}

fn data(n: usize) -> Dataset {
    synthetic_task(n, 0.05, 1.0, 9).unwrap()
}

#[test]
fn minimal_run_round_trips_through_disk() {
    let d = data(60);
    let out = run_pipeline(&d, &tiny_config(1)).unwrap();
    assert_eq!(out.trace.len(), 2);
    assert_eq!(out.metrics.n_train_synthetic, 0);
    assert!(out.metrics.test.rmse.is_finite());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("artifact.json");
    save_artifact(&out.artifact, &path).unwrap();
    let back = load_artifact(&path).unwrap();
    assert_eq!(back, out.artifact);
    for row in d.features().iter_rows() {
        assert_eq!(back.predict(row).unwrap().to_bits(), out.artifact.predict(row).unwrap().to_bits());
    }
}

#[test]
fn runs_are_deterministic_per_seed() {
    let d = data(40);
    let mut cfg = tiny_config(3);
    cfg.multiplier = 2;
    cfg.vae.epochs = 3;
    let a = run_pipeline(&d, &cfg).unwrap();
    let b = run_pipeline(&d, &cfg).unwrap();
    assert_eq!(a.artifact.to_json().unwrap(), b.artifact.to_json().unwrap());
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.trace, b.trace);
    let c = run_pipeline(&d, &PipelineConfig { seed: 4, ..cfg }).unwrap();
    assert_ne!(a.artifact.to_json().unwrap(), c.artifact.to_json().unwrap());
}

#[test]
fn broken_artifacts_are_rejected() {
    let out = run_pipeline(&data(40), &tiny_config(2)).unwrap();
    let text = out.artifact.to_json().unwrap();

    let truncated = &text[..text.len() / 2];
    assert!(matches!(PipelineArtifact::from_json(truncated), Err(Error::Schema(_))));

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["format_version"] = 99.into();
    match PipelineArtifact::from_json(&v.to_string()) {
        Err(e @ Error::Version { found: 99, .. }) => assert_eq!(e.class(), ErrorClass::Data),
        other => panic!("expected a version error, got {other:?}"),
    }

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["poly_order"] = 3.into();
    assert!(matches!(PipelineArtifact::from_json(&v.to_string()), Err(Error::Schema(_))));
}

#[test]
fn batch_predictions_equal_rowwise() {
    let d = data(50);
    let out = run_pipeline(&d, &PipelineConfig { architecture: Some(small_spec()), ..tiny_config(5) }).unwrap();
    let batch = out.artifact.predict_batch(d.features()).unwrap();
    for (row, p) in d.features().iter_rows().zip(&batch) {
        assert_eq!(out.artifact.predict(row).unwrap().to_bits(), p.to_bits());
    }
}

#[test]
fn constant_feature_is_ignored() {
    let base = data(50);
    let n = base.len();
    let mut x = Vec::with_capacity(n * 3);
    for r in base.features().iter_rows() {
        x.extend_from_slice(&[r[0], 7.5, r[1]]);
    }
    let d = Dataset::new(
        vec!["x1".into(), "c".into(), "x2".into()],
        "y",
        Matrix::from_vec(n, 3, x).unwrap(),
        base.targets().to_vec(),
    )
    .unwrap();
    let mut cfg = PipelineConfig { architecture: Some(small_spec()), ..tiny_config(6) };
    cfg.poly_order = 2;
    let out = run_pipeline(&d, &cfg).unwrap();
    assert!(out.metrics.test.rmse.is_finite());
    for r in d.features().iter_rows() {
        let p = out.artifact.predict(r).unwrap();
        let q = out.artifact.predict(&[r[0], -1234.0, r[2]]).unwrap();
        assert_eq!(p.to_bits(), q.to_bits());
    }
}

#[test]
fn too_few_rows_is_a_data_error() {
    let err = run_pipeline(&data(MIN_ROWS - 1), &tiny_config(0)).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Data);
    assert!(run_pipeline(&data(MIN_ROWS), &tiny_config(0)).is_ok());
}

#[test]
fn synthetic_rows_only_reach_training() {
    let mut cfg = tiny_config(8);
    cfg.multiplier = 3;
    cfg.vae.epochs = 2;
    let p = prepare(&data(50), &cfg).unwrap();
    let real = p.train.len() - p.train.n_synthetic();
    assert_eq!(p.train.n_synthetic(), 3 * real);
    assert_eq!(p.val.n_synthetic(), 0);
    assert_eq!(p.test.n_synthetic(), 0);
    assert_eq!(real + p.val.len() + p.test.len(), 50);
}

#[test]
fn warm_start_reproduces_stage_one_exactly() {
    let mut rng = Rng::new(17);
    for act in Activation::ALL {
        let spec = ArchitectureSpec { activation: act, ..small_spec() };
        let stage1 = FrozenModel::new(MlpModel::build(spec, 5, &mut rng).unwrap());
        let stage2 = warm_start(&stage1).unwrap();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..5).map(|_| rng.uniform_range(-3.0, 3.0)).collect();
            let f1 = stage1.model().forward(&x).unwrap();
            let mut x2 = x.clone();
            x2.push(f1);
            assert_eq!(stage2.forward(&x2).unwrap().to_bits(), f1.to_bits(), "{act:?}");
        }
    }
}

#[test]
fn refinement_leaves_stage_one_untouched() {
    let cfg = tiny_config(11);
    let p = prepare(&data(60), &cfg).unwrap();
    let (stage1, _) = initial_training_stage(&small_spec(), &p.train, &p.val, &cfg).unwrap();
    let before = serde_json::to_vec(stage1.model()).unwrap();
    let (stage2, _) = refinement_stage(&stage1, &p.train, &p.val, &cfg).unwrap();
    assert_eq!(serde_json::to_vec(stage1.model()).unwrap(), before);
    assert_eq!(stage2.input_width(), stage1.model().input_width() + 1);

    // The pipeline's stored stage-1 model is the one stage 2 was trained on.
    let out = run_pipeline(&data(60), &PipelineConfig { architecture: Some(small_spec()), ..cfg }).unwrap();
    assert_eq!(serde_json::to_vec(&out.artifact.stage1).unwrap(), before);
    let col = with_stage1_column(&stage1, &p.val).unwrap();
    assert_eq!(col.n_features(), p.val.n_features() + 1);
}

#[test]
fn search_returns_the_best_traced_candidate() {
    let cfg = tiny_config(12);
    let p = prepare(&data(60), &cfg).unwrap();
    let (spec, trace) = search_stage(&p.train, &p.val, &cfg).unwrap();
    assert_eq!(trace.len(), 2);
    let best = trace
        .iter()
        .filter(|r| r.objective.is_some())
        .min_by(|a, b| a.objective.unwrap().total_cmp(&b.objective.unwrap()))
        .unwrap();
    assert_eq!(best.spec, Some(spec));
}

#[test]
fn network_memorizes_a_small_set() {
    let d = roughnas::dataio::apply_normalizer(
        &data(20),
        &roughnas::dataio::fit_normalizer(&data(20)).unwrap(),
        false,
    )
    .unwrap();
    let spec = ArchitectureSpec {
        hidden_layers: 2,
        neurons_per_layer: 64,
        activation: Activation::Tanh,
        batch_size: 4,
        learning_rate: 3e-3,
        loss: Loss::L2,
    };
    let model = MlpModel::build(spec, 2, &mut Rng::new(1)).unwrap();
    let cfg = TrainConfig { epochs: 1500, ..TrainConfig::default() };
    let out = train(model, &d, &d, &cfg).unwrap();
    assert!(out.history.best_val_rmse < 0.05, "train rmse {}", out.history.best_val_rmse);
}
