use rul_core::dataset::{attach_linear_rul, EngineSeriesSet};
use rul_core::synthetic::{generate, SyntheticSpec};
use rul_core::training::{
    evaluate, prepare, train, train_prepared, validation_loss, ModelKind, Predictor, TrainConfig,
};

fn toy(n_units: u32, seed: u64) -> (EngineSeriesSet, rul_core::synthetic::SyntheticData) {
    let d = generate(&SyntheticSpec {
        n_units,
        min_life: 40,
        max_life: 60,
        noise: 0.02,
        seed,
    })
    .unwrap();
    (attach_linear_rul(d.train.clone()).unwrap(), d)
}

fn small_config(kind: ModelKind, epochs: usize) -> TrainConfig {
    let mut c = TrainConfig::new(kind);
    c.max_epochs = epochs;
    c.batch_size = 16;
    c.learning_rate = 3e-3;
    c.seed = 11;
    c
}

#[test]
fn lstm_learns_toy_signal() {
    let (set, _) = toy(5, 1);
    let mut c = small_config(ModelKind::Lstm128, 20);
    c.early_stop_patience = 50;
    let m = train(&c, &set).unwrap();
    let h = &m.history;
    assert_eq!(h.len(), 20);
    assert!(h.train_loss[19] < h.train_loss[0], "{:?}", h.train_loss);
}

#[test]
fn identical_seeds_identical_history() {
    let (set, _) = toy(5, 2);
    let c = small_config(ModelKind::BlstmDropout, 3);
    let a = train(&c, &set).unwrap();
    let b = train(&c, &set).unwrap();
    assert_eq!(a.history.to_csv(), b.history.to_csv());
    assert_eq!(a.predictor, b.predictor);
    let mut c2 = c.clone();
    c2.seed = 12;
    let other = train(&c2, &set).unwrap();
    assert_ne!(a.history.to_csv(), other.history.to_csv());
}

#[test]
fn restored_weights_are_best_epoch() {
    let (set, _) = toy(5, 3);
    let mut c = small_config(ModelKind::Lstm128, 40);
    c.learning_rate = 2e-2;
    c.early_stop_patience = 3;
    c.plateau_patience = 1;
    let data = prepare(&c, &set).unwrap();
    let m = train_prepared(&c, &data, |_| {}).unwrap();
    let h = &m.history;
    assert!(h.stopped_early, "{:?}", h.val_loss);
    assert!(h.len() < 40);
    let best = h.best_epoch.unwrap();
    let min = h.val_loss.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(h.val_loss[best], min);
    let Predictor::Network { spec, params } = &m.predictor else { panic!() };
    let again = validation_loss(spec, params, data.validation.as_ref().unwrap(), m.target_scale).unwrap();
    assert_eq!(again, h.val_loss[best]);
    assert!(h.lr.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn linear_baseline_end_to_end() {
    let (set, d) = toy(30, 4);
    let m = train(&TrainConfig::new(ModelKind::Lr), &set).unwrap();
    assert!(m.history.is_empty());
    let e = evaluate(&m, &d.test, &d.test_rul).unwrap();
    assert_eq!(e.predictions.len(), 30);
    assert!(e.metrics.r2 > 0.0, "{:?}", e.metrics);
    assert!(evaluate(&m, &d.test, &d.test_rul[..29]).is_err());
}

#[test]
fn batchnorm_stack_trains_one_epoch() {
    let (set, d) = toy(5, 5);
    let mut c = small_config(ModelKind::BlstmDropoutBn, 1);
    c.batch_size = 64;
    let m = train(&c, &set).unwrap();
    assert_eq!(m.history.len(), 1);
    let e = evaluate(&m, &d.test, &d.test_rul).unwrap();
    assert!(e.predictions.iter().all(|p| p.predicted_rul.is_finite()));
}
