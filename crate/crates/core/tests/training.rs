use artret_core::corpus::Attribute;
use artret_core::models::{train_amd, train_cml, ModelSelection, TextArch, TrainConfig};
use artret_core::synthetic::{encoded_splits, generate, EncodedSplits, SyntheticConfig};
use artret_core::Exec;

fn small() -> EncodedSplits {
    let data = generate(&SyntheticConfig {
        n_samples: 80,
        ..SyntheticConfig::default()
    })
    .unwrap();
    encoded_splits(&data, 1, 2).unwrap()
}

fn cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        lr: 1e-3,
        batch_size: 16,
        dim: 16,
        patience: None,
        ..TrainConfig::default()
    }
}

#[test]
fn fixed_seed_gives_identical_history() {
    let s = small();
    for arch in [TextArch::Bow, TextArch::Mlp] {
        let c = TrainConfig { arch, mlp_dim: 8, ..cfg(5) };
        let (a, ha) = train_cml(&s.train, &s.val, &c, Exec::Sequential).unwrap();
        let (b, hb) = train_cml(&s.train, &s.val, &c, Exec::Sequential).unwrap();
        let (p, hp) = train_cml(&s.train, &s.val, &c, Exec::Parallel).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(ha, hp);
        assert_eq!(a, b);
        assert_eq!(a, p);
        let other = TrainConfig { seed: 1, ..c };
        assert_ne!(train_cml(&s.train, &s.val, &other, Exec::Sequential).unwrap().1, ha);
    }
}

#[test]
fn zero_learning_rate_keeps_initial_parameters() {
    let s = small();
    let c = TrainConfig {
        lr: 0.0,
        model_selection: ModelSelection::LastEpoch,
        ..cfg(3)
    };
    let (one, _) = train_cml(&s.train, &s.val, &TrainConfig { epochs: 1, ..c.clone() }, Exec::default()).unwrap();
    let (three, hist) = train_cml(&s.train, &s.val, &c, Exec::default()).unwrap();
    assert_eq!(one.network.flat_params(), three.network.flat_params());
    assert_eq!(hist.records.len(), 3);
    assert!(hist.records.windows(2).all(|w| w[0].val_loss == w[1].val_loss));
}

#[test]
fn amd_with_zero_alpha_follows_cml() {
    let s = small();
    let c = TrainConfig { alpha: 0.0, ..cfg(4) };
    let (cml, hc) = train_cml(&s.train, &s.val, &c, Exec::default()).unwrap();
    let (amd, ha) = train_amd(&s.train, &s.val, &c, Attribute::Type, s.n_classes, Exec::default()).unwrap();
    assert_eq!(hc, ha);
    let towers = amd.base.network.linears().len() - 2;
    let cml_layers = cml.network.linears();
    for (a, b) in cml_layers.iter().zip(&amd.base.network.linears()[..towers]) {
        assert_eq!(a, b);
    }
}

#[test]
fn amd_is_deterministic_and_learns_labels() {
    let s = small();
    let c = TrainConfig {
        alpha: 0.3,
        model_selection: ModelSelection::LastEpoch,
        ..cfg(100)
    };
    let (a, ha) = train_amd(&s.train, &s.val, &c, Attribute::Type, s.n_classes, Exec::default()).unwrap();
    let (b, hb) = train_amd(&s.train, &s.val, &c, Attribute::Type, s.n_classes, Exec::default()).unwrap();
    assert_eq!(ha, hb);
    assert_eq!(a, b);
    let (t, v) = a.base.network.classifier_accuracy(&s.train).unwrap().unwrap();
    assert!(t > 0.8 && v > 0.8, "classifier accuracy {t} {v}");
}

#[test]
fn invalid_training_inputs_are_rejected() {
    let s = small();
    let c = cfg(1);
    assert!(train_cml(&s.train[..1], &s.val, &c, Exec::default()).is_err());
    assert!(train_cml(&s.train, &[], &c, Exec::default()).is_err());
    let bad = TrainConfig {
        batch_size: 1,
        alpha: 0.5,
        ..c.clone()
    };
    let err = train_cml(&s.train, &s.val, &bad, Exec::default()).unwrap_err().to_string();
    assert!(err.contains("batch size") && err.contains("alpha"), "{err}");
    assert!(train_amd(&s.train, &s.val, &c, Attribute::Type, 0, Exec::default()).is_err());
}

#[test]
fn history_csv_has_expected_header() {
    let s = small();
    let (_, hist) = train_cml(&s.train, &s.val, &cfg(2), Exec::default()).unwrap();
    let mut buf = Vec::new();
    hist.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "epoch,loss,val_mr_t2i,val_mr_i2t");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1,"));
}
