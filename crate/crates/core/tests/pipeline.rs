use std::fs;

use artret_core::corpus::{load_metadata, read_manifest, split_corpus, write_manifest, write_metadata, Attribute, Split};
use artret_core::dataset::encode_pairs;
use artret_core::evaluation::{evaluate, format_table, write_report_csv, ReportRow};
use artret_core::models::{
    fit_cca_pairs, load_checkpoint, save_checkpoint, train_cml, JointModel, TrainConfig, DEFAULT_RIDGE,
};
use artret_core::synthetic::{generate, SyntheticConfig};
use artret_core::text::{TextEncoder, Vocabulary};
use artret_core::visual::{conv_maps_to_bytes, load_conv_maps, load_feature_file, rmac_store, ConvFeatureMap};
use artret_core::{Error, Exec};

#[test]
fn files_to_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&SyntheticConfig {
        n_samples: 120,
        ..SyntheticConfig::default()
    })
    .unwrap();

    let meta = dir.path().join("meta.csv");
    write_metadata(&data.corpus, fs::File::create(&meta).unwrap()).unwrap();
    let feats = dir.path().join("feats.semf");
    data.features.save(&feats).unwrap();

    let (corpus, report) = load_metadata(&meta).unwrap();
    assert_eq!(report.rejected_count(), 0);
    assert_eq!(corpus, data.corpus);
    let features = load_feature_file(&feats).unwrap();
    assert_eq!(features.len(), 120);

    let (train, val, test) = split_corpus(&corpus, 3, (0.8, 0.1, 0.1)).unwrap();
    let manifest = dir.path().join("train.txt");
    write_manifest(&manifest, &train).unwrap();
    let ids = read_manifest(&manifest).unwrap();
    assert_eq!(corpus.subset(&ids, Split::Train).unwrap(), train);

    let encoder = TextEncoder::fit(&train, 2, Some(50)).unwrap();
    let vocab = dir.path().join("comments.vocab");
    encoder.comments.save(&vocab).unwrap();
    assert_eq!(Vocabulary::load(&vocab).unwrap(), encoder.comments);
    assert!(encoder.comments.len() <= 50);

    let enc = |c| encode_pairs(c, &encoder, &features, Some(Attribute::Type)).unwrap();
    let (tr, va, te) = (enc(&train), enc(&val), enc(&test));

    let cca = JointModel::Cca(fit_cca_pairs(&tr, 8, DEFAULT_RIDGE).unwrap());
    let cfg = TrainConfig {
        epochs: 40,
        lr: 1e-3,
        dim: 32,
        ..TrainConfig::default()
    };
    let cml = JointModel::Cml(train_cml(&tr, &va, &cfg, Exec::default()).unwrap().0);

    let mut rows = Vec::new();
    for model in [cca, cml] {
        let path = dir.path().join(format!("{}.ckpt", model.kind()));
        save_checkpoint(&model, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, model);
        let (t, v) = loaded.embed(&te, Exec::default()).unwrap();
        let [t2i, i2t] = evaluate(&t, &v, Exec::default()).unwrap();
        assert!(t2i.r_at(10) > 10.0 / te.len() as f64, "{} barely beats chance", model.kind());
        let mut csv = Vec::new();
        write_report_csv(&mut csv, &[t2i.clone(), i2t.clone()]).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert!(csv.starts_with("metric,direction,value\n"));
        assert_eq!(csv.lines().count(), 9);
        rows.push(ReportRow {
            label: model.kind().to_uppercase(),
            t2i,
            i2t,
        });
    }
    let table = format_table(&rows);
    assert!(table.contains("CCA") && table.contains("CML"));
}

#[test]
fn missing_features_are_a_schema_error() {
    let data = generate(&SyntheticConfig {
        n_samples: 20,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let encoder = TextEncoder::fit(&data.corpus, 1, None).unwrap();
    let empty = artret_core::visual::FeatureStore::new(64);
    let err = encode_pairs(&data.corpus, &encoder, &empty, None).unwrap_err();
    assert!(matches!(err, Error::Schema(_)), "{err}");
}

/// Writes the version-2 conv-map layout by hand, the way an external exporter would.
fn external_conv_file(maps: &[(&str, Vec<f32>)], c: u32, h: u32, w: u32) -> Vec<u8> {
    let mut out = b"SEMF".to_vec();
    out.extend(2u32.to_le_bytes());
    out.extend((maps.len() as u64).to_le_bytes());
    for d in [c, h, w] {
        out.extend(d.to_le_bytes());
    }
    for (id, values) in maps {
        out.extend((id.len() as u16).to_le_bytes());
        out.extend(id.as_bytes());
        for v in values {
            out.extend(v.to_le_bytes());
        }
    }
    out
}

#[test]
fn external_conv_maps_feed_rmac_and_feature_files() {
    let dir = tempfile::tempdir().unwrap();
    let (c, h, w) = (4u32, 5u32, 6u32);
    let n = (c * h * w) as usize;
    let maps: Vec<(&str, Vec<f32>)> = vec![
        ("img_a", (0..n).map(|i| (i % 7) as f32 * 0.5).collect()),
        ("img_b", (0..n).map(|i| ((i * 13) % 11) as f32).collect()),
        ("img_c", (0..n).map(|i| 1.0 + (i % 3) as f32).collect()),
    ];
    let path = dir.path().join("maps.semf");
    fs::write(&path, external_conv_file(&maps, c, h, w)).unwrap();

    let loaded = load_conv_maps(&path).unwrap();
    assert_eq!(loaded.len(), 3);
    assert_eq!(loaded[1].0, "img_b");
    assert_eq!(loaded[1].1.at(0, 0, 1), 2.0);
    assert_eq!(conv_maps_to_bytes(&loaded).unwrap(), fs::read(&path).unwrap());

    let store = rmac_store(&loaded, 3, Exec::default()).unwrap();
    let out = dir.path().join("rmac.semf");
    store.save(&out).unwrap();
    let back = load_feature_file(&out).unwrap();
    assert_eq!(back.dim(), 4);
    for (id, v) in back.iter() {
        let norm: f64 = v.values().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6, "{id}");
    }
    assert!(ConvFeatureMap::new(1, 1, 1, vec![f64::NAN]).is_err());
}

#[test]
fn truncated_conv_file_reports_offset() {
    let dir = tempfile::tempdir().unwrap();
    let bytes = external_conv_file(&[("x", vec![1.0; 8])], 2, 2, 2);
    let path = dir.path().join("cut.semf");
    fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    match load_conv_maps(&path) {
        Err(Error::Corruption { offset, .. }) => assert!(offset as usize <= bytes.len()),
        other => panic!("expected corruption, got {other:?}"),
    }
}
