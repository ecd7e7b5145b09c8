use std::fs;

use tearfilm::eval::{evaluate, Binning};
use tearfilm::ingest::ingest_intensity;
use tearfilm::learners::{
    self, load_checkpoint, save_checkpoint, LearnerKind, Target, TrainConfig,
};
use tearfilm::sampling::{
    build_dataset, screen, simulate_sample, BuildConfig, Dataset, ModelKind, RowKind, Split,
};
use tearfilm::series::SERIES_LEN;

fn small(model: ModelKind, count: usize, seed: u64) -> Dataset {
    let mut cfg = BuildConfig::new(model, count, seed);
    cfg.nr = 32;
    build_dataset(&cfg).unwrap()
}

#[test]
fn dataset_round_trip_and_layout() {
    let ds = small(ModelKind::Ode, 30, 4);
    assert_eq!(ds.rows(), 90);
    assert_eq!(ds.inputs.cols(), SERIES_LEN);
    let (train, test) = (
        ds.split_indices(Split::Train),
        ds.split_indices(Split::Test),
    );
    assert_eq!(train.len(), 68);
    assert_eq!(train.len() + test.len(), 90);
    // noisy rows carry the clean outputs of their source
    for f in &ds.flags {
        if f.kind == RowKind::Noisy {
            let r = ds
                .flags
                .iter()
                .position(|g| g.source == f.source && g.kind == RowKind::Clean)
                .unwrap();
            assert_eq!(ds.outputs_h.row(r), ds.outputs_h.row(f.clean_row));
        }
    }
    let dir = tempfile::tempdir().unwrap();
    ds.save(dir.path()).unwrap();
    let back = Dataset::load(dir.path()).unwrap();
    assert_eq!(back, ds);
    ds.export_csv(dir.path()).unwrap();
    let csv = fs::read_to_string(dir.path().join("inputs.csv")).unwrap();
    assert_eq!(csv.lines().count(), 91);

    let mut blob = fs::read(dir.path().join("outputs_c.f64")).unwrap();
    blob[100] ^= 1;
    fs::write(dir.path().join("outputs_c.f64"), blob).unwrap();
    assert!(Dataset::load(dir.path()).is_err());
}

#[test]
fn clean_rows_reproduce_their_simulations() {
    let ds = small(ModelKind::Ode, 5, 8);
    let constants = ds.manifest.constants;
    for (i, f) in ds
        .flags
        .iter()
        .enumerate()
        .filter(|(_, f)| f.kind == RowKind::Clean)
    {
        let row: [f64; 6] = ds.params.row(i).try_into().unwrap();
        let params =
            tearfilm::sampling::SampledParams::Ode(tearfilm::physics::OdeParams::from_row(&row));
        let t = simulate_sample(&params, &constants, 0).unwrap();
        assert_eq!(screen(&t), Ok(()), "source {}", f.source);
        // stored parameters are in laboratory units; the round trip through
        // SI costs an ulp or so
        for (a, b) in [
            (&t.intensity, ds.inputs.row(i)),
            (&t.h, ds.outputs_h.row(i)),
        ] {
            let err = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-9, "source {}: {err:e}", f.source);
        }
    }
}

#[test]
fn train_save_load_evaluate() {
    let ds = small(ModelKind::Ode, 40, 9);
    let cfg = TrainConfig {
        epochs: 40,
        ..TrainConfig::default()
    };
    let (learner, history) =
        learners::train(LearnerKind::Pca, Target::H, &ds, &cfg, |_| {}).unwrap();
    assert!(history.last().unwrap().train_loss < history[0].train_loss);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&learner, &path).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    assert!(loaded.check_provenance(&ds.manifest_hash().unwrap()));
    let x = ds.inputs.row(0);
    assert_eq!(
        loaded.predict(x, None).unwrap(),
        learner.predict(x, None).unwrap()
    );

    let report = evaluate(&loaded, &ds, Split::Test, Binning::default()).unwrap();
    assert_eq!(report.cases.len(), ds.split_indices(Split::Test).len());
    assert_eq!(report.rrmse_histogram.total(), report.cases.len());
    assert!(report.summary.median_rrmse.is_finite());

    // a measured series, resampled from an irregular clock
    let csv: String = (0..50)
        .map(|k| {
            format!(
                "{},{}\n",
                0.3 * k as f64 + 0.01 * (k % 3) as f64,
                2.0 - 0.01 * k as f64
            )
        })
        .collect();
    let series = ingest_intensity(csv.as_bytes(), loaded.info.n).unwrap();
    let pred = loaded.predict(&series, None).unwrap();
    assert_eq!(pred.len(), SERIES_LEN);
    assert!(pred.iter().all(|v| v.is_finite()));
}

#[test]
fn pde_dataset_rows_come_from_center_series() {
    let ds = small(ModelKind::Pde, 2, 3);
    assert_eq!(ds.rows(), 6);
    assert_eq!(ds.manifest.nr, Some(32));
    for i in 0..ds.rows() {
        assert_eq!(ds.outputs_h.row(i)[0], 1.0);
        assert!(ds
            .outputs_h
            .row(i)
            .iter()
            .all(|&h| (0.2..=1.1).contains(&h)));
    }
}
