mod common;

use common::*;
use stepseg::io::model::{decode_model, encode_model};
use stepseg::io::predictions::read_report_records;
use stepseg::io::*;
use stepseg::model::{DurationConfig, FinalRegion};
use stepseg::synth::{synth_generate, SynthSpec};
use stepseg::{
    build_ordered_space, constrain_params, run_experiment, Error, FeatureGroup, Label, Mode, RunConfig, Segmentation,
    Split, TaskDefinition,
};

fn dataset() -> stepseg::Dataset {
    let mut ds = synth_generate(&SynthSpec {
        videos_per_task: 4,
        tasks: 2,
        narration: true,
        seed: 21,
        ..SynthSpec::default()
    })
    .unwrap()
    .dataset;
    ds.videos[0].split = Some(Split::Train);
    ds.videos[1].split = Some(Split::Test);
    ds
}

#[test]
fn dataset_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset();
    let manifest = save_dataset(&ds, dir.path()).unwrap();
    let back = load_dataset(&manifest).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn f64_feature_files_are_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let x = random_features(&mut rng(1), 7, 3) / 3.0;
    let groups = [FeatureGroup { name: "all".into(), dim: 3 }];
    let path = dir.path().join("x.bin");
    write_features_as(&path, &x, &groups, DType::F64).unwrap();
    let (y, header) = read_features(&path).unwrap();
    assert_eq!(header.dtype, DType::F64);
    assert_eq!(x, y);
}

#[test]
fn missing_feature_file_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = save_dataset(&dataset(), dir.path()).unwrap();
    std::fs::remove_file(dir.path().join("features/00002.f32")).unwrap();
    let err = load_dataset(&manifest).unwrap_err();
    assert!(matches!(err, Error::Validation(ref m) if m.contains("00002.f32")), "{err}");
}

fn bundle() -> ModelBundle {
    let mut r = rng(2);
    let p = random_params(&mut r, 3, 2, DurationConfig {
        final_region: FinalRegion::Survival,
        ..DurationConfig::default()
    });
    let task = TaskDefinition::new("t", vec!["a".into(), "b".into()]).unwrap();
    let ordered = build_ordered_space(&task);
    let mut b = ModelBundle::default();
    b.tasks.insert(
        "t".into(),
        TaskModel {
            task: task.clone(),
            params: ParamsRecord::new(&p, Some(&ordered)),
            mapping: Some(vec![Label::Step(1), Label::Background, Label::Step(0)]),
            background_fraction: Some(0.25),
        },
    );
    b
}

#[test]
fn model_round_trip_reapplies_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.stepseg");
    let b = bundle();
    save_model(&b, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back, b);
    let record = &back.tasks["t"].params;
    let params = record.to_params().unwrap();
    let task = &back.tasks["t"].task;
    let mut plain = params.clone();
    plain.space = stepseg::model::StateSpace::unconstrained(3);
    assert_eq!(params, constrain_params(&plain, &build_ordered_space(task)).unwrap());
    assert_eq!(params.n_states(), 5);
}

#[test]
fn corrupted_models_are_rejected() {
    let b = bundle();
    let bytes = encode_model(&b);
    let path = std::path::Path::new("m");
    let truncated = &bytes[..bytes.len() - 10];
    assert!(matches!(decode_model(truncated, path), Err(Error::Checksum { .. })));
    let mut flipped = bytes.clone();
    let i = flipped.len() - 20;
    flipped[i] ^= 1;
    assert!(matches!(decode_model(&flipped, path), Err(Error::Checksum { .. })));
    let text = String::from_utf8(bytes).unwrap().replacen(" v1 ", " v9 ", 1);
    assert!(matches!(
        decode_model(text.as_bytes(), path),
        Err(Error::Version { found: 9, expected: 1, .. })
    ));
}

#[test]
fn predictions_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    let file = PredictionFile::new(
        "x",
        vec![PredictionRecord {
            video_id: "v".into(),
            task_id: "t".into(),
            segmentation: Segmentation::from_pairs(&[(Label::Background, 3), (Label::Step(2), 4)]).unwrap(),
        }],
    );
    save_predictions(&file, &path).unwrap();
    assert_eq!(load_predictions(&path).unwrap(), file);
}

#[test]
fn run_artifacts_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig {
        mode: Some(Mode::GenerativeSupervised),
        output_dir: Some(dir.path().to_path_buf()),
        seed: 5,
        ..RunConfig::default()
    };
    let out = run_experiment(&dataset(), &config).unwrap();
    let records = read_report_records(&dir.path().join("report.jsonl")).unwrap();
    assert_eq!(records.len(), out.report.tasks.len() + 1);
    let avg = records.last().unwrap();
    assert_eq!(avg["scope"], "average");
    assert_eq!(avg["meta"]["seed"], 5);
    for column in [
        "all_frame_accuracy",
        "step_frame_accuracy",
        "step_recall",
        "sequence_similarity",
        "background_pct",
        "step_segments",
    ] {
        assert!(avg["metrics"].get(column).is_some(), "{column}");
    }
    assert!(dir.path().join("report.txt").exists());
    let preds = load_predictions(&dir.path().join("predictions.json")).unwrap();
    assert_eq!(preds, out.predictions);
    let models = load_model(&dir.path().join("model.stepseg")).unwrap();
    assert_eq!(models, out.models);
}
