mod common;

use common::*;
use rand::Rng;
use stepseg::model::{viterbi_decode, DurationConfig};
use stepseg::synth::{synth_generate, SynthSpec};
use stepseg::viz::{timeline_svg, TimelineStyle};
use stepseg::{
    build_ordered_space, constrain_params, is_canonical_order, merge_background, run_experiment, run_splits, Baseline,
    Constraints, Mode, RunConfig, TaskDefinition,
};

#[test]
fn ordered_decoding_is_canonical() {
    let task = TaskDefinition::new("t", (0..3).map(|j| format!("s{j}")).collect()).unwrap();
    let space = build_ordered_space(&task);
    for seed in 0..100 {
        let mut r = rng(seed);
        let free = random_params(&mut r, 4, 2, DurationConfig::default());
        let p = constrain_params(&free, &space).unwrap();
        let t = r.random_range(3..60);
        let x = random_features(&mut r, t, 2);
        let (seg, _) = viterbi_decode(&p, x.view(), None).unwrap();
        let labelled = merge_background(&seg, &space);
        assert!(is_canonical_order(&labelled, 3), "seed {seed}: {labelled:?}");
        assert_eq!(labelled.len(), t);
    }
}

#[test]
fn too_short_for_ordering_has_no_path() {
    let task = TaskDefinition::new("t", (0..3).map(|j| format!("s{j}")).collect()).unwrap();
    let p = constrain_params(
        &random_params(&mut rng(0), 4, 2, DurationConfig::default()),
        &build_ordered_space(&task),
    )
    .unwrap();
    let x = random_features(&mut rng(1), 2, 2);
    assert!(matches!(viterbi_decode(&p, x.view(), None), Err(stepseg::Error::NoValidPath { .. })));
}

fn small_synth(ordered: bool, narration: bool) -> stepseg::Dataset {
    synth_generate(&SynthSpec {
        videos_per_task: 20,
        ordered,
        narration,
        background_fraction: if ordered { 0.7 } else { 0.5 },
        seed: 13,
        ..SynthSpec::default()
    })
    .unwrap()
    .dataset
}

#[test]
fn unsupervised_ordered_narrated_run_is_canonical() {
    let config = RunConfig {
        constraints: Constraints::Both,
        seed: 3,
        train: stepseg::model::TrainConfig {
            max_epochs: 5,
            ..Default::default()
        },
        ..RunConfig::default()
    };
    let out = run_experiment(&small_synth(true, true), &config).unwrap();
    for p in &out.predictions.videos {
        assert!(is_canonical_order(&p.segmentation, 3), "{}", p.video_id);
    }
    let again = run_experiment(&small_synth(true, true), &config).unwrap();
    assert_eq!(out.report, again.report);
    assert_eq!(out.predictions, again.predictions);
}

#[test]
fn supervised_modes_label_well_separated_data() {
    let ds = small_synth(false, false);
    for mode in [Mode::GenerativeSupervised, Mode::DiscriminativeSupervised] {
        let config = RunConfig {
            mode: Some(mode),
            train: stepseg::model::TrainConfig {
                max_epochs: 3,
                ..Default::default()
            },
            ..RunConfig::default()
        };
        let out = run_experiment(&ds, &config).unwrap();
        assert!(out.report.average.all_frame_accuracy.unwrap() > 90.0, "{mode:?}");
    }
}

#[test]
fn uniform_baseline_and_splits() {
    let mut ds = small_synth(false, false);
    ds.tasks.push(TaskDefinition::new("empty", vec!["x".into()]).unwrap());
    let config = RunConfig {
        mode: None,
        baseline: Some(Baseline::Uniform),
        ..RunConfig::default()
    };
    let out = run_splits(&ds, &config, 3, 10).unwrap();
    assert_eq!(out.reports.len(), 3);
    assert_eq!(out.mean.tasks.len(), 1);
    assert_eq!(out.mean.excluded_tasks, vec!["empty".to_string()]);
    for r in &out.reports {
        assert_eq!(r.tasks[0].videos, 10);
    }
}

#[test]
fn timeline_rows_match_segmentations() {
    let out = synth_generate(&SynthSpec {
        videos_per_task: 3,
        ..SynthSpec::default()
    })
    .unwrap();
    for seg in out.segmentations.values() {
        let svg = timeline_svg("v", &[("GT", seg), ("pred", seg)], &[], &TimelineStyle::default()).unwrap();
        assert_eq!(svg.matches(r#"class="region""#).count(), 2 * seg.regions.len());
    }
}
