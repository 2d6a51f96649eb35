use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use stepseg::experiment::random_split;
use stepseg::features::{pca_fit, FeatureGroupSpec};
use stepseg::io::predictions::RunMetadata;
use stepseg::io::{
    load_dataset, load_model, load_predictions, load_unvalidated, save_dataset, save_model, save_predictions,
    write_report, PredictionFile,
};
use stepseg::model::{DurationConfig, DurationLimit, DurationMode, EmissionMask, FinalRegion};
use stepseg::synth::{synth_generate, SynthSpec};
use stepseg::viz::{write_timeline, TimelineStyle};
use stepseg::{
    evaluate_predictions, hungarian_relabel, predict_with_models, run_experiment, run_splits, train_models,
    DecodeOptions, Error, RunConfig, Segmentation,
};

use crate::{Command, RunArgs};

/// 1 for invalid input or configuration, 2 for failures while running.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::Validation(_)
            | Error::DimensionMismatch { .. }
            | Error::DurationOutOfSupport { .. }
            | Error::InsufficientFrames { .. }
            | Error::MissingModel(_)
            | Error::Config(_)
            | Error::Infeasible(_)
            | Error::Parse { .. }
            | Error::Checksum { .. }
            | Error::Version { .. },
        ) => 1,
        _ => 2,
    }
}

fn parse_enum<T: serde::de::DeserializeOwned>(what: &str, value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| Error::Config(format!("unknown {what} {value:?}")).into())
}

fn parse_group(spec: &str) -> Result<FeatureGroupSpec> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("feature group {spec:?} is not NAME:DIM:COMPONENTS"));
    if parts.len() != 3 || parts[0].is_empty() {
        return Err(bad().into());
    }
    Ok(FeatureGroupSpec {
        name: parts[0].to_string(),
        dim: parts[1].parse().map_err(|_| bad())?,
        components: parts[2].parse().map_err(|_| bad())?,
    })
}

pub fn build_config(args: &RunArgs) -> Result<RunConfig> {
    let mut c = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            let parse = |e: serde_json::Error| Error::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            };
            let value: serde_json::Value = serde_json::from_str(&text).map_err(parse)?;
            let baseline_only = value.get("baseline").is_some_and(|b| !b.is_null()) && value.get("mode").is_none();
            let mut c: RunConfig = serde_json::from_value(value).map_err(parse)?;
            if baseline_only {
                c.mode = None;
            }
            c
        }
        None => RunConfig::default(),
    };
    if let Some(m) = &args.mode {
        c.mode = Some(parse_enum("mode", m)?);
        c.baseline = None;
    }
    if let Some(b) = &args.baseline {
        c.baseline = Some(parse_enum("baseline", b)?);
        c.mode = None;
    }
    if let Some(k) = &args.constraints {
        c.constraints = parse_enum("constraints", k)?;
    }
    c.seed = args.seed;
    c.train.seed = args.seed;
    if let Some(v) = args.epochs {
        c.train.max_epochs = v;
    }
    if let Some(v) = args.lr {
        c.train.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        c.train.batch_size = v;
    }
    if let Some(v) = args.decay {
        c.train.decay = v;
    }
    if let Some(v) = args.patience {
        c.train.patience = v;
    }
    if let Some(v) = args.restarts {
        c.restarts = v;
    }
    if !args.groups.is_empty() {
        c.pca = args.groups.iter().map(|g| parse_group(g)).collect::<Result<_>>()?;
    }
    if let Some(v) = args.smoothing {
        c.smoothing = v;
    }
    if let Some(v) = args.variance_floor {
        c.variance_floor = v;
    }
    if let Some(v) = args.narration_penalty {
        c.narration_penalty = v;
    }
    if args.narration_at_test {
        c.narration_at_test = true;
    }
    if let Some(v) = args.background_fraction {
        c.background_fraction = Some(v);
    }
    if args.hmm {
        c.durations = DurationConfig::hmm();
    }
    if let Some(d) = args.max_duration {
        if c.durations.mode == DurationMode::Unit {
            return Err(Error::Config("--max-duration has no effect with --hmm".into()).into());
        }
        c.durations.limit = DurationLimit::Fixed(d);
    }
    if args.survival_final {
        c.durations.final_region = FinalRegion::Survival;
    }
    c.validate()?;
    Ok(c)
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).context("serializing output")?;
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(())
}

pub fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Validate { manifest } => {
            let ds = load_unvalidated(&manifest)?;
            let report = ds.validate();
            if report.is_valid() {
                println!("ok: {} tasks, {} videos", ds.tasks.len(), ds.videos.len());
                Ok(ExitCode::SUCCESS)
            } else {
                print!("{report}");
                eprintln!("{} problems found", report.violations.len());
                Ok(ExitCode::from(1))
            }
        }
        Command::Pca { manifest, groups, out } => {
            let ds = load_dataset(&manifest)?;
            let specs: Vec<FeatureGroupSpec> = groups.iter().map(|g| parse_group(g)).collect::<Result<_>>()?;
            let model = pca_fit(&ds, &specs)?;
            write_json(&out, &model)?;
            for (task, groups) in &model.tasks {
                for g in groups {
                    let kept: f64 = g.explained_variance_ratio.iter().sum();
                    println!("{task} {}: {} components, {:.1}% variance", g.name, g.components(), 100.0 * kept);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Train { manifest, run, out } => {
            let config = build_config(&run)?;
            let ds = load_dataset(&manifest)?;
            let (bundle, warnings) = train_models(&ds, &config)?;
            warn_all(&warnings);
            save_model(&bundle, &out)?;
            println!("saved {} task models to {}", bundle.tasks.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Predict {
            manifest,
            model,
            out,
            all,
            narration,
            narration_penalty,
        } => {
            let ds = load_dataset(&manifest)?;
            let bundle = load_model(&model)?;
            let options = DecodeOptions {
                narration,
                narration_penalty: narration_penalty.unwrap_or(EmissionMask::DEFAULT_PENALTY),
                all_videos: all,
            };
            let (records, warnings) = predict_with_models(&ds, &bundle, &options)?;
            warn_all(&warnings);
            let system = bundle.metadata.get("system").cloned().unwrap_or_else(|| "model".into());
            let file = PredictionFile::new(system, records);
            save_predictions(&file, &out)?;
            println!("wrote {} predictions to {}", file.videos.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval {
            manifest,
            predictions,
            hungarian,
            out,
        } => {
            let ds = load_dataset(&manifest)?;
            let mut file = load_predictions(&predictions)?;
            if hungarian {
                hungarian_relabel(&ds, &mut file.videos)?;
            }
            let (report, _) = evaluate_predictions(&ds, &file.videos)?;
            print!("{report}");
            if let Some(path) = out {
                let meta = RunMetadata::new(None, &(&file.system, hungarian));
                write_report(&report, &meta, &path)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth {
            out,
            seed,
            tasks,
            steps,
            videos,
            min_len,
            max_len,
            separation,
            dim,
            background,
            step_duration,
            ordered,
            narration,
            narration_slack,
            train_per_task,
        } => {
            let spec = SynthSpec {
                tasks,
                steps,
                videos_per_task: videos,
                min_len,
                max_len,
                separation,
                dim,
                background_fraction: background,
                step_duration,
                ordered,
                narration,
                narration_slack,
                seed,
            };
            let mut ds = synth_generate(&spec)?.dataset;
            if let Some(n) = train_per_task {
                ds = random_split(&ds, n, seed)?;
            }
            let path = save_dataset(&ds, &out)?;
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Viz {
            manifest,
            predictions,
            out,
            videos,
            fps,
        } => {
            let ds = load_dataset(&manifest)?;
            let files: Vec<PredictionFile> = predictions.iter().map(|p| load_predictions(p)).collect::<Result<_, _>>()?;
            fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.display().to_string(),
                source: e,
            })?;
            let style = TimelineStyle {
                fps,
                ..TimelineStyle::default()
            };
            let mut written = 0;
            for v in &ds.videos {
                if !videos.is_empty() && !videos.contains(&v.id) {
                    continue;
                }
                let reference: Option<Segmentation> = ds.reference_frames(v)?.map(|f| f.to_segmentation());
                let mut rows: Vec<(String, &Segmentation)> = Vec::new();
                if let Some(r) = &reference {
                    rows.push(("GT".into(), r));
                }
                for f in &files {
                    if let Some(p) = f.by_video().get(v.id.as_str()) {
                        rows.push((f.system.clone(), &p.segmentation));
                    }
                }
                if rows.is_empty() {
                    continue;
                }
                let steps = ds.task(&v.task_id).map(|t| t.steps.clone()).unwrap_or_default();
                let named: Vec<(&str, &Segmentation)> = rows.iter().map(|(n, s)| (n.as_str(), *s)).collect();
                write_timeline(&out.join(format!("{}.svg", v.id)), &v.id, &named, &steps, &style)?;
                written += 1;
            }
            println!("wrote {written} timelines to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            manifest,
            run,
            out,
            splits,
            train_per_task,
        } => {
            let mut config = build_config(&run)?;
            config.output_dir = out;
            let ds = load_dataset(&manifest)?;
            match splits {
                Some(k) => {
                    let n = train_per_task
                        .ok_or_else(|| Error::Config("--splits needs --train-per-task".into()))?;
                    let result = run_splits(&ds, &config, k, n)?;
                    print!("{}", result.mean);
                }
                None => {
                    let result = run_experiment(&ds, &config)?;
                    warn_all(&result.warnings);
                    print!("{}", result.report);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
