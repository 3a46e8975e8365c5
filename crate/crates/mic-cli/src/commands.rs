//! Implementations behind the CLI subcommands.

use anyhow::{anyhow, Context};

use mic_core::data::{
    decode_image, gen_synthetic, rescale, resize_bilinear, scan_dataset_dir, split_train_val,
    to_channels, DataSource,
};
use mic_core::metrics::{render_curves_svg, write_history_csv};
use mic_core::model::{
    build_model, load_checkpoint, predicted_classes, save_checkpoint, CheckpointMeta,
    HeadActivation, LoadedCheckpoint,
};
use mic_core::optim::{evaluate, fit, TrainingHistory};
use mic_core::tensor::Tensor;
use mic_core::verify::{run_gradchecks, GRADCHECK_THRESHOLD};

use crate::config::RunConfig;
use crate::{CliError, EvalArgs, GenSynthArgs, GradcheckArgs, PredictArgs, TrainArgs};

pub fn gen_synth(args: GenSynthArgs) -> Result<(), CliError> {
    if args.per_class == 0 {
        return Err(CliError::Usage("--per-class must be >= 1".into()));
    }
    if args.size < 8 {
        return Err(CliError::Usage("--size must be >= 8".into()));
    }
    let manifest = gen_synthetic(&args.out, args.per_class, args.size, args.seed)?;
    println!(
        "wrote {} images ({} classes x {} each, {}x{}) under {}",
        manifest.per_class * manifest.classes.len(),
        manifest.classes.len(),
        manifest.per_class,
        manifest.size,
        manifest.size,
        args.out.join("train").display()
    );
    println!("manifest: {}", args.out.join("manifest.json").display());
    Ok(())
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let file_cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let flag_cfg = RunConfig {
        arch: args.arch,
        size: args.size,
        channels: args.channels,
        filters: args.filters,
        dense_width: args.dense_width,
        epochs: args.epochs,
        batch_size: args.batch_size,
        lr: args.lr,
        lr_decay_factor: args.lr_decay_factor,
        lr_decay_every: args.lr_decay_every,
        patience: args.patience,
        min_delta: args.min_delta,
        seed: args.seed,
        deterministic: args.deterministic,
        val_fraction: args.val_fraction,
        augment: if args.no_augment { Some(false) } else { None },
        prefetch: args.prefetch,
        data: args.data,
        out: args.out,
        ..RunConfig::default()
    };
    let merged = file_cfg.overlaid(flag_cfg);
    let data = merged
        .data
        .clone()
        .ok_or_else(|| CliError::Usage("--data is required (flag or config)".into()))?;
    let out = merged
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("--out is required (flag or config)".into()))?;

    let scan = scan_dataset_dir(&data)?;
    if scan.skipped_files > 0 {
        eprintln!("warning: skipped {} non-image file(s)", scan.skipped_files);
    }
    let resolved = merged
        .resolve(scan.class_names.len())
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let (train_records, val_records) = split_train_val(
        &scan.train,
        resolved.pipeline.val_fraction,
        resolved.train.seed,
    )?;
    println!(
        "classes: {} | records: {} train / {} val",
        scan.class_names.join(", "),
        train_records.len(),
        val_records.len()
    );

    let train_source = DataSource::new(train_records, resolved.pipeline.clone())?;
    let val_source = DataSource::new(val_records, resolved.pipeline.clone())?;

    let mut model = build_model::<f32>(&resolved.spec, resolved.train.seed)?;
    println!(
        "built {} ({} trainable parameters)",
        resolved.spec.arch.name(),
        model.param_count()
    );

    let history = fit(&mut model, &train_source, &val_source, &resolved.train)?;
    let best = best_epoch(&history).ok_or_else(|| anyhow!("training produced an empty history"))?;

    std::fs::create_dir_all(&out)
        .with_context(|| format!("creating output dir {}", out.display()))?;
    write_history_csv(&history, out.join("history.csv"))?;
    render_curves_svg(&history, out.join("curves.svg"))?;
    save_checkpoint(
        &model,
        out.join("best.micf"),
        false,
        &CheckpointMeta {
            epoch: best.epoch,
            seed: resolved.train.seed,
            class_names: scan.class_names.clone(),
            adam_step: 0,
        },
    )?;
    let manifest = RunConfig::manifest(&resolved, &data, &out);
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| anyhow!("run manifest serialization: {e}"))?;
    std::fs::write(out.join("run.json"), manifest_json + "\n")
        .with_context(|| format!("writing {}", out.join("run.json").display()))?;

    println!(
        "trained {} epoch(s); best epoch {} (val_loss {:.6}, val_acc {:.6})",
        history.len(),
        best.epoch,
        best.val_loss,
        best.val_acc
    );
    println!(
        "wrote {}/history.csv, curves.svg, best.micf, run.json",
        out.display()
    );
    Ok(())
}

fn best_epoch(history: &TrainingHistory) -> Option<&mic_core::optim::EpochRecord> {
    let mut best: Option<&mic_core::optim::EpochRecord> = None;
    for row in &history.epochs {
        if best.is_none_or(|b| row.val_loss < b.val_loss) {
            best = Some(row);
        }
    }
    best
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    let LoadedCheckpoint {
        mut model, meta, ..
    } = load_checkpoint(&args.checkpoint)?;
    let scan = scan_dataset_dir(&args.data)?;
    let records = match args.split.as_str() {
        "test" => {
            if scan.test.is_empty() {
                return Err(CliError::Runtime(anyhow!(
                    "dataset {} has no test/ split; expected test/<CLASS>/ image folders \
                     (use --split train to evaluate the training records)",
                    args.data.display()
                )));
            }
            scan.test
        }
        "train" => scan.train,
        other => {
            return Err(CliError::Usage(format!(
                "--split must be `test` or `train`, got `{other}`"
            )))
        }
    };
    if model.spec.num_classes != scan.class_names.len() {
        return Err(CliError::Runtime(anyhow!(
            "checkpoint was trained for {} classes, dataset has {}",
            model.spec.num_classes,
            scan.class_names.len()
        )));
    }

    let source = DataSource::new(records, eval_pipeline(&model.spec, args.batch_size)?)?;
    let eval = evaluate(&mut model, &source)?;

    let class_names = effective_class_names(&meta, model.spec.num_classes);
    if args.json {
        let confusion: Vec<&[u64]> = eval.confusion.rows().iter().map(|r| r.as_slice()).collect();
        let doc = serde_json::json!({
            "loss": eval.loss,
            "accuracy": eval.accuracy,
            "confusion": confusion,
            "classes": class_names,
            "accuracy_definition": "(TP+TN)/(TP+FP+TN+FN)",
        });
        println!(
            "{}",
            serde_json::to_string_pretty(&doc).map_err(|e| anyhow!("{e}"))?
        );
    } else {
        println!("split: {} ({} samples)", args.split, eval.confusion.total());
        println!("loss: {:.6}", eval.loss);
        println!("accuracy: {:.6}", eval.accuracy);
        println!("note: accuracy uses the standard definition (TP+TN)/(TP+FP+TN+FN)");
        println!("confusion matrix (rows = true, cols = predicted):");
        let width = class_names
            .iter()
            .map(|n| n.len())
            .max()
            .unwrap_or(8)
            .max(6);
        print!("{:>width$}", "");
        for name in &class_names {
            print!(" {name:>width$}");
        }
        println!();
        for (i, row) in eval.confusion.rows().iter().enumerate() {
            print!("{:>width$}", class_names[i]);
            for &v in row {
                print!(" {v:>width$}");
            }
            println!();
        }
    }
    Ok(())
}

pub fn predict(args: PredictArgs) -> Result<(), CliError> {
    let LoadedCheckpoint {
        mut model, meta, ..
    } = load_checkpoint(&args.checkpoint)?;
    let bytes =
        std::fs::read(&args.image).with_context(|| format!("reading {}", args.image.display()))?;
    let raw = decode_image(&bytes)?;
    let input = model.spec.input;
    let adapted = to_channels(&raw, input.channels)?;
    let resized = resize_bilinear(&adapted, input.height, input.width)?;
    let scaled = rescale(&resized);
    let mut batch_data = Vec::with_capacity(scaled.len());
    batch_data.extend_from_slice(scaled.data());
    let batch = Tensor::new(
        vec![1, input.height, input.width, input.channels],
        batch_data,
    )?;

    let probs = model.predict(&batch)?;
    let class_names = effective_class_names(&meta, model.spec.num_classes);
    let predicted = predicted_classes(&probs, model.head)[0];
    println!("class: {}", class_names[predicted]);
    let dist: Vec<(String, f64)> = match model.head {
        HeadActivation::Softmax => class_names
            .iter()
            .zip(probs.data())
            .map(|(n, &p)| (n.clone(), p as f64))
            .collect(),
        HeadActivation::Sigmoid => {
            let p1 = probs.data()[0] as f64;
            vec![
                (class_names[0].clone(), 1.0 - p1),
                (class_names[1].clone(), p1),
            ]
        }
    };
    let rendered: Vec<String> = dist.iter().map(|(n, p)| format!("{n}={p:.6}")).collect();
    println!("probabilities: {}", rendered.join(" "));
    Ok(())
}

pub fn gradcheck(args: GradcheckArgs) -> Result<(), CliError> {
    let names = if args.all { Vec::new() } else { args.layers };
    let reports = run_gradchecks(&names, args.e2e)?;
    println!("{:<16} {:>12}  status", "check", "max_rel_err");
    let mut failures = Vec::new();
    for r in &reports {
        let ok = r.passes(GRADCHECK_THRESHOLD);
        println!(
            "{:<16} {:>12.3e}  {}",
            r.name,
            r.max_rel_err,
            if ok { "ok" } else { "FAIL" }
        );
        if !ok {
            failures.push(r.name.clone());
        }
    }
    if failures.is_empty() {
        println!("all checks within {GRADCHECK_THRESHOLD:.0e}");
        Ok(())
    } else {
        Err(CliError::Runtime(anyhow!(
            "gradient checks failed: {}",
            failures.join(", ")
        )))
    }
}

fn eval_pipeline(
    spec: &mic_core::model::ArchitectureSpec,
    batch_size: usize,
) -> Result<mic_core::data::PipelineConfig, CliError> {
    if spec.input.height != spec.input.width {
        return Err(CliError::Runtime(anyhow!(
            "pipeline supports square inputs; checkpoint declares {}x{}",
            spec.input.height,
            spec.input.width
        )));
    }
    Ok(mic_core::data::PipelineConfig {
        image_size: spec.input.height,
        channels: spec.input.channels,
        batch_size,
        augment: false,
        ..mic_core::data::PipelineConfig::default()
    })
}

fn effective_class_names(meta: &CheckpointMeta, num_classes: usize) -> Vec<String> {
    if meta.class_names.len() == num_classes {
        meta.class_names.clone()
    } else {
        (0..num_classes).map(|i| format!("class{i}")).collect()
    }
}
