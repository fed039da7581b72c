use std::fmt::Write as _;
use std::path::Path;

use setconv::classifier::{fit_with_split, load_model, save_model, write_atomic, Mode};
use setconv::data::{generate_synthetic, load_csv, load_features_csv, write_csv, SynthSpec};
use setconv::{Dataset, Error, LossRecord, Matrix, TrainConfig};

use crate::args::{EvalArgs, ModeArg, PredictArgs, SplitArg, SynthArgs, TrainArgs};
use crate::failure::Failure;

pub fn synth(args: &SynthArgs) -> Result<(), Failure> {
    if let Some(classes) = args.classes {
        if classes != args.counts.len() {
            return Err(Failure::usage(format!(
                "--classes {classes} does not match {} values in --counts",
                args.counts.len()
            )));
        }
    }
    let spec = SynthSpec::separated(&args.counts, args.dim, args.sep, args.std, args.seed)
        .map_err(Failure::usage_from)?;
    let dataset = generate_synthetic(&spec)?;
    let mut buf = Vec::new();
    write_csv(&dataset, &args.label_col, &mut buf)?;
    write_atomic(&args.out, &buf)?;

    let counts: Vec<String> = dataset.class_counts().iter().map(|c| c.to_string()).collect();
    println!("rows={} dim={}", dataset.n_samples(), dataset.dim());
    println!("counts={}", counts.join(","));
    println!("ir={:.2}", dataset.imbalance_ratio());
    Ok(())
}

fn loss_log_csv(logs: &[Vec<LossRecord>], multiclass: bool) -> String {
    let mut out = String::from(if multiclass { "head,iteration,loss\n" } else { "iteration,loss\n" });
    for (head, log) in logs.iter().enumerate() {
        for r in log {
            if multiclass {
                let _ = writeln!(out, "{head},{},{}", r.iteration, r.loss);
            } else {
                let _ = writeln!(out, "{},{}", r.iteration, r.loss);
            }
        }
    }
    out
}

pub fn train(args: &TrainArgs) -> Result<(), Failure> {
    let config = TrainConfig {
        support_size: args.support_size,
        iterations: args.iterations,
        learning_rate: args.lr,
        hidden_width: args.hidden,
        d_out: args.d_out,
        seed: args.seed,
        ..TrainConfig::default()
    };
    config.validate().map_err(Failure::usage_from)?;
    if args.s_post == 0 {
        return Err(Failure::usage("--s-post must be positive"));
    }
    let dataset = load_csv(&args.data, &args.label_col)?;
    let mode = match args.mode {
        ModeArg::Binary => {
            if dataset.n_classes() != 2 {
                return Err(Failure::usage(format!(
                    "binary mode needs exactly 2 classes, {} has {}; use --mode multiclass",
                    args.data.display(),
                    dataset.n_classes()
                )));
            }
            Mode::Binary
        }
        ModeArg::Multiclass => Mode::Multiclass,
    };

    let out = fit_with_split(&dataset, &config, mode, args.s_post)?;
    save_model(&args.model_out, &out.model)?;
    if let Some(path) = &args.loss_log {
        write_atomic(path, loss_log_csv(&out.logs, mode == Mode::Multiclass).as_bytes())?;
    }

    println!(
        "train_rows={} test_rows={}",
        out.split.train.n_samples(),
        out.split.test.n_samples()
    );
    for (head, log) in out.logs.iter().enumerate() {
        let last = log.last().map_or_else(|| "none".to_string(), |r| r.loss.to_string());
        if mode == Mode::Multiclass {
            println!("head={head} final_loss={last}");
        } else {
            println!("final_loss={last}");
        }
    }
    println!("model={}", args.model_out.display());
    Ok(())
}

fn check_dim(model_dim: usize, data: &Matrix, path: &Path) -> Result<(), Failure> {
    if data.cols() != model_dim {
        return Err(Failure::compat(format!(
            "model expects {model_dim} features, {} has {}",
            path.display(),
            data.cols()
        )));
    }
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<(), Failure> {
    let file = load_model(&args.model)?;
    let dataset = load_csv(&args.data, &args.label_col)?;
    check_dim(file.input_dim(), dataset.features(), &args.data)?;

    let meta = &file.metadata;
    let selected: Dataset = match args.split {
        SplitArg::All => dataset,
        SplitArg::Test | SplitArg::Train => {
            if dataset.n_samples() != meta.data_rows {
                return Err(Failure::compat(format!(
                    "model was trained on a {}-row dataset, {} has {} rows; use --split all",
                    meta.data_rows,
                    args.data.display(),
                    dataset.n_samples()
                )));
            }
            if args.split == SplitArg::Test {
                dataset.subset(&meta.test_indices)
            } else {
                let mut held_out = vec![false; meta.data_rows];
                meta.test_indices.iter().for_each(|&i| held_out[i] = true);
                let train: Vec<usize> = (0..meta.data_rows).filter(|&i| !held_out[i]).collect();
                dataset.subset(&train)
            }
        }
    };

    let report = file.body.evaluate(&selected)?;
    print!("{}", report.to_key_value());
    if let Some(path) = &args.report_out {
        write_atomic(path, report.to_csv().as_bytes())?;
    }
    Ok(())
}

pub fn predict(args: &PredictArgs) -> Result<(), Failure> {
    let file = load_model(&args.model)?;
    let features = match &args.label_col {
        Some(col) => load_csv(&args.data, col)?.features().clone(),
        None => load_features_csv(&args.data)?,
    };
    check_dim(file.input_dim(), &features, &args.data)?;

    let n_scores = file.body.n_scores();
    let mut out = String::from("prediction");
    for c in 0..n_scores {
        let _ = write!(out, ",score_{c}");
    }
    out.push('\n');
    for row in features.row_iter() {
        let (label, scores) = file.body.predict(row)?;
        let _ = write!(out, "{label}");
        for s in scores {
            let _ = write!(out, ",{s}");
        }
        out.push('\n');
    }
    match &args.out {
        Some(path) => write_atomic(path, out.as_bytes())?,
        None => print!("{out}"),
    }
    Ok(())
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::from_core(e)
    }
}
