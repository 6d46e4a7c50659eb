use std::io::Write;
use std::path::{Path, PathBuf};

use tweetclf::metrics::{confusion, precision_recall_f1, render_report, ReportFormat};
use tweetclf::model::{count_parameters, LayerParams, Model, ModelConfig, ModelKind, ModelSpec};
use tweetclf::projection::{export_points, project_vocab};
use tweetclf::text::{
    ingest_csv, load_glove, load_meta, prepare, DatasetMeta, EncodedSample, LabelMap,
    PrepareConfig, PreparedDataset, StopWords,
};
use tweetclf::train::{
    fit_pretrained, fit_with, load_checkpoint, load_checkpoint_as, predict_classes, predict_proba,
    save_checkpoint, TrainConfig,
};
use tweetclf::{Error, Result, RngState};

use crate::{Command, EvaluateArgs, ParamsArgs, PredictArgs, PrepareArgs, ProjectArgs, TrainArgs};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const LOG_FILE: &str = "train_log.csv";
pub const CONFIG_FILE: &str = "train_config.txt";
pub const EMPTY_MARKER: &str = "<empty-after-cleaning>";
const EVAL_BATCH: usize = 64;

/// Offset mixed into the seed for the GloVe out-of-vocabulary draws so
/// they do not replay the weight initialisation stream.
const GLOVE_STREAM: u64 = 0x676c_6f76_6531;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(io_err(path))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{what} `{}` does not exist",
            path.display()
        )))
    }
}

fn require_dir(path: &Path, what: &str) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{what} `{}` is not a directory",
            path.display()
        )))
    }
}

fn say(out: &mut dyn Write, text: impl AsRef<str>) -> Result<()> {
    writeln!(out, "{}", text.as_ref()).map_err(io_err(Path::new("<stdout>")))
}

pub fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Prepare(a) => cmd_prepare(&a, out),
        Command::Train(a) => cmd_train(&a, out),
        Command::Evaluate(a) => cmd_evaluate(&a, out),
        Command::Predict(a) => cmd_predict(&a, out),
        Command::Project(a) => cmd_project(&a, out),
        Command::Params(a) => cmd_params(&a, out),
    }
}

pub fn cmd_prepare(args: &PrepareArgs, out: &mut dyn Write) -> Result<()> {
    require_file(&args.data, "dataset")?;
    let labels = match &args.labels {
        Some(p) => {
            require_file(p, "label map")?;
            LabelMap::parse(&std::fs::read_to_string(p).map_err(io_err(p))?)?
        }
        None => LabelMap::default_map(),
    };
    let stopwords = match &args.stopwords {
        Some(p) => {
            require_file(p, "stop-word list")?;
            StopWords::parse(&std::fs::read_to_string(p).map_err(io_err(p))?)
        }
        None => StopWords::english(),
    };
    let cfg = PrepareConfig {
        word_length: args.word_length,
        min_freq: args.min_freq,
        train_fraction: args.train_fraction,
        seed: args.seed,
        ..PrepareConfig::default()
    };
    if cfg.word_length == 0 {
        return Err(Error::Config("word length must be positive".into()));
    }

    let (records, report) = ingest_csv(&args.data)?;
    for (line, why) in &report.problems {
        eprintln!("{}:{line}: skipped row: {why}", args.data.display());
    }
    let dataset = prepare(&records, &labels, &stopwords, &cfg)?;
    create_dir(&args.out)?;
    dataset.save(&args.out)?;

    let s = &dataset.meta.stats;
    say(
        out,
        format!("rows read           {}", report.rows + report.skipped),
    )?;
    say(out, format!("malformed skipped   {}", report.skipped))?;
    say(out, format!("label not mapped    {}", s.unmapped_label))?;
    say(
        out,
        format!("empty after clean   {}", s.empty_after_cleaning),
    )?;
    say(out, format!("duplicates removed  {}", s.duplicates))?;
    say(
        out,
        format!("vocabulary          {}", dataset.meta.vocab.len()),
    )?;
    say(out, format!("train / test        {} / {}", s.train, s.test))?;
    say(out, format!("wrote {}", args.out.display()))
}

/// Hyperparameters: defaults, then the config file, then flags (clap has
/// already folded environment variables into the flags).
pub fn resolve_train_config(args: &TrainArgs, meta: &DatasetMeta) -> Result<TrainConfig> {
    let mut cfg = match &args.config {
        Some(p) => {
            require_file(p, "config file")?;
            TrainConfig::from_file(p)?
        }
        None => TrainConfig::default(),
    };
    if let Some(m) = args.model {
        cfg.model = m;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    if let Some(b) = args.batch {
        cfg.batch_size = b;
    }
    if let Some(lr) = args.lr {
        cfg.adam.lr = lr;
    }
    if args.pretrain {
        cfg.pretrain = true;
    }
    cfg.word_length = meta.config.word_length;
    cfg.validate()?;
    Ok(cfg)
}

fn model_config(cfg: &TrainConfig, meta: &DatasetMeta) -> ModelConfig {
    let mut mc = cfg.model_config(meta.vocab.len());
    let classes = meta.classes.len();
    match &mut mc {
        ModelConfig::Word(w) => w.classes = classes,
        ModelConfig::Char(c) => {
            c.classes = classes;
            c.length = meta.config.char_length;
        }
        ModelConfig::Combined(c) => {
            c.classes = classes;
            c.word.classes = classes;
            c.char.classes = classes;
            c.char.length = meta.config.char_length;
        }
    }
    mc
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    require_dir(&args.data, "prepared dataset")?;
    if let Some(g) = &args.glove {
        require_file(g, "GloVe file")?;
    }
    for p in [&args.from_word, &args.from_char].into_iter().flatten() {
        require_file(p, "checkpoint")?;
    }
    let dataset = PreparedDataset::load(&args.data)?;
    let meta = &dataset.meta;
    let cfg = resolve_train_config(args, meta)?;
    if args.from_word.is_some() && cfg.model != ModelKind::Combined {
        return Err(Error::Config(
            "--from-word/--from-char need the combined model".into(),
        ));
    }
    if args.from_word.is_some() && cfg.pretrain {
        return Err(Error::Config(
            "use either --pretrain or --from-word/--from-char".into(),
        ));
    }

    let mut rng = RngState::new(cfg.seed);
    let mut model = Model::init(model_config(&cfg, meta), &mut rng)?;
    if let Some(g) = &args.glove {
        if model.kind() == ModelKind::Char {
            return Err(Error::Config(
                "the char model has no word embedding for --glove".into(),
            ));
        }
        let dim = match model.params.layer("word.embedding") {
            Some(LayerParams::Embedding(t)) => t.shape()[1],
            _ => unreachable!("word and combined models have an embedding"),
        };
        let table = load_glove(
            g,
            &meta.vocab,
            dim,
            &mut RngState::new(cfg.seed ^ GLOVE_STREAM),
        )?;
        model.set_embedding(table)?;
        say(out, format!("loaded GloVe vectors from {}", g.display()))?;
    }
    if let (Some(w), Some(c)) = (&args.from_word, &args.from_char) {
        let word = load_checkpoint_as(w, ModelKind::Word)?;
        let chars = load_checkpoint_as(c, ModelKind::Char)?;
        let copied = tweetclf::model::combine_pretrained(&mut model, &word, &chars)?;
        say(
            out,
            format!(
                "initialised {} from pretrained checkpoints",
                copied.join(", ")
            ),
        )?;
    }

    create_dir(&args.out)?;
    write_file(&args.out.join(CONFIG_FILE), &cfg.to_text())?;
    say(
        out,
        format!(
            "training {} model ({} parameters) on {} samples",
            model.kind(),
            model.params.element_count(),
            dataset.train.len()
        ),
    )?;

    let progress = |phase: &str, e: &tweetclf::train::EpochLog| {
        eprintln!(
            "[{phase}] epoch {:>3}/{}  loss {:.4}  acc {:.1}%  {:.1}s",
            e.epoch,
            cfg.epochs,
            e.loss,
            e.accuracy * 100.0,
            e.seconds
        );
    };
    if cfg.pretrain {
        let logs = fit_pretrained(&mut model, &dataset.train, &cfg, progress)?;
        logs.word.write_csv(args.out.join("word_log.csv"))?;
        logs.char.write_csv(args.out.join("char_log.csv"))?;
        logs.combined.write_csv(args.out.join(LOG_FILE))?;
        save_checkpoint(
            &logs.word_model.spec,
            &logs.word_model.params,
            args.out.join("word.ckpt"),
        )?;
        save_checkpoint(
            &logs.char_model.spec,
            &logs.char_model.params,
            args.out.join("char.ckpt"),
        )?;
        if let Some(last) = logs.combined.epochs.last() {
            say(
                out,
                format!(
                    "final loss {:.4}, train accuracy {:.1}%",
                    last.loss,
                    last.accuracy * 100.0
                ),
            )?;
        }
    } else {
        let kind = model.kind().to_string();
        let log = fit_with(&mut model, &dataset.train, &cfg, |e| progress(&kind, e))?;
        log.write_csv(args.out.join(LOG_FILE))?;
        if let Some(last) = log.epochs.last() {
            say(
                out,
                format!(
                    "final loss {:.4}, train accuracy {:.1}%",
                    last.loss,
                    last.accuracy * 100.0
                ),
            )?;
        }
    }
    let ckpt = args.out.join(CHECKPOINT_FILE);
    save_checkpoint(&model.spec, &model.params, &ckpt)?;
    say(out, format!("wrote {}", ckpt.display()))
}

fn open_checkpoint(
    args: &crate::CheckpointArgs,
    out_dir: Option<&Path>,
) -> Result<(Model, PathBuf)> {
    let path = match (&args.checkpoint, out_dir) {
        (Some(p), _) => p.clone(),
        (None, Some(d)) => d.join(CHECKPOINT_FILE),
        (None, None) => return Err(Error::InvalidArgument("--checkpoint is required".into())),
    };
    require_file(&path, "checkpoint")?;
    let model = match args.model {
        Some(kind) => load_checkpoint_as(&path, kind)?,
        None => load_checkpoint(&path)?,
    };
    Ok((model, path))
}

fn check_compatible(model: &Model, meta: &DatasetMeta) -> Result<()> {
    let vocab = match &model.spec.config {
        ModelConfig::Word(w) => Some(w.vocab),
        ModelConfig::Combined(c) => Some(c.word.vocab),
        ModelConfig::Char(_) => None,
    };
    if vocab.is_some_and(|v| v != meta.vocab.len()) || model.spec.classes() != meta.classes.len() {
        return Err(Error::SpecMismatch {
            expected: format!(
                "vocabulary {} and {} classes",
                meta.vocab.len(),
                meta.classes.len()
            ),
            found: format!(
                "vocabulary {:?} and {} classes",
                vocab,
                model.spec.classes()
            ),
        });
    }
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    require_dir(&args.ckpt.data, "prepared dataset")?;
    let dataset = PreparedDataset::load(&args.ckpt.data)?;
    let (model, _) = open_checkpoint(&args.ckpt, Some(&args.out))?;
    check_compatible(&model, &dataset.meta)?;
    let samples: &[EncodedSample] = match args.split.as_str() {
        "test" => &dataset.test,
        "train" => &dataset.train,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown split `{other}` (test or train)"
            )))
        }
    };
    let probs = predict_proba(&model, samples, EVAL_BATCH)?;
    let preds = predict_classes(&probs);
    let truth: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let cm = confusion(&truth, &preds, dataset.meta.classes.len())?;
    let report = precision_recall_f1(&cm, dataset.meta.classes.classes());

    create_dir(&args.out)?;
    let table = render_report(&report, ReportFormat::Table, args.decimals)?;
    write_file(&args.out.join("report.txt"), &table)?;
    write_file(
        &args.out.join("report.json"),
        &render_report(&report, ReportFormat::Json, args.decimals)?,
    )?;
    write_file(
        &args.out.join("report.csv"),
        &render_report(&report, ReportFormat::Csv, args.decimals)?,
    )?;
    let mut cm_csv = String::from("true\\pred");
    for c in dataset.meta.classes.classes() {
        cm_csv.push(',');
        cm_csv.push_str(c);
    }
    cm_csv.push('\n');
    for (c, row) in dataset.meta.classes.classes().iter().zip(&cm.counts) {
        cm_csv.push_str(c);
        for v in row {
            cm_csv.push_str(&format!(",{v}"));
        }
        cm_csv.push('\n');
    }
    write_file(&args.out.join("confusion.csv"), &cm_csv)?;
    say(
        out,
        format!("{} split, {} samples", args.split, samples.len()),
    )?;
    write!(out, "{table}").map_err(io_err(Path::new("<stdout>")))
}

pub fn cmd_predict(args: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    require_dir(&args.ckpt.data, "prepared dataset")?;
    let meta = load_meta(&args.ckpt.data)?;
    let (model, _) = open_checkpoint(&args.ckpt, args.out.as_deref())?;
    check_compatible(&model, &meta)?;
    let stopwords = meta.stopword_set();
    for text in &args.text {
        let Some((word_ids, char_ids)) = meta.encode_text(text, &stopwords) else {
            say(out, EMPTY_MARKER)?;
            continue;
        };
        let sample = EncodedSample {
            word_ids,
            char_ids,
            label: 0,
        };
        let probs = predict_proba(&model, std::slice::from_ref(&sample), 1)?;
        let class = predict_classes(&probs)[0];
        let name = meta.classes.decode(class).unwrap_or("?");
        let ps: Vec<String> = probs.data().iter().map(|p| p.to_string()).collect();
        say(out, format!("{name}\t{}", ps.join(" ")))?;
    }
    Ok(())
}

pub fn cmd_project(args: &ProjectArgs, out: &mut dyn Write) -> Result<()> {
    require_dir(&args.ckpt.data, "prepared dataset")?;
    let meta = load_meta(&args.ckpt.data)?;
    let (model, _) = open_checkpoint(&args.ckpt, Some(&args.out))?;
    check_compatible(&model, &meta)?;
    let Some(LayerParams::Embedding(table)) = model.params.layer("word.embedding") else {
        return Err(Error::Config(format!(
            "the {} model has no word embedding",
            model.kind()
        )));
    };
    let points = project_vocab(table, &meta.vocab, args.top, args.dims as usize)?;
    for w in &points.warnings {
        eprintln!("warning: {w}");
    }
    create_dir(&args.out)?;
    let path = args.out.join("points.csv");
    export_points(&points, &path)?;
    let ratios: Vec<String> = points
        .explained_variance_ratio
        .iter()
        .map(|r| format!("{:.2}%", r * 100.0))
        .collect();
    say(
        out,
        format!(
            "{} tokens, explained variance {}",
            points.tokens.len(),
            ratios.join(" ")
        ),
    )?;
    say(out, format!("wrote {}", path.display()))
}

pub fn cmd_params(args: &ParamsArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = ModelConfig::default_for(args.kind);
    match &mut cfg {
        ModelConfig::Word(w) => w.vocab = args.vocab,
        ModelConfig::Combined(c) => c.word.vocab = args.vocab,
        ModelConfig::Char(_) => {}
    }
    let table = count_parameters(&ModelSpec::new(cfg)?);
    if args.json {
        say(
            out,
            serde_json::to_string_pretty(&table).map_err(Error::from)?,
        )
    } else {
        write!(out, "{}", table.render()).map_err(io_err(Path::new("<stdout>")))
    }
}
