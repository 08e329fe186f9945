//! Command-line front end: `generate`, `train`, `explain`, `evaluate` and
//! `sweep`, plus a hidden `serve` that exposes a trained desk classifier over
//! the subprocess protocol.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::classifier::{
    serve, train_desk_classifier, Classifier, DeskClassifier, LabeledImage, SubprocessClassifier,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluation::{
    random_saliency, score_image, scores_to_csv, summarize, summary_svg, AnnotatedTargets,
    EvaluationSummary, ImageScore,
};
use crate::explain::{explain, Explanation, Infill};
use crate::imaging::io::{load_image, load_saliency, save_saliency_json, save_saliency_png, write_json};
use crate::imaging::{Image, SaliencyMap};
use crate::perturbation::records_to_csv;
use crate::segmentation::SegmentType;
use crate::synthetic::{
    diseased_dataset, export_dataset, import_dataset, random_dataset_with, sample_id, Label,
    Sample, SceneRanges,
};

/// Worker-pool size for batch commands.
pub const WORKERS_ENV: &str = "CONTRAST_XAI_WORKERS";

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_CLASSIFIER: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "contrast-xai", version, about = "Contrastive counterfactual explanations for image classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// key = value or JSON configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set image_infill=black`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ClassifierArgs {
    /// Desk classifier file written by `train`
    #[arg(long, conflicts_with = "classifier_cmd")]
    pub model: Option<PathBuf>,
    /// Command speaking the JSON-lines protocol, split on whitespace
    #[arg(long)]
    pub classifier_cmd: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// Only diseased scenes, cycling through the disease kinds
        #[arg(long)]
        diseased_only: bool,
    },
    /// Train the desk classifier on a generated dataset
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        /// Output model file
        #[arg(long)]
        out: PathBuf,
    },
    /// Explain one image against its contrast image
    Explain {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        x: PathBuf,
        #[arg(long = "contrast")]
        x_prime: PathBuf,
        #[command(flatten)]
        classifier: ClassifierArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score saliency maps on the diseased images of a dataset
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        classifier: ClassifierArgs,
        /// Score external maps named `<id>.json` or `<id>.png` instead
        #[arg(long, conflicts_with_all = ["model", "classifier_cmd"])]
        saliency_dir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// IoU threshold sweep, or the four segmentation/infill ablations
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        classifier: ClassifierArgs,
        #[arg(long, conflicts_with_all = ["model", "classifier_cmd"])]
        saliency_dir: Option<PathBuf>,
        /// Run {Augmented_GAN, Felzenszwalb} x {GAN, black} instead
        #[arg(long)]
        ablation: bool,
        #[arg(long)]
        out: PathBuf,
    },
    #[command(hide = true)]
    Serve {
        #[arg(long)]
        model: PathBuf,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::InvalidSpec(_) => EXIT_CONFIG,
        Error::Io { .. } | Error::Codec(_) | Error::Json(_) => EXIT_IO,
        Error::SubprocessFailure(_) | Error::SingleClassTraining | Error::NotPositiveClass(_) => {
            EXIT_CLASSIFIER
        }
        _ => EXIT_OTHER,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn init_workers() -> Result<()> {
    let Ok(v) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")))?;
    if n == 0 {
        return Err(Error::Config(format!("{WORKERS_ENV} must be at least 1")));
    }
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    init_workers()?;
    match cli.command {
        Command::Generate {
            config,
            out,
            diseased_only,
        } => cmd_generate(&load_config(&config)?, &out, diseased_only),
        Command::Train { config, data, out } => cmd_train(&load_config(&config)?, &data, &out),
        Command::Explain {
            config,
            x,
            x_prime,
            classifier,
            out,
        } => {
            let cfg = load_config(&config)?;
            let m = open_classifier(&classifier, &cfg)?;
            cmd_explain(&cfg, &x, &x_prime, m.as_ref(), &out)
        }
        Command::Evaluate {
            config,
            data,
            classifier,
            saliency_dir,
            out,
        } => {
            let cfg = load_config(&config)?;
            let source = saliency_source(&classifier, saliency_dir, &cfg)?;
            cmd_evaluate(&cfg, &data, &source, &out).map(|_| ())
        }
        Command::Sweep {
            config,
            data,
            classifier,
            saliency_dir,
            ablation,
            out,
        } => {
            let cfg = load_config(&config)?;
            let source = saliency_source(&classifier, saliency_dir, &cfg)?;
            if ablation {
                cmd_ablation(&cfg, &data, &source, &out)
            } else {
                cmd_sweep(&cfg, &data, &source, &out)
            }
        }
        Command::Serve { model } => {
            let m = DeskClassifier::load(&model)?;
            serve(&m, std::io::stdin().lock(), std::io::stdout().lock())
        }
    }
}

pub fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let base = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if args.set.is_empty() {
        Ok(base)
    } else {
        base.with_overrides(&args.set)
    }
}

fn open_classifier(args: &ClassifierArgs, cfg: &RunConfig) -> Result<Box<dyn Classifier>> {
    match (&args.model, &args.classifier_cmd) {
        (Some(path), _) => Ok(Box::new(DeskClassifier::load(path)?)),
        (None, Some(cmd)) => {
            let mut parts = cmd.split_whitespace().map(String::from);
            let program = parts
                .next()
                .ok_or_else(|| Error::Config("empty --classifier-cmd".into()))?;
            let args: Vec<String> = parts.collect();
            Ok(Box::new(SubprocessClassifier::spawn(
                program,
                &args,
                Duration::from_secs_f64(cfg.classifier_timeout_secs),
            )?))
        }
        (None, None) => Err(Error::Config(
            "a classifier is required: pass --model or --classifier-cmd".into(),
        )),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn scene_ranges(cfg: &RunConfig) -> SceneRanges {
    SceneRanges {
        size: (cfg.image_size, cfg.image_size),
        ..SceneRanges::default()
    }
}

pub fn cmd_generate(cfg: &RunConfig, out: &Path, diseased_only: bool) -> Result<()> {
    let ranges = scene_ranges(cfg);
    let (samples, ratio) = if diseased_only {
        (diseased_dataset(cfg.n_images, cfg.seed, &ranges), 1.0)
    } else {
        (
            random_dataset_with(cfg.n_images, cfg.seed, cfg.disease_ratio, &ranges),
            cfg.disease_ratio,
        )
    };
    export_dataset(&samples, out, cfg.seed, ratio, &ranges)?;
    cfg.save_resolved(out.join("resolved_config.json"))?;
    println!("wrote {} samples to {}", samples.len(), out.display());
    Ok(())
}

/// Loads a dataset directory; a directory without samples is a usage error.
pub fn open_dataset(dir: &Path) -> Result<Vec<Sample>> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        ));
    }
    if !dir.join("dataset.json").is_file() {
        return Err(Error::InvalidArgument(format!(
            "{} holds no dataset.json",
            dir.display()
        )));
    }
    let samples = import_dataset(dir)?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument(format!("{} holds no samples", dir.display())));
    }
    Ok(samples)
}

pub fn cmd_train(cfg: &RunConfig, data: &Path, out: &Path) -> Result<()> {
    let samples = open_dataset(data)?;
    let labeled: Vec<LabeledImage<'_>> = samples
        .iter()
        .map(|s| LabeledImage {
            image: &s.x,
            positive: s.truth.label == Label::Diseased,
        })
        .collect();
    let cut = ((labeled.len() as f64) * cfg.train_fraction).round() as usize;
    let cut = cut.clamp(1, labeled.len().saturating_sub(1).max(1));
    let (train, valid) = labeled.split_at(cut);
    let (model, report) = train_desk_classifier(train, valid, &cfg.training_options())?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    model.save(out)?;
    write_json(&report, out.with_extension("report.json"))?;
    println!(
        "train accuracy {:.4}, validation accuracy {:.4} ({} + {} images)",
        report.train_accuracy, report.validation_accuracy, report.n_train, report.n_valid
    );
    Ok(())
}

/// Writes every artifact of one explanation into `out`.
pub fn write_explanation(e: &Explanation, x: &Image, out: &Path) -> Result<()> {
    create_dir(out)?;
    write_json(&e.to_record(), out.join("explanation.json"))?;
    write_text(&out.join("report.txt"), &e.report())?;
    let saliency = e.saliency()?;
    save_saliency_png(Some(x), &saliency, out.join("saliency.png"))?;
    save_saliency_json(&saliency, out.join("saliency.json"))?;
    e.segments.save_png(out.join("segments.png"))?;
    e.segments.save_json(out.join("segments.json"))?;
    write_text(
        &out.join("perturbations.csv"),
        &records_to_csv(&e.records, e.segments.n()),
    )
}

pub fn cmd_explain(
    cfg: &RunConfig,
    x_path: &Path,
    x_prime_path: &Path,
    m: &dyn Classifier,
    out: &Path,
) -> Result<()> {
    let x = load_image(x_path)?;
    let x_prime = load_image(x_prime_path)?;
    let e = explain(&x, &x_prime, m, &cfg.explain_params(x.dims()))?;
    write_explanation(&e, &x, out)?;
    cfg.save_resolved(out.join("resolved_config.json"))?;
    print!("{}", e.report());
    Ok(())
}

/// Where saliency maps come from.
pub enum SaliencySource {
    Explain(Box<dyn Classifier>),
    Directory(PathBuf),
}

fn saliency_source(
    classifier: &ClassifierArgs,
    dir: Option<PathBuf>,
    cfg: &RunConfig,
) -> Result<SaliencySource> {
    match dir {
        Some(d) => Ok(SaliencySource::Directory(d)),
        None => Ok(SaliencySource::Explain(open_classifier(classifier, cfg)?)),
    }
}

fn external_saliency(dir: &Path, id: &str) -> Result<SaliencyMap> {
    for name in [format!("{id}.json"), format!("{id}.png"), format!("{id}.pgm")] {
        let p = dir.join(name);
        if p.is_file() {
            return load_saliency(p);
        }
    }
    Err(Error::io(
        dir.join(format!("{id}.json")),
        std::io::Error::new(std::io::ErrorKind::NotFound, "no saliency map for sample"),
    ))
}

/// Outcome of explaining one dataset image.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemOutcome {
    pub id: String,
    /// Set when the image could not be explained.
    pub skipped: Option<String>,
    pub has_counterfactual: bool,
    pub fidelity_errors: Vec<f64>,
}

struct Item {
    outcome: ItemOutcome,
    saliency: Option<SaliencyMap>,
}

fn produce(
    cfg: &RunConfig,
    samples: &[&Sample],
    source: &SaliencySource,
    artifacts: Option<&Path>,
) -> Result<Vec<Item>> {
    let one = |s: &Sample| -> Result<Item> {
        let id = sample_id(s.id);
        match source {
            SaliencySource::Directory(dir) => Ok(Item {
                saliency: Some(external_saliency(dir, &id)?),
                outcome: ItemOutcome {
                    id,
                    skipped: None,
                    has_counterfactual: false,
                    fidelity_errors: vec![],
                },
            }),
            SaliencySource::Explain(m) => {
                match explain(&s.x, &s.x_prime, m.as_ref(), &cfg.explain_params(s.x.dims())) {
                    Ok(e) => {
                        if let Some(dir) = artifacts {
                            write_explanation(&e, &s.x, &dir.join(&id))?;
                        }
                        Ok(Item {
                            saliency: Some(e.saliency()?),
                            outcome: ItemOutcome {
                                id,
                                skipped: None,
                                has_counterfactual: !e.counterfactuals.is_empty(),
                                fidelity_errors: e.fidelity_errors.clone(),
                            },
                        })
                    }
                    Err(err @ (Error::NotPositiveClass(_) | Error::NoSegmentsFound)) => Ok(Item {
                        saliency: None,
                        outcome: ItemOutcome {
                            id,
                            skipped: Some(err.to_string()),
                            has_counterfactual: false,
                            fidelity_errors: vec![],
                        },
                    }),
                    Err(err) => Err(err),
                }
            }
        }
    };
    let parallel = match source {
        SaliencySource::Explain(m) => m.concurrency_safe(),
        SaliencySource::Directory(_) => true,
    };
    if parallel {
        samples.par_iter().map(|s| one(s)).collect()
    } else {
        samples.iter().map(|s| one(s)).collect()
    }
}

fn diseased(samples: &[Sample]) -> Result<Vec<&Sample>> {
    let d: Vec<&Sample> = samples
        .iter()
        .filter(|s| s.truth.label == Label::Diseased)
        .collect();
    if d.is_empty() {
        return Err(Error::InvalidArgument("dataset has no diseased samples".into()));
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub methods: Vec<EvaluationSummary>,
    pub n_diseased: usize,
    pub n_explained: usize,
    pub counterfactual_rate: Option<f64>,
    pub mean_fidelity_error: Option<f64>,
    pub items: Vec<ItemOutcome>,
}

fn score_all(
    cfg: &RunConfig,
    samples: &[&Sample],
    maps: &[Option<&SaliencyMap>],
) -> Result<Vec<ImageScore>> {
    samples
        .iter()
        .zip(maps)
        .filter_map(|(s, m)| m.map(|m| (s, m)))
        .map(|(s, m)| {
            score_image(
                sample_id(s.id),
                m,
                &AnnotatedTargets::from_targets(&s.truth.targets)?,
                cfg.iou_threshold,
                &cfg.sweep_thresholds,
                cfg.saliency_mode,
            )
        })
        .collect()
}

fn evaluate_items(
    cfg: &RunConfig,
    samples: &[&Sample],
    source: &SaliencySource,
    artifacts: Option<&Path>,
    label: &str,
) -> Result<(EvaluationReport, Vec<ImageScore>, Vec<ImageScore>)> {
    let items = produce(cfg, samples, source, artifacts)?;
    let maps: Vec<Option<&SaliencyMap>> = items.iter().map(|i| i.saliency.as_ref()).collect();
    let scores = score_all(cfg, samples, &maps)?;
    let random: Vec<SaliencyMap> = samples
        .iter()
        .map(|s| {
            let (w, h) = s.x.dims();
            random_saliency(w, h, cfg.seed ^ (s.id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        })
        .collect();
    let random_scores = score_all(cfg, samples, &random.iter().map(Some).collect::<Vec<_>>())?;
    let explained: Vec<&ItemOutcome> = items
        .iter()
        .map(|i| &i.outcome)
        .filter(|o| o.skipped.is_none())
        .collect();
    let errors: Vec<f64> = explained
        .iter()
        .flat_map(|o| o.fidelity_errors.iter().copied())
        .collect();
    let from_explain = matches!(source, SaliencySource::Explain(_));
    let report = EvaluationReport {
        methods: vec![
            summarize(label, &scores, cfg.iou_threshold),
            summarize("random", &random_scores, cfg.iou_threshold),
        ],
        n_diseased: samples.len(),
        n_explained: explained.len(),
        counterfactual_rate: from_explain.then(|| {
            items.iter().filter(|i| i.outcome.has_counterfactual).count() as f64 / samples.len() as f64
        }),
        mean_fidelity_error: (from_explain && !errors.is_empty())
            .then(|| errors.iter().sum::<f64>() / errors.len() as f64),
        items: items.into_iter().map(|i| i.outcome).collect(),
    };
    Ok((report, scores, random_scores))
}

fn method_label(source: &SaliencySource) -> &'static str {
    match source {
        SaliencySource::Explain(_) => "contrastive",
        SaliencySource::Directory(_) => "external",
    }
}

pub fn cmd_evaluate(
    cfg: &RunConfig,
    data: &Path,
    source: &SaliencySource,
    out: &Path,
) -> Result<EvaluationReport> {
    let samples = open_dataset(data)?;
    let targets = diseased(&samples)?;
    create_dir(out)?;
    let (report, scores, random_scores) = evaluate_items(
        cfg,
        &targets,
        source,
        Some(&out.join("explanations")),
        method_label(source),
    )?;
    write_text(&out.join("scores.csv"), &scores_to_csv(&scores))?;
    write_text(&out.join("random_scores.csv"), &scores_to_csv(&random_scores))?;
    write_json(&report, out.join("summary.json"))?;
    write_text(&out.join("summary.svg"), &summary_svg(&report.methods))?;
    cfg.save_resolved(out.join("resolved_config.json"))?;
    for m in &report.methods {
        print_summary(m);
    }
    Ok(report)
}

fn print_summary(m: &EvaluationSummary) {
    let fmt = |a: Option<crate::evaluation::Aggregate>| {
        a.map_or("n/a".to_string(), |a| format!("{:.4} +- {:.4}", a.mean, a.ci95))
    };
    println!(
        "{:<12} pointing game {}  IoU@{} {}",
        m.method,
        fmt(m.pointing_game),
        m.iou_percent,
        fmt(m.iou)
    );
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SweepReport {
    method: String,
    n_images: usize,
    mean_iou: std::collections::BTreeMap<u32, f64>,
    best_threshold: Option<u32>,
}

pub fn cmd_sweep(cfg: &RunConfig, data: &Path, source: &SaliencySource, out: &Path) -> Result<()> {
    let samples = open_dataset(data)?;
    let targets = diseased(&samples)?;
    create_dir(out)?;
    let (_, scores, _) = evaluate_items(cfg, &targets, source, None, method_label(source))?;
    let summary = summarize(method_label(source), &scores, cfg.iou_threshold);
    write_text(&out.join("sweep.csv"), &scores_to_csv(&scores))?;
    let report = SweepReport {
        method: summary.method.clone(),
        n_images: summary.n_images,
        mean_iou: summary.sweep.clone(),
        best_threshold: summary.best_threshold,
    };
    write_json(&report, out.join("sweep.json"))?;
    cfg.save_resolved(out.join("resolved_config.json"))?;
    for (p, v) in &report.mean_iou {
        println!("IoU@{p}: {v:.4}");
    }
    if let Some(b) = report.best_threshold {
        println!("best threshold: {b}");
    }
    Ok(())
}

pub fn cmd_ablation(cfg: &RunConfig, data: &Path, source: &SaliencySource, out: &Path) -> Result<()> {
    if matches!(source, SaliencySource::Directory(_)) {
        return Err(Error::Config("--ablation needs a classifier".into()));
    }
    let samples = open_dataset(data)?;
    let targets = diseased(&samples)?;
    create_dir(out)?;
    let mut summaries = vec![];
    for segment_type in [SegmentType::AugmentedGan, SegmentType::Felzenszwalb] {
        for infill in [Infill::Gan, Infill::Black] {
            let mut c = cfg.clone();
            c.image_segment_type = segment_type;
            c.image_infill = infill;
            let label = format!("{segment_type}/{infill}");
            let (report, _, _) = evaluate_items(&c, &targets, source, None, &label)?;
            let summary = report.methods[0].clone();
            print_summary(&summary);
            summaries.push(summary);
        }
    }
    write_json(&summaries, out.join("ablation.json"))?;
    write_text(&out.join("ablation.svg"), &summary_svg(&summaries))?;
    cfg.save_resolved(out.join("resolved_config.json"))
}
