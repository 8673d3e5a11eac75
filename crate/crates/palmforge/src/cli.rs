//! Command-line interface. Results go to stdout, progress and diagnostics to
//! stderr. Exit status: 0 success, 1 validation or parse error, 2 IO error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use palmforge_core::metrics::{EvalSettings, Interpolation, DEFAULT_CONF_THRESHOLD, DEFAULT_IOU_THRESHOLD};
use palmforge_core::seed::Split;

use crate::charts::write_charts;
use crate::config::{ClassCountSpec, GeneratorConfig, GeneratorPatch};
use crate::error::{Error, Result};
use crate::evaluate::{class_name, render_counts, render_report, run_count, run_evaluation, write_outputs, CountRequest, EvalRequest};
use crate::experiment::{external_contract, load_summary, render_summary, run_evaluation_phase, run_generation_phase, ExperimentSpec};
use crate::generate::{generate_dataset, RunOptions};
use crate::layout::Manifest;

#[derive(Debug, Parser)]
#[command(name = "palmforge", version, about = "Synthetic aerial detection datasets and detector evaluation")]
pub struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Only errors on stderr.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled dataset by compositing sprites onto backgrounds.
    Generate(GenerateArgs),
    /// Evaluate detector output against ground truth (AP, mAP, TP/FP/FN).
    Evaluate(EvaluateArgs),
    /// Count detections above a confidence threshold.
    Count(CountArgs),
    /// Run the generation and/or evaluation phase of an experiment spec.
    Experiment(ExperimentArgs),
    /// Render charts from a summary.json.
    Charts(ChartsArgs),
}

fn parse_size(s: &str) -> std::result::Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got `{s}`"))?;
    let w = w.trim().parse().map_err(|_| format!("bad width in `{s}`"))?;
    let h = h.trim().parse().map_err(|_| format!("bad height in `{s}`"))?;
    Ok((w, h))
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected A,B, got `{s}`"))?;
    let a = a.trim().parse().map_err(|_| format!("bad number in `{s}`"))?;
    let b = b.trim().parse().map_err(|_| format!("bad number in `{s}`"))?;
    Ok((a, b))
}

/// `CLASS=MIN-MAX` or `CLASS=N`.
fn parse_class_range(s: &str) -> std::result::Result<(String, (u32, u32)), String> {
    let (class, range) = s
        .split_once('=')
        .ok_or_else(|| format!("expected CLASS=MIN-MAX, got `{s}`"))?;
    let num = |t: &str| t.trim().parse::<u32>().map_err(|_| format!("bad count in `{s}`"));
    let range = match range.split_once('-') {
        Some((lo, hi)) => (num(lo)?, num(hi)?),
        None => {
            let n = num(range)?;
            (n, n)
        }
    };
    if class.is_empty() {
        return Err(format!("missing class name in `{s}`"));
    }
    Ok((class.to_string(), range))
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generator config (TOML). Flags override its values.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset root to create.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Output image size, e.g. 1280x720.
    #[arg(long, value_parser = parse_size)]
    pub output_size: Option<(u32, u32)>,
    #[arg(long)]
    pub train_count: Option<u32>,
    #[arg(long)]
    pub val_count: Option<u32>,
    #[arg(long)]
    pub bg_pool_train: Option<PathBuf>,
    #[arg(long)]
    pub bg_pool_val: Option<PathBuf>,
    #[arg(long)]
    pub sprite_pool: Option<PathBuf>,
    /// Class order, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
    /// Objects per image for both splits, CLASS=MIN-MAX (repeatable).
    #[arg(long = "count", value_parser = parse_class_range)]
    pub counts: Vec<(String, (u32, u32))>,
    /// Objects per training image, CLASS=MIN-MAX (repeatable).
    #[arg(long = "train-range", value_parser = parse_class_range)]
    pub train_ranges: Vec<(String, (u32, u32))>,
    /// Objects per validation image, CLASS=MIN-MAX (repeatable).
    #[arg(long = "val-range", value_parser = parse_class_range)]
    pub val_ranges: Vec<(String, (u32, u32))>,
    /// Sprite scale range, MIN,MAX.
    #[arg(long, value_parser = parse_pair)]
    pub scale_range: Option<(f64, f64)>,
    #[arg(long, overrides_with = "no_rotation")]
    pub rotation: bool,
    #[arg(long, overrides_with = "rotation")]
    pub no_rotation: bool,
    /// Horizontal and vertical flip probabilities, H,V.
    #[arg(long, value_parser = parse_pair)]
    pub flip_probability: Option<(f64, f64)>,
    #[arg(long)]
    pub max_placement_attempts: Option<u32>,
    /// Fail instead of skipping objects that cannot be placed.
    #[arg(long, overrides_with = "no_strict_count")]
    pub strict_count: bool,
    #[arg(long, overrides_with = "strict_count")]
    pub no_strict_count: bool,
    /// Minimum pixel gap between placed objects.
    #[arg(long)]
    pub margin: Option<u32>,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Replace an existing dataset at the output root.
    #[arg(long)]
    pub overwrite: bool,
}

fn flag(on: bool, off: bool) -> Option<bool> {
    match (on, off) {
        (true, _) => Some(true),
        (_, true) => Some(false),
        _ => None,
    }
}

impl GenerateArgs {
    pub fn patch(&self) -> GeneratorPatch {
        let mut counts: BTreeMap<String, ClassCountSpec> = BTreeMap::new();
        for (class, r) in &self.counts {
            counts.entry(class.clone()).or_default().range = Some(*r);
        }
        for (class, r) in &self.train_ranges {
            counts.entry(class.clone()).or_default().train = Some(*r);
        }
        for (class, r) in &self.val_ranges {
            counts.entry(class.clone()).or_default().val = Some(*r);
        }
        GeneratorPatch {
            seed: self.seed,
            output_size: self.output_size,
            train_count: self.train_count,
            val_count: self.val_count,
            bg_pool_train: self.bg_pool_train.clone(),
            bg_pool_val: self.bg_pool_val.clone(),
            sprite_pool: self.sprite_pool.clone(),
            classes: self.classes.clone(),
            counts: (!counts.is_empty()).then_some(counts),
            scale_range: self.scale_range,
            rotation: flag(self.rotation, self.no_rotation),
            flip_probability: self.flip_probability,
            max_placement_attempts: self.max_placement_attempts,
            strict_count: flag(self.strict_count, self.no_strict_count),
            margin: self.margin,
            out: self.out.clone(),
        }
    }

    /// Flags over the config file over defaults.
    pub fn resolve(&self) -> Result<GeneratorConfig> {
        let file = match &self.config {
            Some(p) => GeneratorPatch::load(p)?,
            None => GeneratorPatch::default(),
        };
        GeneratorConfig::from_patch(self.patch().over(file))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InterpolationArg {
    AllPoint,
    ElevenPoint,
}

impl From<InterpolationArg> for Interpolation {
    fn from(a: InterpolationArg) -> Self {
        match a {
            InterpolationArg::AllPoint => Interpolation::AllPoint,
            InterpolationArg::ElevenPoint => Interpolation::ElevenPoint,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Ground-truth label directory (`<image_id>.txt`).
    #[arg(long)]
    pub gt: PathBuf,
    /// Detection directory (`<image_id>.txt` with a confidence column).
    #[arg(long)]
    pub det: PathBuf,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    pub iou: f64,
    /// Confidence threshold for TP/FP/FN totals.
    #[arg(long, default_value_t = DEFAULT_CONF_THRESHOLD)]
    pub conf: f64,
    /// Per-image tags (JSON object or dataset manifest).
    #[arg(long)]
    pub tags: Option<PathBuf>,
    /// Tag key for a per-group breakdown.
    #[arg(long)]
    pub group_by: Option<String>,
    /// Class names (data.yaml or one name per line).
    #[arg(long)]
    pub names: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all-point")]
    pub interpolation: InterpolationArg,
    /// Directory for report.json, report.txt and PR curves.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CountArgs {
    #[arg(long)]
    pub det: PathBuf,
    /// Ground-truth labels for labeled-vs-predicted deltas.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CONF_THRESHOLD)]
    pub conf: f64,
    #[arg(long)]
    pub names: Option<PathBuf>,
    /// Write the count report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Phase {
    Generate,
    Evaluate,
    All,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub phase: Phase,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ChartsArgs {
    #[arg(long)]
    pub summary: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
}

/// `train=300 val=120 palm≈6012/2398`.
pub fn generation_summary(manifest: &Manifest) -> String {
    let mut line = format!(
        "train={} val={}",
        manifest.image_count(Split::Train),
        manifest.image_count(Split::Val)
    );
    for class in &manifest.class_names {
        line.push_str(&format!(
            " {class}≈{}/{}",
            manifest.split_total(Split::Train, class),
            manifest.split_total(Split::Val, class)
        ));
    }
    line
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| Error::Config("missing output directory (`out` or --out)".into()))?;
    let manifest = generate_dataset(&cfg, &out, &RunOptions { jobs: args.jobs, overwrite: args.overwrite })?;
    println!("{}", out.display());
    for class in &manifest.class_names {
        println!("{class}: {}", manifest.totals_per_class.get(class).copied().unwrap_or(0));
    }
    println!("skipped={}", manifest.skipped_total);
    println!("{}", generation_summary(&manifest));
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let req = EvalRequest {
        gt_dir: args.gt.clone(),
        det_dir: args.det.clone(),
        tags: args.tags.clone(),
        group_by: args.group_by.clone(),
        names: args.names.clone(),
        settings: EvalSettings {
            iou_threshold: args.iou,
            conf_threshold: args.conf,
            interpolation: args.interpolation.into(),
        },
    };
    let eval = run_evaluation(&req)?;
    if let Some(dir) = &args.out {
        write_outputs(dir, &eval)?;
        log::info!("wrote report to {}", dir.display());
    }
    print!("{}", render_report(&eval.report, &eval.class_names));
    Ok(())
}

fn cmd_count(args: &CountArgs) -> Result<()> {
    let (report, names) = run_count(&CountRequest {
        det_dir: args.det.clone(),
        gt_dir: args.gt.clone(),
        names: args.names.clone(),
        conf_threshold: args.conf,
    })?;
    for img in &report.per_image {
        let parts: Vec<String> = img
            .per_class
            .iter()
            .map(|(&c, n)| match n.labeled {
                Some(l) => format!("{}={}/{}", class_name(&names, c), n.predicted, l),
                None => format!("{}={}", class_name(&names, c), n.predicted),
            })
            .collect();
        println!("  {}: {}", img.image_id, parts.join(" "));
    }
    if let Some(path) = &args.json {
        crate::evaluate::write_json(path, &report)?;
    }
    let predicted: usize = report.per_class.values().map(|c| c.predicted).sum();
    let labeled: Option<usize> = args.gt.as_ref().map(|_| report.per_class.values().filter_map(|c| c.labeled).sum());
    print!("{}", render_counts(&report, &names));
    let total = palmforge_core::metrics::ClassCount { predicted, labeled };
    println!("{}", total.summary_line("total"));
    Ok(())
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<()> {
    let spec = ExperimentSpec::load(&args.spec)?;
    if matches!(args.phase, Phase::Generate | Phase::All) {
        for (name, manifest) in run_generation_phase(&spec, args.jobs)? {
            println!("{name}: {}", generation_summary(&manifest));
        }
        for v in &spec.variants {
            println!("{}", external_contract(&spec, v));
        }
    }
    if matches!(args.phase, Phase::Evaluate | Phase::All) {
        let summary = run_evaluation_phase(&spec)?;
        print!("{}", render_summary(&summary));
        println!("summary: {}", spec.runs_dir().join("summary.json").display());
    }
    Ok(())
}

fn cmd_charts(args: &ChartsArgs) -> Result<()> {
    let summary = load_summary(&args.summary)?;
    if summary.rows.is_empty() {
        return Err(Error::Config(format!("{} has no rows", args.summary.display())));
    }
    for path in write_charts(&summary, &args.out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => log::LevelFilter::Error,
        (_, 0) => log::LevelFilter::Warn,
        (_, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Count(a) => cmd_count(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Charts(a) => cmd_charts(a),
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_logging(cli.verbose, cli.quiet);
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
