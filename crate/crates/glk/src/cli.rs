//! Command-line front end wiring the library into reproducible pipelines.
//!
//! Every subcommand is a pure function of its argument list: all randomness
//! flows from `--seed`, and `GLK_THREADS` (worker-thread cap) never changes
//! output, only wall time. Hyperparameters resolve in three layers: explicit
//! flag, then `--config` JSON file, then built-in default.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 I/O error,
//! 4 degenerate dataset, 5 dimension mismatch, 1 anything else.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array3;
use serde::Deserialize;

use crate::encoding::{gpe, write_matrix, write_tensor};
use crate::error::{Error, Result};
use crate::guide::{
    guided_embedding, init_guides, train_guides, write_history_csv, GuideBank, GuideTrainConfig,
};
use crate::label::{LabelMap, SoftMaskStack};
use crate::manifest::load_dataset;
use crate::metrics::{evaluate_dataset, EvalCase, SizeThresholds};
use crate::pgm;
use crate::query::{gdpq, guided_mask_embeddings, MlpParams, QueryBias};
use crate::synth::{generate_dataset, RosetteConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;
pub const EXIT_DIMENSION: i32 = 5;

/// Maps an error to the documented exit-code classes.
fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Range { .. } | Error::Json { .. } | Error::Generation(_) => {
            EXIT_USAGE
        }
        Error::Io { .. } | Error::PgmParse { .. } => EXIT_IO,
        Error::DegenerateDataset(_) => EXIT_DEGENERATE,
        Error::Shape(_) | Error::DimensionMismatch(_) => EXIT_DIMENSION,
        _ => 1,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "glk",
    version,
    about = "Guided-embedding toolkit: synthetic rosettes, trainable guide banks, positional encodings, and segmentation metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic rosette dataset (PGM label maps plus manifest).
    Synth(SynthArgs),
    /// Train a guide bank on a dataset manifest.
    TrainGuides(TrainGuidesArgs),
    /// Write per-instance guided embeddings as CSV.
    Embed(EmbedArgs),
    /// Score predictions against ground truth (BD, SBD, |DiC|).
    Eval(EvalArgs),
    /// Dump a guided positional encoding tensor.
    Gpe(GpeArgs),
    /// Map a mask stack to guided dynamic positional queries.
    GdpqDemo(GdpqDemoArgs),
}

/// Optional hyperparameters accepted from a `--config` JSON file. Flags given
/// on the command line always win over file values.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    count: Option<usize>,
    width: Option<usize>,
    height: Option<usize>,
    min_leaves: Option<usize>,
    max_leaves: Option<usize>,
    growth: Option<f64>,
    base_length: Option<f64>,
    center_jitter: Option<f64>,
    aspect_min: Option<f64>,
    aspect_max: Option<f64>,
    phyllotaxis: Option<f64>,
    occlusion: Option<bool>,
    d_g: Option<usize>,
    epsilon: Option<f64>,
    learning_rate: Option<f64>,
    epochs: Option<usize>,
    d_h: Option<usize>,
    d_p: Option<usize>,
    small_max: Option<usize>,
    medium_max: Option<usize>,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Flag beats config file beats default.
fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory for the PGM files and manifest.json.
    #[arg(long)]
    out: PathBuf,
    /// Number of plants to generate [default: 20].
    #[arg(long)]
    count: Option<usize>,
    /// Image width in pixels [default: 128].
    #[arg(long)]
    width: Option<usize>,
    /// Image height in pixels [default: 128].
    #[arg(long)]
    height: Option<usize>,
    /// Minimum leaves per plant [default: 3].
    #[arg(long)]
    min_leaves: Option<usize>,
    /// Maximum leaves per plant [default: 6].
    #[arg(long)]
    max_leaves: Option<usize>,
    /// Leaf length multiplier per emergence step [default: 1.25].
    #[arg(long)]
    growth: Option<f64>,
    /// Keep leaves disjoint instead of letting outer leaves occlude inner ones.
    #[arg(long)]
    no_occlusion: bool,
    /// Dataset seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// JSON file supplying any unset hyperparameters.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let file = load_config(args.config.as_deref())?;
    let width = pick(args.width, file.width, 128);
    let height = pick(args.height, file.height, 128);
    let defaults = RosetteConfig::for_size(width, height);
    let cfg = RosetteConfig {
        width,
        height,
        n_min: pick(args.min_leaves, file.min_leaves, defaults.n_min),
        n_max: pick(args.max_leaves, file.max_leaves, defaults.n_max),
        center_jitter: file.center_jitter.unwrap_or(defaults.center_jitter),
        growth: pick(args.growth, file.growth, defaults.growth),
        aspect_min: file.aspect_min.unwrap_or(defaults.aspect_min),
        aspect_max: file.aspect_max.unwrap_or(defaults.aspect_max),
        phyllotaxis: file.phyllotaxis.unwrap_or(defaults.phyllotaxis),
        occlusion: if args.no_occlusion {
            false
        } else {
            file.occlusion.unwrap_or(true)
        },
        base_length: file.base_length.unwrap_or(defaults.base_length),
        seed: pick(args.seed, file.seed, 0),
    };
    let count = pick(args.count, file.count, 20);
    let manifest = generate_dataset(&cfg, count, &args.out)?;
    println!("{}", manifest.display());
    Ok(())
}

#[derive(Debug, Args)]
struct TrainGuidesArgs {
    /// Dataset manifest, as written by `synth`.
    #[arg(long)]
    manifest: PathBuf,
    /// Output guide bank JSON.
    #[arg(long, default_value = "guidebank.json")]
    out: PathBuf,
    /// Output loss history CSV.
    #[arg(long, default_value = "history.csv")]
    history: PathBuf,
    /// Number of guide functions (must be even) [default: 16].
    #[arg(long = "d-g")]
    d_g: Option<usize>,
    /// Separation margin between instance embeddings [default: 2].
    #[arg(long)]
    epsilon: Option<f64>,
    /// AdamW learning rate [default: 0.01].
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Full-batch epochs [default: 1000].
    #[arg(long)]
    epochs: Option<usize>,
    /// Initialization seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// JSON file supplying any unset hyperparameters.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn cmd_train_guides(args: TrainGuidesArgs) -> Result<()> {
    let file = load_config(args.config.as_deref())?;
    let d_g = pick(args.d_g, file.d_g, 16);
    let epsilon = pick(args.epsilon, file.epsilon, 2.0);
    let seed = pick(args.seed, file.seed, 0);
    let cfg = GuideTrainConfig {
        epochs: pick(args.epochs, file.epochs, 1000),
        learning_rate: pick(args.learning_rate, file.learning_rate, 0.01),
        seed,
        ..GuideTrainConfig::default()
    };

    let dataset = load_dataset(&args.manifest)?;
    let maps: Vec<LabelMap> = dataset.into_iter().map(|img| img.map).collect();
    let Some(first) = maps.first() else {
        return Err(Error::DegenerateDataset("manifest lists no images".into()));
    };
    let (w, h) = (first.width(), first.height());
    if let Some(bad) = maps.iter().find(|m| m.width() != w || m.height() != h) {
        return Err(Error::DimensionMismatch(format!(
            "dataset mixes {w}x{h} and {}x{} images",
            bad.width(),
            bad.height()
        )));
    }

    let init = init_guides(d_g, w, h, epsilon, seed)?;
    let result = train_guides(&maps, &cfg, init)?;
    result.bank.save(&args.out)?;
    write_history_csv(&args.history, &result.history)?;
    let first_loss = result.history.first().copied().unwrap_or(0.0);
    let last_loss = result.history.last().copied().unwrap_or(0.0);
    println!(
        "trained {d_g} guides for {} epochs, loss {first_loss:.6} -> {last_loss:.6}",
        cfg.epochs
    );
    println!("{}", args.out.display());
    Ok(())
}

#[derive(Debug, Args)]
struct EmbedArgs {
    /// Guide bank JSON from `train-guides`.
    #[arg(long)]
    bank: PathBuf,
    /// Dataset manifest; embeds every image it lists.
    #[arg(long, conflicts_with = "labels", required_unless_present = "labels")]
    manifest: Option<PathBuf>,
    /// Single label map PGM (image name = file stem).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_embed(args: EmbedArgs) -> Result<()> {
    let bank = GuideBank::load(&args.bank)?;
    let images: Vec<(String, LabelMap)> = if let Some(manifest) = &args.manifest {
        load_dataset(manifest)?
            .into_iter()
            .map(|img| (img.plant_id, img.map))
            .collect()
    } else {
        let path = args.labels.as_ref().expect("clap enforces one source");
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        vec![(name, pgm::read_labelmap(path)?)]
    };

    let mut csv = String::from("image,instance_id");
    for i in 1..=bank.d_g() {
        csv.push_str(&format!(",e_{i}"));
    }
    csv.push('\n');
    for (name, map) in &images {
        for inst in map.instances() {
            csv.push_str(&format!("{name},{}", inst.id));
            for v in guided_embedding(&bank, &inst).values {
                csv.push_str(&format!(",{v}"));
            }
            csv.push('\n');
        }
    }

    match &args.out {
        Some(path) => fs::write(path, csv).map_err(|e| Error::io(path, e))?,
        None => print!("{csv}"),
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SizesPreset {
    /// Thresholds 144 / 576 square pixels.
    Msu,
    /// Thresholds 1225 / 3136 square pixels.
    Komatsuna,
    /// Thresholds from --small-max / --medium-max.
    Custom,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Prediction manifest.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth manifest.
    #[arg(long)]
    gt: PathBuf,
    /// Write the full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write per-image scores as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Stratify scores by ground-truth leaf size.
    #[arg(long, value_enum)]
    sizes: Option<SizesPreset>,
    /// Largest `small` leaf area, for --sizes custom.
    #[arg(long)]
    small_max: Option<usize>,
    /// Largest `medium` leaf area, for --sizes custom.
    #[arg(long)]
    medium_max: Option<usize>,
    /// JSON file supplying any unset hyperparameters.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let file = load_config(args.config.as_deref())?;
    let thresholds = match args.sizes {
        None => None,
        Some(SizesPreset::Msu) => Some(SizeThresholds::msu()),
        Some(SizesPreset::Komatsuna) => Some(SizeThresholds::komatsuna()),
        Some(SizesPreset::Custom) => {
            let small = pick(args.small_max, file.small_max, 0);
            let medium = pick(args.medium_max, file.medium_max, 0);
            if small == 0 || medium == 0 {
                return Err(Error::Config(
                    "--sizes custom needs --small-max and --medium-max".into(),
                ));
            }
            Some(SizeThresholds::new(small, medium)?)
        }
    };

    let pred = load_dataset(&args.pred)?;
    let gt = load_dataset(&args.gt)?;
    if pred.len() != gt.len() {
        return Err(Error::Config(format!(
            "prediction manifest lists {} images but ground truth lists {}",
            pred.len(),
            gt.len()
        )));
    }
    let mut cases = Vec::with_capacity(gt.len());
    for (p, g) in pred.iter().zip(&gt) {
        if p.map.width() != g.map.width() || p.map.height() != g.map.height() {
            return Err(Error::DimensionMismatch(format!(
                "image {}: prediction is {}x{} but ground truth is {}x{}",
                g.plant_id,
                p.map.width(),
                p.map.height(),
                g.map.width(),
                g.map.height()
            )));
        }
        cases.push(EvalCase::from_maps(g.plant_id.clone(), &p.map, &g.map));
    }

    let report = evaluate_dataset(&cases, thresholds.as_ref());
    println!("{}", report.aggregate.summary_line());
    if let Some(path) = &args.json {
        fs::write(path, report.to_json()? + "\n").map_err(|e| Error::io(path, e))?;
    }
    if let Some(path) = &args.csv {
        fs::write(path, report.to_csv()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[derive(Debug, Args)]
struct GpeArgs {
    /// Guide bank JSON.
    #[arg(long)]
    bank: PathBuf,
    /// Grid height.
    #[arg(long = "h")]
    height: usize,
    /// Grid width.
    #[arg(long = "w")]
    width: usize,
    /// Encoding depth; must be a multiple of 4 and of the bank's guide count.
    #[arg(long = "d-p")]
    d_p: Option<usize>,
    /// Output tensor path.
    #[arg(long)]
    out: PathBuf,
    /// JSON file supplying any unset hyperparameters.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn cmd_gpe(args: GpeArgs) -> Result<()> {
    let file = load_config(args.config.as_deref())?;
    let d_p = pick(args.d_p, file.d_p, 256);
    let bank = GuideBank::load(&args.bank)?;
    let grid = gpe(&bank, args.height, args.width, d_p)?;
    write_tensor(&args.out, grid.values())?;
    println!(
        "wrote {}x{}x{d_p} encoding to {}",
        args.height,
        args.width,
        args.out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
struct GdpqDemoArgs {
    /// Guide bank JSON.
    #[arg(long)]
    bank: PathBuf,
    /// Mask layer PGMs, one per predicted instance, in stack order.
    #[arg(required = true)]
    masks: Vec<PathBuf>,
    /// MLP hidden width [default: 256].
    #[arg(long = "d-h")]
    d_h: Option<usize>,
    /// Query width [default: 256].
    #[arg(long = "d-p")]
    d_p: Option<usize>,
    /// MLP initialization seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Output path for the query matrix (one row per mask).
    #[arg(long)]
    out_queries: PathBuf,
    /// Output path for the guided-embedding matrix (one row per mask).
    #[arg(long)]
    out_embeddings: PathBuf,
    /// JSON file supplying any unset hyperparameters.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn cmd_gdpq_demo(args: GdpqDemoArgs) -> Result<()> {
    let file = load_config(args.config.as_deref())?;
    let d_h = pick(args.d_h, file.d_h, 256);
    let d_p = pick(args.d_p, file.d_p, 256);
    let seed = pick(args.seed, file.seed, 0);

    let bank = GuideBank::load(&args.bank)?;
    let layers: Vec<_> = args
        .masks
        .iter()
        .map(|p| pgm::read_soft_mask(p))
        .collect::<Result<_>>()?;
    let (h, w) = layers[0].dim();
    if let Some((i, bad)) = layers
        .iter()
        .enumerate()
        .find(|(_, l)| l.dim() != (h, w))
    {
        return Err(Error::DimensionMismatch(format!(
            "mask {} is {}x{} but mask 0 is {w}x{h}",
            args.masks[i].display(),
            bad.dim().1,
            bad.dim().0
        )));
    }
    let mut values = Array3::zeros((layers.len(), h, w));
    for (k, layer) in layers.iter().enumerate() {
        values
            .index_axis_mut(ndarray::Axis(0), k)
            .assign(layer);
    }
    let stack = SoftMaskStack::new(values)?;

    let embeddings = guided_mask_embeddings(&bank, &stack);
    let mlp = MlpParams::init(bank.d_g(), d_h, d_p, seed)?;
    let bias = QueryBias::zeros(bank.d_g());
    let queries = gdpq(&bank, &stack, &mlp, &bias)?;

    write_matrix(&args.out_embeddings, embeddings.view())?;
    write_matrix(&args.out_queries, queries.view())?;
    println!(
        "wrote {} queries of width {d_p} to {}",
        queries.nrows(),
        args.out_queries.display()
    );
    Ok(())
}

/// Builds the global worker pool when GLK_THREADS is set. Call once per
/// process, before any parallel work.
fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("GLK_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        Error::Config(format!("GLK_THREADS must be a positive integer, got '{raw}'"))
    })?;
    if n == 0 {
        return Err(Error::Config("GLK_THREADS must be at least 1".into()));
    }
    // building twice in one process is harmless; keep the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::TrainGuides(args) => cmd_train_guides(args),
        Command::Embed(args) => cmd_embed(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Gpe(args) => cmd_gpe(args),
        Command::GdpqDemo(args) => cmd_gdpq_demo(args),
    }
}

/// Parses `argv` and runs the selected subcommand, returning the process exit
/// code. Errors print to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes_map_to_documented_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(
            exit_code(&Error::Generation("x".into())),
            EXIT_USAGE
        );
        assert_eq!(
            exit_code(&Error::io("f", std::io::Error::other("x"))),
            EXIT_IO
        );
        assert_eq!(
            exit_code(&Error::PgmParse {
                offset: 0,
                message: "x".into()
            }),
            EXIT_IO
        );
        assert_eq!(
            exit_code(&Error::DegenerateDataset("x".into())),
            EXIT_DEGENERATE
        );
        assert_eq!(
            exit_code(&Error::DimensionMismatch("x".into())),
            EXIT_DIMENSION
        );
        assert_eq!(exit_code(&Error::Shape("x".into())), EXIT_DIMENSION);
        assert_eq!(exit_code(&Error::UndefinedMetric("x".into())), 1);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn config_file_sits_under_flags() {
        assert_eq!(pick(Some(3), Some(5), 7), 3);
        assert_eq!(pick(None, Some(5), 7), 5);
        assert_eq!(pick::<usize>(None, None, 7), 7);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"epochz": 3}"#).unwrap();
        assert!(matches!(
            load_config(Some(&path)),
            Err(Error::Json { .. })
        ));
        fs::write(&path, r#"{"epochs": 3, "seed": 9}"#).unwrap();
        let cfg = load_config(Some(&path)).unwrap();
        assert_eq!(cfg.epochs, Some(3));
        assert_eq!(cfg.seed, Some(9));
    }
}
