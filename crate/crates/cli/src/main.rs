use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rssgan::cgan::checkpoint::load_checkpoint;
use rssgan::cgan::{generate_sequences, GanMode};
use rssgan::dataset::{augment_dataset, load_dataset, save_dataset};
use rssgan::metrics::{evaluate, write_report, EvaluateConfig};
use rssgan::pipeline::{apply_override, run_pipeline, PipelineConfig, PipelineManifest, RunOptions};
use rssgan::scene::load_scene_bundle;
use rssgan::syseval::{simulate_links, summarize, write_simulation, SysevalConfig};

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

/// Synthetic UAV-to-gNB RSS sequences from a conditional transformer GAN.
#[derive(Parser)]
#[command(name = "rssgan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// Pipeline configuration file (TOML); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set gan.lr_g=1e-4`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
    /// Output directory [default: $RSSGAN_OUTPUT_ROOT/<name>, else runs/<name>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Global seed (overrides the configuration).
    #[arg(long)]
    seed: Option<u64>,
    /// Recompute stages even when their outputs are up to date.
    #[arg(long)]
    force: bool,
    /// Fail instead of recomputing when existing outputs do not match.
    #[arg(long)]
    strict: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Single,
    Multi,
}

#[derive(Subcommand)]
enum Command {
    /// Build the urban scene and its per-gNB power maps.
    Scene(ConfigArgs),
    /// Generate UAV trajectories through a scene.
    Trajectories {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Existing scene bundle to use instead of building one.
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Number of trajectories.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Build, augment or inspect training datasets.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Train the GAN (building scene, trajectories and dataset as needed).
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Single gNB (adversarial loss only) or all gNBs with the classifier.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Add smoothed copies of the training windows.
        #[arg(long)]
        augment: bool,
        /// Existing dataset bundle to train on.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Generate RSS sequences for given distance windows.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// CSV with one distance window (m) per row.
        #[arg(long)]
        distances: PathBuf,
        /// CSV with one gNB label per distance row.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV [default: stdout].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare generated and real test-split sequences.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Distance bins of the trend tables.
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
    /// Simulate SINR and handovers along sampled trajectories.
    Simulate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Handover hysteresis (dB).
        #[arg(long, default_value_t = 3.0)]
        hysteresis: f64,
        #[arg(long, default_value_t = -94.0, allow_negative_numbers = true)]
        noise_dbm: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every enabled stage of a configuration.
    Pipeline(ConfigArgs),
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Build a dataset bundle (building scene and trajectories as needed).
    Build {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Trajectory file (`trajectories.json`) to use.
        #[arg(long)]
        trajectories: Option<PathBuf>,
        #[arg(long)]
        augment: bool,
    },
    /// Add smoothed copies of the training windows of an existing bundle.
    Augment {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 20)]
        kernel: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a summary of a dataset bundle.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
    },
}

fn load_config(args: &ConfigArgs) -> Result<PipelineConfig> {
    let mut table: toml::Table = match &args.config {
        Some(p) => toml::from_str(&std::fs::read_to_string(p)?)?,
        None => toml::Table::new(),
    };
    for o in &args.overrides {
        apply_override(&mut table, o)?;
    }
    let mut cfg: PipelineConfig = table.try_into()?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = Some(o.clone());
    }
    Ok(cfg)
}

const STAGES: [&str; 6] = ["scene", "trajectories", "dataset", "train", "evaluate", "simulate"];

/// Enables the stages up to and including `last`, except those replaced by
/// an explicit input.
fn run_until(mut cfg: PipelineConfig, last: &str, args: &ConfigArgs) -> Result<PipelineManifest> {
    let n = STAGES.iter().position(|s| *s == last).expect("known stage") + 1;
    let on = |i: usize| i < n;
    let st = &mut cfg.stages;
    st.scene = on(0) && cfg.inputs.scene.is_none();
    st.trajectories = on(1) && cfg.inputs.trajectories.is_none();
    st.dataset = on(2) && cfg.inputs.dataset.is_none();
    st.train = on(3) && cfg.inputs.checkpoint.is_none();
    st.evaluate = on(4);
    st.simulate = on(5);
    run(&cfg, args)
}

fn run(cfg: &PipelineConfig, args: &ConfigArgs) -> Result<PipelineManifest> {
    let out = cfg.resolve_output_dir();
    eprintln!("output directory: {}", out.display());
    let m = run_pipeline(
        cfg,
        RunOptions {
            force: args.force,
            strict: args.strict,
        },
    )?;
    for s in &m.stages {
        eprintln!("  {:<13} {:?} ({} files)", s.name, s.status, s.files.len());
    }
    Ok(m)
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .filter(|f| !f.is_empty())
            .map(|f| f.parse::<f64>().map_err(|e| format!("{}: `{f}`: {e}", path.display())))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if !row.is_empty() {
            rows.push(row);
        }
    }
    Ok(rows)
}

fn generate(checkpoint: &Path, distances: &Path, labels: &Path, seed: u64, out: Option<&Path>) -> Result<()> {
    let bundle = load_checkpoint(checkpoint)?;
    let w = bundle.config.window_w;
    let rows = read_rows(distances)?;
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != w) {
        return Err(format!("distance row {i} has {} values, the model window is {w}", r.len()).into());
    }
    let labels: Vec<usize> = read_rows(labels)?
        .into_iter()
        .flatten()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(format!("label {v} is not a non-negative integer"))
            }
        })
        .collect::<std::result::Result<_, _>>()?;
    if labels.len() != rows.len() {
        return Err(format!("{} labels for {} distance rows", labels.len(), rows.len()).into());
    }
    let u: Vec<f64> = rows.into_iter().flatten().collect();
    let x = generate_sequences(&bundle, &u, &labels, seed)?;
    let mut wtr = match out {
        Some(p) => csv::Writer::from_writer(Box::new(std::fs::File::create(p)?) as Box<dyn std::io::Write>),
        None => csv::Writer::from_writer(Box::new(std::io::stdout()) as Box<dyn std::io::Write>),
    };
    for row in x.chunks(w) {
        wtr.write_record(row.iter().map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

fn main_inner(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Scene(args) => {
            run_until(load_config(&args)?, "scene", &args)?;
        }
        Command::Trajectories { cfg: args, scene, n } => {
            let mut cfg = load_config(&args)?;
            if scene.is_some() {
                cfg.inputs.scene = scene;
            }
            if let Some(n) = n {
                cfg.trajectories.count = n;
            }
            run_until(cfg, "trajectories", &args)?;
        }
        Command::Dataset(DatasetCommand::Build {
            cfg: args,
            scene,
            trajectories,
            augment,
        }) => {
            let mut cfg = load_config(&args)?;
            if scene.is_some() {
                cfg.inputs.scene = scene;
            }
            if trajectories.is_some() {
                cfg.inputs.trajectories = trajectories;
            }
            cfg.dataset.augment |= augment;
            run_until(cfg, "dataset", &args)?;
        }
        Command::Dataset(DatasetCommand::Augment { dataset, kernel, out }) => {
            let ds = augment_dataset(&load_dataset(&dataset)?, kernel)?;
            save_dataset(&out, &ds)?;
            println!("{}", serde_json::to_string_pretty(&ds.summary())?);
        }
        Command::Dataset(DatasetCommand::Stats { dataset }) => {
            println!("{}", serde_json::to_string_pretty(&load_dataset(&dataset)?.summary())?);
        }
        Command::Train {
            cfg: args,
            mode,
            augment,
            dataset,
        } => {
            let mut cfg = load_config(&args)?;
            match mode {
                Some(Mode::Single) => {
                    cfg.gan.mode = GanMode::SingleGnb;
                    if cfg.dataset.gnb_ids.len() != 1 {
                        cfg.dataset.gnb_ids = vec![0];
                    }
                    cfg.gan.n_classes = 1;
                }
                Some(Mode::Multi) => {
                    cfg.gan.mode = GanMode::MultiGnb;
                    cfg.dataset.gnb_ids.clear();
                    cfg.gan.n_classes = cfg.scene.n_gnbs;
                }
                None => {}
            }
            cfg.dataset.augment |= augment;
            if dataset.is_some() {
                cfg.inputs.dataset = dataset;
            }
            let m = run_until(cfg, "train", &args)?;
            if let Some(t) = m.stage("train") {
                for f in &t.files {
                    println!("{}", f.path);
                }
            }
        }
        Command::Generate {
            checkpoint,
            distances,
            labels,
            seed,
            out,
        } => generate(&checkpoint, &distances, &labels, seed, out.as_deref())?,
        Command::Evaluate {
            checkpoint,
            dataset,
            out,
            seed,
            bins,
        } => {
            let bundle = load_checkpoint(&checkpoint)?;
            let ds = load_dataset(&dataset)?;
            let cfg = EvaluateConfig {
                seed,
                n_bins: bins,
                max_rows: None,
            };
            let report = evaluate(&bundle, &ds, &cfg)?;
            write_report(&out, &report)?;
            for g in &report.per_gnb {
                println!(
                    "gnb {} (label {}): cmd {:.4}  ks {:.4}  exponent real {:.3} generated {:.3}",
                    g.gnb_id, g.label, g.cmd, g.ks_distance, g.trend_real.exponent, g.trend_gen.exponent
                );
            }
            println!("mean cmd {:.4}", report.cmd_mean);
        }
        Command::Simulate {
            checkpoint,
            scene,
            n,
            hysteresis,
            noise_dbm,
            seed,
            out,
        } => {
            let bundle = load_checkpoint(&checkpoint)?;
            let (scene, _) = load_scene_bundle(&scene)?;
            let cfg = SysevalConfig {
                n_trajectories: n,
                hysteresis_db: hysteresis,
                noise_dbm,
                seed,
                ..Default::default()
            };
            let traces = simulate_links(&scene, &bundle, &cfg)?;
            write_simulation(&out, &traces, &cfg)?;
            println!("{}", serde_json::to_string_pretty(&summarize(&traces, &cfg))?);
        }
        Command::Pipeline(args) => {
            let cfg = load_config(&args)?;
            run(&cfg, &args)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
