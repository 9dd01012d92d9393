use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gdflow::checkpoint::Checkpoint;
use gdflow::config::RunConfig;
use gdflow::data::io::{read_corpus, read_labels, write_corpus};
use gdflow::pipeline::{
    evaluate_records, fit, generate_corpus, metrics_report, preprocess_dir, read_scores, restrict, score_profiles,
    write_generated, write_scores,
};
use gdflow::{Error, Result};

const CHECKPOINT_FILE: &str = "checkpoint.gdf";
const TRAIN_LOG_FILE: &str = "train_log.csv";
const SCORES_FILE: &str = "scores.csv";
const METRICS_FILE: &str = "metrics.txt";

#[derive(Parser)]
#[command(name = "gdflow", version, about = "Deceleration-profile anomaly detection with NCDE-encoded normalizing flows")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus: drives/<id>.csv and labels.csv.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Resample drives and extract deceleration profiles into a corpus.
    Preprocess {
        /// Directory holding drive CSVs (directly or under drives/), optionally with labels.csv.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train on a profile corpus and write checkpoint.gdf and train_log.csv.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Score every window of a corpus and write scores.csv.
    Score {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Profiles to score: the whole corpus or the split held out in training.
        #[arg(long, value_enum, default_value_t = SplitChoice::All)]
        split: SplitChoice,
        /// Decide at the best-F1 threshold of the corpus labels instead of the stored one.
        #[arg(long)]
        tau_from_labels: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Compare a score file against labels.csv and write metrics.txt.
    Evaluate {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitChoice {
    All,
    Test,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

/// One flag per configuration key; a flag beats the file.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    stride: Option<String>,
    #[arg(long = "batch_size")]
    batch_size: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long = "weight_decay")]
    weight_decay: Option<String>,
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long = "flow_blocks")]
    flow_blocks: Option<String>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long = "cheb_order")]
    cheb_order: Option<String>,
    #[arg(long = "embed_dim")]
    embed_dim: Option<String>,
    #[arg(long)]
    channels: Option<String>,
    #[arg(long = "no_ncde")]
    no_ncde: Option<String>,
    #[arg(long = "no_quantile")]
    no_quantile: Option<String>,
    #[arg(long = "train_split")]
    train_split: Option<String>,
    #[arg(long)]
    substeps: Option<String>,
    #[arg(long = "expected_anomaly_rate")]
    expected_anomaly_rate: Option<String>,
    #[arg(long)]
    drives: Option<String>,
    #[arg(long = "anomaly_ratio")]
    anomaly_ratio: Option<String>,
    #[arg(long = "anomaly_kinds")]
    anomaly_kinds: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> [(&'static str, &Option<String>); 20] {
        [
            ("window", &self.window),
            ("stride", &self.stride),
            ("batch_size", &self.batch_size),
            ("epochs", &self.epochs),
            ("lr", &self.lr),
            ("weight_decay", &self.weight_decay),
            ("hidden", &self.hidden),
            ("flow_blocks", &self.flow_blocks),
            ("q", &self.q),
            ("cheb_order", &self.cheb_order),
            ("embed_dim", &self.embed_dim),
            ("channels", &self.channels),
            ("no_ncde", &self.no_ncde),
            ("no_quantile", &self.no_quantile),
            ("train_split", &self.train_split),
            ("substeps", &self.substeps),
            ("expected_anomaly_rate", &self.expected_anomaly_rate),
            ("drives", &self.drives),
            ("anomaly_ratio", &self.anomaly_ratio),
            ("anomaly_kinds", &self.anomaly_kinds),
        ]
    }
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        for (key, value) in self.overrides.pairs() {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out).map_err(|e| Error::Data(format!("{}: {e}", self.out.display())))?;
        Ok(&self.out)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate { common } => {
            let cfg = common.config()?;
            let corpus = generate_corpus(&cfg)?;
            write_generated(common.out_dir()?, &corpus)?;
            let anomalous = corpus.labels.values().filter(|&&l| l).count();
            println!(
                "wrote {} drives ({anomalous} anomalous profiles) to {}",
                corpus.drives.len(),
                common.out.display()
            );
        }
        Command::Preprocess { input, common } => {
            common.config()?;
            let profiles = preprocess_dir(&input)?;
            write_corpus(common.out_dir()?, &profiles)?;
            println!("wrote {} profiles to {}", profiles.len(), common.out.display());
        }
        Command::Train { corpus, common } => {
            let cfg = common.config()?;
            let profiles = read_corpus(&corpus)?;
            let run = fit(&cfg, &profiles)?;
            let out = common.out_dir()?;
            run.checkpoint.save(&out.join(CHECKPOINT_FILE))?;
            let mut log = String::from("epoch,loss,clamped,val_f1_pa,val_auroc,val_auprc\n");
            for e in &run.outcome.epochs {
                let v = |f: fn(&gdflow::evaluation::Metrics) -> f64| e.validation.as_ref().map_or(String::new(), |m| f(m).to_string());
                log.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    e.epoch,
                    e.loss,
                    e.clamped,
                    v(|m| m.f1_pa),
                    v(|m| m.auroc),
                    v(|m| m.auprc)
                ));
            }
            write_text(&out.join(TRAIN_LOG_FILE), &log)?;
            println!(
                "trained {} epochs on {} windows (w = {}); kept epoch {}; tau = {}",
                run.outcome.epochs.len(),
                run.train_windows,
                run.checkpoint.window,
                run.checkpoint.best_epoch.map_or("last".to_string(), |e| e.to_string()),
                run.checkpoint.tau
            );
        }
        Command::Score {
            checkpoint,
            corpus,
            split,
            tau_from_labels,
            common,
        } => {
            common.config()?;
            let ckpt = Checkpoint::load(&checkpoint)?;
            let mut profiles = read_corpus(&corpus)?;
            if let SplitChoice::Test = split {
                profiles = restrict(&profiles, &ckpt.test_ids);
            }
            let mut records = score_profiles(&ckpt, &profiles, ckpt.tau)?;
            if tau_from_labels && !records.is_empty() {
                let labels = profiles.iter().filter_map(|p| p.label.map(|l| (p.id.clone(), l))).collect();
                let tau = evaluate_records(&records, &labels)?.tau;
                records = score_profiles(&ckpt, &profiles, tau)?;
            }
            let path = common.out_dir()?.join(SCORES_FILE);
            write_scores(&path, &records)?;
            println!("wrote {} window scores to {}", records.len(), path.display());
        }
        Command::Evaluate { scores, labels, common } => {
            common.config()?;
            let records = read_scores(&scores)?;
            let labels = read_labels(&labels)?;
            let metrics = evaluate_records(&records, &labels)?;
            let report = metrics_report(&metrics, records.len());
            write_text(&common.out_dir()?.join(METRICS_FILE), &report)?;
            print!("{report}");
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::Data(_) | Error::Io { .. } | Error::Csv(_) | Error::Checkpoint(_) => 3,
        _ => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
