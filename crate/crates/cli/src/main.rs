mod config;

use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;
use sha2::{Digest, Sha256};

use casa_core::audio::{read_wav, synth_corpus, write_wav, AudioSignal, Condition, Corpus, CorpusManifest};
use casa_core::eval::{read_baselines, run_experiment, write_report, System};
use casa_core::filterbank::export::{write_heatmap_png, write_matrix_csv};
use casa_core::filterbank::{analyze, apply_mask_and_resynthesize, build_tree, cochleagram, TFMask};
use casa_core::mask::{ideal_binary_mask, pairs_from_targets, train_mask_model, MaskModel};
use casa_core::sid::{identify, train_sid, write_training_log, SpeechVggNet};

use config::PipelineConfig;

#[derive(Parser)]
#[command(name = "casa-sid", version, about = "Voice segregation and speaker identification")]
struct Cli {
    /// TOML configuration file (dotted section keys).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every stochastic step; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Config override, e.g. `--set sid.train.epochs=10`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segregate the voice in a noisy recording with a trained mask model,
    /// or with the ideal mask when the clean parts are known.
    Segregate {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, required_unless_present = "oracle_target")]
        model: Option<PathBuf>,
        /// Clean target for an ideal-mask run; needs --oracle-noise.
        #[arg(long, requires = "oracle_noise", conflicts_with = "model")]
        oracle_target: Option<PathBuf>,
        /// Noise exactly as mixed into the input.
        #[arg(long, requires = "oracle_target")]
        oracle_noise: Option<PathBuf>,
        /// Mask as PNG; defaults to `<output>.mask.png`.
        #[arg(long)]
        mask_png: Option<PathBuf>,
        /// Mask as CSV (channels × frames); defaults to `<output>.mask.csv`.
        #[arg(long)]
        mask_csv: Option<PathBuf>,
    },
    /// Train the per-channel mask model on manifest speech mixed with noise.
    TrainMask {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the speaker network on the clean manifest entries.
    TrainSid {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Segregate every utterance with this mask model first.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Per-epoch log; defaults to `<out>.log.csv`.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Identify the speaker of one recording.
    Identify {
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Cross-validated raw versus segregated evaluation with reports.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Baseline fold rates as `name,condition,rate` CSV.
        #[arg(long)]
        baselines: Option<PathBuf>,
    },
    /// Write a synthetic labelled corpus (WAVs and manifest.csv).
    SynthCorpus {
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the effective configuration as TOML.
    PrintConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("casa-sid: {}", format!("{e:#}").replace('\n', " "));
            if is_missing_file(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn is_missing_file(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == ErrorKind::NotFound)
            || matches!(
                c.downcast_ref::<casa_core::Error>(),
                Some(casa_core::Error::Io(io)) if io.kind() == ErrorKind::NotFound
            )
    })
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(std::io::Error::new(ErrorKind::NotFound, format!("{what} {} not found", path.display())).into());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = PipelineConfig::load(cli.config.as_deref(), &cli.overrides, cli.seed)?;
    match cli.command {
        Command::Segregate {
            input,
            output,
            model,
            oracle_target,
            oracle_noise,
            mask_png,
            mask_csv,
        } => {
            require_file(&input, "input")?;
            let sig = read_wav(&input)?.to_pipeline_rate()?;
            let (out, mask) = match (model, oracle_target, oracle_noise) {
                (Some(m), _, _) => {
                    require_file(&m, "mask model")?;
                    MaskModel::load(&m).with_context(|| format!("loading {}", m.display()))?.segregate(&sig)?
                }
                (None, Some(t), Some(n)) => oracle_segregate(&sig, &t, &n, &cfg)?,
                _ => bail!("either --model or both --oracle-target and --oracle-noise are required"),
            };
            write_wav(&output, &out)?;
            let rows: Vec<Vec<f64>> = mask.rows().into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect();
            let png = mask_png.unwrap_or_else(|| suffixed(&output, "mask.png"));
            let csv = mask_csv.unwrap_or_else(|| suffixed(&output, "mask.csv"));
            write_heatmap_png(&png, &rows, 4)?;
            write_matrix_csv(&csv, &rows)?;
            println!(
                "wrote {} ({} of {} units kept)",
                output.display(),
                mask.count_ones(),
                mask.channels() * mask.frames()
            );
        }
        Command::TrainMask { manifest, out } => {
            let corpus = load_clean(&manifest)?;
            let kinds = cfg.mask_training.kinds()?;
            let pairs = pairs_from_targets(&corpus.signals, cfg.mask_training.pairs, &kinds, cfg.seed)?;
            info!("training the mask model on {} mixtures", pairs.len());
            let model = train_mask_model(&pairs, &cfg.mask)?;
            model.save(&out)?;
            println!("wrote {} (sha256 {})", out.display(), digest(&out)?);
        }
        Command::TrainSid { manifest, out, mask, log } => {
            let corpus = load_clean(&manifest)?;
            let segregator = mask.as_deref().map(load_mask).transpose()?;
            let speakers: Vec<usize> = corpus.manifest.entries.iter().map(|e| e.speaker).collect();
            let (net, epochs) = train_sid(&corpus.signals, &speakers, &cfg.sid.arch, &cfg.sid.train, segregator.as_ref())?;
            net.save(&out)?;
            let log_path = log.unwrap_or_else(|| suffixed(&out, "log.csv"));
            write_training_log(&log_path, &epochs)?;
            let last = epochs.last().context("no epochs were run")?;
            println!(
                "wrote {} (sha256 {}); final loss {:.4}, training accuracy {:.1}%",
                out.display(),
                digest(&out)?,
                last.loss,
                100.0 * last.train_acc
            );
        }
        Command::Identify { input, model, mask } => {
            require_file(&input, "input")?;
            require_file(&model, "speaker model")?;
            let net = SpeechVggNet::load(&model)?;
            let segregator = mask.as_deref().map(load_mask).transpose()?;
            let (who, p) = identify(&net, &read_wav(&input)?, segregator.as_ref())?;
            println!("speaker {who} (p = {:.3})", p[who]);
        }
        Command::Evaluate {
            manifest,
            mask,
            report,
            baselines,
        } => {
            let corpus = load_clean(&manifest)?;
            let model = load_mask(&mask)?;
            let mut result = run_experiment(&corpus, &model, &cfg.experiment)?;
            if let Some(b) = baselines {
                require_file(&b, "baselines")?;
                result.compare_baselines(&read_baselines(&b)?)?;
            }
            write_report(&result, &report)?;
            for system in System::ALL {
                let clean = result.rate(system, Condition::Clean);
                let noisy = result.rate(system, Condition::Noisy);
                println!(
                    "{:<10} clean {clean:6.2}%  noisy {noisy:6.2}%  delta {:+.2}",
                    system.as_str(),
                    noisy - clean
                );
            }
            println!("report written to {}", report.display());
        }
        Command::SynthCorpus { out } => {
            let c = &cfg.corpus;
            let manifest = synth_corpus(c.speakers, &c.emotions, c.utterances, cfg.seed, &out)?;
            println!("wrote {} utterances to {}", manifest.len(), out.display());
        }
        Command::PrintConfig => print!("{}", cfg.to_toml()?),
    }
    Ok(())
}

fn load_mask(path: &Path) -> Result<MaskModel> {
    require_file(path, "mask model")?;
    MaskModel::load(path).with_context(|| format!("loading {}", path.display()))
}

/// Clean manifest entries with their audio.
fn load_clean(path: &Path) -> Result<Corpus> {
    require_file(path, "manifest")?;
    let manifest = CorpusManifest::read_csv(path)?;
    let clean = CorpusManifest::new(manifest.with_condition(Condition::Clean).into_iter().cloned().collect());
    clean.validate().with_context(|| format!("manifest {}", path.display()))?;
    Ok(Corpus::load(clean)?)
}

fn oracle_segregate(mix: &AudioSignal, target: &Path, noise: &Path, cfg: &PipelineConfig) -> Result<(AudioSignal, TFMask)> {
    require_file(target, "oracle target")?;
    require_file(noise, "oracle noise")?;
    let (t, n) = (read_wav(target)?.to_pipeline_rate()?, read_wav(noise)?.to_pipeline_rate()?);
    if t.len() != mix.len() || n.len() != mix.len() {
        bail!("oracle target and noise must match the input length");
    }
    let tree = build_tree();
    let coch = |s: &AudioSignal| cochleagram(&analyze(s, &tree), cfg.mask.frame_len, cfg.mask.hop);
    let mask = ideal_binary_mask(&coch(&t)?, &coch(&n)?, cfg.mask.lc_db)?;
    let out = apply_mask_and_resynthesize(&coch(mix)?, &mask, &tree)?;
    Ok((out, mask))
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}
