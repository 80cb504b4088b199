use std::net::IpAddr;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use upb_core::{ingest_external_pesq, AugmentConfig, LossWeights, StftConfig};
use upb_harness::abx::Session;
use upb_harness::commands::{self, resolve_seed, SEED_ENV};
use upb_harness::corpus::load_corpus;
use upb_harness::disc_dump::{write_dump, Dtype};
use upb_harness::report::{read_json, write_json, MetricsSummary};
use upb_harness::wav::{read_wav, write_wav_pcm16};
use upb_harness::{server, synth};

/// Phase-bias experiment toolkit.
#[derive(Parser)]
#[command(name = "upb", version)]
struct Cli {
    /// STFT settings as JSON (frame_length, hop, fft_size, window, sample_rate).
    #[arg(long, global = true, value_name = "FILE")]
    stft: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CorpusArgs {
    /// Directory of mono WAV files.
    corpus: PathBuf,
    /// Accept sample rates other than 16 kHz.
    #[arg(long)]
    allow_any_rate: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Unbiased STFT/iSTFT roundtrip metrics.
    Roundtrip {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Report directory (roundtrip.json, roundtrip.txt).
        #[arg(long)]
        out: PathBuf,
        /// External PESQ scores, one `clip_id,score` per line.
        #[arg(long)]
        pesq: Option<PathBuf>,
    },
    /// Reconstruct every clip from a globally phase-biased spectrogram.
    Bias {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Use this θ (radians) for every clip instead of drawing one.
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<f64>,
        #[arg(long)]
        pesq: Option<PathBuf>,
    },
    /// Loss terms and composites for an estimate against a clean clip.
    Loss {
        clean: PathBuf,
        estimate: PathBuf,
        /// JSON with `lambda` (7 values) and optional `c`.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// JSON array of discriminator scores on the estimate.
        #[arg(long)]
        adv_scores: Option<PathBuf>,
        /// JSON array of UPB-discriminator scores on the estimate.
        #[arg(long)]
        upb_adv_scores: Option<PathBuf>,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Apply phase-bias augmentation to a corpus.
    Augment {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        out: PathBuf,
        /// Augmentation config JSON; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `rng_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// ABX listening test.
    #[command(subcommand)]
    Abx(AbxCommand),
    /// Dump the 3×T×F discriminator input of one clip.
    DiscInput {
        wav: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "f32")]
        dtype: Dtype,
        /// Magnitude compression exponent.
        #[arg(long, default_value_t = 0.3)]
        c: f64,
    },
    /// Write deterministic speech-like test clips.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 2.0)]
        seconds: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Subcommand)]
enum AbxCommand {
    /// Generate stimuli and a manifest.
    Gen {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Serve a generated session.
    Serve {
        session: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Directory with the built listening UI.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

fn seed(cli: Option<u64>) -> Result<Option<u64>> {
    resolve_seed(cli, std::env::var(SEED_ENV).ok().as_deref())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn finish_report(summary: MetricsSummary, pesq: Option<PathBuf>, out: &Path, stem: &str) -> Result<()> {
    let summary = match pesq {
        Some(p) => summary.with_pesq(&ingest_external_pesq(&p)?)?,
        None => summary,
    };
    summary.write(out, stem)?;
    print!("{}", summary.table());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let stft: StftConfig = match &cli.stft {
        Some(p) => read_json(p)?,
        None => StftConfig::default(),
    };
    match cli.command {
        Command::Roundtrip { corpus, out, pesq } => {
            let clips = load_corpus(&corpus.corpus, corpus.allow_any_rate)?;
            create_dir(&out)?;
            finish_report(commands::roundtrip(&clips, &stft)?, pesq, &out, "roundtrip")
        }
        Command::Bias {
            corpus,
            out,
            seed: s,
            theta,
            pesq,
        } => {
            let clips = load_corpus(&corpus.corpus, corpus.allow_any_rate)?;
            create_dir(&out)?;
            let s = seed(s)?.unwrap_or(0);
            finish_report(commands::bias(&clips, &stft, s, theta, Some(&out))?, pesq, &out, "bias")
        }
        Command::Loss {
            clean,
            estimate,
            weights,
            adv_scores,
            upb_adv_scores,
            json,
        } => {
            let weights: LossWeights<f64> = match weights {
                Some(p) => read_json(&p)?,
                None => LossWeights::default(),
            };
            let adv = adv_scores.as_deref().map(commands::read_scores).transpose()?;
            let upb_adv = upb_adv_scores.as_deref().map(commands::read_scores).transpose()?;
            let outcome = commands::loss(
                &read_wav(&clean)?,
                &read_wav(&estimate)?,
                &stft,
                &weights,
                adv.as_deref(),
                upb_adv.as_deref(),
            )?;
            if json {
                println!("{}", serde_json::to_string_pretty(&outcome)?);
            } else {
                print!("{}", outcome.text());
            }
            Ok(())
        }
        Command::Augment {
            corpus,
            out,
            config,
            seed: s,
        } => {
            let mut cfg: AugmentConfig = match config {
                Some(p) => read_json(&p)?,
                None => AugmentConfig::default(),
            };
            if let Some(s) = seed(s)? {
                cfg.rng_seed = s;
            }
            let clips = load_corpus(&corpus.corpus, corpus.allow_any_rate)?;
            create_dir(&out)?;
            let summary = commands::augment(&clips, &stft, &cfg, &out)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Command::Abx(AbxCommand::Gen {
            corpus,
            out,
            trials,
            seed: s,
        }) => {
            let clips = load_corpus(&corpus.corpus, corpus.allow_any_rate)?;
            create_dir(&out)?;
            let m = commands::abx_gen(&clips, &stft, trials, seed(s)?.unwrap_or(0), &out)?;
            println!("{} trials written to {}", m.trials.len(), out.display());
            Ok(())
        }
        Command::Abx(AbxCommand::Serve {
            session,
            port,
            host,
            ui_dir,
        }) => {
            let session = Session::open(&session)?;
            tokio::runtime::Runtime::new()?.block_on(server::serve(session, host, port, ui_dir))
        }
        Command::DiscInput { wav, out, dtype, c } => {
            let tensor = commands::disc_input(&read_wav(&wav)?, &stft, c)?;
            write_dump(&out, &tensor, dtype)?;
            let (ch, t, f) = tensor.dim();
            println!("wrote {ch}x{t}x{f} tensor to {}", out.display());
            Ok(())
        }
        Command::Synth {
            out,
            count,
            seconds,
            seed: s,
        } => {
            create_dir(&out)?;
            let base = seed(s)?.unwrap_or(0);
            for i in 0..count {
                let w = synth::speech_like(seconds, stft.sample_rate(), base.wrapping_add(i as u64));
                write_wav_pcm16(&out.join(format!("synth_{i:04}.wav")), &w)?;
            }
            write_json(&out.join("synth.json"), &serde_json::json!({ "count": count, "seconds": seconds, "seed": base }))?;
            Ok(())
        }
    }
}
