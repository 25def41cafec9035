use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use certrand_core::net::{connect_device, extract_from_transcript, run_verifier_service, PostProcess, ServiceOptions};
use certrand_core::statlab::{oracle_check, LemmaId, OracleParams};
use certrand_core::verifier::replay_transcript;
use certrand_core::{certify_transcript, DeviceModel, Key32, ProtocolConfig, Transcript};

#[derive(Parser)]
#[command(name = "certrand", version, about = "Certified randomness from random circuit sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve protocol sessions over TCP, one per connection.
    Verify {
        #[arg(long)]
        listen: String,
        /// Protocol config (JSON).
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "transcripts")]
        out: PathBuf,
        /// Write an entropy certificate for every accepted session.
        #[arg(long)]
        certify: bool,
        /// Extract this many bits from every accepted session (needs --seed).
        #[arg(long, requires = "seed")]
        extract_m: Option<usize>,
        #[arg(long)]
        seed: Option<PathBuf>,
        /// Exit after this many sessions.
        #[arg(long)]
        max_sessions: Option<u64>,
    },
    /// Connect to a verifier and answer its challenges.
    Device {
        #[arg(long)]
        connect: String,
        /// Device model as inline JSON or a path to a JSON file.
        #[arg(long)]
        model: String,
    },
    /// Run every lemma check at its preset parameters.
    Selftest {
        #[arg(long, default_value_t = 20_000)]
        trials: u64,
        #[arg(long)]
        seed: Option<String>,
    },
    /// Entropy certificate for an accepted transcript.
    Certify {
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract bits from an accepted transcript with a seed file.
    Extract {
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long)]
        seed: PathBuf,
        #[arg(long)]
        m: usize,
        /// Raw output bits; the spec goes next to it with a `.spec.json` suffix.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute every score and the decision of a stored transcript.
    Replay {
        #[arg(long)]
        transcript: PathBuf,
    },
    /// Monte-Carlo check of one lemma against its closed form.
    LemmaCheck {
        #[arg(long)]
        id: LemmaId,
        #[arg(long)]
        trials: u64,
        /// Oracle parameters as JSON; missing fields take their defaults.
        #[arg(long)]
        params: Option<String>,
        #[arg(long)]
        seed: Option<String>,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(text_or_path: &str) -> Result<T> {
    let text = if Path::new(text_or_path).is_file() {
        fs::read_to_string(text_or_path).with_context(|| format!("reading {text_or_path}"))?
    } else {
        text_or_path.to_string()
    };
    Ok(serde_json::from_str(&text)?)
}

fn seed_key(seed: Option<&str>) -> Result<Key32> {
    Ok(match seed {
        Some(hex) => Key32::from_hex(hex)?,
        None => Key32::filled(0),
    })
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn selftest_params(lemma: LemmaId) -> OracleParams {
    let mut p = OracleParams::default();
    if lemma == LemmaId::FreqDist {
        p.dim = 4;
        p.k = 2;
    }
    p
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Verify { listen, config, out, certify, extract_m, seed, max_sessions } => {
            let config: ProtocolConfig = read_json(&config.to_string_lossy())?;
            config.validate()?;
            let extract = match (extract_m, seed) {
                (Some(m), Some(seed)) => Some((m, fs::read(&seed).with_context(|| format!("reading {}", seed.display()))?)),
                _ => None,
            };
            let listener = TcpListener::bind(&listen).with_context(|| format!("binding {listen}"))?;
            log::info!("listening on {}", listener.local_addr()?);
            let mut opts = ServiceOptions::new(out);
            opts.post = PostProcess { certify, extract };
            opts.max_sessions = max_sessions;
            let outcomes = run_verifier_service(&config, listener, &opts)?;
            for o in &outcomes {
                println!("{}", serde_json::to_string(o)?);
            }
            Ok(true)
        }
        Command::Device { connect, model } => {
            let model: DeviceModel = read_json(&model)?;
            let report = connect_device(connect.as_str(), &model)?;
            print_json(&report)?;
            Ok(true)
        }
        Command::Selftest { trials, seed } => {
            let seed = seed_key(seed.as_deref())?;
            let mut all = true;
            for lemma in LemmaId::ALL {
                let r = oracle_check(lemma, &selftest_params(lemma), trials, &seed)?;
                println!(
                    "{:<26} {}  empirical {:.6e}  predicted {:.6e}  tolerance {:.2e}",
                    r.lemma_id,
                    if r.pass { "PASS" } else { "FAIL" },
                    r.empirical,
                    r.predicted,
                    r.tolerance
                );
                all &= r.pass;
            }
            Ok(all)
        }
        Command::Certify { transcript, out } => {
            let (t, _) = Transcript::read(&transcript)?;
            let cert = certify_transcript(&t)?;
            match out {
                Some(path) => fs::write(path, serde_json::to_vec_pretty(&cert)?)?,
                None => print_json(&cert)?,
            }
            Ok(true)
        }
        Command::Extract { transcript, seed, m, out } => {
            let (t, _) = Transcript::read(&transcript)?;
            let seed_bytes = fs::read(&seed).with_context(|| format!("reading {}", seed.display()))?;
            let (cert, spec, bits) = extract_from_transcript(&t, &seed_bytes, m)?;
            let out = out.unwrap_or_else(|| transcript.with_extension("bits"));
            fs::write(&out, certrand_core::extractor::bytes_from_bits(&bits))?;
            let mut spec_path = out.clone().into_os_string();
            spec_path.push(".spec.json");
            fs::write(&spec_path, serde_json::to_vec_pretty(&spec)?)?;
            print_json(&json!({
                "output": out,
                "bits": bits.len(),
                "certified_bits": cert.certified_bits,
                "required_entropy": spec.required_entropy(),
                "total_error": spec.total_error(),
                "seed_bits_used": spec.d,
            }))?;
            Ok(true)
        }
        Command::Replay { transcript } => {
            let report = replay_transcript(&transcript)?;
            print_json(&report)?;
            Ok(report.matches)
        }
        Command::LemmaCheck { id, trials, params, seed } => {
            let params: OracleParams = match params {
                Some(p) => read_json(&p)?,
                None => OracleParams::default(),
            };
            let report = oracle_check(id, &params, trials, &seed_key(seed.as_deref())?)?;
            print_json(&report)?;
            Ok(report.pass)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
