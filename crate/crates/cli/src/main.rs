use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use studyu_cli::client::{ApiClient, ClientError};
use studyu_cli::simulate::{simulate, InProcess, OverHttp, SimulationParams};
use studyu_core::fixtures;
use studyu_core::model::{decode_study, validate_study, ParseError, Study};

/// StudyU N-of-1 trial platform.
#[derive(Parser)]
#[command(name = "studyu", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Remote {
    /// Base URL of the service, e.g. http://127.0.0.1:8080
    #[arg(long, env = "STUDYU_SERVER")]
    server: String,
    /// Researcher token.
    #[arg(long, env = "STUDYU_RESEARCHER_TOKEN")]
    token: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a study definition file.
    Validate {
        path: PathBuf,
        /// Also apply the rules checked before publishing.
        #[arg(long)]
        publish_gate: bool,
    },
    /// Create or update a draft from a file and publish it.
    Publish {
        path: PathBuf,
        #[command(flatten)]
        remote: Remote,
    },
    /// Download the CSV export of a published study.
    Export {
        study_id: String,
        #[command(flatten)]
        remote: Remote,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run seeded simulated participants through a study.
    Simulate(SimulateArgs),
    /// Run the HTTP service configured by STUDYU_* variables.
    Serve {
        /// Overrides STUDYU_BIND.
        #[arg(long)]
        bind: Option<std::net::SocketAddr>,
        /// Overrides STUDYU_DATA_DIR.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Sets STUDYU_DEMO_UNLOCK_REPORTS.
        #[arg(long)]
        demo_unlock_reports: bool,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Study file, or the id of a published study (or bundled fixture when in-process).
    study: String,
    #[arg(long, default_value_t = 100)]
    participants: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    effect: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_sd: f64,
    #[arg(long, default_value_t = 1.0)]
    adherence: f64,
    /// Linear change of the outcome per study day.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    trend: f64,
    /// Outcome level without effect; defaults to the middle of the slider.
    #[arg(long, allow_hyphen_values = true)]
    level: Option<f64>,
    /// Run against a service on a settable clock.
    #[arg(long, conflicts_with = "in_process")]
    server: Option<String>,
    #[arg(long, env = "STUDYU_RESEARCHER_TOKEN")]
    token: Option<String>,
    /// Use a private in-memory store (the default).
    #[arg(long)]
    in_process: bool,
    /// Print the summary as JSON.
    #[arg(long)]
    json: bool,
    /// Also write the study's CSV export here.
    #[arg(long)]
    export: Option<PathBuf>,
}

/// Exit codes: 0 success, 1 domain error, 2 usage or I/O error.
enum Failure {
    Domain(String),
    Usage(String),
}

type Outcome = Result<(), Failure>;

fn api_failure(err: ClientError) -> Failure {
    match &err {
        ClientError::Api(api) => {
            let mut msg = err.to_string();
            if let Some(findings) = api.details.as_ref().and_then(|d| d["report"]["findings"].as_array()) {
                for f in findings {
                    msg.push_str(&format!(
                        "\n{}: {}: {}",
                        f["path"].as_str().unwrap_or(""),
                        f["severity"].as_str().unwrap_or(""),
                        f["message"].as_str().unwrap_or("")
                    ));
                }
            }
            if let Some(reasons) = api.details.as_ref().and_then(|d| d["reasons"].as_array()) {
                for r in reasons {
                    msg.push_str(&format!("\n{}", r["reason"].as_str().unwrap_or("")));
                }
            }
            Failure::Domain(msg)
        }
        ClientError::Transport(_) => Failure::Usage(err.to_string()),
    }
}

fn read_study(path: &Path) -> Result<Study, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    decode_study(&bytes).map_err(|e| match e {
        ParseError::Decode { path, message, .. } => Failure::Usage(format!("{path}: error: {message}")),
        ParseError::Invalid(_) => unreachable!("decoding does not validate"),
    })
}

fn validate(path: &Path, publish_gate: bool) -> Outcome {
    let study = read_study(path)?;
    let report = validate_study(&study.details, &study.metadata, publish_gate);
    for finding in &report.findings {
        println!("{finding}");
    }
    let errors = report.errors().count();
    if errors > 0 {
        return Err(Failure::Domain(format!("{errors} error(s)")));
    }
    Ok(())
}

fn publish(path: &Path, remote: Remote) -> Outcome {
    let study = read_study(path)?;
    let report = validate_study(&study.details, &study.metadata, true);
    if report.has_errors() {
        for finding in &report.findings {
            println!("{finding}");
        }
        return Err(Failure::Domain(format!("{} error(s)", report.errors().count())));
    }
    let client = ApiClient::new(&remote.server, remote.token);
    let meta = client.save_and_publish(&study).map_err(api_failure)?;
    println!("{}", meta.study_id);
    Ok(())
}

fn export(study_id: &str, remote: Remote, out: Option<PathBuf>) -> Outcome {
    let client = ApiClient::new(&remote.server, remote.token);
    let bytes = client.export_csv(study_id).map_err(api_failure)?;
    match out {
        Some(path) => std::fs::write(&path, bytes).map_err(|e| Failure::Usage(format!("{}: {e}", path.display()))),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes).map_err(|e| Failure::Usage(e.to_string()))
        }
    }
}

fn bundled(id: &str) -> Option<Study> {
    [fixtures::back_pain(), fixtures::ibs_diets(), fixtures::calibration_study()]
        .into_iter()
        .find(|s| s.metadata.study_id == id)
}

fn run_simulation(args: SimulateArgs) -> Outcome {
    let params = SimulationParams {
        participants: args.participants,
        seed: args.seed,
        effect: args.effect,
        noise_sd: args.noise_sd,
        adherence: args.adherence,
        trend: args.trend,
        level: args.level,
    };
    params.check().map_err(Failure::Usage)?;
    let from_file = Path::new(&args.study).is_file();
    let (summary, csv) = match &args.server {
        Some(server) => {
            let client = ApiClient::new(server, args.token.clone());
            let study = if from_file {
                let study = read_study(Path::new(&args.study))?;
                let published = client.list_published().map_err(api_failure)?;
                if !published.iter().any(|m| m.study_id == study.metadata.study_id) {
                    client.save_and_publish(&study).map_err(api_failure)?;
                }
                study
            } else {
                client.published_study(&args.study).map_err(api_failure)?
            };
            let mut transport = OverHttp { client };
            let summary = simulate(&study, &params, &mut transport);
            let csv = match &args.export {
                Some(_) => Some(transport.client.export_csv(study.metadata.study_id.as_str()).map_err(api_failure)?),
                None => None,
            };
            (summary, csv)
        }
        None => {
            let study = if from_file {
                read_study(Path::new(&args.study))?
            } else {
                bundled(&args.study).ok_or_else(|| {
                    Failure::Usage(format!("{}: no such file or bundled study", args.study))
                })?
            };
            let mut transport = InProcess::new(&study, args.seed).map_err(|e| Failure::Domain(e.message))?;
            let summary = simulate(&study, &params, &mut transport);
            let csv = match &args.export {
                Some(_) => Some(
                    transport
                        .export_csv(study.metadata.study_id.as_str())
                        .map_err(|e| Failure::Domain(e.message))?
                        .into_bytes(),
                ),
                None => None,
            };
            (summary, csv)
        }
    };
    if let (Some(path), Some(csv)) = (&args.export, csv) {
        std::fs::write(path, csv).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    } else {
        print!("{}", summary.render());
    }
    Ok(())
}

fn serve(bind: Option<std::net::SocketAddr>, data_dir: Option<PathBuf>, unlock: bool) -> Outcome {
    let mut config = studyu_server::Config::from_env().map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(b) = bind {
        config.bind = b;
    }
    if let Some(d) = data_dir {
        config.data_dir = d;
    }
    config.demo_unlock_reports |= unlock;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Usage(e.to_string()))?;
    runtime
        .block_on(studyu_server::serve(config))
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate { path, publish_gate } => validate(&path, publish_gate),
        Command::Publish { path, remote } => publish(&path, remote),
        Command::Export { study_id, remote, out } => export(&study_id, remote, out),
        Command::Simulate(args) => run_simulation(args),
        Command::Serve {
            bind,
            data_dir,
            demo_unlock_reports,
        } => serve(bind, data_dir, demo_unlock_reports),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
