use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rta_assist::ProviderKind;
use rta_sync::storage::{check_project, project_dirs};
use rta_sync::{export_project, import_project, Config, Overrides, Service};

#[derive(Parser)]
#[command(name = "reflexisd", version, about = "Collaborative qualitative coding sync server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML configuration file
    #[arg(long, env = "REFLEXIS_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "REFLEXIS_HOST")]
    host: Option<String>,
    #[arg(long, env = "REFLEXIS_PORT")]
    port: Option<u16>,
    #[arg(long, env = "REFLEXIS_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// stub or remote
    #[arg(long, env = "REFLEXIS_PROVIDER")]
    provider: Option<ProviderKind>,
    #[arg(long, env = "REFLEXIS_PROVIDER_ENDPOINT")]
    provider_endpoint: Option<String>,
    #[arg(long, env = "REFLEXIS_PROVIDER_MODEL")]
    provider_model: Option<String>,
    /// Name of the environment variable holding the provider API key
    #[arg(long, env = "REFLEXIS_API_KEY_ENV")]
    api_key_env: Option<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<Config, String> {
        let overrides = Overrides {
            host: self.host.clone(),
            port: self.port,
            data_dir: self.data_dir.clone(),
            provider: self.provider,
            provider_endpoint: self.provider_endpoint.clone(),
            provider_model: self.provider_model.clone(),
            api_key_env: self.api_key_env.clone(),
        };
        Config::load(self.config.as_deref(), &overrides).map_err(|e| e.to_string())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP and WebSocket server
    Serve(ConfigArgs),
    /// Write a project's audit trail
    Export {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        project: String,
        /// Output file; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify an audit trail and store it as a project
    Import {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Verify every stored log, replay and snapshot without modifying anything
    Check(ConfigArgs),
    /// Print the effective configuration
    PrintConfig(ConfigArgs),
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::Serve(args) => {
            let config = args.load()?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            runtime.block_on(serve(config))?;
        }
        Command::Export { config, project, out } => {
            let config = config.load()?;
            let bytes = export_project(&config.data_dir, &project).map_err(|e| e.to_string())?;
            match out {
                Some(path) => std::fs::write(&path, &bytes).map_err(|e| format!("{}: {e}", path.display()))?,
                None => {
                    use std::io::Write;
                    std::io::stdout().write_all(&bytes).map_err(|e| e.to_string())?;
                }
            }
        }
        Command::Import { config, input } => {
            let config = config.load()?;
            let bytes = std::fs::read(&input).map_err(|e| format!("{}: {e}", input.display()))?;
            let id = import_project(&config.data_dir, &bytes).map_err(|e| e.to_string())?;
            println!("{id}");
        }
        Command::Check(args) => {
            let config = args.load()?;
            let mut failed = false;
            for dir in project_dirs(&config.data_dir).map_err(|e| e.to_string())? {
                let check = check_project(&dir);
                let torn = check.torn_tail.as_ref().map(|r| format!(" (torn tail: {r})")).unwrap_or_default();
                if check.ok() {
                    println!("ok      {} {} events{torn}", check.project, check.events);
                } else {
                    failed = true;
                    println!("FAILED  {} {} events{torn}", check.project, check.events);
                    for p in &check.problems {
                        println!("        {p}");
                    }
                }
            }
            if failed {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::PrintConfig(args) => {
            let config = args.load()?;
            print!("{}", toml::to_string_pretty(&config).map_err(|e| e.to_string())?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

async fn serve(config: Config) -> Result<(), String> {
    let addr = format!("{}:{}", config.host, config.port);
    let service = Service::open(config).map_err(|e| e.to_string())?;
    let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| format!("bind {addr}: {e}"))?;
    let local = listener.local_addr().map_err(|e| e.to_string())?;
    tracing::info!(%local, "listening");
    println!("listening on {local}");
    axum::serve(listener, rta_sync::api::router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        })
        .await
        .map_err(|e| e.to_string())
}
