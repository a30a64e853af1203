mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use liaison_core::api::{self, AppState};
use liaison_core::curriculum::{load_fixture, shipped_courses};
use liaison_core::seed::{seed_demo, SeedSummary};
use liaison_core::{AuthService, Catalogue, PasswordHasher, Store};

use crate::config::{CliConfig, DEFAULT_DB, DEFAULT_LISTEN};

#[derive(Debug, Parser)]
#[command(name = "liaison", version, about = "Industry liaison service")]
struct Cli {
    /// SQLite database file, or ":memory:".
    #[arg(long, global = true, env = "LIAISON_DB", default_value = DEFAULT_DB)]
    db: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the HTTP server until interrupted.
    Serve(ServeArgs),
    /// Administrator accounts.
    Admin {
        #[command(subcommand)]
        command: AdminCommand,
    },
    /// School and company accounts.
    User {
        #[command(subcommand)]
        command: UserCommand,
    },
    /// Curriculum catalogue.
    Fixture {
        #[command(subcommand)]
        command: FixtureCommand,
    },
    /// Demo dataset.
    Seed {
        #[command(subcommand)]
        command: SeedCommand,
    },
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// host:port to bind.
    #[arg(long, env = "LIAISON_LISTEN", default_value = DEFAULT_LISTEN)]
    listen: String,
    /// Course CSV to load before serving. Replaces the stored catalogue.
    #[arg(long)]
    fixture: Option<PathBuf>,
    /// Directory holding the built web client, served at `/`.
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum AdminCommand {
    Create { email: String, password: String },
}

#[derive(Debug, Subcommand)]
enum UserCommand {
    Verify { id: i64 },
}

#[derive(Debug, Subcommand)]
enum FixtureCommand {
    Load { path: PathBuf },
}

#[derive(Debug, Subcommand)]
enum SeedCommand {
    Demo {
        /// Wipe existing accounts, messages and reports first.
        #[arg(long)]
        force: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve(args) => {
            let config = CliConfig::new(&cli.db, &args.listen, args.fixture, args.static_dir)?;
            serve(config)
        }
        Command::Admin { command: AdminCommand::Create { email, password } } => {
            let auth = AuthService::new(open(&cli.db)?, PasswordHasher::default());
            let admin = auth.create_admin(&email, &password)?;
            println!("{}", admin.id);
            Ok(())
        }
        Command::User { command: UserCommand::Verify { id } } => {
            let auth = AuthService::new(open(&cli.db)?, PasswordHasher::default());
            auth.verify_user_unchecked(id)
                .with_context(|| format!("user {id}"))?;
            println!("verified");
            Ok(())
        }
        Command::Fixture { command: FixtureCommand::Load { path } } => {
            let store = open(&cli.db)?;
            let n = load_into(&store, &path)?;
            println!("loaded {n} courses");
            Ok(())
        }
        Command::Seed { command: SeedCommand::Demo { force } } => {
            let store = open(&cli.db)?;
            let summary = seed_demo(&store, &PasswordHasher::default(), force)?;
            print_summary(&summary)?;
            Ok(())
        }
    }
}

fn open(db: &str) -> Result<Store> {
    Ok(Store::open(&liaison_core::StoreConfig::from_db_arg(db))?)
}

fn load_into(store: &Store, path: &std::path::Path) -> Result<usize> {
    let courses = load_fixture(path).with_context(|| format!("fixture {}", path.display()))?;
    Catalogue::new(courses.clone()).with_context(|| format!("fixture {}", path.display()))?;
    Ok(store.replace_courses(&courses)?)
}

fn print_summary(s: &SeedSummary) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "seeded {} accounts, {} messages ({} read), {} reports",
        s.accounts.len(),
        s.messages,
        s.read_messages,
        s.reports
    )?;
    writeln!(out, "{:<4} {:<8} {:<9} {:<24} password", "id", "role", "verified", "email")?;
    for a in &s.accounts {
        let role = a.role.map_or("admin".to_owned(), |r| r.to_string());
        let verified = if a.verified { "yes" } else { "no" };
        writeln!(out, "{:<4} {:<8} {:<9} {:<24} {}", a.id, role, verified, a.email, a.password)?;
    }
    Ok(())
}

fn serve(config: CliConfig) -> Result<()> {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "info".into()),
        )
        .init();

    let store = Store::open(&config.db)?;
    match &config.fixture {
        Some(path) => {
            load_into(&store, path)?;
        }
        None => {
            if store.query_courses(None)?.is_empty() {
                store.replace_courses(&shipped_courses())?;
            }
        }
    }
    let catalogue = Catalogue::new(store.query_courses(None)?)?;
    let state = AppState::new(store, PasswordHasher::default(), catalogue);
    let app = match &config.static_dir {
        Some(dir) => api::router_with_static(state, dir),
        None => api::router(state),
    };

    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(config.listen.to_string())
            .await
            .with_context(|| format!("cannot bind {}", config.listen))?;
        let local = listener.local_addr()?;
        println!("listening on http://{local}");
        std::io::stdout().flush()?;
        axum::serve(listener, app)
            .with_graceful_shutdown(shutdown_signal())
            .await
            .context("server error")
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
