use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use serde::Deserialize;
use tsds_server::{AppState, ServerConfig};

use crate::CliError;

/// Settings come from flags, then `TSDS_*` environment variables, then the
/// config file, then defaults.
#[derive(Debug, Args)]
pub struct ServeArgs {
    /// TOML config file with any of: bind, port, catalog_dir, tsdb_dir, max_range_elements.
    #[arg(long, env = "TSDS_CONFIG")]
    config: Option<PathBuf>,
    /// Address to listen on [default: 127.0.0.1].
    #[arg(long, env = "TSDS_BIND")]
    bind: Option<IpAddr>,
    /// Port to listen on; 0 picks a free one [default: 8080].
    #[arg(long, env = "TSDS_PORT")]
    port: Option<u16>,
    /// Directory of dataset .ncml files.
    #[arg(long, env = "TSDS_CATALOG")]
    catalog: Option<PathBuf>,
    /// Directory raw series are served from [default: the catalog directory].
    #[arg(long, env = "TSDS_TSDB")]
    tsdb: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    bind: Option<IpAddr>,
    port: Option<u16>,
    catalog_dir: Option<PathBuf>,
    tsdb_dir: Option<PathBuf>,
    max_range_elements: Option<u64>,
}

impl ConfigFile {
    fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::User(format!("cannot read config {}: {e}", path.display())))?;
        let mut file: ConfigFile = toml::from_str(&text)
            .map_err(|e| CliError::User(format!("bad config {}: {e}", path.display())))?;
        // Directories in the file are relative to the file.
        let base = path.parent().unwrap_or(Path::new("."));
        for dir in [&mut file.catalog_dir, &mut file.tsdb_dir].into_iter().flatten() {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        Ok(file)
    }
}

fn resolve(args: ServeArgs) -> Result<(SocketAddr, ServerConfig), CliError> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let catalog = args
        .catalog
        .or(file.catalog_dir)
        .ok_or_else(|| CliError::User("no catalog directory: pass --catalog, set TSDS_CATALOG, or use a config file".into()))?;
    let tsdb = args.tsdb.or(file.tsdb_dir).unwrap_or_else(|| catalog.clone());
    let addr = SocketAddr::new(
        args.bind.or(file.bind).unwrap_or(IpAddr::V4(Ipv4Addr::LOCALHOST)),
        args.port.or(file.port).unwrap_or(8080),
    );
    let mut config = ServerConfig::new(catalog, tsdb);
    if let Some(max) = file.max_range_elements {
        config.max_range_elements = max;
    }
    Ok((addr, config))
}

pub fn run(args: ServeArgs) -> Result<(), CliError> {
    crate::init_logging("info");
    let (addr, config) = resolve(args)?;
    let state = AppState::load(config)
        .map_err(|e| CliError::Internal(format!("cannot load catalog: {e}")))?;
    let runtime = tokio::runtime::Runtime::new()
        .map_err(|e| CliError::Internal(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Internal(format!("cannot bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::Internal(e.to_string()))?;
        let state = Arc::new(state);
        #[cfg(unix)]
        tsds_server::reload_on_sighup(state.clone()).map_err(|e| CliError::Internal(e.to_string()))?;
        // Handlers go in before the ready line, so an early SIGTERM is not fatal.
        #[cfg(unix)]
        let term = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate())
            .map_err(|e| CliError::Internal(e.to_string()))?;
        eprintln!("listening on http://{local}");
        tsds_server::serve(listener, state, shutdown_signal(#[cfg(unix)] term))
            .await
            .map_err(|e| CliError::Internal(format!("server failed: {e}")))?;
        tracing::info!("shut down");
        Ok(())
    })
}

async fn shutdown_signal(#[cfg(unix)] mut term: tokio::signal::unix::Signal) {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        term.recv().await;
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        () = ctrl_c => {},
        () = term => {},
    }
    tracing::info!("signal received; draining connections");
}
