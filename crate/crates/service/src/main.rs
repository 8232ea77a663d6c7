use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::Parser;
use depthtouch_service::{router, AppState, Asset, AssetStore, SessionConfig};

#[derive(Parser)]
#[command(name = "depthtouch-serve", version, about = "Haptic session service")]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Extra asset as `id=path` (`.csv` or `.mhdf`). Repeatable.
    #[arg(long = "asset", value_parser = parse_asset)]
    assets: Vec<(String, PathBuf)>,
    /// Leave out the built-in demo surfaces.
    #[arg(long)]
    no_demos: bool,
    #[arg(long, default_value_t = 60)]
    snapshot_hz: u32,
    /// Seconds a session may run without a connected client.
    #[arg(long, default_value_t = 60)]
    idle_timeout_s: u64,
}

fn parse_asset(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((id, path)) if !id.is_empty() && !path.is_empty() => Ok((id.to_owned(), path.into())),
        _ => Err(format!("expected id=path, got {s:?}")),
    }
}

#[tokio::main]
async fn main() -> Result<()> {
    let args = Args::parse();
    let mut store = if args.no_demos { AssetStore::default() } else { AssetStore::with_demos()? };
    for (id, path) in &args.assets {
        store.insert(Asset::load(id.clone(), path)?);
    }
    let config = SessionConfig {
        snapshot_hz: args.snapshot_hz,
        idle_timeout: Duration::from_secs(args.idle_timeout_s),
        ..SessionConfig::default()
    };
    let app = router(AppState::new(store, config));
    let listener = tokio::net::TcpListener::bind(args.addr).await.with_context(|| format!("binding {}", args.addr))?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}
