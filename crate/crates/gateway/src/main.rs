use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;

use cumulus_core::dfs::{BlockStore, DiskStore};
use cumulus_core::sim::{SimConfig, SimWorld};
use cumulus_gateway::{router, serving_config, AppState, Cluster};

#[derive(Debug, Parser)]
#[command(version, about = "Serve the simulated thin-client cluster over HTTP")]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Storage nodes keep their blocks in subdirectories of this directory.
    #[arg(long, default_value = "cumulus-data")]
    data_dir: PathBuf,
    /// Cluster parameters as `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args = Args::parse();
    let config = match &args.config {
        Some(p) => SimConfig::parse(&std::fs::read_to_string(p)?)?,
        None => SimConfig::default(),
    };
    let mut stores = Vec::new();
    for i in 0..config.storage_nodes {
        stores.push(DiskStore::open(args.data_dir.join(format!("s{}", i + 1)))?);
    }
    let mut stores = stores.into_iter();
    let world = SimWorld::with_stores(serving_config(config), |_| {
        Box::new(stores.next().expect("one store per node")) as Box<dyn BlockStore>
    })?;
    let app = router(AppState::new(Cluster::new(world)));
    let listener = tokio::net::TcpListener::bind(args.listen).await?;
    println!(
        "cumulus gateway listening on http://{}",
        listener.local_addr()?
    );
    axum::serve(listener, app).await?;
    Ok(())
}
