use std::net::{IpAddr, SocketAddr};
use std::process::ExitCode;

use clap::Parser;
use rankdesign_service::{app, AppConfig, DEFAULT_MAX_REPLICATIONS};

#[derive(Debug, Parser)]
#[command(
    name = "rankdesign-service",
    version,
    about = "HTTP JSON interface to rankdesign"
)]
struct Args {
    #[arg(long, default_value = "127.0.0.1")]
    bind: IpAddr,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Allow requests from any origin.
    #[arg(long)]
    cors: bool,
    /// Simulation threads; 0 uses one per core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_REPLICATIONS)]
    max_replications: usize,
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    let config = AppConfig {
        max_replications: args.max_replications,
        workers: args.workers,
        permissive_cors: args.cors,
    };
    let router = match app(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("rankdesign-service: {e}");
            return ExitCode::FAILURE;
        }
    };
    let addr = SocketAddr::new(args.bind, args.port);
    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("rankdesign-service: cannot bind {addr}: {e}");
            return ExitCode::FAILURE;
        }
    };
    eprintln!("rankdesign-service listening on {addr}");
    match axum::serve(listener, router).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rankdesign-service: {e}");
            ExitCode::FAILURE
        }
    }
}
