use std::process::ExitCode;

use clap::Parser;
use dds_cli::{run, Cli};

fn main() -> ExitCode {
    if let Some(n) = std::env::var("DDS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("dds: cannot size thread pool: {e}");
        }
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dds: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
