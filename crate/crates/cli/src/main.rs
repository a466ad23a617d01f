//! `respair` — command-line front end for responsiveness pair clustering:
//! ingestion, the clustering pipeline, modularity baselines, the sweep
//! experiment, and display artifacts (GeoJSON, DOT).
//!
//! Exit codes: 0 success, 1 usage problem, 2 data problem. Diagnostics go
//! to standard error; artifacts go to files only.

mod commands;
mod config;
mod geojson;

use clap::Parser;

fn main() {
    let cli = match config::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = commands::run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
