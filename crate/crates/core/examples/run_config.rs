//! Run any experiment from a configuration file, as the CLI does.
//!
//! `cargo run --release --example run_config -- configs/solve_steady.conf /tmp/out`

use std::path::PathBuf;

use viscomem::config::ExperimentSpec;
use viscomem::experiment;

fn main() {
    let mut args = std::env::args().skip(1);
    let (Some(config), Some(out)) = (args.next(), args.next()) else {
        eprintln!("usage: run_config <config> <out-dir>");
        std::process::exit(experiment::EXIT_USAGE);
    };
    let result = ExperimentSpec::from_file(&PathBuf::from(config))
        .and_then(|spec| experiment::run_experiment(&spec, &PathBuf::from(&out)));
    match result {
        Ok(outcome) => {
            print!("{}", outcome.summary());
            println!("files: {}", outcome.files.join(", "));
            std::process::exit(outcome.exit_code());
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(experiment::exit_code(&e));
        }
    }
}
