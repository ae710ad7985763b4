use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use pushsim_cli::{load_config, run, Mode, OUT_DIR_ENV};

/// Cavity-QED atom transport simulations and photon-count analysis.
#[derive(Parser, Debug)]
#[command(name = "simulate", version)]
struct Args {
    mode: Mode,
    /// TOML configuration; omitted sections take their defaults.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `rng_seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory. Precedence: --out, then $PUSHSIM_OUT_DIR, then `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `section.key=value`, repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("rng_seed={seed}"));
    }
    let result = load_config(&args.config, &overrides).and_then(|loaded| {
        let out = args
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .or_else(|| loaded.config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        run(args.mode, &loaded, &overrides, &out).map(|m| (m, out))
    });
    match result {
        Ok((manifest, out)) => {
            println!("{} finished: {} files in {}", manifest.mode, manifest.files.len(), out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
