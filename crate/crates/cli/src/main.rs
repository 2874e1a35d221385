use clap::Parser;
use eqspeed_cli::commands::{exit_code, run, Cli};

fn main() {
    if let Ok(v) = std::env::var("EQSPEED_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .expect("global thread pool is built once");
            }
            _ => {
                eprintln!("error: EQSPEED_THREADS must be a positive integer, got `{v}`");
                std::process::exit(2);
            }
        }
    }
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(exit_code(&e));
    }
}
