use clap::Parser;
use mhht_cli::commands::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {:#}", e.error);
        std::process::exit(e.code);
    }
}
