use clap::Parser;

use ssia::cli::{error_line, run, Cli};

fn main() {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    if let Err(e) = run(cli, &mut stdout.lock()) {
        eprintln!("{}", error_line(&e));
        std::process::exit(1);
    }
}
