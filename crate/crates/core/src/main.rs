use clap::error::ErrorKind;
use clap::Parser;
use frontier_core::cli::{run, Cli, EXIT_INPUT};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            // keep usage errors on one line like every other failure
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error kind=usage msg={first}");
            std::process::exit(EXIT_INPUT);
        }
    };
    std::process::exit(run(cli));
}
