use std::io::Write;

use clap::Parser;

use axiswirl::cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(outcome) => {
            // A closed pipe on stdout is not a failure of the command.
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{}", outcome.summary);
            for f in &outcome.files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
        }
        Err(e) => {
            let mut rec = e.record();
            rec["command"] = serde_json::json!(cli.command.name());
            eprintln!("{rec}");
            std::process::exit(e.exit_code());
        }
    }
}
