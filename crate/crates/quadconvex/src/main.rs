use clap::Parser;
use quadconvex::cli::{self, Cli};

fn main() {
    let code = match Cli::try_parse() {
        Ok(parsed) => cli::run(parsed),
        Err(e) => {
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                0
            } else {
                cli::EXIT_USAGE
            }
        }
    };
    std::process::exit(code);
}
