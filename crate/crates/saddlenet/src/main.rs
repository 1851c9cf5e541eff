use clap::Parser;

use saddlenet::cli::{run, Cli};

fn main() {
    // clap's own exit code for usage errors is 2, which this tool reserves
    // for iteration-limit stops; map argument errors to the usage code.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { saddlenet::cli::EXIT_USAGE } else { 0 };
            std::process::exit(code);
        }
    };
    std::process::exit(run(cli));
}
