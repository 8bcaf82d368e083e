use std::process::ExitCode;

fn main() -> ExitCode {
    reindiv::cli::run()
}
