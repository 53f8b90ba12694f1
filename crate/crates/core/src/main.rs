use std::process::ExitCode;

fn main() -> ExitCode {
    storarb::cli::main_entry()
}
