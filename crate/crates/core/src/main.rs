use std::process::ExitCode;

fn main() -> ExitCode {
    normact::cli::main()
}
