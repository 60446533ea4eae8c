use std::process::ExitCode;

fn main() -> ExitCode {
    tessforest::cli::main()
}
