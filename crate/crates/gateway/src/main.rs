use std::process::ExitCode;

fn main() -> ExitCode {
    lapaware_gateway::cli::main()
}
