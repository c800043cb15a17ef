use std::process::ExitCode;

use uavnet::cli::{run, SEED_ENV};

fn main() -> ExitCode {
    let code = run(std::env::args_os(), std::env::var(SEED_ENV).ok());
    ExitCode::from(code as u8)
}
