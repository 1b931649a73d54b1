use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(rmdp_lab::cli::run() as u8)
}
