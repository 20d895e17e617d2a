fn main() -> std::process::ExitCode {
    dpboot::cli::run(std::env::args_os())
}
