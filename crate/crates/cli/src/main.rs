fn main() -> std::process::ExitCode {
    hyvid_cli::main_with_args(std::env::args_os())
}
