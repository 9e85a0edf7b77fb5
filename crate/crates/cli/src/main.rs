fn main() {
    std::process::exit(ocp_cli::main_with_args(std::env::args_os()));
}
