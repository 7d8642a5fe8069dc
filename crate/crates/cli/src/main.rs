fn main() {
    std::process::exit(qw5_cli::main_with_args(std::env::args_os()));
}
