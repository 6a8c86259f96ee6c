fn main() {
    std::process::exit(graphmill_cli::run(std::env::args_os()));
}
