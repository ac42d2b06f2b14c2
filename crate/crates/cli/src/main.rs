fn main() {
    std::process::exit(cmcfol_cli::run(std::env::args_os()));
}
