fn main() {
    std::process::exit(resil_cli::run(std::env::args_os()));
}
