fn main() {
    std::process::exit(misclass_cli::run(std::env::args_os()));
}
