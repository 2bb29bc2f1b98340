fn main() {
    std::process::exit(motorlab_cli::run(std::env::args_os()));
}
