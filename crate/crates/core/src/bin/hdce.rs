fn main() {
    std::process::exit(hdce::cli::run(std::env::args_os()));
}
