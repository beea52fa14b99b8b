fn main() {
    std::process::exit(qborel::cli::run(std::env::args_os()));
}
