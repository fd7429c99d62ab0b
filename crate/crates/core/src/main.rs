fn main() {
    std::process::exit(actstat::cli::run(std::env::args_os()));
}
