fn main() {
    std::process::exit(hardcoreboost_cli::run(std::env::args_os()));
}
