fn main() {
    std::process::exit(fisheye_me::cli::run(std::env::args_os()));
}
