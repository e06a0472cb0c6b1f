fn main() {
    std::process::exit(traffic_cli::run(std::env::args_os()));
}
