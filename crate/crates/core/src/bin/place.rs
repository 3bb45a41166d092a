fn main() {
    std::process::exit(spatial_place::harness::cli::run(std::env::args_os()));
}
