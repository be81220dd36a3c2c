fn main() {
    std::process::exit(metallic_lab::cli::run(std::env::args_os()));
}
