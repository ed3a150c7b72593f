fn main() {
    std::process::exit(petc_imc::cli::run(std::env::args_os()));
}
