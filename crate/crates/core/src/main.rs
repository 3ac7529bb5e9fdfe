fn main() {
    std::process::exit(pdc_qkd::cli::run(std::env::args_os()));
}
