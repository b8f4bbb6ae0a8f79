fn main() {
    std::process::exit(chi_spt::cli::run(std::env::args_os()));
}
