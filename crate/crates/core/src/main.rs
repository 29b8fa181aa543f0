fn main() {
    std::process::exit(curve_multiplicity::cli::run(std::env::args_os()));
}
