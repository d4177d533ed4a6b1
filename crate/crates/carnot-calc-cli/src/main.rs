fn main() {
    std::process::exit(carnot_calc_cli::run(std::env::args_os()));
}
