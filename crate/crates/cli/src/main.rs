fn main() {
    std::process::exit(eqmanifold_cli::run(std::env::args_os()));
}
