fn main() {
    std::process::exit(poset_mobius_cli::run(std::env::args_os()));
}
