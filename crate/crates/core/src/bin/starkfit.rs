fn main() {
    std::process::exit(stark_emitter::cli::run(std::env::args_os()));
}
