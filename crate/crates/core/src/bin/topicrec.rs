fn main() {
    std::process::exit(topicrec::cli::main_with_args(std::env::args_os()));
}
