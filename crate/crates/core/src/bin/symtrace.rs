fn main() {
    std::process::exit(symtrace::harness::run_cli(std::env::args_os()));
}
