fn main() {
    std::process::exit(bernstein_workbench::cli_runner::main_with_args(
        std::env::args_os(),
    ));
}
