fn main() {
    std::process::exit(whichpath_core::sweep::cli::main_from_args(std::env::args_os()));
}
