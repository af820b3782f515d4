fn main() {
    std::process::exit(riesz_kernels::cli::main_exit_code());
}
