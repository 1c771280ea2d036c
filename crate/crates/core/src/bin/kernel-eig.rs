fn main() {
    let threads = std::env::var(kernel_eig::cli::THREADS_ENV).ok();
    let code = kernel_eig::cli::main_with(
        std::env::args_os(),
        threads,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    std::process::exit(code);
}
