fn main() {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = mtc_cli::run(
        std::env::args_os(),
        |key| std::env::var(key).ok(),
        &mut stdout.lock(),
        &mut stderr.lock(),
    );
    std::process::exit(code);
}
