fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let code = rsma::cli::main_with(&argv, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
