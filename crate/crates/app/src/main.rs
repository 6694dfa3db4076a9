fn main() {
    let code = mdss_app::cli::run_with(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
