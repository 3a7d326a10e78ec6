fn main() {
    std::process::exit(principal_portfolios::run_cli(std::env::args_os()));
}
