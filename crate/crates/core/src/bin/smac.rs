use sma_collide::cli::cli_main;

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(cli_main(&argv));
}
