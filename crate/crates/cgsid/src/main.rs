use clap::Parser;

fn main() {
    let cli = cgsid::cli::Cli::parse();
    if let Err(e) = cgsid::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
