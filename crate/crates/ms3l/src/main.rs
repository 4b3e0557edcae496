use clap::Parser;

fn main() {
    let cli = ms3l::cli::Cli::parse();
    if let Err(e) = ms3l::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
