use clap::Parser;

fn main() {
    let cli = claqs_cli::Cli::parse();
    if let Err(f) = claqs_cli::run(cli) {
        eprintln!("error: {}", f.message);
        std::process::exit(f.code);
    }
}
