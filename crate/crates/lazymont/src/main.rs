fn main() { std::process::exit(lazymont::cli::run_main()); }
