fn main() {
    std::process::exit(dexfit::cli::dispatch(std::env::args()));
}
