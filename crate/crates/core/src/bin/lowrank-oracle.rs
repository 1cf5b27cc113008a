fn main() {
    std::process::exit(lowrank_oracle::cli::run(std::env::args_os()));
}
