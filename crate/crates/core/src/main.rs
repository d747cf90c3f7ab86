fn main() {
    std::process::exit(bandit_sim::cli::main_exit_code());
}
