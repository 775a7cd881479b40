fn main() {
    std::process::exit(checkin_planner::cli::run(std::env::args_os()));
}
