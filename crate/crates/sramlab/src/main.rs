fn main() {
    std::process::exit(sramlab::run_cli());
}
