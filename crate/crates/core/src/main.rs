fn main() {
    std::process::exit(vmb_lab::cli::run());
}
