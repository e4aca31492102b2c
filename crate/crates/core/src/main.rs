fn main() {
    if let Err(e) = modphi_credit::cli::run(std::env::args_os()) {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}
