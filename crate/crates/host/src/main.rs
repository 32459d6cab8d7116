use std::io;

fn main() {
    let status = refmon_host::cli::run(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(status);
}
