fn main() {
    let (code, output) = kahler::cli::run(std::env::args());
    if !output.is_empty() {
        println!("{output}");
    }
    std::process::exit(code);
}
