fn main() {
    let code = cmj_trees::cli::run(std::env::args_os().skip(1), &mut std::io::stdout().lock(), &mut std::io::stderr());
    std::process::exit(code);
}
