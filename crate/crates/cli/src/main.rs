fn main() {
    sgl_cli::run();
}
