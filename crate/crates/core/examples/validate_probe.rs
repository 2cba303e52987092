// scratch: run the validation suite and print each line
fn main() {
    let quick = std::env::args().any(|a| a == "--quick");
    for r in nv_sense_core::validation::default_run(quick) {
        println!("{}", r.line());
    }
}
