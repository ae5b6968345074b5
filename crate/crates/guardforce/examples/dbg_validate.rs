use guardforce::validate::{run_all, ValidateOptions};

fn main() {
    for outcome in run_all(&ValidateOptions::default()) {
        println!("{}", outcome.render());
    }
}
