//! Runs the built-in gradient and oracle checks, then repeats them with a
//! deliberately broken backward rule to show the checks catch it.

use boundary_seg::tensor::{with_backward_fault, BackwardFault};
use boundary_seg::verify::run_all;

fn main() {
    let clean = run_all(1);
    println!(
        "clean: {}/{} checks pass",
        clean.checks.iter().filter(|c| c.passed).count(),
        clean.checks.len()
    );

    let faulty = with_backward_fault(BackwardFault::ScaleMulGrad(1.5), || run_all(1));
    for c in faulty.checks.iter().filter(|c| !c.passed) {
        println!("caught: {} ({})", c.name, c.detail);
    }
}
