//! Regenerates the values frozen in `fixtures/regression.txt`.
//!
//! Run with `cargo run -p toruslab --example freeze_regression` and paste
//! the output into the fixture if an intentional change shifts the values.

use toruslab::oracle::{barrier_min_constant, enumerate_reachable, exact_mixing_time, two_step_equivalence};

fn main() {
    let class = enumerate_reachable(2).expect("n = 2 enumerates");
    println!("full_deck_mixing_n2 = {}", exact_mixing_time(&class));
    let c_hat = barrier_min_constant(2, 2, 8).expect("valid barrier range");
    println!("barrier_min_constant_k2_r2_8 = {c_hat:.12e}");
    let d = two_step_equivalence(2, 1, 2).expect("n = 2 enumerates");
    println!("two_step_discrepancy_n2 = {}/{}", d.num, d.den);
}
