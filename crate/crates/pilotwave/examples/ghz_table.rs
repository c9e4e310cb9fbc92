//! The GHZ argument as an exhaustive table: no assignment of the six
//! +-1 outcomes satisfies the four product equations, because their
//! product squares every outcome (+1) while the right-hand sides multiply
//! to -1.

use pilotwave::scenarios::{ghz_check, ghz_check_with_rhs};

fn main() {
    let table = ghz_check();
    println!(
        "assignments satisfying all four equations: {} of {}",
        table.satisfying,
        table.assignments.len()
    );
    println!(
        "product of left-hand sides  : {:+} (every sigma appears squared)",
        table.lhs_product
    );
    println!("product of right-hand sides : {:+}", table.rhs_product);

    // histogram of how many equations each assignment violates
    let mut histogram = [0usize; 5];
    for a in &table.assignments {
        histogram[a.violated.len()] += 1;
    }
    println!("\nviolated equations  assignments");
    for (k, count) in histogram.iter().enumerate() {
        if *count > 0 {
            println!("        {k}                {count}");
        }
    }

    // flipping the first right-hand side makes the system consistent
    let relaxed = ghz_check_with_rhs([1, 1, 1, 1]);
    println!(
        "\nwith the first equation's sign flipped: {} of 64 assignments satisfy everything",
        relaxed.satisfying
    );
}
