//! Compares the backward recursion with brute-force enumeration of every
//! precise tree compatible with the local credal sets.

use std::time::Instant;

use gtexp::cli::oracle_compare_random;

fn main() -> gtexp::Result<()> {
    let start = Instant::now();
    let cmp = oracle_compare_random(100, 4, 1, u128::MAX)?;
    println!(
        "{} instances in {:.2?}: max |upper gap| = {:e}, max |lower gap| = {:e}",
        cmp.instances,
        start.elapsed(),
        cmp.max_upper_diff,
        cmp.max_lower_diff
    );
    Ok(())
}
