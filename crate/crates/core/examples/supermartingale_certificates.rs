//! Certifying upper bounds with supermartingales: the canonical process is
//! tight, a looser one gives a weaker bound, a process that gains is
//! rejected, and truncation keeps the supermartingale property.

use gtexp::globalexp::{conditional_process, upper_exp_finitary_global};
use gtexp::martingale::{certify_upper_bound, truncate_supermartingale, verify_supermartingale};
use gtexp::random::{random_finitary, random_stationary_tree};
use gtexp::tree::Situation;
use gtexp::ExtReal;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gtexp::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let tree = random_stationary_tree(&mut rng, 3, 3);
    let f = random_finitary(&mut rng, 3, 3, -5.0, 5.0);
    let root = Situation::root();

    let exact = upper_exp_finitary_global(&tree, &f, &root, 10_000)?.value;
    let m = conditional_process(&tree, &f, 3, 10_000)?;
    let cert = certify_upper_bound(&tree, &m, &f, &root, 3, 0)?;
    println!("upper expectation {exact}, canonical certificate {}", cert.bound);

    let loose = m.map(|v| v + ExtReal::from(1.5));
    println!("shifted certificate {}", certify_upper_bound(&tree, &loose, &f, &root, 3, 0)?.bound);

    let gaining = m.map(|v| v * ExtReal::from(2.0));
    match certify_upper_bound(&tree, &gaining, &f, &root, 3, 0) {
        Ok(c) => println!("doubled process certifies {} (leaf floor ok: {})", c.bound, c.leaf_floor_ok),
        Err(e) => println!("doubled process rejected: {e}"),
    }

    let cap = f.max_value().get();
    let bounded = truncate_supermartingale(&m, cap);
    let report = verify_supermartingale(&tree, &bounded, 3)?;
    let cert = certify_upper_bound(&tree, &bounded, &f, &root, 3, 0)?;
    println!(
        "truncated at sup f = {cap:.3}: supermartingale {}, bound {}",
        report.is_supermartingale(),
        cert.bound
    );
    Ok(())
}
