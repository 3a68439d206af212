//! The crossing supermartingale: it copies a supermartingale's moves while
//! it travels from below `a` to above `b`, and grows with every upcrossing.

use gtexp::globalexp::conditional_process;
use gtexp::martingale::{doob_crossing, normalize_for_crossing, verify_supermartingale};
use gtexp::random::{random_finitary, random_stationary_tree};
use gtexp::tree::Situation;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gtexp::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tree = random_stationary_tree(&mut rng, 2, 2);
    let f = random_finitary(&mut rng, 2, 6, -10.0, 10.0);
    let t = Situation::root();
    let m = normalize_for_crossing(&conditional_process(&tree, &f, 6, 10_000)?, &t)?;
    let (a, b) = (0.8, 1.05);
    let dc = doob_crossing(&m, a, b, &t)?;

    let report = verify_supermartingale(&tree, &dc.process, 6)?;
    println!("supermartingale: {}, minimum {}", report.is_supermartingale(), dc.process.min_value());
    let mut best: Vec<_> = dc.upcrossings.iter().filter(|(_, k)| *k > 0).collect();
    best.sort_by_key(|(_, k)| std::cmp::Reverse(*k));
    for (leaf, k) in best.iter().take(5) {
        let gain = dc.process.at(leaf).get() - 1.0;
        let floor = (*k as f64 - 1.0) * (b - a) - a;
        println!("{}: {k} upcrossings, gain {gain:.4} >= {floor:.4}", tree.display_situation(leaf));
    }
    if best.is_empty() {
        println!("no path crosses [{a}, {b}]");
    }
    Ok(())
}
