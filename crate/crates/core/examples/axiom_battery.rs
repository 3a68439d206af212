//! Runs the axiom battery against a credal model and against the
//! sup-based functional that drops continuity with respect to lower cuts.

use gtexp::cli::detached_sup_batch;
use gtexp::localmodel::{check_local_axioms, DetachedSup, LocalModel};
use gtexp::random::{random_local_variable, state_labels};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gtexp::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = LocalModel::new(state_labels(3), vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3]])?;
    let batch: Vec<_> = (0..8).map(|i| random_local_variable(&mut rng, 3, i % 2 == 0)).collect();
    let report = check_local_axioms(&model, &batch, 1, 1e-9)?;
    println!("credal model:");
    for c in &report.checks {
        println!("  {:<24} {:>4} passed {:>2} failed", c.axiom.to_string(), c.passed, c.failed);
    }

    let report = check_local_axioms(&DetachedSup { num_states: 2 }, &detached_sup_batch(), 1, 1e-9)?;
    println!("sup-based functional fails: {:?}", report.failed_axioms());
    for c in report.checks.iter().filter(|c| !c.holds()) {
        for why in &c.failures {
            println!("  {}: {why}", c.axiom);
        }
    }
    Ok(())
}
