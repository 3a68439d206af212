//! Hitting probabilities and expected hitting times on imprecise Markov
//! chains, approximated by monotone sequences of truncated variables.

use gtexp::approx::{
    lower_expected_hitting_time, lower_hitting_probability, upper_expected_hitting_time, upper_hitting_probability,
    ApproxOptions, ApproxResult,
};
use gtexp::localmodel::LocalModel;
use gtexp::tree::{ImpreciseTree, Situation};
use gtexp::variables::Target;

fn show(name: &str, r: &ApproxResult) {
    println!(
        "  {name:<22} {} (converged: {}, at n = {:?}, diverging: {})",
        r.estimate, r.converged, r.converged_at, r.diverging
    );
}

fn main() -> gtexp::Result<()> {
    let labels = vec!["g".to_string(), "b".to_string()];
    let good = LocalModel::new(labels.clone(), vec![vec![0.9, 0.1], vec![0.5, 0.5]])?;
    let bad = LocalModel::new(labels.clone(), vec![vec![0.0, 1.0]])?;
    let tree = ImpreciseTree::stationary(LocalModel::new(labels, vec![vec![1.0, 0.0]])?, vec![good, bad])?;
    let target = Target::new(2, &[1])?;
    let s = Situation::root();
    let opts = ApproxOptions { max_n: 300, ..ApproxOptions::default() };

    println!("reaching b from g");
    show("upper probability", &upper_hitting_probability(&tree, &target, &s, &opts)?);
    show("lower probability", &lower_hitting_probability(&tree, &target, &s, &opts)?);
    show("upper expected time", &upper_expected_hitting_time(&tree, &target, &s, &opts)?);
    show("lower expected time", &lower_expected_hitting_time(&tree, &target, &s, &opts)?);

    let r = upper_hitting_probability(&tree, &target, &s, &ApproxOptions { max_n: 8, ..opts })?;
    print!("first terms as csv:\n{}", r.trace_csv());
    Ok(())
}
