//! Global upper and lower expectations of a finitary variable on an
//! imprecise tree, at the root and after one observation.

use gtexp::globalexp::{conditional_process, lower_exp_finitary_global, upper_exp_finitary_global};
use gtexp::tree::{parse_tree, Situation};
use gtexp::variables::FinitaryVariable;
use gtexp::ExtReal;

const TREE: &str = r#"{
  "states": ["0", "1"],
  "assignment": {
    "kind": "stationary",
    "root": {"vertices": [[0.5, 0.5]]},
    "by_state": {
      "0": {"vertices": [[0.5, 0.5], [0.9, 0.1]]},
      "1": {"vertices": [[1, 0]]}
    }
  }
}"#;

fn main() -> gtexp::Result<()> {
    let tree = parse_tree(TREE)?;
    // Indicator that the second state is 1.
    let f = FinitaryVariable::from_fn(2, 2, 100, |p| ExtReal::from(p[1] as f64))?;
    for s in [Situation::root(), Situation(vec![0]), Situation(vec![1])] {
        let up = upper_exp_finitary_global(&tree, &f, &s, 1_000)?;
        let lo = lower_exp_finitary_global(&tree, &f, &s, 1_000)?;
        println!(
            "{:>6}: upper {} lower {} ({} situations visited)",
            tree.display_situation(&s),
            up.value,
            lo.value,
            up.visited
        );
    }
    let m = conditional_process(&tree, &f, 2, 1_000)?;
    for (len, level) in m.levels().iter().enumerate() {
        let values: Vec<String> = level.iter().map(ToString::to_string).collect();
        println!("process at length {len}: {}", values.join(" "));
    }
    Ok(())
}
