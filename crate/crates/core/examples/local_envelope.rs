//! Upper and lower expectations of a credal set given by its vertices,
//! including extended real gambles and the cut traces that define them.

use gtexp::localmodel::{LocalModel, LocalVariable};
use gtexp::ExtReal;

fn show(values: &[ExtReal]) -> String {
    let parts: Vec<String> = values.iter().map(ToString::to_string).collect();
    format!("({})", parts.join(", "))
}

fn main() -> gtexp::Result<()> {
    let states = vec!["up".to_string(), "flat".to_string(), "down".to_string()];
    let model = LocalModel::new(states, vec![vec![0.5, 0.3, 0.2], vec![0.2, 0.3, 0.5], vec![0.3, 0.6, 0.1]])?;

    let gain = LocalVariable::from_f64(&[2.0, 0.0, -1.0]);
    println!("gain {}", show(&gain.table));
    println!("  upper = {}", model.upper_exp(&gain)?);
    println!("  lower = {}", model.lower_exp(&gain)?);
    println!("  maximizing vertices = {:?}", model.maximizing_vertices(&gain.table, 1e-12));

    let ruin = LocalVariable::new(vec![ExtReal::from(1.0), ExtReal::from(0.0), ExtReal::MINUS_INF]);
    let schedule: Vec<f64> = (0..6).map(|e| -(10f64.powi(e))).collect();
    let trace = model.lower_cut_limit(&ruin, &schedule)?;
    println!("ruin {}", show(&ruin.table));
    println!("  upper = {}", model.upper_exp(&ruin)?);
    println!("  lower-cut trace = {}", show(&trace.values()));
    println!("  diverging = {}", trace.diverging);
    Ok(())
}
