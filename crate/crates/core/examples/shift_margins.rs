//! Runs the brute-force oracle pipeline over the directional shift
//! experiments and prints per-seed last-half accuracies as JSON.
//!
//! The output is frozen into `tests/fixtures/shift_margins.json`:
//!
//! ```text
//! cargo run --release -p bca-core --example shift_margins > crates/core/tests/fixtures/shift_margins.json
//! ```

use bca::synthgen::generate;
use bca::synthgen::oracle::{last_half_accuracy, oracle_run, OracleArms, OracleParams};
use serde_json::json;

#[path = "../tests/common/experiments.rs"]
mod experiments;

fn main() {
    let mut out = serde_json::Map::new();
    for exp in experiments::all() {
        let mut seeds = Vec::new();
        for seed in experiments::SEEDS {
            let spec = exp.spec(seed);
            let task = generate::<f64>(&spec).expect("valid spec");
            let text: Vec<Vec<f64>> = task.text_embeddings.iter().map(|e| e.to_f64_vec()).collect();
            let stream: Vec<Vec<f64>> = task.stream.iter().map(|s| s.embedding.to_f64_vec()).collect();
            let labels: Vec<i32> = task.stream.iter().map(|s| s.label).collect();
            let params = OracleParams {
                num_classes: spec.num_classes,
                tau: exp.tau,
                n1: exp.n1,
                n2: exp.n2,
                temperature: exp.temperature,
            };
            let arm = |likelihood, prior| {
                last_half_accuracy(&oracle_run(&text, &stream, &labels, params, OracleArms { likelihood, prior }))
            };
            let row = json!({
                "seed": seed,
                "baseline": arm(false, false),
                "likelihood_only": arm(true, false),
                "prior_only": arm(false, true),
                "full": arm(true, true),
            });
            eprintln!("{} {}", exp.name, row);
            seeds.push(row);
        }
        out.insert(exp.name.to_string(), json!({ "seeds": seeds }));
    }
    println!("{}", serde_json::to_string_pretty(&out).unwrap());
}
