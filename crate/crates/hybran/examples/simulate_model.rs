//! Learned hybrid model against the true system on fresh trajectories driven
//! by the same inputs, with the open-loop error after 10, 50 and 150 steps.
//!
//!     cargo run --release --example simulate_model

use std::f64::consts::PI;

use hybran::pipeline::{fit_hybrid, FitConfig};
use hybran::{generate_traces, HyperRect, LimitCycle, Partition};

fn main() -> hybran::Result<()> {
    let system = LimitCycle::default();
    let domain = HyperRect::from_bounds(&[(-4.0, 4.0), (-PI, PI)])?;
    let train = generate_traces(&system, 50, 150, &domain, 7)?;
    let fit = fit_hybrid(&train, Partition::new(domain.clone(), &[4, 3])?, system.params.input_box(), &FitConfig::new(20))?;
    let model = &fit.automaton;

    let truth = generate_traces(&system, 10, 150, &domain, 1234)?;
    println!("trace   |err| k=10   k=50   k=150   cell switches");
    for t in &truth {
        let sim = model.simulate(&t.states[0], &t.inputs)?;
        let err = |k: usize| {
            let (a, b) = (&sim.trajectory[k], &t.states[k]);
            // radius error plus angle error on the circle
            let dr = a[0] - b[0];
            let dth = hybran::dynamics::wrap_angle(a[1] - b[1]);
            (dr * dr + dth * dth).sqrt()
        };
        let mut visited = sim.cells.clone();
        visited.dedup();
        println!(
            "{:>5} {:>10.3} {:>6.3} {:>7.3}   {}",
            t.id,
            err(10),
            err(50),
            err(150),
            visited.len() - 1
        );
    }
    Ok(())
}
