//! Per-step reach time and area of the hybrid model next to the 200-neuron
//! single network on the same query.
//!
//!     cargo run --release --example reach_timing -- [epochs]

use std::f64::consts::PI;

use hybran::pipeline::{fit_hybrid, fit_single, FitConfig};
use hybran::{generate_traces, reach, HyperRect, LimitCycle, Partition, ReachConfig};

fn main() -> hybran::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(2000, |s| s.parse().expect("epochs"));
    let system = LimitCycle::default();
    let domain = HyperRect::from_bounds(&[(-4.0, 4.0), (-PI, PI)])?;
    let traces = generate_traces(&system, 50, 150, &domain, 7)?;
    let u = system.params.input_box();

    let mut cfg = FitConfig::new(20);
    cfg.train.epochs = epochs;
    let hybrid = fit_hybrid(&traces, Partition::new(domain.clone(), &[4, 3])?, u.clone(), &cfg)?.automaton;
    cfg.hidden = 200;
    let single = fit_single(&traces, domain, u, &cfg)?.automaton;

    let init = HyperRect::from_bounds(&[(-3.02, -3.0), (-2.603, -2.5)])?;
    let q = ReachConfig::new(200, HyperRect::from_bounds(&[(-1.3, 1.7)])?);
    let h = reach(&hybrid, &init, &q)?;
    let s = reach(&single, &init, &q)?;

    let mean = |v: &[f64]| v[1..].iter().sum::<f64>() / (v.len() - 1) as f64 * 1e6;
    println!("mean step time: hybrid {:.2} us, single {:.2} us", mean(&h.step_seconds), mean(&s.step_seconds));
    println!("   k   hybrid area   single area");
    for k in [1, 2, 5, 10, 20, 50, 100, 200] {
        println!("{k:>4} {:>13.4} {:>13.4}", h.volume(k), s.volume(k));
    }
    let tighter = (0..=200).filter(|&k| h.volume(k) <= s.volume(k)).count();
    println!("hybrid area <= single area on {tighter} of 201 steps");
    Ok(())
}
