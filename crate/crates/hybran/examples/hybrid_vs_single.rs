//! Hybrid (12 x 20 neurons) versus single (200 neurons) model on the limit
//! cycle: held-out MSE and training time.
//!
//!     cargo run --release --example hybrid_vs_single -- [seed] [epochs]

use std::f64::consts::PI;

use hybran::dataset::holdout_split;
use hybran::pipeline::{fit_hybrid, fit_single, FitConfig};
use hybran::{generate_traces, HyperRect, LimitCycle, Partition};

fn main() -> hybran::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("seed"));
    let epochs: usize = args.next().map_or(2000, |s| s.parse().expect("epochs"));

    let system = LimitCycle::default();
    let domain = HyperRect::from_bounds(&[(-4.0, 4.0), (-PI, PI)])?;
    let traces = generate_traces(&system, 50, 150, &domain, seed)?;
    let (train, test) = holdout_split(&traces, 0.2)?;
    let input_box = system.params.input_box();

    let mut hybrid_cfg = FitConfig::new(20);
    hybrid_cfg.train.seed = seed;
    hybrid_cfg.train.epochs = epochs;
    let partition = Partition::new(domain.clone(), &[4, 3])?;
    let hybrid = fit_hybrid(&train, partition, input_box.clone(), &hybrid_cfg)?;

    let mut single_cfg = FitConfig::new(200);
    single_cfg.train = hybrid_cfg.train.clone();
    let single = fit_single(&train, domain, input_box, &single_cfg)?;

    let h_mse = hybrid.automaton.evaluate_mse(&test)?;
    let s_mse = single.automaton.evaluate_mse(&test)?;

    println!("{:<28} {:>10} {:>16}", "method", "MSE", "training time");
    println!("{:<28} {:>10.4} {:>14.2} s", "single network (200)", s_mse.mse, single.wall_seconds);
    println!(
        "{:<28} {:>10.4} {:>14.2} s  (serial sum {:.2} s)",
        "hybrid automaton (12 x 20)", h_mse.mse, hybrid.wall_seconds, hybrid.serial_seconds
    );
    println!();
    println!("per-cell held-out MSE (hybrid):");
    for c in &h_mse.per_cell {
        let train_pairs = hybrid.stats.cells[c.cell].pairs;
        match c.mse {
            Some(m) => println!("  cell {:>2}: {:>5} train pairs, {:>4} test pairs, mse {m:.4}", c.cell, train_pairs, c.pairs),
            None => println!("  cell {:>2}: {:>5} train pairs, no test pairs", c.cell, train_pairs),
        }
    }
    Ok(())
}
