//! 200-step reachable set of the learned limit-cycle model from a small
//! initial box, checked against Monte Carlo runs of the same model, and
//! written out as CSV plus an SVG with the runs overlaid.
//!
//!     cargo run --release --example reach_limit_cycle -- [out_dir]

use std::f64::consts::PI;
use std::fs::{self, File};

use hybran::dynamics::stream_rng;
use hybran::pipeline::{fit_hybrid, FitConfig};
use hybran::{generate_traces, reach, svg, HyperRect, LimitCycle, Partition, ReachConfig};
use rand::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "reach_out".into()));
    fs::create_dir_all(&out)?;

    let system = LimitCycle::default();
    let domain = HyperRect::from_bounds(&[(-4.0, 4.0), (-PI, PI)])?;
    let traces = generate_traces(&system, 50, 150, &domain, 7)?;
    let fit = fit_hybrid(&traces, Partition::new(domain.clone(), &[4, 3])?, system.params.input_box(), &FitConfig::new(20))?;
    let model = &fit.automaton;

    let init = HyperRect::from_bounds(&[(-3.02, -3.0), (-2.603, -2.5)])?;
    let u_box = HyperRect::from_bounds(&[(-1.3, 1.7)])?;
    let set = reach(model, &init, &ReachConfig::new(200, u_box.clone()))?;

    let mut runs = Vec::new();
    let mut violations = 0;
    for i in 0..1000 {
        let mut rng = stream_rng(1, i);
        let x0 = [rng.gen_range(-3.02..=-3.0), rng.gen_range(-2.603..=-2.5)];
        let inputs: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.gen_range(-1.3..=1.7)]).collect();
        let traj = model.simulate(&x0, &inputs)?.trajectory;
        violations += traj.iter().enumerate().filter(|(k, x)| !set.contains(*k, x)).count();
        runs.push(traj);
    }

    set.write_csv(File::create(out.join("reach.csv"))?)?;
    set.write_volume_csv(File::create(out.join("volume.csv"))?)?;
    set.write_timing_csv(File::create(out.join("timing.csv"))?)?;
    runs.truncate(30);
    fs::write(out.join("reach.svg"), svg::render(&set, &domain, &runs))?;

    for k in [0, 1, 5, 10, 50, 200] {
        println!("k={k:>3}: {:>2} fragments, area {:.4}", set.steps[k].len(), set.volume(k));
    }
    println!("containment violations over 1000 runs: {violations}");
    println!("files in {}", out.display());
    Ok(())
}
