//! One Split and Combine step on a two-cell toy automaton, with both merge
//! policies.
//!
//!     cargo run --example split_combine

use hybran::nn::Layer;
use hybran::reach::step_reach;
use hybran::{split, Activation, HybridAutomaton, HyperRect, MergePolicy, NeuralNet, Partition, ReachConfig};

fn main() -> hybran::Result<()> {
    let p = Partition::new(HyperRect::from_bounds(&[(-4.0, 4.0), (-3.0, 3.0)])?, &[4, 3])?;
    let junction = HyperRect::from_bounds(&[(-0.5, 0.5), (0.5, 1.5)])?;
    let s = split(&junction, &p)?;
    println!("box {:?}..{:?} splits into", junction.lo(), junction.hi());
    for f in &s.fragments {
        println!("  cell {:>2}: {:?}..{:?}", f.cell, f.rect.lo(), f.rect.hi());
    }

    // rotate-and-shrink in every cell, so images straddle cell faces
    let w = vec![vec![0.0, -0.9, 0.0], vec![0.9, 0.0, 1.0]];
    let net = NeuralNet::new(vec![Layer::new(w, vec![0.0, 0.0], Activation::Identity)?])?;
    let u_box = HyperRect::from_bounds(&[(-0.1, 0.1)])?;
    let h = HybridAutomaton::assemble(p, vec![net; 12], &[], u_box.clone())?;

    for merge in [MergePolicy::PerCellMerge, MergePolicy::ExactUnion] {
        let mut cfg = ReachConfig::new(1, u_box.clone());
        cfg.merge = merge;
        let next = step_reach(&h, &s.fragments, &u_box, &cfg)?;
        println!("{merge:?}: {} fragments", next.fragments.len());
        for f in &next.fragments {
            println!("  cell {:>2}: {:.3?}..{:.3?}", f.cell, f.rect.lo(), f.rect.hi());
        }
    }
    Ok(())
}
