//! Interval propagation through a random 3 -> 20 -> 2 tanh network, checked
//! against Monte Carlo samples of the same input box.
//!
//!     cargo run --release --example interval_bounds

use hybran::dynamics::stream_rng;
use hybran::{interval_forward, Architecture, HyperRect, NeuralNet};
use rand::Rng;

fn main() -> hybran::Result<()> {
    let mut rng = stream_rng(42, 0);
    let net = NeuralNet::xavier(&Architecture::shallow(3, 20, 2), &mut rng);
    for width in [0.01, 0.1, 1.0] {
        let b = HyperRect::from_bounds(&[(0.5, 0.5 + width), (-1.0, -1.0 + width), (0.2, 0.2 + width)])?;
        let bound = interval_forward(&net, &b)?;

        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for _ in 0..100_000 {
            let x: Vec<f64> = b.lo().iter().zip(b.hi()).map(|(&l, &h)| rng.gen_range(l..=h)).collect();
            let y = net.forward(&x)?;
            for i in 0..2 {
                lo[i] = lo[i].min(y[i]);
                hi[i] = hi[i].max(y[i]);
            }
        }
        let sampled = HyperRect::new(lo.to_vec(), hi.to_vec())?;
        println!(
            "input width {width:>4}: bound widths {:.4?}, sampled widths {:.4?}, sound {}",
            bound.widths(),
            sampled.widths(),
            bound.contains_rect(&sampled)
        );
    }
    Ok(())
}
