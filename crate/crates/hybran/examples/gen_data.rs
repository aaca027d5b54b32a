//! Samples limit-cycle traces, writes them as CSV and prints how the
//! transitions spread over a 4 x 3 grid.
//!
//!     cargo run --release --example gen_data -- [out.csv] [seed]

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;

use hybran::dataset::{dataset_stats, segment, SegmentMode, DEFAULT_MIN_PAIRS};
use hybran::dynamics::write_traces_csv;
use hybran::{generate_traces, HyperRect, LimitCycle, Partition};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "limit_cycle.csv".into());
    let seed: u64 = args.next().map_or(Ok(7), |s| s.parse())?;

    let domain = HyperRect::from_bounds(&[(-4.0, 4.0), (-PI, PI)])?;
    let traces = generate_traces(&LimitCycle::default(), 50, 150, &domain, seed)?;
    write_traces_csv(BufWriter::new(File::create(&out)?), &traces)?;
    println!("wrote {} traces of {} steps to {out}", traces.len(), traces[0].steps());

    let p = Partition::new(domain, &[4, 3])?;
    let stats = dataset_stats(&segment(&traces, &p, SegmentMode::Source)?, DEFAULT_MIN_PAIRS);
    for c in &stats.cells {
        println!("cell {:>2}: {:>5} pairs{}", c.cell, c.pairs, if c.sparse { " (sparse)" } else { "" });
    }
    println!("total {}", stats.total());
    Ok(())
}
