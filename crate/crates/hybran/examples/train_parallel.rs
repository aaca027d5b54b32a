//! Per-cell training jobs run serially and on the rayon pool. Both runs give
//! identical networks; only the wall-clock differs.
//!
//!     HYBRAN_THREADS=4 cargo run --release --example train_parallel

use std::f64::consts::PI;

use hybran::{generate_traces, segment, train_all, Architecture, HyperRect, LimitCycle, Partition, SegmentMode, TrainConfig};

fn main() -> hybran::Result<()> {
    if let Some(n) = std::env::var("HYBRAN_THREADS").ok().and_then(|v| v.parse().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let domain = HyperRect::from_bounds(&[(-4.0, 4.0), (-PI, PI)])?;
    let traces = generate_traces(&LimitCycle::default(), 50, 150, &domain, 7)?;
    let datasets: Vec<_> = segment(&traces, &Partition::new(domain, &[4, 3])?, SegmentMode::Source)?
        .into_iter()
        .filter(|d| !d.is_empty())
        .collect();
    let arch = Architecture::shallow(3, 20, 2);
    let cfg = TrainConfig::default();

    let serial = train_all(&datasets, &arch, &cfg, false)?;
    let parallel = train_all(&datasets, &arch, &cfg, true)?;
    let same = serial.reports.iter().zip(&parallel.reports).all(|(a, b)| a.net == b.net);
    println!("{} cells on {} threads", datasets.len(), rayon::current_num_threads());
    println!("serial   {:.2} s", serial.wall_seconds);
    println!("parallel {:.2} s (jobs sum to {:.2} s)", parallel.wall_seconds, parallel.serial_seconds());
    println!("identical networks: {same}");
    Ok(())
}
