//! Uniform grid partition of the limit-cycle state space and point location.
//!
//!     cargo run --example partition

use hybran::{HyperRect, Partition};

fn main() -> hybran::Result<()> {
    let p = Partition::new(HyperRect::from_bounds(&[(-4.0, 4.0), (-3.0, 3.0)])?, &[4, 3])?;
    println!("{} cells", p.len());
    for i in 0..p.dim() {
        println!("cuts along x{}: {:?}", i + 1, p.cut_points(i));
    }
    for (q, c) in p.cells().iter().enumerate() {
        println!("cell {q:>2} {:?}  lo {:?} hi {:?}", p.multi_index(q), c.lo(), c.hi());
    }

    // faces belong to the upper cell, the outer faces to the boundary cell,
    // and points outside the domain to the nearest cell
    for x in [[0.0, 0.0], [-2.0, -1.0], [4.0, 3.0], [9.0, -0.5], [-5.0, 7.0]] {
        let loc = p.locate(&x)?;
        println!("{x:?} -> cell {}{}", loc.cell, if loc.exterior { " (exterior)" } else { "" });
    }
    Ok(())
}
