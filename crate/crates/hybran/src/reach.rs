//! Interval reachability of a learned hybrid automaton by Split and Combine.
//!
//! A reachable set is a union of boxes, each tagged with the cell whose
//! network governs it. One step propagates every fragment through its cell's
//! network with interval arithmetic, splits the image boxes along the grid,
//! and combines the pieces into the next set.
//!
//! Splitting uses the same ownership rule as [`Partition::locate`]. The
//! outermost cells own everything beyond the domain faces they touch, so mass
//! that leaves the domain keeps being propagated by the network a simulation
//! would use there, and is reported as exterior volume rather than dropped.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::automaton::HybridAutomaton;
use crate::dynamics::fmt_f64;
use crate::error::{Error, Result};
use crate::geometry::{HyperRect, Partition};
use crate::nn::NeuralNet;

/// Fragments at or above this count are propagated on the rayon pool.
const PARALLEL_FRAGMENTS: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct Fragment {
    pub cell: usize,
    pub rect: HyperRect,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergePolicy {
    /// Pieces landing in the same cell are replaced by their bounding box.
    #[default]
    PerCellMerge,
    /// Every piece is kept, up to the fragment cap.
    ExactUnion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachConfig {
    pub horizon: usize,
    pub input_box: HyperRect,
    pub merge: MergePolicy,
    pub max_fragments: usize,
}

impl ReachConfig {
    pub fn new(horizon: usize, input_box: HyperRect) -> Self {
        ReachConfig {
            horizon,
            input_box,
            merge: MergePolicy::PerCellMerge,
            max_fragments: 4096,
        }
    }
}

/// Sound output box of `net` over `in_box`.
///
/// Affine rows use `sum_j min(w_j lo_j, w_j hi_j) + b` for the lower bound and
/// the max counterpart for the upper bound; activations are monotone and are
/// applied to both endpoints.
pub fn interval_forward(net: &NeuralNet, in_box: &HyperRect) -> Result<HyperRect> {
    if in_box.dim() != net.input_dim() {
        return Err(Error::invalid(format!(
            "network expects {} inputs, box has {} dimensions",
            net.input_dim(),
            in_box.dim()
        )));
    }
    let mut lo = in_box.lo().to_vec();
    let mut hi = in_box.hi().to_vec();
    for layer in net.layers() {
        let mut next_lo = Vec::with_capacity(layer.rows());
        let mut next_hi = Vec::with_capacity(layer.rows());
        for r in 0..layer.rows() {
            // same accumulation order as point evaluation
            let (mut acc_lo, mut acc_hi) = (0.0, 0.0);
            for ((w, l), h) in layer.row(r).iter().zip(&lo).zip(&hi) {
                let (a, b) = (w * l, w * h);
                acc_lo += a.min(b);
                acc_hi += a.max(b);
            }
            let act = layer.activation();
            next_lo.push(act.apply(acc_lo + layer.bias()[r]));
            next_hi.push(act.apply(acc_hi + layer.bias()[r]));
        }
        lo = next_lo;
        hi = next_hi;
    }
    if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
        return Err(Error::invalid("interval propagation overflowed"));
    }
    Ok(HyperRect::from_parts_unchecked(lo, hi))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub fragments: Vec<Fragment>,
    /// Volume of the input that lies outside the domain.
    pub exterior_volume: f64,
}

/// Intersects `rect` with the region owned by every cell. Fragments come out
/// in cell-index order and their volumes sum to the volume of `rect`.
pub fn split(rect: &HyperRect, p: &Partition) -> Result<Split> {
    p.domain().check_dim(rect.dim())?;
    let inside = p.domain().contains_rect(rect);
    // Exterior points break boundary ties toward the lower cell, interior points
    // toward the higher one; a box that leaves the domain keeps both sides.
    let closed = !inside;

    let mut axes: Vec<Vec<(usize, f64, f64)>> = Vec::with_capacity(rect.dim());
    for i in 0..rect.dim() {
        let cuts = p.cut_points(i);
        let n = p.segments()[i];
        let (l, h) = (rect.lo()[i], rect.hi()[i]);
        let mut pieces = Vec::new();
        for m in 0..n {
            let a = if m == 0 { f64::NEG_INFINITY } else { cuts[m] };
            let b = if m == n - 1 { f64::INFINITY } else { cuts[m + 1] };
            let below_upper = if closed || m == n - 1 { l <= b } else { l < b };
            if h >= a && below_upper {
                pieces.push((m, l.max(a), h.min(b)));
            }
        }
        axes.push(pieces);
    }

    let mut fragments = Vec::new();
    let mut pick = vec![0usize; axes.len()];
    if axes.iter().all(|a| !a.is_empty()) {
        loop {
            let multi: Vec<usize> = pick.iter().zip(&axes).map(|(&j, a)| a[j].0).collect();
            let lo = pick.iter().zip(&axes).map(|(&j, a)| a[j].1).collect();
            let hi = pick.iter().zip(&axes).map(|(&j, a)| a[j].2).collect();
            fragments.push(Fragment {
                cell: p.index_of(&multi),
                rect: HyperRect::from_parts_unchecked(lo, hi),
            });
            let mut i = 0;
            loop {
                if i == axes.len() {
                    break;
                }
                pick[i] += 1;
                if pick[i] < axes[i].len() {
                    break;
                }
                pick[i] = 0;
                i += 1;
            }
            if i == axes.len() {
                break;
            }
        }
    }
    fragments.sort_by_key(|f| f.cell);

    let exterior_volume = if inside {
        0.0
    } else {
        let within = rect.intersect(p.domain())?.map_or(0.0, |r| r.volume());
        (rect.volume() - within).max(0.0)
    };
    Ok(Split {
        fragments,
        exterior_volume,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub fragments: Vec<Fragment>,
    pub exterior_volume: f64,
}

/// One Split and Combine step from `fragments` under inputs in `u_box`.
pub fn step_reach(
    h: &HybridAutomaton,
    fragments: &[Fragment],
    u_box: &HyperRect,
    cfg: &ReachConfig,
) -> Result<StepOutput> {
    if fragments.is_empty() {
        return Err(Error::invalid("reach step needs at least one fragment"));
    }
    u_box.check_dim(h.input_dim())?;
    let image = |f: &Fragment| -> Result<Split> {
        let out = interval_forward(h.net(f.cell), &f.rect.product(u_box))?;
        split(&out, h.partition())
    };
    let splits: Vec<Split> = if fragments.len() >= PARALLEL_FRAGMENTS {
        fragments.par_iter().map(image).collect::<Result<_>>()?
    } else {
        fragments.iter().map(image).collect::<Result<_>>()?
    };
    let exterior_volume = splits.iter().map(|s| s.exterior_volume).sum();
    let pieces = splits.into_iter().flat_map(|s| s.fragments);

    let fragments = match cfg.merge {
        MergePolicy::PerCellMerge => {
            let mut merged: BTreeMap<usize, HyperRect> = BTreeMap::new();
            for f in pieces {
                merged
                    .entry(f.cell)
                    .and_modify(|r| r.expand_to(&f.rect))
                    .or_insert(f.rect);
            }
            merged
                .into_iter()
                .map(|(cell, rect)| Fragment { cell, rect })
                .collect()
        }
        MergePolicy::ExactUnion => {
            let mut all: Vec<Fragment> = pieces.collect();
            if all.len() > cfg.max_fragments {
                return Err(Error::FragmentOverflow {
                    count: all.len(),
                    cap: cfg.max_fragments,
                });
            }
            all.sort_by_key(|f| f.cell);
            all
        }
    };
    Ok(StepOutput {
        fragments,
        exterior_volume,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReachSet {
    /// Fragments of steps `k = 0..=horizon`.
    pub steps: Vec<Vec<Fragment>>,
    /// Wall-clock seconds spent producing each step.
    pub step_seconds: Vec<f64>,
    /// Volume that fell outside the domain when each step was split.
    pub exterior_volume: Vec<f64>,
}

impl ReachSet {
    pub fn horizon(&self) -> usize {
        self.steps.len() - 1
    }

    /// Whether `x` lies in the union of step `k`'s fragments.
    pub fn contains(&self, k: usize, x: &[f64]) -> bool {
        self.steps[k].iter().any(|f| f.rect.contains(x))
    }

    pub fn hull(&self, k: usize) -> HyperRect {
        HyperRect::bounding_box(self.steps[k].iter().map(|f| &f.rect)).expect("steps are nonempty")
    }

    /// Sum of fragment volumes at step `k` (overlaps counted twice).
    pub fn volume(&self, k: usize) -> f64 {
        self.steps[k].iter().map(|f| f.rect.volume()).sum()
    }

    pub fn fragment_count(&self) -> usize {
        self.steps.iter().map(Vec::len).sum()
    }

    /// Rows `k,cell,lo1..lon,hi1..hin`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.steps[0].first().map_or(0, |f| f.rect.dim());
        let mut header = vec!["k".to_string(), "cell".to_string()];
        header.extend((1..=n).map(|i| format!("lo{i}")));
        header.extend((1..=n).map(|i| format!("hi{i}")));
        writeln!(w, "{}", header.join(","))?;
        for (k, frags) in self.steps.iter().enumerate() {
            for f in frags {
                let mut row = vec![k.to_string(), f.cell.to_string()];
                row.extend(f.rect.lo().iter().map(|&v| fmt_f64(v)));
                row.extend(f.rect.hi().iter().map(|&v| fmt_f64(v)));
                writeln!(w, "{}", row.join(","))?;
            }
        }
        Ok(())
    }

    /// Rows `k,seconds`.
    pub fn write_timing_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,seconds")?;
        for (k, s) in self.step_seconds.iter().enumerate() {
            writeln!(w, "{k},{}", fmt_f64(*s))?;
        }
        Ok(())
    }

    /// Rows `k,volume,exterior_volume`.
    pub fn write_volume_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,volume,exterior_volume")?;
        for k in 0..self.steps.len() {
            writeln!(
                w,
                "{k},{},{}",
                fmt_f64(self.volume(k)),
                fmt_f64(self.exterior_volume[k])
            )?;
        }
        Ok(())
    }
}

/// Reachable sets of `h` for `cfg.horizon` steps from `init`.
pub fn reach(h: &HybridAutomaton, init: &HyperRect, cfg: &ReachConfig) -> Result<ReachSet> {
    init.check_dim(h.state_dim())?;
    let start = Instant::now();
    let first = split(init, h.partition())?;
    let mut steps = vec![first.fragments];
    let mut step_seconds = vec![start.elapsed().as_secs_f64()];
    let mut exterior_volume = vec![first.exterior_volume];
    for k in 1..=cfg.horizon {
        let t0 = Instant::now();
        let out = step_reach(h, &steps[k - 1], &cfg.input_box, cfg).map_err(|e| Error::Step {
            step: k,
            source: Box::new(e),
        })?;
        step_seconds.push(t0.elapsed().as_secs_f64());
        exterior_volume.push(out.exterior_volume);
        steps.push(out.fragments);
    }
    Ok(ReachSet {
        steps,
        step_seconds,
        exterior_volume,
    })
}

/// Reachability of a lone network, i.e. a one-cell automaton whose cell owns
/// the whole state space.
pub fn reach_single(net: &NeuralNet, init: &HyperRect, u_box: &HyperRect, horizon: usize) -> Result<ReachSet> {
    let h = HybridAutomaton::assemble(Partition::trivial(init.clone()), vec![net.clone()], &[], u_box.clone())?;
    reach(&h, init, &ReachConfig::new(horizon, u_box.clone()))
}
