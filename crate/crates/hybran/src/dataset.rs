//! Per-cell training data extracted from sampled traces.

use serde::Serialize;

use crate::dynamics::Trace;
use crate::error::{Error, Result};
use crate::geometry::Partition;

pub const DEFAULT_MIN_PAIRS: usize = 10;

/// One training example: network input `[x(k); u(k)]` and target `x(k+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Pair {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellDataset {
    pub cell: usize,
    pub pairs: Vec<Pair>,
}

impl CellDataset {
    pub fn new(cell: usize, pairs: Vec<Pair>) -> Self {
        CellDataset { cell, pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// How a transition `x(k) -> x(k+1)` is assigned to a cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SegmentMode {
    /// Keyed on the cell of `x(k)`; boundary-crossing steps train the source cell.
    #[default]
    Source,
    /// Keeps a step only when `x(k+1)` also lies in the (closed) source cell;
    /// boundary-crossing steps are dropped.
    WithinCell,
}

/// Splits every consecutive sample pair of `traces` into the dataset of the cell
/// containing `x(k)`. Exterior states go to their nearest cell.
pub fn segment(traces: &[Trace], p: &Partition, mode: SegmentMode) -> Result<Vec<CellDataset>> {
    let mut out: Vec<CellDataset> = (0..p.len()).map(|q| CellDataset::new(q, Vec::new())).collect();
    for t in traces {
        if t.state_dim() != p.dim() {
            return Err(Error::invalid(format!(
                "trace {} has state dimension {}, partition has {}",
                t.id,
                t.state_dim(),
                p.dim()
            )));
        }
        for (x, u, next) in t.transitions() {
            let q = p.locate(x)?.cell;
            if mode == SegmentMode::WithinCell && !p.cell(q).contains(next) {
                continue;
            }
            let mut input = Vec::with_capacity(x.len() + u.len());
            input.extend_from_slice(x);
            input.extend_from_slice(u);
            out[q].pairs.push(Pair {
                input,
                target: next.to_vec(),
            });
        }
    }
    Ok(out)
}

/// All pairs of all traces in one dataset, as used by a single global network.
pub fn pool(traces: &[Trace]) -> CellDataset {
    let pairs = traces
        .iter()
        .flat_map(|t| t.transitions())
        .map(|(x, u, next)| Pair {
            input: x.iter().chain(u).copied().collect(),
            target: next.to_vec(),
        })
        .collect();
    CellDataset::new(0, pairs)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CellStat {
    pub cell: usize,
    pub pairs: usize,
    pub sparse: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetStats {
    pub cells: Vec<CellStat>,
}

impl DatasetStats {
    pub fn total(&self) -> usize {
        self.cells.iter().map(|c| c.pairs).sum()
    }

    /// Cells holding fewer pairs than the configured minimum.
    pub fn sparse_cells(&self) -> Vec<usize> {
        self.cells.iter().filter(|c| c.sparse).map(|c| c.cell).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.cells).expect("plain data serializes")
    }
}

pub fn dataset_stats(datasets: &[CellDataset], min_pairs: usize) -> DatasetStats {
    DatasetStats {
        cells: datasets
            .iter()
            .map(|d| CellStat {
                cell: d.cell,
                pairs: d.len(),
                sparse: d.len() < min_pairs,
            })
            .collect(),
    }
}

/// Trace-level holdout: the last `round(fraction * L)` traces form the test set.
pub fn holdout_split(traces: &[Trace], fraction: f64) -> Result<(Vec<Trace>, Vec<Trace>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::invalid(format!("holdout fraction {fraction} not in [0, 1)")));
    }
    let held = (fraction * traces.len() as f64).round() as usize;
    let cut = traces.len() - held.min(traces.len());
    if cut == 0 {
        return Err(Error::invalid("holdout leaves no training traces"));
    }
    Ok((traces[..cut].to_vec(), traces[cut..].to_vec()))
}
