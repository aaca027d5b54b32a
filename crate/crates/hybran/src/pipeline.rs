//! End-to-end fitting of hybrid and single-network models from traces.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::automaton::{HybridAutomaton, ModelMeta};
use crate::dataset::{self, DatasetStats, SegmentMode, DEFAULT_MIN_PAIRS};
use crate::dynamics::Trace;
use crate::error::{Error, Result};
use crate::geometry::{HyperRect, Partition};
use crate::nn::{self, Architecture, TrainConfig};

#[derive(Clone, Debug)]
pub struct FitConfig {
    pub hidden: usize,
    pub train: TrainConfig,
    pub segment_mode: SegmentMode,
    pub min_pairs: usize,
    /// Serve sparse cells with the global network instead of their own.
    pub fallback_sparse: bool,
    pub parallel: bool,
}

impl FitConfig {
    pub fn new(hidden: usize) -> Self {
        FitConfig {
            hidden,
            train: TrainConfig::default(),
            segment_mode: SegmentMode::Source,
            min_pairs: DEFAULT_MIN_PAIRS,
            fallback_sparse: false,
            parallel: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub automaton: HybridAutomaton,
    pub stats: DatasetStats,
    /// Final training loss per cell; `None` for cells served by the fallback.
    pub cell_losses: Vec<Option<f64>>,
    /// Wall-clock of all training, including any fallback network.
    pub wall_seconds: f64,
    /// Sum of the individual training jobs.
    pub serial_seconds: f64,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn dims(traces: &[Trace], input_box: &HyperRect) -> Result<(usize, usize)> {
    let first = traces
        .first()
        .ok_or_else(|| Error::invalid("no training traces"))?;
    let n_u = first.input_dim().unwrap_or(input_box.dim());
    if n_u != input_box.dim() {
        return Err(Error::invalid("input box does not match trace inputs"));
    }
    Ok((first.state_dim(), n_u))
}

/// Trains one shallow network per cell of `partition`. Cells without data
/// (and sparse cells when `fallback_sparse` is set) get a network trained on
/// all pairs.
pub fn fit_hybrid(
    traces: &[Trace],
    partition: Partition,
    input_box: HyperRect,
    cfg: &FitConfig,
) -> Result<FitReport> {
    let (n_x, n_u) = dims(traces, &input_box)?;
    let arch = Architecture::shallow(n_x + n_u, cfg.hidden, n_x);
    let start = Instant::now();

    let datasets = dataset::segment(traces, &partition, cfg.segment_mode)?;
    let stats = dataset::dataset_stats(&datasets, cfg.min_pairs);
    let own: Vec<bool> = stats
        .cells
        .iter()
        .map(|c| c.pairs > 0 && !(cfg.fallback_sparse && c.sparse))
        .collect();
    let trainable: Vec<_> = datasets
        .into_iter()
        .zip(&own)
        .filter(|(_, &o)| o)
        .map(|(d, _)| d)
        .collect();
    let trained = nn::train_all(&trainable, &arch, &cfg.train, cfg.parallel)?;
    let mut serial_seconds = trained.serial_seconds();

    let fallback_cells: Vec<usize> = (0..partition.len()).filter(|&q| !own[q]).collect();
    let fallback = if fallback_cells.is_empty() {
        None
    } else {
        let global_cfg = TrainConfig {
            seed: cfg.train.seed ^ partition.len() as u64,
            ..cfg.train.clone()
        };
        let rep = nn::train(&dataset::pool(traces), &arch, &global_cfg)?;
        serial_seconds += rep.seconds;
        Some(rep.net)
    };

    let mut reports = trained.reports.into_iter();
    let mut nets = Vec::with_capacity(partition.len());
    let mut cell_losses = Vec::with_capacity(partition.len());
    for &o in &own {
        if o {
            let rep = reports.next().expect("one report per trainable cell");
            cell_losses.push(Some(rep.final_loss));
            nets.push(rep.net);
        } else {
            cell_losses.push(None);
            nets.push(fallback.clone().expect("fallback trained when needed"));
        }
    }
    let wall_seconds = start.elapsed().as_secs_f64();

    let meta = ModelMeta {
        seed: cfg.train.seed,
        arch: Some(arch),
        trained_at: now_unix(),
        mode: "hybrid".into(),
        sparse_cells: stats.sparse_cells(),
        fallback_cells,
    };
    let automaton = HybridAutomaton::assemble(partition, nets, traces, input_box)?.with_meta(meta);
    Ok(FitReport {
        automaton,
        stats,
        cell_losses,
        wall_seconds,
        serial_seconds,
    })
}

/// Trains one network on all pairs and wraps it as a one-cell automaton over `domain`.
pub fn fit_single(
    traces: &[Trace],
    domain: HyperRect,
    input_box: HyperRect,
    cfg: &FitConfig,
) -> Result<FitReport> {
    let (n_x, n_u) = dims(traces, &input_box)?;
    let arch = Architecture::shallow(n_x + n_u, cfg.hidden, n_x);
    let start = Instant::now();
    let data = dataset::pool(traces);
    let stats = dataset::dataset_stats(std::slice::from_ref(&data), cfg.min_pairs);
    let rep = nn::train(&data, &arch, &cfg.train)?;
    let wall_seconds = start.elapsed().as_secs_f64();
    let meta = ModelMeta {
        seed: cfg.train.seed,
        arch: Some(arch),
        trained_at: now_unix(),
        mode: "single".into(),
        sparse_cells: stats.sparse_cells(),
        fallback_cells: Vec::new(),
    };
    let automaton =
        HybridAutomaton::assemble(Partition::trivial(domain), vec![rep.net], traces, input_box)?.with_meta(meta);
    Ok(FitReport {
        automaton,
        stats,
        cell_losses: vec![Some(rep.final_loss)],
        wall_seconds,
        serial_seconds: rep.seconds,
    })
}
