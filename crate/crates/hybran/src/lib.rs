//! Data-driven hybrid automata built from small neural networks.
//!
//! The state domain is cut into a uniform grid of boxes. Each cell gets its own
//! shallow network trained on the sampled transitions that start in it, and
//! transitions between cells are read off the data. Reachable sets of the
//! learned model are computed with interval propagation plus Split and Combine.
//!
//! The modules follow the pipeline:
//!
//! - [`geometry`]: boxes and grid partitions
//! - [`dynamics`]: ground-truth systems and trace generation
//! - [`dataset`]: per-cell training pairs
//! - [`nn`]: networks and training
//! - [`automaton`]: the assembled model, simulation and MSE
//! - [`reach`]: interval reachability
//! - [`pipeline`]: one-call fitting of hybrid and single-network models
//! - [`cli`]: the `hybran` command-line front end

pub mod automaton;
pub mod cli;
pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod nn;
pub mod pipeline;
pub mod reach;
pub mod svg;

pub use automaton::{evaluate_mse, HybridAutomaton, MseReport, OneStepModel, SimResult};
pub use dataset::{segment, CellDataset, Pair, SegmentMode};
pub use dynamics::{generate_traces, limit_cycle_step, DiscreteSystem, LimitCycle, LimitCycleParams, Trace};
pub use error::{Error, Result};
pub use geometry::{HyperRect, Location, Partition};
pub use nn::{gradient_check, train, train_all, Activation, Architecture, NeuralNet, TrainConfig};
pub use reach::{interval_forward, reach, reach_single, split, step_reach, Fragment, MergePolicy, ReachConfig, ReachSet};
