//! The learned hybrid automaton: one network per grid cell plus transitions
//! observed in the data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dynamics::Trace;
use crate::error::{Error, Result};
use crate::geometry::{HyperRect, Partition};
use crate::nn::{Architecture, NeuralNet};

pub const MODEL_VERSION: u32 = 1;

/// Directed edge between two cells with the bounding box of the states that
/// were observed taking it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub guard: HyperRect,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub seed: u64,
    pub arch: Option<Architecture>,
    /// Unix seconds.
    pub trained_at: u64,
    #[serde(default)]
    pub mode: String,
    /// Cells whose training set fell below the sparse threshold.
    #[serde(default)]
    pub sparse_cells: Vec<usize>,
    /// Cells served by the global fallback network.
    #[serde(default)]
    pub fallback_cells: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct HybridAutomaton {
    partition: Partition,
    nets: Vec<NeuralNet>,
    transitions: Vec<Transition>,
    input_box: HyperRect,
    meta: ModelMeta,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    version: u32,
    partition: Partition,
    input_box: HyperRect,
    nets: Vec<NeuralNet>,
    transitions: Vec<Transition>,
    #[serde(default)]
    meta: ModelMeta,
}

impl TryFrom<RawModel> for HybridAutomaton {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        if raw.version != MODEL_VERSION {
            return Err(Error::invalid(format!("unsupported model version {}", raw.version)));
        }
        let h = HybridAutomaton {
            partition: raw.partition,
            nets: raw.nets,
            transitions: raw.transitions,
            input_box: raw.input_box,
            meta: raw.meta,
        };
        h.validate()?;
        Ok(h)
    }
}

impl From<HybridAutomaton> for RawModel {
    fn from(h: HybridAutomaton) -> Self {
        RawModel {
            version: MODEL_VERSION,
            partition: h.partition,
            input_box: h.input_box,
            nets: h.nets,
            transitions: h.transitions,
            meta: h.meta,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next: Vec<f64>,
    pub cell: usize,
    pub exterior: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimResult {
    pub trajectory: Vec<Vec<f64>>,
    /// Cell of each trajectory state.
    pub cells: Vec<usize>,
    /// Indices `k` where `trajectory[k]` was outside the domain.
    pub exterior_steps: Vec<usize>,
}

impl HybridAutomaton {
    /// Builds the automaton and infers transitions from consecutive samples of
    /// `traces` that change cell. Witness states outside the domain are clamped
    /// onto their source cell before entering the guard.
    pub fn assemble(
        partition: Partition,
        nets: Vec<NeuralNet>,
        traces: &[Trace],
        input_box: HyperRect,
    ) -> Result<Self> {
        let mut guards: BTreeMap<(usize, usize), HyperRect> = BTreeMap::new();
        for t in traces {
            if t.state_dim() != partition.dim() {
                return Err(Error::invalid(format!(
                    "trace {} does not match the partition dimension",
                    t.id
                )));
            }
            for (x, _, next) in t.transitions() {
                let from = partition.locate(x)?.cell;
                let to = partition.locate(next)?.cell;
                if from == to {
                    continue;
                }
                let witness = HyperRect::point(&partition.cell(from).clamp(x))?;
                guards
                    .entry((from, to))
                    .and_modify(|g| g.expand_to(&witness))
                    .or_insert(witness);
            }
        }
        let transitions = guards
            .into_iter()
            .map(|((from, to), guard)| Transition { from, to, guard })
            .collect();
        let h = HybridAutomaton {
            partition,
            nets,
            transitions,
            input_box,
            meta: ModelMeta::default(),
        };
        h.validate()?;
        Ok(h)
    }

    pub fn with_meta(mut self, meta: ModelMeta) -> Self {
        self.meta = meta;
        self
    }

    fn validate(&self) -> Result<()> {
        let p = &self.partition;
        if self.nets.len() != p.len() {
            return Err(Error::invalid(format!(
                "{} networks for {} cells",
                self.nets.len(),
                p.len()
            )));
        }
        let n_x = p.dim();
        let n_u = self.input_box.dim();
        for (q, net) in self.nets.iter().enumerate() {
            if net.input_dim() != n_x + n_u || net.output_dim() != n_x {
                return Err(Error::invalid(format!(
                    "network {q} maps {} -> {}, expected {} -> {n_x}",
                    net.input_dim(),
                    net.output_dim(),
                    n_x + n_u
                )));
            }
        }
        for t in &self.transitions {
            if t.from >= p.len() || t.to >= p.len() || t.from == t.to {
                return Err(Error::invalid(format!(
                    "invalid transition {} -> {}",
                    t.from, t.to
                )));
            }
            if !p.cell(t.from).contains_rect(&t.guard) {
                return Err(Error::invalid(format!(
                    "guard of transition {} -> {} leaves its source cell",
                    t.from, t.to
                )));
            }
        }
        Ok(())
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn nets(&self) -> &[NeuralNet] {
        &self.nets
    }

    pub fn net(&self, q: usize) -> &NeuralNet {
        &self.nets[q]
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn input_box(&self) -> &HyperRect {
        &self.input_box
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    pub fn state_dim(&self) -> usize {
        self.partition.dim()
    }

    pub fn input_dim(&self) -> usize {
        self.input_box.dim()
    }

    /// Applies the network of the cell owning `x`.
    pub fn step(&self, x: &[f64], u: &[f64]) -> Result<StepOutcome> {
        if u.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "expected {} inputs, got {}",
                self.input_dim(),
                u.len()
            )));
        }
        let loc = self.partition.locate(x)?;
        let mut input = Vec::with_capacity(x.len() + u.len());
        input.extend_from_slice(x);
        input.extend_from_slice(u);
        Ok(StepOutcome {
            next: self.nets[loc.cell].forward(&input)?,
            cell: loc.cell,
            exterior: loc.exterior,
        })
    }

    pub fn simulate(&self, x0: &[f64], inputs: &[Vec<f64>]) -> Result<SimResult> {
        let mut trajectory = vec![x0.to_vec()];
        let mut cells = Vec::with_capacity(inputs.len() + 1);
        let mut exterior_steps = Vec::new();
        for (k, u) in inputs.iter().enumerate() {
            let out = self.step(&trajectory[k], u)?;
            cells.push(out.cell);
            if out.exterior {
                exterior_steps.push(k);
            }
            trajectory.push(out.next);
        }
        let last = self.partition.locate(trajectory.last().unwrap())?;
        cells.push(last.cell);
        if last.exterior {
            exterior_steps.push(inputs.len());
        }
        Ok(SimResult {
            trajectory,
            cells,
            exterior_steps,
        })
    }

    pub fn evaluate_mse(&self, traces: &[Trace]) -> Result<MseReport> {
        evaluate_mse(self, traces)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("model JSON: {e}")))
    }
}

/// Anything that predicts `x(k+1)` from `(x(k), u(k))` and reports which cell
/// produced the prediction.
pub trait OneStepModel {
    fn cell_count(&self) -> usize;
    fn predict(&self, x: &[f64], u: &[f64]) -> Result<(Vec<f64>, usize)>;
}

impl OneStepModel for HybridAutomaton {
    fn cell_count(&self) -> usize {
        self.partition.len()
    }

    fn predict(&self, x: &[f64], u: &[f64]) -> Result<(Vec<f64>, usize)> {
        let out = self.step(x, u)?;
        Ok((out.next, out.cell))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellMse {
    pub cell: usize,
    pub pairs: usize,
    /// `None` when no test pair fell in the cell.
    pub mse: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MseReport {
    pub mse: f64,
    pub pairs: usize,
    pub per_cell: Vec<CellMse>,
}

/// Mean over all one-step predictions of the squared error norm
/// `||model(x(k), u(k)) - x(k+1)||^2`.
pub fn evaluate_mse<M: OneStepModel + ?Sized>(model: &M, traces: &[Trace]) -> Result<MseReport> {
    let total_steps: usize = traces.iter().map(Trace::steps).sum();
    if total_steps == 0 {
        return Err(Error::invalid("MSE needs at least one test transition"));
    }
    let n = model.cell_count();
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for t in traces {
        for (x, u, next) in t.transitions() {
            let (pred, q) = model.predict(x, u)?;
            if pred.len() != next.len() {
                return Err(Error::invalid("prediction dimension does not match the trace"));
            }
            sums[q] += pred.iter().zip(next).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            counts[q] += 1;
        }
    }
    Ok(MseReport {
        mse: sums.iter().sum::<f64>() / total_steps as f64,
        pairs: total_steps,
        per_cell: sums
            .iter()
            .zip(&counts)
            .enumerate()
            .map(|(cell, (&s, &c))| CellMse {
                cell,
                pairs: c,
                mse: (c > 0).then(|| s / c as f64),
            })
            .collect(),
    })
}
