//! Ground-truth discrete-time systems and sampled trajectory generation.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::HyperRect;

/// Identifier of the random source used for every sampled quantity in this crate.
pub const PRNG_ID: &str = "ChaCha8Rng (rand_chacha 0.3) seeded via seed_from_u64";

/// Seeded generator for stream `id` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, id: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ id)
}

/// A discrete-time system `x(k+1) = f(x(k), u(k))` with a bounded input law.
pub trait DiscreteSystem: Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn step(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>>;
    fn sample_input(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;

    /// Maps a freshly drawn initial state into the system's canonical coordinates.
    fn canonical_state(&self, x: Vec<f64>) -> Vec<f64> {
        x
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitCycleParams {
    pub tau: f64,
    pub omega: f64,
    pub mu: f64,
    pub delta: f64,
    pub wrap_theta: bool,
}

impl Default for LimitCycleParams {
    fn default() -> Self {
        LimitCycleParams {
            tau: 0.1,
            omega: 2.0 * PI / 3.0,
            mu: 0.2,
            delta: 1.5,
            wrap_theta: true,
        }
    }
}

impl LimitCycleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::invalid(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::invalid(format!(
                "delta must be non-negative, got {}",
                self.delta
            )));
        }
        if !self.omega.is_finite() || !self.mu.is_finite() {
            return Err(Error::invalid("omega and mu must be finite"));
        }
        Ok(())
    }

    /// Support of the input law, `[mu - delta, mu + delta]`.
    pub fn input_box(&self) -> HyperRect {
        HyperRect::from_bounds(&[(self.mu - self.delta, self.mu + self.delta)])
            .expect("validated parameters give a proper interval")
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    PI - (PI - theta).rem_euclid(2.0 * PI)
}

/// One step of the polar limit-cycle map:
/// `r' = (1 + tau) r - tau r^3 + tau u`, `theta' = theta + tau omega`.
pub fn limit_cycle_step(state: (f64, f64), u: f64, params: &LimitCycleParams) -> Result<(f64, f64)> {
    let (r, theta) = state;
    if !r.is_finite() || !theta.is_finite() || !u.is_finite() {
        return Err(Error::invalid("limit-cycle step needs finite state and input"));
    }
    let tau = params.tau;
    let r_next = (1.0 + tau) * r - tau * r * r * r + tau * u;
    let mut theta_next = theta + tau * params.omega;
    if params.wrap_theta {
        theta_next = wrap_angle(theta_next);
    }
    Ok((r_next, theta_next))
}

#[derive(Clone, Debug, Default)]
pub struct LimitCycle {
    pub params: LimitCycleParams,
}

impl LimitCycle {
    pub fn new(params: LimitCycleParams) -> Result<Self> {
        params.validate()?;
        Ok(LimitCycle { params })
    }
}

impl DiscreteSystem for LimitCycle {
    fn state_dim(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn step(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        if x.len() != 2 || u.len() != 1 {
            return Err(Error::invalid("limit cycle expects a 2-d state and a scalar input"));
        }
        let (r, theta) = limit_cycle_step((x[0], x[1]), u[0], &self.params)?;
        Ok(vec![r, theta])
    }

    fn sample_input(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let zeta: f64 = rng.gen_range(-1.0..=1.0);
        vec![self.params.mu + self.params.delta * zeta]
    }

    fn canonical_state(&self, mut x: Vec<f64>) -> Vec<f64> {
        if self.params.wrap_theta {
            x[1] = wrap_angle(x[1]);
        }
        x
    }
}

/// One sampled trajectory: states `x(0..=M)` and inputs `u(0..M)` on a unit time step.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub id: usize,
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new(id: usize, states: Vec<Vec<f64>>, inputs: Vec<Vec<f64>>) -> Result<Self> {
        if states.len() != inputs.len() + 1 {
            return Err(Error::invalid(format!(
                "trace {id}: {} states need {} inputs, got {}",
                states.len(),
                states.len().saturating_sub(1),
                inputs.len()
            )));
        }
        let n = states[0].len();
        if states.iter().any(|s| s.len() != n) {
            return Err(Error::invalid(format!("trace {id}: ragged state vectors")));
        }
        if let Some(m) = inputs.first().map(Vec::len) {
            if inputs.iter().any(|u| u.len() != m) {
                return Err(Error::invalid(format!("trace {id}: ragged input vectors")));
            }
        }
        Ok(Trace { id, states, inputs })
    }

    /// Number of transitions `M`.
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    pub fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.inputs.first().map(Vec::len)
    }

    /// Consecutive `(x(k), u(k), x(k+1))` triples.
    pub fn transitions(&self) -> impl Iterator<Item = (&[f64], &[f64], &[f64])> + '_ {
        self.inputs.iter().enumerate().map(move |(k, u)| {
            (
                self.states[k].as_slice(),
                u.as_slice(),
                self.states[k + 1].as_slice(),
            )
        })
    }
}

/// Runs `count` trajectories of `steps` transitions from initial states drawn
/// uniformly in `init_box`, with inputs drawn i.i.d. from the system's input law.
/// Trace `i` uses its own stream seeded by `seed ^ i`, so output is independent
/// of scheduling.
pub fn generate_traces<S: DiscreteSystem>(
    system: &S,
    count: usize,
    steps: usize,
    init_box: &HyperRect,
    seed: u64,
) -> Result<Vec<Trace>> {
    if count == 0 || steps == 0 {
        return Err(Error::invalid("trace count and length must be at least 1"));
    }
    init_box.check_dim(system.state_dim())?;

    (0..count)
        .into_par_iter()
        .map(|id| {
            let mut rng = stream_rng(seed, id as u64);
            let x0: Vec<f64> = init_box
                .lo()
                .iter()
                .zip(init_box.hi())
                .map(|(&l, &h)| if l < h { rng.gen_range(l..=h) } else { l })
                .collect();
            let mut states = vec![system.canonical_state(x0)];
            let mut inputs = Vec::with_capacity(steps);
            for _ in 0..steps {
                let u = system.sample_input(&mut rng);
                let next = system.step(states.last().unwrap(), &u)?;
                states.push(next);
                inputs.push(u);
            }
            Trace::new(id, states, inputs)
        })
        .collect()
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes traces as `trace_id,k,x1..xn,u1..um`; each trace's final state row
/// has empty input fields.
pub fn write_traces_csv<W: Write>(mut w: W, traces: &[Trace]) -> std::io::Result<()> {
    let Some(first) = traces.first() else {
        return writeln!(w, "trace_id,k");
    };
    let n = first.state_dim();
    let m = first.input_dim().unwrap_or(0);
    let mut header = vec!["trace_id".to_string(), "k".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    writeln!(w, "{}", header.join(","))?;
    for t in traces {
        for (k, x) in t.states.iter().enumerate() {
            let mut row = vec![t.id.to_string(), k.to_string()];
            row.extend(x.iter().map(|&v| fmt_f64(v)));
            match t.inputs.get(k) {
                Some(u) => row.extend(u.iter().map(|&v| fmt_f64(v))),
                None => row.extend(std::iter::repeat_n(String::new(), m)),
            }
            writeln!(w, "{}", row.join(","))?;
        }
    }
    Ok(())
}

/// Parses the trace CSV produced by [`write_traces_csv`].
pub fn read_traces_csv<R: BufRead>(r: R) -> Result<Vec<Trace>> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty trace file".into()))?
        .map_err(|e| Error::Parse(e.to_string()))?;
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    if cols.len() < 2 || cols[0] != "trace_id" || cols[1] != "k" {
        return Err(Error::Parse(format!("unexpected trace header `{header}`")));
    }
    let n = cols.iter().filter(|c| c.starts_with('x')).count();
    let m = cols.iter().filter(|c| c.starts_with('u')).count();
    if cols.len() != 2 + n + m {
        return Err(Error::Parse(format!("unexpected trace header `{header}`")));
    }

    let mut traces: Vec<Trace> = Vec::new();
    // (trace id, states, inputs, final row seen)
    type Partial = (usize, Vec<Vec<f64>>, Vec<Vec<f64>>, bool);
    let mut cur: Option<Partial> = None;
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Parse(format!("line {}: {what}", lineno + 2));
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 2 + n + m {
            return Err(bad("wrong field count"));
        }
        let id: usize = fields[0].parse().map_err(|_| bad("bad trace_id"))?;
        let k: usize = fields[1].parse().map_err(|_| bad("bad step index"))?;
        let parse = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
        let x = fields[2..2 + n].iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
        let u_fields = &fields[2 + n..];
        let u = if u_fields.iter().all(|s| s.is_empty()) {
            None
        } else {
            Some(u_fields.iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?)
        };

        if cur.as_ref().is_some_and(|c| c.0 != id) {
            let (cid, states, inputs, _) = cur.take().unwrap();
            traces.push(Trace::new(cid, states, inputs)?);
        }
        let entry = cur.get_or_insert_with(|| (id, Vec::new(), Vec::new(), false));
        if entry.3 {
            return Err(bad("row after a trace's final state"));
        }
        if k != entry.1.len() {
            return Err(bad("step indices must be consecutive from 0"));
        }
        entry.1.push(x);
        match u {
            Some(u) => entry.2.push(u),
            None => entry.3 = true,
        }
    }
    if let Some((cid, states, inputs, _)) = cur {
        traces.push(Trace::new(cid, states, inputs)?);
    }
    Ok(traces)
}
