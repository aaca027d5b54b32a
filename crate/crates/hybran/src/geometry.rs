//! Axis-aligned hyper-rectangles and uniform grid partitions of a state domain.
//!
//! Cells of a [`Partition`] are closed boxes whose interiors are disjoint. For
//! point membership the grid uses a lower-edge-inclusive convention: a point on
//! a shared face belongs to the cell on the higher-coordinate side, and the
//! topmost cell of each axis also owns the domain's upper face.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An axis-aligned box `[lo_1, hi_1] x ... x [lo_n, hi_n]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRect")]
pub struct HyperRect {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Deserialize)]
struct RawRect {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl TryFrom<RawRect> for HyperRect {
    type Error = Error;

    fn try_from(raw: RawRect) -> Result<Self> {
        HyperRect::new(raw.lo, raw.hi)
    }
}

impl HyperRect {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() {
            return Err(Error::invalid("box must have at least one dimension"));
        }
        if lo.len() != hi.len() {
            return Err(Error::invalid(format!(
                "box bounds have different dimensions ({} vs {})",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(Error::invalid(format!("box bound {i} is not finite")));
            }
            if l > h {
                return Err(Error::invalid(format!(
                    "box dimension {i} has lo {l} > hi {h}"
                )));
            }
        }
        Ok(HyperRect { lo, hi })
    }

    /// Builds a box from `(lo, hi)` pairs, one per dimension.
    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        let (lo, hi) = bounds.iter().copied().unzip();
        HyperRect::new(lo, hi)
    }

    /// Zero-width box at a single point.
    pub fn point(x: &[f64]) -> Result<Self> {
        HyperRect::new(x.to_vec(), x.to_vec())
    }

    // Callers guarantee the invariants; used on hot paths after validation.
    pub(crate) fn from_parts_unchecked(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        debug_assert_eq!(lo.len(), hi.len());
        debug_assert!(lo.iter().zip(&hi).all(|(l, h)| l <= h));
        HyperRect { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    /// Closed containment of a point. Dimension mismatch counts as not contained.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| l <= v && v <= h)
    }

    pub fn contains_rect(&self, other: &HyperRect) -> bool {
        other.dim() == self.dim()
            && (0..self.dim()).all(|i| self.lo[i] <= other.lo[i] && other.hi[i] <= self.hi[i])
    }

    /// Componentwise `[max(lo), min(hi)]`; `None` when the boxes do not meet.
    /// Boxes sharing only a face intersect in a degenerate box.
    pub fn intersect(&self, other: &HyperRect) -> Result<Option<HyperRect>> {
        self.check_dim(other.dim())?;
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let l = self.lo[i].max(other.lo[i]);
            let h = self.hi[i].min(other.hi[i]);
            if l > h {
                return Ok(None);
            }
            lo.push(l);
            hi.push(h);
        }
        Ok(Some(HyperRect { lo, hi }))
    }

    /// Smallest box containing every box in `boxes`.
    pub fn bounding_box<'a, I>(boxes: I) -> Result<HyperRect>
    where
        I: IntoIterator<Item = &'a HyperRect>,
    {
        let mut iter = boxes.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::invalid("bounding box of an empty list"))?;
        let mut acc = first.clone();
        for b in iter {
            acc.check_dim(b.dim())?;
            acc.expand_to(b);
        }
        Ok(acc)
    }

    pub(crate) fn expand_to(&mut self, other: &HyperRect) {
        for i in 0..self.dim() {
            self.lo[i] = self.lo[i].min(other.lo[i]);
            self.hi[i] = self.hi[i].max(other.hi[i]);
        }
    }

    /// Cartesian product `self x other`, e.g. a state box extended by an input box.
    pub fn product(&self, other: &HyperRect) -> HyperRect {
        let mut lo = self.lo.clone();
        lo.extend_from_slice(&other.lo);
        let mut hi = self.hi.clone();
        hi.extend_from_slice(&other.hi);
        HyperRect { lo, hi }
    }

    /// Point of the box nearest to `x` (componentwise clamp).
    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (l, h))| v.clamp(*l, *h))
            .collect()
    }

    /// Squared Euclidean distance from `x` to the box (zero inside).
    pub fn distance_sq(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.clamp(x))
            .map(|(v, c)| (v - c) * (v - c))
            .sum()
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::invalid(format!(
                "dimension mismatch: expected {}, got {n}",
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Result of [`Partition::locate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Location {
    pub cell: usize,
    /// Set when the point lies outside the domain and was mapped to its
    /// nearest cell.
    pub exterior: bool,
}

/// Uniform grid over a box-shaped domain.
///
/// Cells are stored in row-major order with the first dimension varying
/// fastest. Only `domain` and `segments` are serialized; cells are rebuilt
/// on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPartition", into = "RawPartition")]
pub struct Partition {
    domain: HyperRect,
    segments: Vec<usize>,
    cuts: Vec<Vec<f64>>,
    cells: Vec<HyperRect>,
}

#[derive(Serialize, Deserialize)]
struct RawPartition {
    domain: HyperRect,
    segments: Vec<usize>,
}

impl TryFrom<RawPartition> for Partition {
    type Error = Error;

    fn try_from(raw: RawPartition) -> Result<Self> {
        Partition::new(raw.domain, &raw.segments)
    }
}

impl From<Partition> for RawPartition {
    fn from(p: Partition) -> Self {
        RawPartition {
            domain: p.domain,
            segments: p.segments,
        }
    }
}

impl Partition {
    /// Splits each axis `i` of `domain` into `segments[i]` equal intervals with
    /// cut points `x0 + m (xN - x0) / N`.
    pub fn new(domain: HyperRect, segments: &[usize]) -> Result<Self> {
        if segments.len() != domain.dim() {
            return Err(Error::invalid(format!(
                "segments has {} entries but the domain has {} dimensions",
                segments.len(),
                domain.dim()
            )));
        }
        if let Some(i) = segments.iter().position(|&n| n == 0) {
            return Err(Error::invalid(format!("segment count for dimension {i} is zero")));
        }

        let cuts: Vec<Vec<f64>> = segments
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let (x0, xn) = (domain.lo[i], domain.hi[i]);
                let mut c: Vec<f64> = (0..n)
                    .map(|m| x0 + (m as f64) * (xn - x0) / (n as f64))
                    .collect();
                c.push(xn);
                c
            })
            .collect();

        let count: usize = segments.iter().product();
        let mut cells = Vec::with_capacity(count);
        let mut idx = vec![0usize; segments.len()];
        for _ in 0..count {
            let lo = idx.iter().enumerate().map(|(i, &m)| cuts[i][m]).collect();
            let hi = idx.iter().enumerate().map(|(i, &m)| cuts[i][m + 1]).collect();
            cells.push(HyperRect { lo, hi });
            for (i, m) in idx.iter_mut().enumerate() {
                *m += 1;
                if *m < segments[i] {
                    break;
                }
                *m = 0;
            }
        }

        Ok(Partition {
            domain,
            segments: segments.to_vec(),
            cuts,
            cells,
        })
    }

    /// One cell equal to the whole domain.
    pub fn trivial(domain: HyperRect) -> Self {
        let segments = vec![1; domain.dim()];
        Partition::new(domain, &segments).expect("unit segments are always valid")
    }

    pub fn domain(&self) -> &HyperRect {
        &self.domain
    }

    pub fn segments(&self) -> &[usize] {
        &self.segments
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[HyperRect] {
        &self.cells
    }

    pub fn cell(&self, q: usize) -> &HyperRect {
        &self.cells[q]
    }

    /// Cut points `x_{i,0} .. x_{i,N_i}` of axis `i`.
    pub fn cut_points(&self, i: usize) -> &[f64] {
        &self.cuts[i]
    }

    /// Linear cell index of per-axis segment indices.
    pub fn index_of(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.segments)
            .rev()
            .fold(0, |acc, (&m, &n)| acc * n + m)
    }

    /// Per-axis segment indices of cell `q`.
    pub fn multi_index(&self, mut q: usize) -> Vec<usize> {
        self.segments
            .iter()
            .map(|&n| {
                let m = q % n;
                q /= n;
                m
            })
            .collect()
    }

    /// Cell owning `x`. Interior points follow the lower-edge-inclusive
    /// convention; exterior points go to the Euclidean-nearest cell, ties to
    /// the lowest index.
    pub fn locate(&self, x: &[f64]) -> Result<Location> {
        self.domain.check_dim(x.len())?;
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("cannot locate a NaN state"));
        }
        let exterior = !self.domain.contains(x);
        let multi: Vec<usize> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let interior = &self.cuts[i][1..self.segments[i]];
                if exterior {
                    // Nearest cells on this axis are those whose closed segment
                    // holds the clamped coordinate; the lower one has the lower index.
                    let y = v.clamp(self.domain.lo[i], self.domain.hi[i]);
                    interior.partition_point(|&c| c < y)
                } else {
                    interior.partition_point(|&c| c <= v)
                }
            })
            .collect();
        Ok(Location {
            cell: self.index_of(&multi),
            exterior,
        })
    }
}
