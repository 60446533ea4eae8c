//! STIT and Poisson hyperplane partitions of a window.
//!
//! Ball windows are handled through their bounding box: a STIT on the box
//! restricted to the ball has the law of a STIT on the ball, and a Poisson
//! arrangement only needs the hyperplanes hitting the ball. Cells of ball
//! windows are the box cells meeting the ball, not clipped to it.

use std::sync::OnceLock;

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::directions::{
    lambda_of, sample_hit_within, sample_window_hyperplane, DirectionError,
    DirectionalDistribution, PhiSpec,
};
use crate::geometry::{ConvexBody, GeometryError, HPolytope, Hyperplane, Window};
use crate::linalg::Vector;
use crate::rng::RngStream;

/// Default cap on the number of cells of one partition.
pub const DEFAULT_CELL_CAP: usize = 10_000_000;

/// Version of the partition JSON document.
pub const PARTITION_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum TessellationError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Direction(#[from] DirectionError),
    #[error("lifetime/intensity must be positive and finite, got {0}")]
    InvalidLifetime(f64),
    #[error("partition exceeds the cell cap of {cap}")]
    CellCap { cap: usize },
    #[error("point lies outside the window")]
    OutsideWindow,
    #[error("the origin must lie in the window interior")]
    OriginNotInterior,
    #[error("directional distribution has dimension {phi}, window has {window}")]
    DimensionMismatch { phi: usize, window: usize },
    #[error("unsupported partition document: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, TessellationError>;

/// Hashable identifier of a cell.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellRef {
    /// Arena index of a STIT leaf.
    Leaf(usize),
    /// Packed sign vector over the hyperplanes of a PHT (bit set = above).
    Signs(Vec<u64>),
}

/// Node of the STIT cut tree. Children are arena indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum CutNode {
    Leaf {
        cell: HPolytope,
        birth_time: f64,
    },
    Internal {
        cut: Hyperplane,
        cut_time: f64,
        below: usize,
        above: usize,
    },
}

fn check_positive(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(TessellationError::InvalidLifetime(v))
    }
}

fn check_inputs(window: &Window, phi: &DirectionalDistribution, lifetime: f64) -> Result<()> {
    window.validate()?;
    check_positive(lifetime)?;
    if phi.dim() != window.dim() {
        return Err(TessellationError::DimensionMismatch {
            phi: phi.dim(),
            window: window.dim(),
        });
    }
    Ok(())
}

/// Polytope the samplers start from: the box itself, or the bounding box of
/// a ball.
pub fn root_cell(window: &Window) -> HPolytope {
    match window {
        Window::Box { lower, upper } => HPolytope::from_box(lower, upper),
        Window::Ball { center, radius } => {
            let lo: Vector = center.iter().map(|c| c - radius).collect();
            let hi: Vector = center.iter().map(|c| c + radius).collect();
            HPolytope::from_box(&lo, &hi)
        }
    }
}

/// Whether a cell of the root polytope belongs to the window.
fn meets_window(window: &Window, cell: &HPolytope) -> bool {
    match window {
        Window::Box { .. } => true,
        Window::Ball { center, radius } => cell.distance_from(center, 1e-9) <= radius + 1e-9,
    }
}

/// A STIT partition stored as an arena-allocated cut tree (root at 0).
#[derive(Clone, Debug, PartialEq)]
pub struct StitPartition {
    window: Window,
    phi: DirectionalDistribution,
    lifetime: f64,
    nodes: Vec<CutNode>,
    cell_cap: usize,
}

/// Runs the cell clock of the leaf at `idx` from `clock` up to `lifetime`,
/// splitting recursively. Child streams are derived from the node stream
/// with tag 0 (below) or 1 (above).
#[allow(clippy::too_many_arguments)]
fn grow(
    nodes: &mut Vec<CutNode>,
    idx: usize,
    clock: f64,
    lifetime: f64,
    stream: RngStream,
    phi: &DirectionalDistribution,
    leaf_count: &mut usize,
    cap: usize,
) -> Result<()> {
    let mut stack = vec![(idx, clock, stream)];
    while let Some((idx, mut clock, mut stream)) = stack.pop() {
        let CutNode::Leaf { cell, .. } = &nodes[idx] else {
            unreachable!("only leaves are grown");
        };
        let cell = cell.clone();
        while let Some((h, dt)) = sample_hit_within(phi, &cell, lifetime - clock, &mut stream)? {
            clock += dt;
            // A grazing cut leaving one side without interior changes
            // nothing; the clock keeps running.
            if let (Some(below), Some(above)) = cell.split(&h)? {
                *leaf_count += 1;
                if *leaf_count > cap {
                    return Err(TessellationError::CellCap { cap });
                }
                let b = nodes.len();
                nodes.push(CutNode::Leaf {
                    cell: below,
                    birth_time: clock,
                });
                nodes.push(CutNode::Leaf {
                    cell: above,
                    birth_time: clock,
                });
                nodes[idx] = CutNode::Internal {
                    cut: h,
                    cut_time: clock,
                    below: b,
                    above: b + 1,
                };
                stack.push((b + 1, clock, stream.derive(1)));
                stack.push((b, clock, stream.derive(0)));
                break;
            }
        }
    }
    Ok(())
}

/// Samples `Y(lambda, W, phi)` with the default cell cap.
pub fn sample_stit(
    window: &Window,
    phi: &DirectionalDistribution,
    lifetime: f64,
    rng: &RngStream,
) -> Result<StitPartition> {
    sample_stit_capped(window, phi, lifetime, rng, DEFAULT_CELL_CAP)
}

pub fn sample_stit_capped(
    window: &Window,
    phi: &DirectionalDistribution,
    lifetime: f64,
    rng: &RngStream,
    cell_cap: usize,
) -> Result<StitPartition> {
    check_inputs(window, phi, lifetime)?;
    let mut nodes = vec![CutNode::Leaf {
        cell: root_cell(window),
        birth_time: 0.0,
    }];
    let mut leaves = 1;
    grow(
        &mut nodes,
        0,
        0.0,
        lifetime,
        RngStream::new(rng.key()),
        phi,
        &mut leaves,
        cell_cap,
    )?;
    Ok(StitPartition {
        window: window.clone(),
        phi: phi.clone(),
        lifetime,
        nodes,
        cell_cap,
    })
}

/// The STIT cell containing `x`, following only the branch of `x`.
///
/// Uses the same derived streams as [`sample_stit`], so the result equals
/// the corresponding leaf of the full partition drawn from `rng`.
pub fn sample_stit_cell_at(
    window: &Window,
    phi: &DirectionalDistribution,
    lifetime: f64,
    x: &[f64],
    rng: &RngStream,
) -> Result<HPolytope> {
    check_inputs(window, phi, lifetime)?;
    if !window.contains(x) {
        return Err(TessellationError::OutsideWindow);
    }
    let mut cell = root_cell(window);
    let mut stream = RngStream::new(rng.key());
    let mut clock = 0.0;
    while let Some((h, dt)) = sample_hit_within(phi, &cell, lifetime - clock, &mut stream)? {
        clock += dt;
        if let (Some(below), Some(above)) = cell.split(&h)? {
            if h.is_above(x) {
                cell = above;
                stream = stream.derive(1);
            } else {
                cell = below;
                stream = stream.derive(0);
            }
        }
    }
    Ok(cell)
}

/// Zero cell of a STIT without sampling the rest of the partition.
pub fn sample_stit_zero_cell(
    window: &Window,
    phi: &DirectionalDistribution,
    lifetime: f64,
    rng: &RngStream,
) -> Result<HPolytope> {
    let origin = vec![0.0; window.dim()];
    if !window.contains_in_interior(&origin) {
        return Err(TessellationError::OriginNotInterior);
    }
    sample_stit_cell_at(window, phi, lifetime, &origin, rng)
}

/// `p1 ⊞ Y(lambda2)`: a fresh construction of lifetime `lambda2` nested in
/// every leaf of `p1`. Leaf `i` uses the stream `rng.derive(i)`.
pub fn iterate(p1: &StitPartition, lambda2: f64, rng: &RngStream) -> Result<StitPartition> {
    check_positive(lambda2)?;
    let start = p1.lifetime;
    let total = p1.lifetime + lambda2;
    let mut nodes = p1.nodes.clone();
    let leaves = p1.leaf_indices();
    let mut count = leaves.len();
    for idx in leaves {
        grow(
            &mut nodes,
            idx,
            start,
            total,
            rng.derive(idx as u64),
            &p1.phi,
            &mut count,
            p1.cell_cap,
        )?;
    }
    Ok(StitPartition {
        window: p1.window.clone(),
        phi: p1.phi.clone(),
        lifetime: total,
        nodes,
        cell_cap: p1.cell_cap,
    })
}

impl StitPartition {
    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn phi(&self) -> &DirectionalDistribution {
        &self.phi
    }

    pub fn lifetime(&self) -> f64 {
        self.lifetime
    }

    pub fn nodes(&self) -> &[CutNode] {
        &self.nodes
    }

    /// Arena indices of the leaves, in arena order.
    pub fn leaf_indices(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n, CutNode::Leaf { .. }))
            .map(|(i, _)| i)
            .collect()
    }

    /// Leaf reached by descending the cuts (ties go below).
    pub fn cell_of(&self, x: &[f64]) -> Result<CellRef> {
        if !self.window.contains(x) {
            return Err(TessellationError::OutsideWindow);
        }
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                CutNode::Leaf { .. } => return Ok(CellRef::Leaf(i)),
                CutNode::Internal {
                    cut, below, above, ..
                } => i = if cut.is_above(x) { *above } else { *below },
            }
        }
    }

    pub fn leaf_cell(&self, idx: usize) -> Option<&HPolytope> {
        match self.nodes.get(idx)? {
            CutNode::Leaf { cell, .. } => Some(cell),
            CutNode::Internal { .. } => None,
        }
    }

    /// Leaf cells meeting the window.
    pub fn cells(&self) -> Vec<&HPolytope> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                CutNode::Leaf { cell, .. } if meets_window(&self.window, cell) => Some(cell),
                _ => None,
            })
            .collect()
    }

    pub fn cell_count(&self) -> usize {
        match self.window {
            Window::Box { .. } => self.leaf_indices().len(),
            Window::Ball { .. } => self.cells().len(),
        }
    }

    pub fn zero_cell(&self) -> Result<HPolytope> {
        let origin = vec![0.0; self.window.dim()];
        if !self.window.contains_in_interior(&origin) {
            return Err(TessellationError::OriginNotInterior);
        }
        let CellRef::Leaf(i) = self.cell_of(&origin)? else {
            unreachable!()
        };
        Ok(self.leaf_cell(i).expect("leaf").clone())
    }
}

/// A Poisson hyperplane partition of a window.
#[derive(Debug)]
pub struct PhtPartition {
    window: Window,
    phi: DirectionalDistribution,
    intensity: f64,
    hyperplanes: Vec<Hyperplane>,
    cell_cap: usize,
    cells: OnceLock<Result<Vec<HPolytope>>>,
}

impl Clone for PhtPartition {
    fn clone(&self) -> Self {
        Self {
            window: self.window.clone(),
            phi: self.phi.clone(),
            intensity: self.intensity,
            hyperplanes: self.hyperplanes.clone(),
            cell_cap: self.cell_cap,
            cells: OnceLock::new(),
        }
    }
}

impl PartialEq for PhtPartition {
    fn eq(&self, other: &Self) -> bool {
        self.window == other.window
            && self.phi == other.phi
            && self.intensity == other.intensity
            && self.hyperplanes == other.hyperplanes
    }
}

pub fn sample_pht(
    window: &Window,
    phi: &DirectionalDistribution,
    intensity: f64,
    rng: &RngStream,
) -> Result<PhtPartition> {
    sample_pht_capped(window, phi, intensity, rng, DEFAULT_CELL_CAP)
}

pub fn sample_pht_capped(
    window: &Window,
    phi: &DirectionalDistribution,
    intensity: f64,
    rng: &RngStream,
    cell_cap: usize,
) -> Result<PhtPartition> {
    check_inputs(window, phi, intensity)?;
    let mut stream = RngStream::new(rng.key());
    let mean = intensity * lambda_of(phi, window)?.value;
    let n = if mean > 0.0 {
        let draw: f64 = Poisson::new(mean)
            .map_err(|e| TessellationError::Format(e.to_string()))?
            .sample(&mut stream);
        draw as usize
    } else {
        0
    };
    // Each hyperplane adds at least one cell.
    if n + 1 > cell_cap {
        return Err(TessellationError::CellCap { cap: cell_cap });
    }
    let hyperplanes = (0..n)
        .map(|_| sample_window_hyperplane(phi, window, &mut stream))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(PhtPartition {
        window: window.clone(),
        phi: phi.clone(),
        intensity,
        hyperplanes,
        cell_cap,
        cells: OnceLock::new(),
    })
}

/// Packs `is_above` bits of `x` against each hyperplane.
pub fn sign_vector(hyperplanes: &[Hyperplane], x: &[f64]) -> Vec<u64> {
    let mut bits = vec![0u64; hyperplanes.len().div_ceil(64)];
    for (i, h) in hyperplanes.iter().enumerate() {
        if h.is_above(x) {
            bits[i / 64] |= 1 << (i % 64);
        }
    }
    bits
}

impl PhtPartition {
    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn phi(&self) -> &DirectionalDistribution {
        &self.phi
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn hyperplanes(&self) -> &[Hyperplane] {
        &self.hyperplanes
    }

    pub fn cell_of(&self, x: &[f64]) -> Result<CellRef> {
        if !self.window.contains(x) {
            return Err(TessellationError::OutsideWindow);
        }
        Ok(CellRef::Signs(sign_vector(&self.hyperplanes, x)))
    }

    /// Cells of the arrangement by sequential splitting; computed once.
    pub fn enumerate_cells(&self) -> Result<&[HPolytope]> {
        self.cells
            .get_or_init(|| self.compute_cells())
            .as_ref()
            .map(|v| v.as_slice())
            .map_err(Clone::clone)
    }

    fn compute_cells(&self) -> Result<Vec<HPolytope>> {
        let mut pieces = vec![root_cell(&self.window)];
        for h in &self.hyperplanes {
            let mut next = Vec::with_capacity(pieces.len() + 1);
            for piece in pieces {
                if !piece.hits(h)? {
                    next.push(piece);
                    continue;
                }
                let (below, above) = piece.split(h)?;
                next.extend(below);
                next.extend(above);
            }
            if next.len() > self.cell_cap {
                return Err(TessellationError::CellCap { cap: self.cell_cap });
            }
            pieces = next;
        }
        pieces.retain(|c| meets_window(&self.window, c));
        Ok(pieces)
    }

    pub fn cell_count(&self) -> Result<usize> {
        Ok(self.enumerate_cells()?.len())
    }

    /// Window intersected with the side of every hyperplane containing the
    /// origin. Hyperplanes are applied nearest first and those missing the
    /// current cell are skipped.
    pub fn zero_cell(&self) -> Result<HPolytope> {
        let origin = vec![0.0; self.window.dim()];
        if !self.window.contains_in_interior(&origin) {
            return Err(TessellationError::OriginNotInterior);
        }
        pht_zero_cell(&self.window, &self.hyperplanes)
    }
}

fn pht_zero_cell(window: &Window, hyperplanes: &[Hyperplane]) -> Result<HPolytope> {
    let origin = vec![0.0; window.dim()];
    let mut order: Vec<&Hyperplane> = hyperplanes.iter().collect();
    order.sort_by(|a, b| a.offset.abs().total_cmp(&b.offset.abs()));
    let mut cell = root_cell(window);
    for h in order {
        if cell.hits(h)? {
            cell = cell
                .restrict_to_side_of(h, &origin)?
                .ok_or(TessellationError::OriginNotInterior)?;
        }
    }
    Ok(cell)
}

/// Zero cell of a Poisson hyperplane partition, sampled directly.
pub fn sample_pht_zero_cell(
    window: &Window,
    phi: &DirectionalDistribution,
    intensity: f64,
    rng: &RngStream,
) -> Result<HPolytope> {
    let p = sample_pht(window, phi, intensity, rng)?;
    p.zero_cell()
}

/// A partition of either kind.
#[derive(Clone, Debug, PartialEq)]
pub enum Partition {
    Stit(StitPartition),
    Pht(PhtPartition),
}

impl Partition {
    pub fn window(&self) -> &Window {
        match self {
            Partition::Stit(p) => p.window(),
            Partition::Pht(p) => p.window(),
        }
    }

    pub fn dim(&self) -> usize {
        self.window().dim()
    }

    pub fn cell_of(&self, x: &[f64]) -> Result<CellRef> {
        match self {
            Partition::Stit(p) => p.cell_of(x),
            Partition::Pht(p) => p.cell_of(x),
        }
    }

    pub fn cells(&self) -> Result<Vec<HPolytope>> {
        match self {
            Partition::Stit(p) => Ok(p.cells().into_iter().cloned().collect()),
            Partition::Pht(p) => Ok(p.enumerate_cells()?.to_vec()),
        }
    }

    pub fn cell_count(&self) -> Result<usize> {
        match self {
            Partition::Stit(p) => Ok(p.cell_count()),
            Partition::Pht(p) => p.cell_count(),
        }
    }

    pub fn zero_cell(&self) -> Result<HPolytope> {
        match self {
            Partition::Stit(p) => p.zero_cell(),
            Partition::Pht(p) => p.zero_cell(),
        }
    }

    pub fn to_document(&self) -> PartitionDocument {
        match self {
            Partition::Stit(p) => PartitionDocument {
                format_version: PARTITION_FORMAT_VERSION,
                window: p.window.clone(),
                phi: p.phi.to_spec(),
                lifetime: p.lifetime,
                cell_cap: p.cell_cap,
                cuts: Cuts::Stit {
                    nodes: p.nodes.clone(),
                },
            },
            Partition::Pht(p) => PartitionDocument {
                format_version: PARTITION_FORMAT_VERSION,
                window: p.window.clone(),
                phi: p.phi.to_spec(),
                lifetime: p.intensity,
                cell_cap: p.cell_cap,
                cuts: Cuts::Pht {
                    hyperplanes: p.hyperplanes.clone(),
                },
            },
        }
    }

    pub fn from_document(doc: PartitionDocument) -> Result<Self> {
        if doc.format_version != PARTITION_FORMAT_VERSION {
            return Err(TessellationError::Format(format!(
                "format_version {} (supported: {PARTITION_FORMAT_VERSION})",
                doc.format_version
            )));
        }
        doc.window.validate()?;
        let phi = DirectionalDistribution::from_spec(&doc.phi, doc.window.dim())?;
        check_inputs(&doc.window, &phi, doc.lifetime)?;
        Ok(match doc.cuts {
            Cuts::Stit { nodes } => {
                if nodes.is_empty() {
                    return Err(TessellationError::Format("empty cut tree".into()));
                }
                let n = nodes.len();
                for node in &nodes {
                    if let CutNode::Internal { below, above, .. } = node {
                        if *below >= n || *above >= n {
                            return Err(TessellationError::Format(
                                "child index out of range".into(),
                            ));
                        }
                    }
                }
                Partition::Stit(StitPartition {
                    window: doc.window,
                    phi,
                    lifetime: doc.lifetime,
                    nodes,
                    cell_cap: doc.cell_cap,
                })
            }
            Cuts::Pht { hyperplanes } => Partition::Pht(PhtPartition {
                window: doc.window,
                phi,
                intensity: doc.lifetime,
                hyperplanes,
                cell_cap: doc.cell_cap,
                cells: OnceLock::new(),
            }),
        })
    }
}

/// Serialized partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionDocument {
    pub format_version: u32,
    pub window: Window,
    pub phi: PhiSpec,
    /// STIT lifetime or PHT intensity.
    pub lifetime: f64,
    pub cell_cap: usize,
    pub cuts: Cuts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cuts {
    Stit { nodes: Vec<CutNode> },
    Pht { hyperplanes: Vec<Hyperplane> },
}

/// Kind of partition sampler.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionKind {
    Stit,
    Pht,
}

/// Samples a partition of the requested kind.
pub fn sample_partition(
    kind: PartitionKind,
    window: &Window,
    phi: &DirectionalDistribution,
    lambda: f64,
    rng: &RngStream,
    cell_cap: usize,
) -> Result<Partition> {
    Ok(match kind {
        PartitionKind::Stit => {
            Partition::Stit(sample_stit_capped(window, phi, lambda, rng, cell_cap)?)
        }
        PartitionKind::Pht => {
            Partition::Pht(sample_pht_capped(window, phi, lambda, rng, cell_cap)?)
        }
    })
}

/// Zero cell of a fresh partition of the requested kind.
pub fn sample_zero_cell(
    kind: PartitionKind,
    window: &Window,
    phi: &DirectionalDistribution,
    lambda: f64,
    rng: &RngStream,
) -> Result<HPolytope> {
    match kind {
        PartitionKind::Stit => sample_stit_zero_cell(window, phi, lambda, rng),
        PartitionKind::Pht => sample_pht_zero_cell(window, phi, lambda, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_and_se;

    fn square() -> Window {
        Window::unit_cube(2)
    }

    #[test]
    fn tiny_lifetime_gives_single_leaf() {
        let w = square();
        let phi = DirectionalDistribution::axis(2);
        // lambda * Lambda([W]) = 0.1 with Lambda = 1 for the axis case.
        let base = RngStream::new(5);
        let reps = 4000;
        let single = (0..reps)
            .filter(|&i| {
                sample_stit(&w, &phi, 0.1, &base.derive(i))
                    .unwrap()
                    .cell_count()
                    == 1
            })
            .count() as f64
            / reps as f64;
        let p = (-0.1f64).exp();
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        assert!((single - p).abs() <= 4.0 * se, "{single} vs {p}");
    }

    #[test]
    fn one_dimensional_stit_counts() {
        let w = Window::unit_cube(1);
        let phi = DirectionalDistribution::axis(1);
        let base = RngStream::new(9);
        let counts: Vec<f64> = (0..3000)
            .map(|i| {
                sample_stit(&w, &phi, 3.0, &base.derive(i))
                    .unwrap()
                    .cell_count() as f64
            })
            .collect();
        let (m, se) = mean_and_se(&counts);
        assert!((m - 4.0).abs() <= 4.0 * se, "{m} +- {se}");
    }

    #[test]
    fn stit_invariants() {
        let w = square();
        let phi = DirectionalDistribution::isotropic(2);
        let p = sample_stit(&w, &phi, 5.0, &RngStream::new(1)).unwrap();
        assert!(p.cell_count() > 1);
        // cut times increase along every path and lie in (0, lambda]
        let mut stack = vec![(0usize, 0.0f64)];
        while let Some((i, t)) = stack.pop() {
            match &p.nodes()[i] {
                CutNode::Leaf { birth_time, .. } => assert_eq!(*birth_time, t),
                CutNode::Internal {
                    cut_time,
                    below,
                    above,
                    ..
                } => {
                    assert!(*cut_time > t && *cut_time <= 5.0);
                    stack.push((*below, *cut_time));
                    stack.push((*above, *cut_time));
                }
            }
        }
        // every leaf is nonempty and contains the points that map to it
        let mut rng = RngStream::new(2);
        for _ in 0..500 {
            let x = w.sample_uniform(&mut rng);
            let CellRef::Leaf(i) = p.cell_of(&x).unwrap() else {
                panic!()
            };
            assert!(p.leaf_cell(i).unwrap().contains(&x));
        }
        for c in p.cells() {
            assert!(c.is_nonempty().unwrap());
        }
    }

    #[test]
    fn path_sampler_matches_full_tree() {
        let w = Window::centered_cube(2, 1.0);
        for phi in [
            DirectionalDistribution::axis(2),
            DirectionalDistribution::isotropic(2),
        ] {
            for seed in 0..20 {
                let rng = RngStream::new(seed);
                let full = sample_stit(&w, &phi, 4.0, &rng).unwrap();
                let direct = sample_stit_zero_cell(&w, &phi, 4.0, &rng).unwrap();
                assert_eq!(full.zero_cell().unwrap(), direct);
            }
        }
    }

    #[test]
    fn same_seed_same_tree() {
        let w = square();
        let phi = DirectionalDistribution::isotropic(2);
        let a = sample_stit(&w, &phi, 6.0, &RngStream::new(77)).unwrap();
        let b = sample_stit(&w, &phi, 6.0, &RngStream::new(77)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cell_of_split_square() {
        let w = square();
        let phi = DirectionalDistribution::axis(2);
        let p = StitPartition {
            window: w.clone(),
            phi,
            lifetime: 1.0,
            nodes: vec![
                CutNode::Internal {
                    cut: Hyperplane::new(vec![1.0, 0.0], 0.5).unwrap(),
                    cut_time: 0.5,
                    below: 1,
                    above: 2,
                },
                CutNode::Leaf {
                    cell: HPolytope::from_box(&[0.0, 0.0], &[0.5, 1.0]),
                    birth_time: 0.5,
                },
                CutNode::Leaf {
                    cell: HPolytope::from_box(&[0.5, 0.0], &[1.0, 1.0]),
                    birth_time: 0.5,
                },
            ],
            cell_cap: DEFAULT_CELL_CAP,
        };
        assert_eq!(p.cell_of(&[0.25, 0.3]).unwrap(), CellRef::Leaf(1));
        assert_eq!(p.cell_of(&[0.5, 0.3]).unwrap(), CellRef::Leaf(1));
        assert_eq!(p.cell_of(&[0.75, 0.3]).unwrap(), CellRef::Leaf(2));
        assert_eq!(
            p.cell_of(&[1.5, 0.3]),
            Err(TessellationError::OutsideWindow)
        );
    }

    fn pht_with(window: Window, hyperplanes: Vec<Hyperplane>) -> PhtPartition {
        let d = window.dim();
        PhtPartition {
            window,
            phi: DirectionalDistribution::axis(d),
            intensity: 1.0,
            hyperplanes,
            cell_cap: DEFAULT_CELL_CAP,
            cells: OnceLock::new(),
        }
    }

    #[test]
    fn enumeration_examples() {
        let none = pht_with(square(), vec![]);
        assert_eq!(none.enumerate_cells().unwrap().len(), 1);
        let cross = pht_with(
            square(),
            vec![
                Hyperplane::new(vec![1.0, 0.0], 0.5).unwrap(),
                Hyperplane::new(vec![0.0, 1.0], 0.3).unwrap(),
            ],
        );
        assert_eq!(cross.cell_count().unwrap(), 4);
        let parallel = pht_with(
            square(),
            (1..=5)
                .map(|k| Hyperplane::new(vec![1.0, 1.0], 0.2 * k as f64).unwrap())
                .collect(),
        );
        assert_eq!(parallel.cell_count().unwrap(), 6);
    }

    #[test]
    fn pht_zero_cell_in_one_dimension() {
        let w = Window::centered_cube(1, 1.0);
        let p = pht_with(
            w,
            vec![
                Hyperplane::new(vec![1.0], 0.4).unwrap(),
                Hyperplane::new(vec![1.0], -0.4).unwrap(),
                Hyperplane::new(vec![1.0], 0.7).unwrap(),
            ],
        );
        let z = p.zero_cell().unwrap();
        let (lo, hi) = z.bounding_box().unwrap();
        approx::assert_abs_diff_eq!(lo[0], -0.4, epsilon = 1e-9);
        approx::assert_abs_diff_eq!(hi[0], 0.4, epsilon = 1e-9);
        let off = pht_with(square(), vec![]);
        assert_eq!(off.zero_cell(), Err(TessellationError::OriginNotInterior));
    }

    #[test]
    fn pht_cross_lookup() {
        let w = square();
        let phi = DirectionalDistribution::isotropic(2);
        let p = sample_pht(&w, &phi, 4.0, &RngStream::new(3)).unwrap();
        let cells = p.enumerate_cells().unwrap();
        let refs: Vec<CellRef> = cells
            .iter()
            .map(|c| p.cell_of(&c.inner_radius().unwrap().0).unwrap())
            .collect();
        let mut rng = RngStream::new(4);
        for _ in 0..1000 {
            let x = w.sample_uniform(&mut rng);
            let r = p.cell_of(&x).unwrap();
            let holders: Vec<usize> = (0..cells.len())
                .filter(|&i| cells[i].contains(&x))
                .collect();
            assert_eq!(holders.len(), 1);
            assert_eq!(refs[holders[0]], r);
        }
    }

    #[test]
    fn pht_mondrian_hyperplane_count() {
        let w = square();
        let phi = DirectionalDistribution::axis(2);
        let base = RngStream::new(11);
        let n: Vec<f64> = (0..2000)
            .map(|i| {
                sample_pht(&w, &phi, 4.0, &base.derive(i))
                    .unwrap()
                    .hyperplanes()
                    .len() as f64
            })
            .collect();
        let (m, se) = mean_and_se(&n);
        assert!((m - 4.0).abs() <= 4.0 * se, "{m}");
    }

    #[test]
    fn iterate_with_tiny_increment_keeps_partition() {
        let w = square();
        let phi = DirectionalDistribution::axis(2);
        let p = sample_stit(&w, &phi, 3.0, &RngStream::new(8)).unwrap();
        let q = iterate(&p, 1e-12, &RngStream::new(9)).unwrap();
        assert_eq!(p.nodes(), q.nodes());
        assert_eq!(q.lifetime(), 3.0 + 1e-12);
    }

    #[test]
    fn iterate_mean_is_additive_in_one_dimension() {
        let w = Window::unit_cube(1);
        let phi = DirectionalDistribution::axis(1);
        let base = RngStream::new(10);
        let counts: Vec<f64> = (0..3000)
            .map(|i| {
                let r = base.derive(i);
                let p = sample_stit(&w, &phi, 1.0, &r.derive(0)).unwrap();
                iterate(&p, 2.0, &r.derive(1)).unwrap().cell_count() as f64
            })
            .collect();
        let (m, se) = mean_and_se(&counts);
        assert!((m - 4.0).abs() <= 4.0 * se, "{m}");
    }

    #[test]
    fn cap_is_enforced() {
        let w = square();
        let phi = DirectionalDistribution::axis(2);
        let err = sample_stit_capped(&w, &phi, 50.0, &RngStream::new(1), 10).unwrap_err();
        assert_eq!(err, TessellationError::CellCap { cap: 10 });
    }

    #[test]
    fn ball_window_cells_meet_the_ball() {
        let w = Window::new_ball(vec![0.0, 0.0], 1.0).unwrap();
        let phi = DirectionalDistribution::isotropic(2);
        let p = sample_stit(&w, &phi, 4.0, &RngStream::new(12)).unwrap();
        assert!(p.cell_count() <= p.leaf_indices().len());
        assert!(p.cell_of(&[0.9, 0.9]).is_err());
        p.zero_cell().unwrap();
    }

    #[test]
    fn document_round_trip() {
        let w = square();
        let phi = DirectionalDistribution::isotropic(2);
        for part in [
            Partition::Stit(sample_stit(&w, &phi, 4.0, &RngStream::new(1)).unwrap()),
            Partition::Pht(sample_pht(&w, &phi, 4.0, &RngStream::new(1)).unwrap()),
        ] {
            let json = serde_json::to_string(&part.to_document()).unwrap();
            let back = Partition::from_document(serde_json::from_str(&json).unwrap()).unwrap();
            assert_eq!(part, back);
        }
    }
}
