//! Observation windows and H-polytope cells.
//!
//! Cells are intersections of closed halfspaces and every query on them goes
//! through [`crate::linalg::solve_lp`]. Vertex enumeration is only done for
//! planar cells (rendering).

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    chebyshev_center, dot, norm, normalized, solve_lp, unit_axis, Halfspace, LpError, LpProblem,
    Vector, EPS_LP,
};
use crate::rng::RngStream;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("support function is unbounded; cells must be bounded")]
    UnboundedBody,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid hyperplane: {0}")]
    InvalidHyperplane(String),
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("ball windows have no exact polytope representation")]
    BallNotPolytope,
    #[error("operation requires a planar cell (d = 2), got d = {0}")]
    NotPlanar(usize),
    #[error("no sample point landed inside the cell ({0} points drawn)")]
    NoInteriorSamples(usize),
    #[error("need at least {min} Monte Carlo points, got {got}")]
    TooFewPoints { min: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Hyperplane `H(u, t) = {x : <x, u> = t}` with `|u| = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub direction: Vector,
    pub offset: f64,
}

impl Hyperplane {
    /// Builds a hyperplane, normalizing `direction` (and scaling `offset`).
    pub fn new(direction: Vector, offset: f64) -> Result<Self> {
        if !offset.is_finite() {
            return Err(GeometryError::InvalidHyperplane("non-finite offset".into()));
        }
        let n = norm(&direction);
        let u = normalized(&direction)
            .ok_or_else(|| GeometryError::InvalidHyperplane("zero direction".into()))?;
        Ok(Self {
            direction: u,
            offset: offset / n,
        })
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    /// `<u, x> - t`.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        dot(&self.direction, x) - self.offset
    }

    /// Points with `<u, x> > t` are above; points on the hyperplane are below.
    pub fn is_above(&self, x: &[f64]) -> bool {
        dot(&self.direction, x) > self.offset
    }
}

/// Anything with a support function.
pub trait ConvexBody {
    fn dim(&self) -> usize;

    /// `h(K, u) = sup_{x in K} <u, x>`.
    fn support(&self, u: &[f64]) -> Result<f64>;

    /// `h(K, u) + h(K, -u)`.
    fn width(&self, u: &[f64]) -> Result<f64> {
        let minus: Vector = u.iter().map(|v| -v).collect();
        Ok(self.support(u)? + self.support(&minus)?)
    }
}

/// Compact observation window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Window {
    Box { lower: Vector, upper: Vector },
    Ball { center: Vector, radius: f64 },
}

impl Window {
    pub fn new_box(lower: Vector, upper: Vector) -> Result<Self> {
        let w = Window::Box { lower, upper };
        w.validate()?;
        Ok(w)
    }

    pub fn new_ball(center: Vector, radius: f64) -> Result<Self> {
        let w = Window::Ball { center, radius };
        w.validate()?;
        Ok(w)
    }

    /// `[0, 1]^d`.
    pub fn unit_cube(d: usize) -> Self {
        Window::Box {
            lower: vec![0.0; d],
            upper: vec![1.0; d],
        }
    }

    /// `[-a, a]^d`.
    pub fn centered_cube(d: usize, half_side: f64) -> Self {
        Window::Box {
            lower: vec![-half_side; d],
            upper: vec![half_side; d],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Window::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(GeometryError::InvalidWindow(
                        "box corners must have equal, positive dimension".into(),
                    ));
                }
                if lower
                    .iter()
                    .zip(upper)
                    .any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u))
                {
                    return Err(GeometryError::InvalidWindow(
                        "box requires finite lower < upper in every coordinate".into(),
                    ));
                }
            }
            Window::Ball { center, radius } => {
                if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
                    return Err(GeometryError::InvalidWindow(
                        "ball center must be finite".into(),
                    ));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(GeometryError::InvalidWindow(
                        "ball radius must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Window::Box { lower, upper } => {
                x.len() == lower.len()
                    && x.iter()
                        .zip(lower.iter().zip(upper))
                        .all(|(v, (l, u))| *l <= *v && *v <= *u)
            }
            Window::Ball { center, radius } => {
                x.len() == center.len() && norm(&crate::linalg::sub(x, center)) <= *radius
            }
        }
    }

    /// True if `x` lies in the interior (strictly inside every face).
    pub fn contains_in_interior(&self, x: &[f64]) -> bool {
        match self {
            Window::Box { lower, upper } => {
                x.len() == lower.len()
                    && x.iter()
                        .zip(lower.iter().zip(upper))
                        .all(|(v, (l, u))| *l < *v && *v < *u)
            }
            Window::Ball { center, radius } => {
                x.len() == center.len() && norm(&crate::linalg::sub(x, center)) < *radius
            }
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Window::Box { lower, upper } => lower.iter().zip(upper).map(|(l, u)| u - l).product(),
            Window::Ball { center, radius } => {
                unit_ball_volume(center.len()) * radius.powi(center.len() as i32)
            }
        }
    }

    /// Uniform point in the window.
    pub fn sample_uniform(&self, rng: &mut RngStream) -> Vector {
        match self {
            Window::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| l + (u - l) * rng.random::<f64>())
                .collect(),
            Window::Ball { center, radius } => {
                let d = center.len();
                let dir = crate::directions::uniform_sphere(d, rng);
                let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
                center.iter().zip(&dir).map(|(c, u)| c + r * u).collect()
            }
        }
    }

    /// Exact H-representation; only boxes convert.
    pub fn to_polytope(&self) -> Result<HPolytope> {
        match self {
            Window::Box { lower, upper } => Ok(HPolytope::from_box(lower, upper)),
            Window::Ball { .. } => Err(GeometryError::BallNotPolytope),
        }
    }

    /// Side lengths of a box window.
    pub fn side_lengths(&self) -> Option<Vector> {
        match self {
            Window::Box { lower, upper } => {
                Some(upper.iter().zip(lower).map(|(u, l)| u - l).collect())
            }
            Window::Ball { .. } => None,
        }
    }
}

impl ConvexBody for Window {
    fn dim(&self) -> usize {
        match self {
            Window::Box { lower, .. } => lower.len(),
            Window::Ball { center, .. } => center.len(),
        }
    }

    fn support(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.dim(), u.len())?;
        Ok(match self {
            Window::Box { lower, upper } => u
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(ui, (l, h))| (ui * l).max(ui * h))
                .sum(),
            Window::Ball { center, radius } => dot(u, center) + radius * norm(u),
        })
    }
}

/// `kappa_d`, the volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let k = d as f64 / 2.0;
    PI.powf(k) / statrs::function::gamma::gamma(k + 1.0)
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(GeometryError::DimensionMismatch { expected, got })
    } else {
        Ok(())
    }
}

/// Origin of a facet, which fixes how boundary points are assigned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FacetKind {
    /// Window boundary: closed, with tolerance [`EPS_LP`].
    Window,
    /// `<u, x> <= t` side of a cut: closed, exact.
    Below,
    /// `<u, x> > t` side of a cut, stored as `<-u, x> <= -t`: open, exact.
    Above,
}

/// Convex cell `{x : <n_i, x> <= b_i}` with unit normals.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HPolytope {
    dim: usize,
    halfspaces: Vec<Halfspace>,
    kinds: Vec<FacetKind>,
    #[serde(skip)]
    bbox: OnceLock<(Vector, Vector)>,
}

impl PartialEq for HPolytope {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.halfspaces == other.halfspaces && self.kinds == other.kinds
    }
}

impl HPolytope {
    /// Builds a polytope from halfspaces; normals are normalized.
    pub fn new(dim: usize, halfspaces: Vec<Halfspace>, kinds: Vec<FacetKind>) -> Result<Self> {
        assert_eq!(halfspaces.len(), kinds.len(), "one kind per halfspace");
        let mut hs = Vec::with_capacity(halfspaces.len());
        for h in halfspaces {
            check_dim(dim, h.normal.len())?;
            let n = norm(&h.normal);
            let u = normalized(&h.normal)
                .ok_or_else(|| GeometryError::InvalidHyperplane("zero normal".into()))?;
            hs.push(Halfspace::new(u, h.bound / n));
        }
        Ok(Self {
            dim,
            halfspaces: hs,
            kinds,
            bbox: OnceLock::new(),
        })
    }

    /// Polytope with window-kind facets only.
    pub fn from_halfspaces(dim: usize, halfspaces: Vec<Halfspace>) -> Result<Self> {
        let kinds = vec![FacetKind::Window; halfspaces.len()];
        Self::new(dim, halfspaces, kinds)
    }

    pub fn from_box(lower: &[f64], upper: &[f64]) -> Self {
        let d = lower.len();
        let mut hs = Vec::with_capacity(2 * d);
        for i in 0..d {
            hs.push(Halfspace::new(unit_axis(d, i), upper[i]));
            let mut n = vec![0.0; d];
            n[i] = -1.0;
            hs.push(Halfspace::new(n, -lower[i]));
        }
        let bbox = OnceLock::new();
        let _ = bbox.set((lower.to_vec(), upper.to_vec()));
        Self {
            dim: d,
            kinds: vec![FacetKind::Window; hs.len()],
            halfspaces: hs,
            bbox,
        }
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn kinds(&self) -> &[FacetKind] {
        &self.kinds
    }

    pub fn facet_count(&self) -> usize {
        self.halfspaces.len()
    }

    /// Membership with the cut tie-breaking convention: a point on a cut
    /// belongs to the cell below it.
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim {
            return false;
        }
        self.halfspaces.iter().zip(&self.kinds).all(|(h, k)| {
            let v = dot(&h.normal, x);
            match k {
                FacetKind::Window => v <= h.bound + EPS_LP,
                FacetKind::Below => v <= h.bound,
                FacetKind::Above => v < h.bound,
            }
        })
    }

    /// Membership in the closed cell, tolerant on every facet.
    pub fn contains_closed(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim
            && self
                .halfspaces
                .iter()
                .all(|h| dot(&h.normal, x) <= h.bound + tol)
    }

    /// Largest inscribed ball radius (capped at 1) and its center.
    pub fn inner_radius(&self) -> Result<(Vector, f64)> {
        Ok(chebyshev_center(self.dim, &self.halfspaces)?)
    }

    /// True if the cell has nonempty interior.
    pub fn is_nonempty(&self) -> Result<bool> {
        Ok(self.inner_radius()?.1 > EPS_LP)
    }

    /// Point maximizing `<u, x>`.
    pub fn support_point(&self, u: &[f64]) -> Result<Vector> {
        check_dim(self.dim, u.len())?;
        match solve_lp(&LpProblem {
            objective: u.to_vec(),
            constraints: self.halfspaces.clone(),
        }) {
            Ok(sol) => Ok(sol.optimizer),
            Err(LpError::Unbounded) => Err(GeometryError::UnboundedBody),
            Err(e) => Err(e.into()),
        }
    }

    /// Axis-aligned bounding box from `2d` LPs; cached.
    pub fn bounding_box(&self) -> Result<(Vector, Vector)> {
        if let Some(b) = self.bbox.get() {
            return Ok(b.clone());
        }
        let mut lo = vec![0.0; self.dim];
        let mut hi = vec![0.0; self.dim];
        for i in 0..self.dim {
            let e = unit_axis(self.dim, i);
            hi[i] = self.support(&e)?;
            lo[i] = -self.support(&crate::linalg::neg(&e))?;
        }
        let _ = self.bbox.set((lo, hi));
        Ok(self.bbox.get().expect("just set").clone())
    }

    /// Ball containing the cell: center and half diagonal of the bounding box.
    pub fn bounding_ball(&self) -> Result<(Vector, f64)> {
        let (lo, hi) = self.bounding_box()?;
        let center = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
        let radius = 0.5 * norm(&crate::linalg::sub(&hi, &lo));
        Ok((center, radius))
    }

    /// Whether the hyperplane meets the closed cell.
    pub fn hits(&self, h: &Hyperplane) -> Result<bool> {
        if let Some((lo, hi)) = self.bbox.get() {
            let c: Vector = lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect();
            let r = 0.5 * norm(&crate::linalg::sub(hi, lo));
            if (h.signed_distance(&c)).abs() > r + EPS_LP {
                return Ok(false);
            }
        }
        let upper = self.support(&h.direction)?;
        if h.offset > upper + EPS_LP {
            return Ok(false);
        }
        let lower = -self.support(&crate::linalg::neg(&h.direction))?;
        Ok(h.offset >= lower - EPS_LP)
    }

    fn with_facet(&self, h: Halfspace, kind: FacetKind) -> HPolytope {
        let mut halfspaces = self.halfspaces.clone();
        let mut kinds = self.kinds.clone();
        halfspaces.push(h);
        kinds.push(kind);
        HPolytope {
            dim: self.dim,
            halfspaces,
            kinds,
            bbox: OnceLock::new(),
        }
    }

    /// Splits into `(below, above)`; a side is `None` iff its interior is
    /// empty.
    pub fn split(&self, h: &Hyperplane) -> Result<(Option<HPolytope>, Option<HPolytope>)> {
        check_dim(self.dim, h.dim())?;
        let below = self.with_facet(
            Halfspace::new(h.direction.clone(), h.offset),
            FacetKind::Below,
        );
        let above = self.with_facet(
            Halfspace::new(crate::linalg::neg(&h.direction), -h.offset),
            FacetKind::Above,
        );
        let keep = |mut p: HPolytope| -> Result<Option<HPolytope>> {
            if !p.is_nonempty()? {
                return Ok(None);
            }
            if p.halfspaces.len() > 4 * p.dim {
                p.prune_redundant()?;
            }
            Ok(Some(p))
        };
        Ok((keep(below)?, keep(above)?))
    }

    /// Intersects with the side of `h` containing `x` (below on ties).
    pub fn restrict_to_side_of(&self, h: &Hyperplane, x: &[f64]) -> Result<Option<HPolytope>> {
        let p = if h.is_above(x) {
            self.with_facet(
                Halfspace::new(crate::linalg::neg(&h.direction), -h.offset),
                FacetKind::Above,
            )
        } else {
            self.with_facet(
                Halfspace::new(h.direction.clone(), h.offset),
                FacetKind::Below,
            )
        };
        if !p.is_nonempty()? {
            return Ok(None);
        }
        let mut p = p;
        if p.halfspaces.len() > 4 * p.dim {
            p.prune_redundant()?;
        }
        Ok(Some(p))
    }

    /// Drops constraints implied by the others (one LP per constraint).
    pub fn prune_redundant(&mut self) -> Result<()> {
        let mut i = 0;
        while i < self.halfspaces.len() && self.halfspaces.len() > 1 {
            let mut constraints: Vec<Halfspace> = self
                .halfspaces
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, h)| h.clone())
                .collect();
            let target = &self.halfspaces[i];
            constraints.push(Halfspace::new(target.normal.clone(), target.bound + 1.0));
            let sol = solve_lp(&LpProblem {
                objective: target.normal.clone(),
                constraints,
            })?;
            if sol.optimal_value <= target.bound + EPS_LP {
                self.halfspaces.remove(i);
                self.kinds.remove(i);
            } else {
                i += 1;
            }
        }
        Ok(())
    }

    /// True if some window facet is active (the cell reaches the window
    /// boundary).
    pub fn touches_window_boundary(&self) -> Result<bool> {
        for (h, k) in self.halfspaces.iter().zip(&self.kinds) {
            if *k == FacetKind::Window && self.support(&h.normal)? >= h.bound - 1e-7 {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Image under `x -> s x` (s > 0).
    pub fn scaled(&self, s: f64) -> HPolytope {
        assert!(s > 0.0, "scale must be positive");
        HPolytope {
            dim: self.dim,
            halfspaces: self
                .halfspaces
                .iter()
                .map(|h| Halfspace::new(h.normal.clone(), h.bound * s))
                .collect(),
            kinds: self.kinds.clone(),
            bbox: OnceLock::new(),
        }
    }

    /// Image under `x -> x + v`.
    pub fn translated(&self, v: &[f64]) -> HPolytope {
        HPolytope {
            dim: self.dim,
            halfspaces: self
                .halfspaces
                .iter()
                .map(|h| Halfspace::new(h.normal.clone(), h.bound + dot(&h.normal, v)))
                .collect(),
            kinds: self.kinds.clone(),
            bbox: OnceLock::new(),
        }
    }
}

impl HPolytope {
    /// Euclidean distance from `x` to the closed cell (Dykstra's alternating
    /// projections; accurate to roughly `tol`).
    pub fn distance_from(&self, x: &[f64], tol: f64) -> f64 {
        if self.contains_closed(x, 0.0) {
            return 0.0;
        }
        let m = self.halfspaces.len();
        let mut y = x.to_vec();
        let mut incr = vec![vec![0.0; self.dim]; m];
        for _ in 0..10_000 {
            let prev = y.clone();
            for (h, p) in self.halfspaces.iter().zip(incr.iter_mut()) {
                let z: Vector = y.iter().zip(p.iter()).map(|(a, b)| a + b).collect();
                let excess = dot(&h.normal, &z) - h.bound;
                let proj: Vector = if excess > 0.0 {
                    z.iter()
                        .zip(&h.normal)
                        .map(|(a, n)| a - excess * n)
                        .collect()
                } else {
                    z.clone()
                };
                *p = z.iter().zip(&proj).map(|(a, b)| a - b).collect();
                y = proj;
            }
            if norm(&crate::linalg::sub(&y, &prev)) <= tol * 1e-3 {
                break;
            }
        }
        norm(&crate::linalg::sub(x, &y))
    }
}

impl ConvexBody for HPolytope {
    fn dim(&self) -> usize {
        self.dim
    }

    fn support(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.dim, u.len())?;
        match solve_lp(&LpProblem {
            objective: u.to_vec(),
            constraints: self.halfspaces.clone(),
        }) {
            Ok(sol) => Ok(sol.optimal_value),
            Err(LpError::Unbounded) => Err(GeometryError::UnboundedBody),
            Err(e) => Err(e.into()),
        }
    }
}

/// Minimum number of Monte Carlo points for volume and centroid estimates.
pub const MIN_MC_POINTS: usize = 100;

/// Hit-or-miss volume estimate over the bounding box.
pub fn mc_volume(cell: &HPolytope, n_points: usize, rng: &mut RngStream) -> Result<(f64, f64)> {
    if n_points < MIN_MC_POINTS {
        return Err(GeometryError::TooFewPoints {
            min: MIN_MC_POINTS,
            got: n_points,
        });
    }
    let (lo, hi) = cell.bounding_box()?;
    let box_volume: f64 = lo.iter().zip(&hi).map(|(l, h)| h - l).product();
    let mut x = vec![0.0; cell.dim()];
    let mut hits = 0usize;
    for _ in 0..n_points {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = lo[i] + (hi[i] - lo[i]) * rng.random::<f64>();
        }
        if cell.contains_closed(&x, EPS_LP) {
            hits += 1;
        }
    }
    let p = hits as f64 / n_points as f64;
    let se = box_volume * (p * (1.0 - p) / n_points as f64).sqrt();
    Ok((box_volume * p, se))
}

/// Mean of hit-or-miss points accepted inside the cell.
pub fn centroid_estimate(cell: &HPolytope, n_points: usize, rng: &mut RngStream) -> Result<Vector> {
    if n_points < MIN_MC_POINTS {
        return Err(GeometryError::TooFewPoints {
            min: MIN_MC_POINTS,
            got: n_points,
        });
    }
    let (lo, hi) = cell.bounding_box()?;
    let d = cell.dim();
    let mut x = vec![0.0; d];
    let mut sum = vec![0.0; d];
    let mut hits = 0usize;
    for _ in 0..n_points {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = lo[i] + (hi[i] - lo[i]) * rng.random::<f64>();
        }
        if cell.contains_closed(&x, EPS_LP) {
            hits += 1;
            sum.iter_mut().zip(&x).for_each(|(s, v)| *s += v);
        }
    }
    if hits == 0 {
        return Err(GeometryError::NoInteriorSamples(n_points));
    }
    Ok(sum.into_iter().map(|s| s / hits as f64).collect())
}

/// Fixed set of unit directions used by the diameter surrogate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionSet {
    directions: Vec<Vector>,
}

impl DirectionSet {
    /// Default direction count.
    pub const DEFAULT_COUNT: usize = 256;

    pub fn new(directions: Vec<Vector>) -> Result<Self> {
        let d = directions.first().map(|u| u.len()).unwrap_or(0);
        let mut out = Vec::with_capacity(directions.len());
        for u in directions {
            check_dim(d, u.len())?;
            out.push(normalized(&u).ok_or_else(|| {
                GeometryError::InvalidHyperplane("zero direction in direction set".into())
            })?);
        }
        if out.is_empty() {
            return Err(GeometryError::InvalidHyperplane(
                "empty direction set".into(),
            ));
        }
        Ok(Self { directions: out })
    }

    /// Low-discrepancy directions on the half sphere (widths are even, so
    /// antipodes are redundant).
    ///
    /// d = 1: `{e_1}`. d = 2: equally spaced angles on `[0, pi)` with one
    /// random rotation drawn from `rng`. d >= 3: a Halton sequence pushed
    /// through Box-Muller and normalized, Cranley-Patterson shifted by `rng`.
    pub fn quasi_uniform(d: usize, count: usize, rng: &mut RngStream) -> Self {
        assert!(d >= 1 && count >= 1);
        let directions = match d {
            1 => vec![vec![1.0]],
            2 => {
                let shift: f64 = rng.random();
                (0..count)
                    .map(|i| {
                        let a = PI * (i as f64 + shift) / count as f64;
                        vec![a.cos(), a.sin()]
                    })
                    .collect()
            }
            _ => {
                const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
                let pairs = d.div_ceil(2);
                assert!(
                    2 * pairs <= PRIMES.len(),
                    "quasi-uniform directions support d <= 12"
                );
                let shifts: Vec<f64> = (0..2 * pairs).map(|_| rng.random()).collect();
                (1..=count as u64)
                    .map(|i| {
                        let mut g = Vec::with_capacity(2 * pairs);
                        for p in 0..pairs {
                            let u1 = (radical_inverse(i, PRIMES[2 * p]) + shifts[2 * p]).fract();
                            let u2 =
                                (radical_inverse(i, PRIMES[2 * p + 1]) + shifts[2 * p + 1]).fract();
                            let r = (-2.0 * (1.0 - u1).max(1e-300).ln()).sqrt();
                            g.push(r * (2.0 * PI * u2).cos());
                            g.push(r * (2.0 * PI * u2).sin());
                        }
                        g.truncate(d);
                        normalized(&g).unwrap_or_else(|| unit_axis(d, 0))
                    })
                    .collect()
            }
        };
        Self { directions }
    }

    pub fn dim(&self) -> usize {
        self.directions[0].len()
    }

    pub fn directions(&self) -> &[Vector] {
        &self.directions
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Maximum width over a fixed direction set: a lower bound on the diameter,
/// exactly 1-homogeneous under dilation.
pub fn diameter_surrogate<B: ConvexBody + ?Sized>(
    body: &B,
    directions: &DirectionSet,
) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for u in directions.directions() {
        best = best.max(body.width(u)?);
    }
    Ok(best)
}

/// Counterclockwise vertex cycle of a planar cell.
pub fn polygon_vertices_2d(cell: &HPolytope) -> Result<Vec<Vector>> {
    if cell.dim() != 2 {
        return Err(GeometryError::NotPlanar(cell.dim()));
    }
    const TOL: f64 = 1e-9;
    let hs = cell.halfspaces();
    let mut verts: Vec<Vector> = Vec::new();
    for i in 0..hs.len() {
        for j in (i + 1)..hs.len() {
            let (a, b) = (&hs[i], &hs[j]);
            let det = a.normal[0] * b.normal[1] - a.normal[1] * b.normal[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let x = (a.bound * b.normal[1] - b.bound * a.normal[1]) / det;
            let y = (a.normal[0] * b.bound - b.normal[0] * a.bound) / det;
            let p = vec![x, y];
            if cell.contains_closed(&p, TOL)
                && !verts
                    .iter()
                    .any(|v| (v[0] - x).abs() <= TOL && (v[1] - y).abs() <= TOL)
            {
                verts.push(p);
            }
        }
    }
    if verts.is_empty() {
        return Ok(verts);
    }
    let n = verts.len() as f64;
    let cx = verts.iter().map(|v| v[0]).sum::<f64>() / n;
    let cy = verts.iter().map(|v| v[1]).sum::<f64>() / n;
    verts.sort_by(|p, q| {
        let ap = (p[1] - cy).atan2(p[0] - cx);
        let aq = (q[1] - cy).atan2(q[0] - cx);
        ap.total_cmp(&aq)
    });
    Ok(verts)
}

/// Shoelace area of a vertex cycle.
pub fn polygon_area(vertices: &[Vector]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n)
        .map(|i| {
            let (p, q) = (&vertices[i], &vertices[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum();
    0.5 * twice.abs()
}

/// Area centroid of a counterclockwise vertex cycle.
pub fn polygon_centroid(vertices: &[Vector]) -> Vector {
    let n = vertices.len();
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (p, q) = (&vertices[i], &vertices[(i + 1) % n]);
        let cross = p[0] * q[1] - q[0] * p[1];
        a += cross;
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    vec![cx / (3.0 * a), cy / (3.0 * a)]
}

/// Convex hull of a finite point set, as a body with support function.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexHull {
    vertices: Vec<Vector>,
}

impl VertexHull {
    pub fn new(vertices: Vec<Vector>) -> Self {
        assert!(!vertices.is_empty(), "hull of no points");
        Self { vertices }
    }

    pub fn vertices(&self) -> &[Vector] {
        &self.vertices
    }
}

impl ConvexBody for VertexHull {
    fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    fn support(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.dim(), u.len())?;
        Ok(self
            .vertices
            .iter()
            .map(|v| dot(u, v))
            .fold(f64::NEG_INFINITY, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    #[test]
    fn distance_to_square() {
        let sq = HPolytope::from_box(&[0.0, 0.0], &[1.0, 1.0]);
        assert_eq!(sq.distance_from(&[0.5, 0.5], 1e-9), 0.0);
        assert_abs_diff_eq!(sq.distance_from(&[2.0, 0.5], 1e-9), 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(sq.distance_from(&[2.0, 2.0], 1e-9), SQRT_2, epsilon = 1e-7);
    }

    #[test]
    fn vertex_hull_matches_lp_support() {
        let tri = HPolytope::from_halfspaces(
            2,
            vec![
                Halfspace::new(vec![-1.0, 0.0], 0.0),
                Halfspace::new(vec![0.0, -1.0], 0.0),
                Halfspace::new(vec![1.0, 1.0], 1.0),
            ],
        )
        .unwrap();
        let hull = VertexHull::new(polygon_vertices_2d(&tri).unwrap());
        let dirs = DirectionSet::quasi_uniform(2, 64, &mut RngStream::new(1));
        for u in dirs.directions() {
            assert_abs_diff_eq!(
                hull.support(u).unwrap(),
                tri.support(u).unwrap(),
                epsilon = 1e-9
            );
        }
        let c = polygon_centroid(hull.vertices());
        assert_abs_diff_eq!(c[0], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1], 1.0 / 3.0, epsilon = 1e-12);
    }

    fn unit_square() -> HPolytope {
        HPolytope::from_box(&[0.0, 0.0], &[1.0, 1.0])
    }

    fn triangle() -> HPolytope {
        HPolytope::from_halfspaces(
            2,
            vec![
                Halfspace::new(vec![-1.0, 0.0], 0.0),
                Halfspace::new(vec![0.0, -1.0], 0.0),
                Halfspace::new(vec![1.0, 1.0], 1.0),
            ],
        )
        .unwrap()
    }

    fn hp(u: Vec<f64>, t: f64) -> Hyperplane {
        Hyperplane::new(u, t).unwrap()
    }

    #[test]
    fn support_examples() {
        let w = Window::unit_cube(2);
        assert_abs_diff_eq!(w.support(&[1.0, 0.0]).unwrap(), 1.0);
        let ball = Window::new_ball(vec![0.0, 0.0, 0.0], 2.5).unwrap();
        assert_abs_diff_eq!(
            ball.support(&[0.0, 0.6, 0.8]).unwrap(),
            2.5,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            triangle().support(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap(),
            FRAC_1_SQRT_2,
            epsilon = EPS_LP
        );
    }

    #[test]
    fn width_examples() {
        let cube = Window::unit_cube(3);
        for i in 0..3 {
            assert_abs_diff_eq!(cube.width(&unit_axis(3, i)).unwrap(), 1.0);
        }
        let ball = Window::new_ball(vec![1.0, 1.0], 0.75).unwrap();
        assert_abs_diff_eq!(ball.width(&[0.6, 0.8]).unwrap(), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(
            unit_square()
                .width(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2])
                .unwrap(),
            SQRT_2,
            epsilon = EPS_LP
        );
    }

    #[test]
    fn hits_examples() {
        let sq = unit_square();
        assert!(sq.hits(&hp(vec![1.0, 0.0], 0.5)).unwrap());
        assert!(!sq.hits(&hp(vec![1.0, 0.0], 1.5)).unwrap());
        assert!(sq.hits(&hp(vec![1.0, 0.0], 1.0)).unwrap());
    }

    #[test]
    fn split_examples() {
        let sq = unit_square();
        let (b, a) = sq.split(&hp(vec![1.0, 0.0], 0.5)).unwrap();
        let (b, a) = (b.unwrap(), a.unwrap());
        let (lo, hi) = b.bounding_box().unwrap();
        assert_abs_diff_eq!(hi[0] - lo[0], 0.5, epsilon = EPS_LP);
        assert_abs_diff_eq!(hi[1] - lo[1], 1.0, epsilon = EPS_LP);
        let (lo, hi) = a.bounding_box().unwrap();
        assert_abs_diff_eq!(lo[0], 0.5, epsilon = EPS_LP);
        assert_abs_diff_eq!(hi[0], 1.0, epsilon = EPS_LP);

        let (b, a) = sq.split(&hp(vec![1.0, 0.0], 2.0)).unwrap();
        assert_eq!(b.unwrap().facet_count(), 5);
        assert!(a.is_none());

        let (b, a) = sq
            .split(&hp(vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2], FRAC_1_SQRT_2))
            .unwrap();
        let mut rng = RngStream::new(11);
        for side in [b.unwrap(), a.unwrap()] {
            let (v, se) = mc_volume(&side, 100_000, &mut rng).unwrap();
            assert!((v - 0.5).abs() <= 4.0 * se, "{v} +- {se}");
            assert_abs_diff_eq!(
                polygon_area(&polygon_vertices_2d(&side).unwrap()),
                0.5,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn contains_and_tie_breaking() {
        let sq = unit_square();
        assert!(sq.contains(&[0.5, 0.5]));
        assert!(!sq.contains(&[2.0, 0.0]));
        let (b, a) = sq.split(&hp(vec![1.0, 0.0], 0.5)).unwrap();
        assert!(b.unwrap().contains(&[0.5, 0.2]));
        assert!(!a.unwrap().contains(&[0.5, 0.2]));
    }

    #[test]
    fn bounding_ball_examples() {
        let (c, r) = unit_square().bounding_ball().unwrap();
        assert_abs_diff_eq!(c[0], 0.5, epsilon = EPS_LP);
        assert_abs_diff_eq!(c[1], 0.5, epsilon = EPS_LP);
        assert_abs_diff_eq!(r, SQRT_2 / 2.0, epsilon = EPS_LP);

        assert_eq!(
            Window::new_ball(vec![0.0, 0.0], 1.0).unwrap().to_polytope(),
            Err(GeometryError::BallNotPolytope)
        );

        let thin = HPolytope::from_halfspaces(
            2,
            vec![
                Halfspace::new(vec![1.0, 0.0], 1e-8),
                Halfspace::new(vec![-1.0, 0.0], 0.0),
                Halfspace::new(vec![0.0, 1.0], 1.0),
                Halfspace::new(vec![0.0, -1.0], 0.0),
            ],
        )
        .unwrap();
        let (_, r) = thin.bounding_ball().unwrap();
        assert_abs_diff_eq!(r, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn mc_volume_examples() {
        let mut rng = RngStream::new(5);
        let (v, se) = mc_volume(&unit_square(), 1000, &mut rng).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(se, 0.0);

        let (v, se) = mc_volume(&triangle(), 100_000, &mut rng).unwrap();
        assert!((v - 0.5).abs() <= 4.0 * se);

        let strip = HPolytope::from_box(&[0.0, 0.0], &[1.0, 1.0])
            .split(&hp(vec![1.0, 0.0], 1e-3))
            .unwrap()
            .0
            .unwrap();
        let (v, se) = mc_volume(&strip, 10_000, &mut rng).unwrap();
        assert!((v - 1e-3).abs() <= 4.0 * se.max(1e-12), "{v} {se}");

        assert!(matches!(
            mc_volume(&triangle(), 10, &mut rng),
            Err(GeometryError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn diameter_surrogate_examples() {
        let axes = DirectionSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(
            diameter_surrogate(&unit_square(), &axes).unwrap(),
            1.0,
            epsilon = EPS_LP
        );

        let dirs = DirectionSet::quasi_uniform(2, 256, &mut RngStream::new(1));
        let s = diameter_surrogate(&unit_square(), &dirs).unwrap();
        assert!((1.41..=SQRT_2 + 1e-9).contains(&s), "{s}");

        let k = triangle();
        let s1 = diameter_surrogate(&k, &dirs).unwrap();
        let s2 = diameter_surrogate(&k.scaled(2.0), &dirs).unwrap();
        assert_abs_diff_eq!(s2, 2.0 * s1, epsilon = 1e-12);
    }

    #[test]
    fn centroid_examples() {
        let mut rng = RngStream::new(3);
        let centered = HPolytope::from_box(&[-0.5, -0.5], &[0.5, 0.5]);
        let c = centroid_estimate(&centered, 20_000, &mut rng).unwrap();
        assert!(c.iter().all(|v| v.abs() < 0.02));

        // SE per coordinate of a triangle centroid: sqrt(Var/n_hits), Var = 1/18.
        let n = 100_000;
        let c = centroid_estimate(&triangle(), n, &mut rng).unwrap();
        let se = (1.0 / 18.0 / (0.5 * n as f64)).sqrt();
        for v in &c {
            assert!((v - 1.0 / 3.0).abs() <= 4.0 * se, "{c:?}");
        }

        let shift = [3.0, -2.0];
        let moved = centroid_estimate(&triangle().translated(&shift), n, &mut rng).unwrap();
        for i in 0..2 {
            assert!((moved[i] - shift[i] - 1.0 / 3.0).abs() <= 4.0 * se);
        }
    }

    #[test]
    fn polygon_vertex_examples() {
        let v = polygon_vertices_2d(&unit_square()).unwrap();
        assert_eq!(v.len(), 4);
        // CCW starting from the smallest angle around (0.5, 0.5): (0,0) first.
        let expected = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        for (p, e) in v.iter().zip(expected) {
            assert_abs_diff_eq!(p[0], e[0], epsilon = 1e-12);
            assert_abs_diff_eq!(p[1], e[1], epsilon = 1e-12);
        }

        let mut hs = unit_square().halfspaces().to_vec();
        hs.push(Halfspace::new(vec![1.0, 0.0], 5.0));
        let redundant = HPolytope::from_halfspaces(2, hs).unwrap();
        assert_eq!(polygon_vertices_2d(&redundant).unwrap().len(), 4);

        let (below, _) = unit_square()
            .split(&hp(vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2], FRAC_1_SQRT_2))
            .unwrap();
        assert_eq!(polygon_vertices_2d(&below.unwrap()).unwrap().len(), 3);

        let cube = HPolytope::from_box(&[0.0; 3], &[1.0; 3]);
        assert_eq!(polygon_vertices_2d(&cube), Err(GeometryError::NotPlanar(3)));
    }

    #[test]
    fn pruning_keeps_the_set() {
        let mut hs = unit_square().halfspaces().to_vec();
        for k in 0..10 {
            hs.push(Halfspace::new(vec![1.0, 0.0], 2.0 + k as f64));
        }
        let mut p = HPolytope::from_halfspaces(2, hs).unwrap();
        p.prune_redundant().unwrap();
        assert_eq!(p.facet_count(), 4);
        assert_abs_diff_eq!(p.support(&[1.0, 0.0]).unwrap(), 1.0, epsilon = EPS_LP);
    }

    #[test]
    fn window_boundary_detection() {
        let sq = HPolytope::from_box(&[-1.0, -1.0], &[1.0, 1.0]);
        assert!(sq.touches_window_boundary().unwrap());
        let inner = sq
            .split(&hp(vec![1.0, 0.0], 0.5))
            .unwrap()
            .0
            .unwrap()
            .split(&hp(vec![-1.0, 0.0], 0.5))
            .unwrap()
            .0
            .unwrap()
            .split(&hp(vec![0.0, 1.0], 0.5))
            .unwrap()
            .0
            .unwrap()
            .split(&hp(vec![0.0, -1.0], 0.5))
            .unwrap()
            .0
            .unwrap();
        assert!(!inner.touches_window_boundary().unwrap());
    }
}
