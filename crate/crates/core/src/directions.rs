//! Directional distributions, their associated zonoids, the hyperplane
//! measure of convex bodies, and exact sampling of hyperplanes hitting a cell.
//!
//! The hyperplane measure is `Lambda(A) = int_S int_R 1{H(u,t) in A} dt dphi(u)`
//! with `phi` an even probability measure. For a body `K`,
//! `Lambda([K]) = int (h(K,u) + h(K,-u)) dphi(u)`, the phi-mean width.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::geometry::{ConvexBody, DirectionSet, GeometryError, HPolytope, Hyperplane, Window};
use crate::linalg::{dot, norm, normalized, unit_axis, Vector};
use crate::rng::RngStream;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum DirectionError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid directional distribution: {0}")]
    Invalid(String),
    #[error("atoms span a proper subspace; the zonoid is flat")]
    DegenerateZonoid,
    #[error("thinning gave up after {0} rejections; the cell is degenerate")]
    RejectionCap(usize),
}

pub type Result<T> = std::result::Result<T, DirectionError>;

/// Rejection cap in [`sample_hit`].
pub const MAX_REJECTIONS: usize = 1_000_000;

/// Configuration form of a directional distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiKind {
    Axis,
    Isotropic,
    Discrete,
}

/// `{"kind": "axis" | "isotropic" | "discrete", "atoms": [...], "weights": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiSpec {
    pub kind: PhiKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<Vector>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl PhiSpec {
    pub fn axis() -> Self {
        Self {
            kind: PhiKind::Axis,
            atoms: None,
            weights: None,
        }
    }

    pub fn isotropic() -> Self {
        Self {
            kind: PhiKind::Isotropic,
            atoms: None,
            weights: None,
        }
    }
}

/// Even probability measure on the unit sphere.
///
/// Discrete atoms are stored on the canonical hemisphere (first nonzero
/// coordinate positive); atom `u` stands for the pair `{u, -u}` carrying its
/// weight.
#[derive(Clone, Debug, PartialEq)]
pub enum DirectionalDistribution {
    Discrete {
        atoms: Vec<Vector>,
        weights: Vec<f64>,
    },
    Isotropic {
        dim: usize,
    },
}

impl DirectionalDistribution {
    /// Uniform over the coordinate axes (the Mondrian case).
    pub fn axis(d: usize) -> Self {
        Self::Discrete {
            atoms: (0..d).map(|i| unit_axis(d, i)).collect(),
            weights: vec![1.0 / d as f64; d],
        }
    }

    pub fn isotropic(d: usize) -> Self {
        Self::Isotropic { dim: d }
    }

    /// Canonicalizes atoms (normalize, flip to the canonical hemisphere,
    /// merge antipodal or repeated atoms) and normalizes weights to sum 1.
    pub fn discrete(atoms: Vec<Vector>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(DirectionError::Invalid(
                "need one positive weight per atom and at least one atom".into(),
            ));
        }
        let d = atoms[0].len();
        if d == 0 {
            return Err(DirectionError::Invalid(
                "atoms must have positive dimension".into(),
            ));
        }
        let mut out_atoms: Vec<Vector> = Vec::new();
        let mut out_weights: Vec<f64> = Vec::new();
        for (a, w) in atoms.into_iter().zip(weights) {
            if a.len() != d {
                return Err(DirectionError::Invalid(
                    "atoms have mixed dimensions".into(),
                ));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(DirectionError::Invalid("weights must be positive".into()));
            }
            let u = normalized(&a).ok_or_else(|| DirectionError::Invalid("zero atom".into()))?;
            let u = canonical_hemisphere(u);
            match out_atoms
                .iter()
                .position(|v| v.iter().zip(&u).all(|(p, q)| (p - q).abs() < 1e-12))
            {
                Some(k) => out_weights[k] += w,
                None => {
                    out_atoms.push(u);
                    out_weights.push(w);
                }
            }
        }
        let total: f64 = out_weights.iter().sum();
        out_weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self::Discrete {
            atoms: out_atoms,
            weights: out_weights,
        })
    }

    pub fn from_spec(spec: &PhiSpec, d: usize) -> Result<Self> {
        let phi = match spec.kind {
            PhiKind::Axis => Self::axis(d),
            PhiKind::Isotropic => Self::isotropic(d),
            PhiKind::Discrete => {
                let atoms = spec
                    .atoms
                    .clone()
                    .ok_or_else(|| DirectionError::Invalid("discrete phi needs atoms".into()))?;
                let weights = spec
                    .weights
                    .clone()
                    .unwrap_or_else(|| vec![1.0; atoms.len()]);
                Self::discrete(atoms, weights)?
            }
        };
        if phi.dim() != d {
            return Err(DirectionError::Invalid(format!(
                "phi has dimension {}, expected {d}",
                phi.dim()
            )));
        }
        Ok(phi)
    }

    /// Exact specification (atoms and weights written out for discrete phi).
    pub fn to_spec(&self) -> PhiSpec {
        match self {
            Self::Discrete { atoms, weights } => PhiSpec {
                kind: PhiKind::Discrete,
                atoms: Some(atoms.clone()),
                weights: Some(weights.clone()),
            },
            Self::Isotropic { .. } => PhiSpec::isotropic(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Discrete { atoms, .. } => atoms[0].len(),
            Self::Isotropic { dim } => *dim,
        }
    }

    /// Draws `U ~ phi`, symmetrized for discrete atoms.
    pub fn sample_direction(&self, rng: &mut RngStream) -> Vector {
        match self {
            Self::Discrete { atoms, weights } => {
                let k = pick_weighted(weights, rng);
                if rng.random::<bool>() {
                    atoms[k].iter().map(|v| -v).collect()
                } else {
                    atoms[k].clone()
                }
            }
            Self::Isotropic { dim } => uniform_sphere(*dim, rng),
        }
    }
}

fn canonical_hemisphere(u: Vector) -> Vector {
    match u.iter().find(|v| **v != 0.0) {
        Some(v) if *v < 0.0 => u.into_iter().map(|x| -x).collect(),
        _ => u,
    }
}

fn pick_weighted(weights: &[f64], rng: &mut RngStream) -> usize {
    let total: f64 = weights.iter().sum();
    let mut r = rng.random::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        if r < *w {
            return k;
        }
        r -= w;
    }
    weights.len() - 1
}

/// Uniform point on `S^{d-1}` (normalized standard Gaussian vector).
pub fn uniform_sphere(d: usize, rng: &mut RngStream) -> Vector {
    loop {
        let g: Vector = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        if let Some(u) = normalized(&g) {
            return u;
        }
    }
}

/// `c_d = Gamma(d/2) / (2 sqrt(pi) Gamma((d+1)/2))`: the isotropic zonoid
/// radius.
pub fn isotropic_zonoid_radius(d: usize) -> f64 {
    let d = d as f64;
    gamma(d / 2.0) / (2.0 * PI.sqrt() * gamma((d + 1.0) / 2.0))
}

/// `h(Pi, v) = (1/2) int |<u, v>| dphi(u)`.
pub fn zonoid_support(phi: &DirectionalDistribution, v: &[f64]) -> f64 {
    match phi {
        DirectionalDistribution::Discrete { atoms, weights } => {
            0.5 * atoms
                .iter()
                .zip(weights)
                .map(|(u, w)| w * dot(u, v).abs())
                .sum::<f64>()
        }
        DirectionalDistribution::Isotropic { dim } => isotropic_zonoid_radius(*dim) * norm(v),
    }
}

/// `vol_d(Pi)`.
///
/// For discrete phi, `Pi` is the zonotope with segments `w_j u_j` and its
/// volume is the sum of `|det|` over all `d`-subsets of segments.
pub fn zonoid_volume(phi: &DirectionalDistribution) -> Result<f64> {
    match phi {
        DirectionalDistribution::Isotropic { dim } => Ok(crate::geometry::unit_ball_volume(*dim)
            * isotropic_zonoid_radius(*dim).powi(*dim as i32)),
        DirectionalDistribution::Discrete { atoms, weights } => {
            let d = atoms[0].len();
            let segments: Vec<Vector> = atoms
                .iter()
                .zip(weights)
                .map(|(u, w)| u.iter().map(|x| x * w).collect())
                .collect();
            let mut total = 0.0;
            let mut subset: Vec<usize> = (0..d).collect();
            if segments.len() >= d {
                loop {
                    let rows: Vec<&Vector> = subset.iter().map(|&i| &segments[i]).collect();
                    total += determinant(&rows).abs();
                    if !next_combination(&mut subset, segments.len()) {
                        break;
                    }
                }
            }
            let scale: f64 = weights
                .iter()
                .fold(0.0_f64, |a, w| a.max(*w))
                .powi(d as i32);
            if total <= 1e-12 * scale {
                Err(DirectionError::DegenerateZonoid)
            } else {
                Ok(total)
            }
        }
    }
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn determinant(rows: &[&Vector]) -> f64 {
    let n = rows.len();
    let mut a: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    let mut det = 1.0;
    for col in 0..n {
        let p = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty");
        if a[p][col] == 0.0 {
            return 0.0;
        }
        if p != col {
            a.swap(p, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    det
}

/// `h_min(Pi)` approximated by minimizing over a direction set.
pub fn zonoid_min_support(phi: &DirectionalDistribution, directions: &DirectionSet) -> f64 {
    directions
        .directions()
        .iter()
        .map(|u| zonoid_support(phi, u))
        .fold(f64::INFINITY, f64::min)
}

/// A body whose hyperplane measure can be evaluated.
#[derive(Clone, Copy, Debug)]
pub enum BodyRef<'a> {
    Window(&'a Window),
    Cell(&'a HPolytope),
}

impl<'a> From<&'a Window> for BodyRef<'a> {
    fn from(w: &'a Window) -> Self {
        BodyRef::Window(w)
    }
}

impl<'a> From<&'a HPolytope> for BodyRef<'a> {
    fn from(c: &'a HPolytope) -> Self {
        BodyRef::Cell(c)
    }
}

/// Value of `Lambda([K])`; `bound_only` marks an upper bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperplaneMeasure {
    pub value: f64,
    pub bound_only: bool,
}

/// `Lambda([K])`.
///
/// Exact for discrete phi (any body) and for isotropic phi on balls and
/// boxes. For isotropic phi on a general cell the bounding-ball value `2r`
/// is returned with `bound_only = true`.
pub fn lambda_of<'a>(
    phi: &DirectionalDistribution,
    body: impl Into<BodyRef<'a>>,
) -> Result<HyperplaneMeasure> {
    let body = body.into();
    let exact = |value| HyperplaneMeasure {
        value,
        bound_only: false,
    };
    match (phi, body) {
        (DirectionalDistribution::Discrete { atoms, weights }, body) => {
            let mut total = 0.0;
            for (u, w) in atoms.iter().zip(weights) {
                let width = match body {
                    BodyRef::Window(win) => win.width(u)?,
                    BodyRef::Cell(c) => c.width(u)?,
                };
                total += w * width;
            }
            Ok(exact(total))
        }
        (
            DirectionalDistribution::Isotropic { .. },
            BodyRef::Window(Window::Ball { radius, .. }),
        ) => Ok(exact(2.0 * radius)),
        (DirectionalDistribution::Isotropic { dim }, BodyRef::Window(w @ Window::Box { .. })) => {
            let sides = w.side_lengths().expect("box");
            Ok(exact(
                2.0 * isotropic_zonoid_radius(*dim) * sides.iter().sum::<f64>(),
            ))
        }
        (DirectionalDistribution::Isotropic { .. }, BodyRef::Cell(c)) => {
            let (_, r) = c.bounding_ball()?;
            Ok(HyperplaneMeasure {
                value: 2.0 * r,
                bound_only: true,
            })
        }
    }
}

/// First hyperplane of the `Lambda`-driven clock that hits `cell`, with the
/// total waiting time.
///
/// Candidates come from a clock of rate `Lambda([B]) = 2r` for the bounding
/// ball `B`: direction `U ~ phi`, offset uniform on `<U, c> +- r`. The first
/// candidate hitting the cell is accepted; the accepted hyperplane is
/// `Lambda` restricted to `[cell]` and the summed waiting time is
/// `Exp(Lambda([cell]))`.
pub fn sample_hit(
    phi: &DirectionalDistribution,
    cell: &HPolytope,
    rng: &mut RngStream,
) -> Result<(Hyperplane, f64)> {
    match sample_hit_within(phi, cell, f64::INFINITY, rng)? {
        Some(hit) => Ok(hit),
        None => unreachable!("an infinite horizon always ends in a hit"),
    }
}

/// Like [`sample_hit`], but gives up (returning `None`) as soon as the
/// accumulated waiting time exceeds `horizon`.
pub fn sample_hit_within(
    phi: &DirectionalDistribution,
    cell: &HPolytope,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<Option<(Hyperplane, f64)>> {
    let (center, radius) = cell.bounding_ball()?;
    let rate = 2.0 * radius;
    let clock = Exp::new(rate).map_err(|_| {
        DirectionError::Geometry(GeometryError::InvalidWindow(format!(
            "degenerate bounding ball radius {radius}"
        )))
    })?;
    let mut elapsed = 0.0;
    for _ in 0..MAX_REJECTIONS {
        elapsed += clock.sample(rng);
        if elapsed > horizon {
            return Ok(None);
        }
        let u = phi.sample_direction(rng);
        let t = dot(&u, &center) + radius * (2.0 * rng.random::<f64>() - 1.0);
        let h = Hyperplane {
            direction: u,
            offset: t,
        };
        if cell.hits(&h)? {
            return Ok(Some((h, elapsed)));
        }
    }
    Err(DirectionError::RejectionCap(MAX_REJECTIONS))
}

/// Direction from the size-biased law `dPhi(u) ∝ width(W, u) dphi(u)`.
pub fn sample_size_biased_direction(
    phi: &DirectionalDistribution,
    window: &Window,
    rng: &mut RngStream,
) -> Result<Vector> {
    match (phi, window) {
        (DirectionalDistribution::Discrete { atoms, weights }, w) => {
            let mut biased = Vec::with_capacity(atoms.len());
            for (u, wt) in atoms.iter().zip(weights) {
                biased.push(wt * w.width(u)?);
            }
            let k = pick_weighted(&biased, rng);
            Ok(if rng.random::<bool>() {
                atoms[k].iter().map(|v| -v).collect()
            } else {
                atoms[k].clone()
            })
        }
        (DirectionalDistribution::Isotropic { dim }, Window::Ball { .. }) => {
            Ok(uniform_sphere(*dim, rng))
        }
        (DirectionalDistribution::Isotropic { dim }, w @ Window::Box { .. }) => {
            let sides = w.side_lengths().expect("box");
            let max_width = norm(&sides);
            for _ in 0..MAX_REJECTIONS {
                let u = uniform_sphere(*dim, rng);
                if rng.random::<f64>() * max_width <= w.width(&u)? {
                    return Ok(u);
                }
            }
            Err(DirectionError::RejectionCap(MAX_REJECTIONS))
        }
    }
}

/// Hyperplane hitting the window with law `Lambda` conditioned on `[W]`.
pub fn sample_window_hyperplane(
    phi: &DirectionalDistribution,
    window: &Window,
    rng: &mut RngStream,
) -> Result<Hyperplane> {
    let u = sample_size_biased_direction(phi, window, rng)?;
    let hi = window.support(&u)?;
    let minus: Vector = u.iter().map(|v| -v).collect();
    let lo = -window.support(&minus)?;
    let t = lo + (hi - lo) * rng.random::<f64>();
    Ok(Hyperplane {
        direction: u,
        offset: t,
    })
}
