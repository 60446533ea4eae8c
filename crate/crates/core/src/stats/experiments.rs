//! Rate experiments, bias-variance studies, and zero-cell statistics.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{mean_and_se, ols, tune_forest_size, tune_lambda, SmoothnessClass};
use crate::directions::{DirectionalDistribution, PhiSpec};
use crate::forest::{
    estimate_risk, fit_forest, fit_tree, predict_tree, sample_dataset, ForestError, MuSampler,
};
use crate::geometry::{
    centroid_estimate, diameter_surrogate, mc_volume, polygon_area, polygon_centroid,
    polygon_vertices_2d, ConvexBody, DirectionSet, HPolytope, VertexHull, Window,
};
use crate::linalg::Vector;
use crate::rng::RngStream;
use crate::tessellation::{
    sample_partition, sample_zero_cell, CellRef, Partition, PartitionKind, TessellationError,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Tessellation(#[from] TessellationError),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

/// Mean with standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn of(xs: &[f64]) -> Self {
        let (mean, se) = mean_and_se(xs);
        Self { mean, se }
    }
}

/// Regression functions with certified smoothness on `[0,1]^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CatalogFunction {
    Constant {
        value: f64,
    },
    /// `L sin(sum_i x_i / sqrt(d))`: gradient norm `L |cos| <= L`, so
    /// `C^{0,1}` with constant `L`.
    SineRidge {
        lipschitz: f64,
    },
    /// `L |x - c|^beta`: `C^{0,beta}` with constant `L` because
    /// `| |a|^b - |b'|^b | <= |a - b'|^b` for `b <= 1`.
    HolderCone {
        lipschitz: f64,
        beta: f64,
        center: Vector,
    },
    /// `(L/2) sum_i sin(w x_i)` with `w = min(sqrt(2), 2 / sqrt(d))`:
    /// gradient norm `(L/2) w sqrt(d) <= L`, Hessian norm `(L/2) w^2 <= L`.
    SineSum {
        lipschitz: f64,
    },
    /// `A sum_i cos(pi x_i)` with `A = (L / pi^2) min(1, pi / sqrt(d))`.
    /// Hessian norm `A pi^2 <= L` (gradient is `L`-Lipschitz, `C^{1,1}`)
    /// and gradient norm `A pi sqrt(d) <= L`. The normal derivative
    /// vanishes on the faces of the unit cube.
    CosineSum {
        lipschitz: f64,
    },
    /// `A sum_i s(x_i)` with `s(t) = t^3/3 - t^4/2 + t^5/5`, `A = 3 sqrt(3) L`.
    /// `s'' = 2t(1-t)(1-2t)` peaks at `sqrt(3)/9`, so the Hessian norm is
    /// at most `L`; the gradient norm is at most `A sqrt(d) / 16 <= L` for
    /// `d <= 9`. Both `s'` and `s''` vanish at 0 and 1.
    FlatEnds {
        lipschitz: f64,
    },
}

impl CatalogFunction {
    /// Default pick for a smoothness class on `[0,1]^d`.
    pub fn for_class(class: SmoothnessClass, lipschitz: f64, beta: f64, d: usize) -> Self {
        match class {
            SmoothnessClass::C0 if beta >= 1.0 => CatalogFunction::SineRidge { lipschitz },
            SmoothnessClass::C0 => CatalogFunction::HolderCone {
                lipschitz,
                beta,
                center: vec![0.5; d],
            },
            // A nonzero slope at the faces leaves an edge bias of order
            // lambda^-3 that hides the smooth-class rate at desk-scale n.
            SmoothnessClass::C1 => CatalogFunction::FlatEnds { lipschitz },
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            CatalogFunction::Constant { value } => *value,
            CatalogFunction::SineRidge { lipschitz } => {
                lipschitz * (x.iter().sum::<f64>() / (x.len() as f64).sqrt()).sin()
            }
            CatalogFunction::HolderCone {
                lipschitz,
                beta,
                center,
            } => {
                let r: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(a, c)| (a - c).powi(2))
                    .sum::<f64>()
                    .sqrt();
                lipschitz * r.powf(*beta)
            }
            CatalogFunction::SineSum { lipschitz } => {
                let w = 2f64.sqrt().min(2.0 / (x.len() as f64).sqrt());
                0.5 * lipschitz * x.iter().map(|v| (w * v).sin()).sum::<f64>()
            }
            CatalogFunction::CosineSum { lipschitz } => {
                let pi = std::f64::consts::PI;
                let d = x.len() as f64;
                let a = lipschitz / (pi * pi) * (pi / d.sqrt()).min(1.0);
                a * x.iter().map(|v| (pi * v).cos()).sum::<f64>()
            }
            CatalogFunction::FlatEnds { lipschitz } => {
                let a = 3.0 * 3f64.sqrt() * lipschitz;
                a * x
                    .iter()
                    .map(|t| t.powi(3) / 3.0 - t.powi(4) / 2.0 + t.powi(5) / 5.0)
                    .sum::<f64>()
            }
        }
    }
}

/// Number of trees per forest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestSizeRule {
    /// One tree.
    Single,
    /// `M_n` from [`tune_forest_size`].
    Tuned,
    Fixed(usize),
}

fn default_n_test() -> usize {
    2000
}

fn default_kind() -> PartitionKind {
    PartitionKind::Stit
}

/// Specification of a rate experiment on `[0,1]^d` with uniform design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateExperiment {
    pub d: usize,
    pub beta: f64,
    /// Smoothness class of the regression function.
    pub class: SmoothnessClass,
    pub lipschitz: f64,
    pub sigma: f64,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    /// Tuning rule for the lifetime.
    pub tuning: SmoothnessClass,
    pub forest_size: ForestSizeRule,
    pub phi: PhiSpec,
    #[serde(default = "default_kind")]
    pub sampler: PartitionKind,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    /// Overrides the catalog default for `class`.
    #[serde(default)]
    pub function: Option<CatalogFunction>,
}

impl RateExperiment {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ExperimentError::Invalid(m.into()));
        if self.d == 0 {
            return bad("d must be positive");
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad("beta must lie in (0, 1]");
        }
        if self.lipschitz.is_nan()
            || self.lipschitz <= 0.0
            || self.sigma.is_nan()
            || self.sigma < 0.0
        {
            return bad("need L > 0 and sigma >= 0");
        }
        if self.n_grid.len() < 4
            || self.n_grid.windows(2).any(|w| w[0] >= w[1])
            || self.n_grid[0] == 0
        {
            return bad("n_grid must be strictly increasing with at least 4 positive entries");
        }
        if self.reps == 0 || self.n_test == 0 {
            return bad("reps and n_test must be positive");
        }
        if let ForestSizeRule::Fixed(0) = self.forest_size {
            return bad("forest size must be at least 1");
        }
        Ok(())
    }

    pub fn function(&self) -> CatalogFunction {
        self.function.clone().unwrap_or_else(|| {
            CatalogFunction::for_class(self.class, self.lipschitz, self.beta, self.d)
        })
    }

    pub fn lambda_for(&self, n: usize) -> f64 {
        tune_lambda(self.tuning, n, self.lipschitz, self.d, self.beta)
    }

    pub fn forest_size_for(&self, n: usize) -> usize {
        match self.forest_size {
            ForestSizeRule::Single => 1,
            ForestSizeRule::Tuned => tune_forest_size(n, self.lipschitz, self.d, self.beta),
            ForestSizeRule::Fixed(m) => m,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub lambda: f64,
    pub forest_size: usize,
    pub risk: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub rep: usize,
    pub lambda: f64,
    pub forest_size: usize,
    pub risk: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// OLS slope of log mean risk on log n.
    pub slope: f64,
    pub intercept: f64,
    pub points: Vec<RatePoint>,
    pub rows: Vec<RateRow>,
    /// All mean risks are numerically zero; the slope is meaningless.
    pub degenerate: bool,
}

/// Runs every `(n, rep)` pair on the stream `rng.derive_path([i, rep])`.
pub fn run_rate_experiment(
    e: &RateExperiment,
    rng: &RngStream,
    cell_cap: usize,
) -> Result<RateFit> {
    e.validate()?;
    let window = Window::unit_cube(e.d);
    let phi = DirectionalDistribution::from_spec(&e.phi, e.d).map_err(TessellationError::from)?;
    let mu = MuSampler::uniform(window);
    let f = e.function();
    let jobs: Vec<(usize, usize)> = (0..e.n_grid.len())
        .flat_map(|i| (0..e.reps).map(move |r| (i, r)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, rep)| {
            let n = e.n_grid[i];
            let lambda = e.lambda_for(n);
            let m = e.forest_size_for(n);
            let stream = rng.derive_path(&[i as u64, rep as u64]);
            let data = sample_dataset(&|x| f.eval(x), &mu, n, e.sigma, &mut stream.derive(0))?;
            let model = fit_forest(
                e.sampler,
                &phi,
                lambda,
                m,
                &data,
                &stream.derive(1),
                cell_cap,
            )?;
            let (risk, _) =
                estimate_risk(&model, &|x| f.eval(x), &mu, e.n_test, &mut stream.derive(2))?;
            Ok(RateRow {
                n,
                rep,
                lambda,
                forest_size: m,
                risk,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<RatePoint> = e
        .n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let risks: Vec<f64> = rows[i * e.reps..(i + 1) * e.reps]
                .iter()
                .map(|r| r.risk)
                .collect();
            RatePoint {
                n,
                lambda: e.lambda_for(n),
                forest_size: e.forest_size_for(n),
                risk: Estimate::of(&risks),
            }
        })
        .collect();
    let degenerate = points.iter().all(|p| p.risk.mean <= 1e-15);
    let (slope, intercept) = if degenerate {
        (0.0, 0.0)
    } else {
        let lx: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
        let ly: Vec<f64> = points
            .iter()
            .map(|p| p.risk.mean.max(f64::MIN_POSITIVE).ln())
            .collect();
        ols(&lx, &ly)
    };
    Ok(RateFit {
        slope,
        intercept,
        points,
        rows,
        degenerate,
    })
}

/// Settings of a bias-variance study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasVarianceStudy {
    pub kind: PartitionKind,
    pub phi: PhiSpec,
    pub lambda: f64,
    pub n: usize,
    /// Partitions per replicate for the forest bias.
    pub m: usize,
    pub sigma: f64,
    pub reps: usize,
    pub n_test: usize,
    /// `mu` draws per cell for the oracle cell mean.
    pub oracle_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasVarianceReport {
    /// `E[(f_hat - f)^2]` of a single tree.
    pub total: Estimate,
    /// `E[(f - f_bar)^2]` with `f_bar` the `mu`-mean of `f` over the cell.
    pub bias: Estimate,
    /// `E[(f_hat - f_bar)^2]`.
    pub variance: Estimate,
    /// `E[(f_bar_M - f)^2]` for the average of `m` oracle cell means.
    pub forest_bias: Estimate,
    /// `E[(f_tilde - f)^2]`, `f_tilde` the partition average of `f_bar`,
    /// from the forest bias minus the between-partition variance over `m`.
    pub tilde_bias: Estimate,
}

fn cell_polytope(p: &Partition, r: &CellRef, x: &[f64]) -> Result<HPolytope> {
    match (p, r) {
        (Partition::Stit(s), CellRef::Leaf(i)) => Ok(s.leaf_cell(*i).expect("leaf").clone()),
        (Partition::Pht(s), _) => s
            .enumerate_cells()?
            .iter()
            .find(|c| c.contains(x))
            .cloned()
            .ok_or_else(|| ExperimentError::Invalid("point in no enumerated cell".into())),
        _ => unreachable!("cell refs match their partition kind"),
    }
}

/// Oracle mean of `f` over cells, cached per cell.
struct CellMeans<'a> {
    f: &'a CatalogFunction,
    mu: &'a MuSampler,
    samples: usize,
    cache: HashMap<CellRef, f64>,
    rng: RngStream,
}

impl CellMeans<'_> {
    fn get(&mut self, p: &Partition, x: &[f64]) -> Result<f64> {
        let r = p.cell_of(x)?;
        if let Some(v) = self.cache.get(&r) {
            return Ok(*v);
        }
        let cell = cell_polytope(p, &r, x)?;
        let mut total = 0.0;
        for _ in 0..self.samples {
            total += self.f.eval(&self.mu.sample_in_cell(&cell, &mut self.rng)?);
        }
        let v = total / self.samples as f64;
        self.cache.insert(r, v);
        Ok(v)
    }
}

/// Monte Carlo decomposition of the single-tree risk and the forest bias.
///
/// Replicate `r` uses `rng.derive(r)`: data from tag 0, partition `k` from
/// `derive(1).derive(k)`, test points from tag 2, oracle draws from tag 3.
pub fn bias_variance_study(
    s: &BiasVarianceStudy,
    f: &CatalogFunction,
    mu: &MuSampler,
    rng: &RngStream,
    cell_cap: usize,
) -> Result<BiasVarianceReport> {
    if s.reps == 0 || s.m == 0 || s.n_test == 0 || s.oracle_samples == 0 {
        return Err(ExperimentError::Invalid(
            "reps, m, n_test, oracle_samples must be positive".into(),
        ));
    }
    let window = mu.window().clone();
    let phi = DirectionalDistribution::from_spec(&s.phi, window.dim())
        .map_err(TessellationError::from)?;
    let per_rep = (0..s.reps)
        .into_par_iter()
        .map(|r| {
            let stream = rng.derive(r as u64);
            let data = sample_dataset(&|x| f.eval(x), mu, s.n, s.sigma, &mut stream.derive(0))?;
            let parts: Vec<Partition> = (0..s.m)
                .map(|k| {
                    sample_partition(
                        s.kind,
                        &window,
                        &phi,
                        s.lambda,
                        &stream.derive(1).derive(k as u64),
                        cell_cap,
                    )
                })
                .collect::<std::result::Result<_, _>>()?;
            let tree = fit_tree(parts[0].clone(), &data)?;
            let mut oracles: Vec<CellMeans> = (0..s.m)
                .map(|k| CellMeans {
                    f,
                    mu,
                    samples: s.oracle_samples,
                    cache: HashMap::new(),
                    rng: stream.derive(3).derive(k as u64),
                })
                .collect();
            let mut test_rng = stream.derive(2);
            let (mut total, mut bias, mut var, mut fbias, mut tbias) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for _ in 0..s.n_test {
                let x = mu.sample(&mut test_rng);
                let fx = f.eval(&x);
                let fhat = predict_tree(&tree, &x)?;
                let means: Vec<f64> = parts
                    .iter()
                    .zip(oracles.iter_mut())
                    .map(|(p, o)| o.get(p, &x))
                    .collect::<Result<_>>()?;
                total += (fhat - fx).powi(2);
                bias += (fx - means[0]).powi(2);
                var += (fhat - means[0]).powi(2);
                let avg = means.iter().sum::<f64>() / s.m as f64;
                let sq = (avg - fx).powi(2);
                fbias += sq;
                tbias += if s.m > 1 {
                    let between =
                        means.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / (s.m - 1) as f64;
                    sq - between / s.m as f64
                } else {
                    sq
                };
            }
            let k = s.n_test as f64;
            Ok([total / k, bias / k, var / k, fbias / k, tbias / k])
        })
        .collect::<Result<Vec<_>>>()?;
    let col = |j: usize| Estimate::of(&per_rep.iter().map(|v| v[j]).collect::<Vec<_>>());
    Ok(BiasVarianceReport {
        total: col(0),
        bias: col(1),
        variance: col(2),
        forest_bias: col(3),
        tilde_bias: col(4),
    })
}

/// Geometric summaries of one zero cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroCellStats {
    pub diameter: f64,
    pub volume: f64,
    pub centroid: Vector,
    pub touches_boundary: bool,
}

/// Monte Carlo points for volume and centroid when `d != 2`.
pub const ZERO_CELL_MC_POINTS: usize = 4000;

/// Summaries of a cell. In the plane they are exact (vertex enumeration);
/// otherwise widths come from LPs and volume/centroid from hit-or-miss.
pub fn cell_statistics(
    cell: &HPolytope,
    directions: &DirectionSet,
    rng: &mut RngStream,
) -> Result<ZeroCellStats> {
    let touches_boundary = cell
        .touches_window_boundary()
        .map_err(TessellationError::from)?;
    if cell.dim() == 2 {
        let verts = polygon_vertices_2d(cell).map_err(TessellationError::from)?;
        let hull = VertexHull::new(verts);
        return Ok(ZeroCellStats {
            diameter: diameter_surrogate(&hull, directions).map_err(TessellationError::from)?,
            volume: polygon_area(hull.vertices()),
            centroid: polygon_centroid(hull.vertices()),
            touches_boundary,
        });
    }
    let geo = |e| ExperimentError::Tessellation(TessellationError::from(e));
    Ok(ZeroCellStats {
        diameter: diameter_surrogate(cell, directions).map_err(geo)?,
        volume: mc_volume(cell, ZERO_CELL_MC_POINTS, rng).map_err(geo)?.0,
        centroid: centroid_estimate(cell, ZERO_CELL_MC_POINTS, rng).map_err(geo)?,
        touches_boundary,
    })
}

/// Zero-cell statistics of `count` independent partitions; replicate `i`
/// uses `rng.derive(i)`.
pub fn zero_cell_sample(
    kind: PartitionKind,
    window: &Window,
    phi: &DirectionalDistribution,
    lambda: f64,
    count: usize,
    directions: &DirectionSet,
    rng: &RngStream,
) -> Result<Vec<ZeroCellStats>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let stream = rng.derive(i as u64);
            let cell = sample_zero_cell(kind, window, phi, lambda, &stream.derive(0))?;
            cell_statistics(&cell, directions, &mut stream.derive(1))
        })
        .collect()
}

/// Convenience: direction set shared by all scaling comparisons.
pub fn default_direction_set(d: usize) -> DirectionSet {
    DirectionSet::quasi_uniform(d, DirectionSet::DEFAULT_COUNT, &mut RngStream::new(0x5eed))
}

/// Width of `body` in the worst direction of `directions` (for reports).
pub fn min_width<B: ConvexBody>(body: &B, directions: &DirectionSet) -> f64 {
    directions
        .directions()
        .iter()
        .filter_map(|u| body.width(u).ok())
        .fold(f64::INFINITY, f64::min)
}
