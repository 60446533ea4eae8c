//! Purely random regression trees and forests over sampled partitions.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::directions::DirectionalDistribution;
use crate::geometry::{ConvexBody, HPolytope, Window};
use crate::linalg::Vector;
use crate::rng::RngStream;
use crate::stats::mean_and_se;
use crate::tessellation::{
    sample_partition, CellRef, Partition, PartitionDocument, PartitionKind, TessellationError,
};

/// Version of the model JSON document.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ForestError {
    #[error(transparent)]
    Tessellation(#[from] TessellationError),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("schema: {0}")]
    Schema(String),
    #[error("dimension mismatch: model has d = {expected}, input has d = {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("forest needs at least one tree")]
    NoTrees,
    #[error("invalid density grid: {0}")]
    InvalidDensity(String),
    #[error("model document: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ForestError>;

/// Training data inside a window.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    window: Window,
    x: Vec<Vector>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(window: Window, x: Vec<Vector>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(ForestError::Schema(format!(
                "{} points but {} responses",
                x.len(),
                y.len()
            )));
        }
        let d = window.dim();
        for (row, (xi, yi)) in x.iter().zip(&y).enumerate() {
            if xi.len() != d {
                return Err(ForestError::Row {
                    row,
                    message: format!("expected {d} coordinates, got {}", xi.len()),
                });
            }
            if !xi.iter().all(|v| v.is_finite()) || !yi.is_finite() {
                return Err(ForestError::Row {
                    row,
                    message: "non-finite value".into(),
                });
            }
            if !window.contains(xi) {
                return Err(ForestError::Row {
                    row,
                    message: "point outside the window".into(),
                });
            }
        }
        Ok(Self { window, x, y })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn points(&self) -> &[Vector] {
        &self.x
    }

    pub fn responses(&self) -> &[f64] {
        &self.y
    }

    /// Reads CSV with header `x1..xd,y`.
    pub fn read_csv<R: Read>(reader: R, window: Window) -> Result<Self> {
        let d = window.dim();
        let mut rdr = csv::Reader::from_reader(reader);
        let mut expected: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        expected.push("y".into());
        let header: Vec<String> = rdr
            .headers()?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        if header != expected {
            return Err(ForestError::Schema(format!(
                "expected header {}, got {}",
                expected.join(","),
                header.join(",")
            )));
        }
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let vals = parse_row(&rec?, d + 1, row)?;
            x.push(vals[..d].to_vec());
            y.push(vals[d]);
        }
        Self::new(window, x, y)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim()).map(|i| format!("x{i}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for (xi, yi) in self.x.iter().zip(&self.y) {
            let mut rec: Vec<String> = xi.iter().map(|v| v.to_string()).collect();
            rec.push(yi.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn parse_row(rec: &csv::StringRecord, width: usize, row: usize) -> Result<Vec<f64>> {
    if rec.len() != width {
        return Err(ForestError::Row {
            row,
            message: format!("expected {width} fields, got {}", rec.len()),
        });
    }
    rec.iter()
        .map(|s| {
            s.trim().parse::<f64>().map_err(|e| ForestError::Row {
                row,
                message: format!("bad number {s:?}: {e}"),
            })
        })
        .collect()
}

/// Reads query points from CSV with header `x1..xd` (an extra `y` column
/// is ignored).
pub fn read_query_csv<R: Read>(reader: R, d: usize) -> Result<Vec<Vector>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let xs: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    let with_y = header.len() == d + 1 && header[d] == "y";
    if header[..header.len().min(d)] != xs[..] || !(header.len() == d || with_y) {
        return Err(ForestError::Schema(format!(
            "expected header {}, got {}",
            xs.join(","),
            header.join(",")
        )));
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let vals = parse_row(&rec?, header.len(), row)?;
        out.push(vals[..d].to_vec());
    }
    Ok(out)
}

/// Writes `x1..xd,y_hat`.
pub fn write_predictions_csv<W: Write>(writer: W, xs: &[Vector], y_hat: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let d = xs.first().map_or(0, |x| x.len());
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    header.push("y_hat".into());
    w.write_record(&header)?;
    for (x, y) in xs.iter().zip(y_hat) {
        let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        rec.push(y.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub count: u64,
    pub sum_y: f64,
}

/// One fitted tree.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeModel {
    partition: Partition,
    aggregates: HashMap<CellRef, CellAggregate>,
}

impl TreeModel {
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn aggregates(&self) -> &HashMap<CellRef, CellAggregate> {
        &self.aggregates
    }
}

pub fn fit_tree(partition: Partition, data: &Dataset) -> Result<TreeModel> {
    if partition.dim() != data.dim() {
        return Err(ForestError::DimensionMismatch {
            expected: partition.dim(),
            got: data.dim(),
        });
    }
    let mut aggregates: HashMap<CellRef, CellAggregate> = HashMap::new();
    for (row, (x, y)) in data.x.iter().zip(&data.y).enumerate() {
        let r = partition.cell_of(x).map_err(|e| ForestError::Row {
            row,
            message: e.to_string(),
        })?;
        let a = aggregates.entry(r).or_default();
        a.count += 1;
        a.sum_y += y;
    }
    Ok(TreeModel {
        partition,
        aggregates,
    })
}

/// Mean response of the cell of `x`, or 0 for an empty cell.
pub fn predict_tree(model: &TreeModel, x: &[f64]) -> Result<f64> {
    let r = model.partition.cell_of(x)?;
    Ok(match model.aggregates.get(&r) {
        Some(a) if a.count > 0 => a.sum_y / a.count as f64,
        _ => 0.0,
    })
}

/// `M` fitted trees on i.i.d. partitions.
#[derive(Clone, Debug, PartialEq)]
pub struct ForestModel {
    trees: Vec<TreeModel>,
    lifetime: f64,
}

impl ForestModel {
    pub fn new(trees: Vec<TreeModel>, lifetime: f64) -> Result<Self> {
        if trees.is_empty() {
            return Err(ForestError::NoTrees);
        }
        Ok(Self { trees, lifetime })
    }

    pub fn trees(&self) -> &[TreeModel] {
        &self.trees
    }

    pub fn lifetime(&self) -> f64 {
        self.lifetime
    }

    pub fn size(&self) -> usize {
        self.trees.len()
    }

    pub fn window(&self) -> &Window {
        self.trees[0].partition.window()
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            lifetime: self.lifetime,
            trees: self
                .trees
                .iter()
                .map(|t| {
                    let mut aggregates: Vec<AggregateEntry> = t
                        .aggregates
                        .iter()
                        .map(|(cell, a)| AggregateEntry {
                            cell: cell.clone(),
                            count: a.count,
                            sum_y: a.sum_y,
                        })
                        .collect();
                    aggregates.sort_by(|a, b| a.cell.cmp(&b.cell));
                    TreeDocument {
                        partition: t.partition.to_document(),
                        aggregates,
                    }
                })
                .collect(),
        }
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(ForestError::Format(format!(
                "format_version {} (supported: {MODEL_FORMAT_VERSION})",
                doc.format_version
            )));
        }
        let trees = doc
            .trees
            .into_iter()
            .map(|t| {
                Ok(TreeModel {
                    partition: Partition::from_document(t.partition)?,
                    aggregates: t
                        .aggregates
                        .into_iter()
                        .map(|e| {
                            (
                                e.cell,
                                CellAggregate {
                                    count: e.count,
                                    sum_y: e.sum_y,
                                },
                            )
                        })
                        .collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let w = trees.first().map(|t| t.partition.window().clone());
        if trees
            .iter()
            .any(|t| Some(t.partition.window()) != w.as_ref())
        {
            return Err(ForestError::Format("trees disagree on the window".into()));
        }
        Self::new(trees, doc.lifetime)
    }

    pub fn save<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, &self.to_document())?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<Self> {
        Self::from_document(serde_json::from_reader(reader)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateEntry {
    pub cell: CellRef,
    pub count: u64,
    pub sum_y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub partition: PartitionDocument,
    pub aggregates: Vec<AggregateEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub lifetime: f64,
    pub trees: Vec<TreeDocument>,
}

/// Samples `m` partitions (tree `k` uses `rng.derive(k)`) and fits each.
pub fn fit_forest(
    kind: PartitionKind,
    phi: &DirectionalDistribution,
    lifetime: f64,
    m: usize,
    data: &Dataset,
    rng: &RngStream,
    cell_cap: usize,
) -> Result<ForestModel> {
    let trees = (0..m)
        .into_par_iter()
        .map(|k| {
            let p = sample_partition(
                kind,
                data.window(),
                phi,
                lifetime,
                &rng.derive(k as u64),
                cell_cap,
            )?;
            fit_tree(p, data)
        })
        .collect::<Result<Vec<_>>>()?;
    ForestModel::new(trees, lifetime)
}

/// Average of the tree predictions.
pub fn predict_forest(model: &ForestModel, x: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for t in &model.trees {
        total += predict_tree(t, x)?;
    }
    Ok(total / model.trees.len() as f64)
}

/// Law `mu` of the covariates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MuSampler {
    Uniform {
        window: Window,
    },
    /// Positive density on a box given by values on a regular grid of
    /// nodes (row-major, last axis fastest), interpolated multilinearly.
    DensityGrid {
        window: Window,
        shape: Vec<usize>,
        values: Vec<f64>,
    },
}

impl MuSampler {
    pub fn uniform(window: Window) -> Self {
        MuSampler::Uniform { window }
    }

    pub fn density_grid(window: Window, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if !matches!(window, Window::Box { .. }) {
            return Err(ForestError::InvalidDensity(
                "density grids need a box window".into(),
            ));
        }
        if shape.len() != window.dim() || shape.iter().any(|&s| s < 2) {
            return Err(ForestError::InvalidDensity(
                "need at least 2 nodes per axis".into(),
            ));
        }
        if values.len() != shape.iter().product::<usize>() {
            return Err(ForestError::InvalidDensity(
                "value count does not match shape".into(),
            ));
        }
        if !values.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(ForestError::InvalidDensity(
                "values must be positive".into(),
            ));
        }
        Ok(MuSampler::DensityGrid {
            window,
            shape,
            values,
        })
    }

    pub fn window(&self) -> &Window {
        match self {
            MuSampler::Uniform { window } | MuSampler::DensityGrid { window, .. } => window,
        }
    }

    /// Unnormalized density at `x` relative to its maximum (in `(0, 1]`).
    fn relative_density(&self, x: &[f64]) -> f64 {
        match self {
            MuSampler::Uniform { .. } => 1.0,
            MuSampler::DensityGrid {
                window: Window::Box { lower, upper },
                shape,
                values,
            } => {
                let max = values.iter().cloned().fold(0.0, f64::max);
                let d = shape.len();
                let mut base = vec![0usize; d];
                let mut frac = vec![0.0; d];
                for i in 0..d {
                    let s = (x[i] - lower[i]) / (upper[i] - lower[i]) * (shape[i] - 1) as f64;
                    let s = s.clamp(0.0, (shape[i] - 1) as f64);
                    let b = (s.floor() as usize).min(shape[i] - 2);
                    base[i] = b;
                    frac[i] = s - b as f64;
                }
                let mut v = 0.0;
                for corner in 0..(1usize << d) {
                    let mut w = 1.0;
                    let mut idx = 0;
                    for i in 0..d {
                        let bit = (corner >> i) & 1;
                        w *= if bit == 1 { frac[i] } else { 1.0 - frac[i] };
                        idx = idx * shape[i] + base[i] + bit;
                    }
                    v += w * values[idx];
                }
                v / max
            }
            MuSampler::DensityGrid { .. } => unreachable!("validated as a box"),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vector {
        loop {
            let x = self.window().sample_uniform(rng);
            if matches!(self, MuSampler::Uniform { .. })
                || rng.random::<f64>() <= self.relative_density(&x)
            {
                return x;
            }
        }
    }

    /// Draw from `mu` conditioned on `cell`, by rejection from the bounding
    /// box of the cell.
    pub fn sample_in_cell(&self, cell: &HPolytope, rng: &mut RngStream) -> Result<Vector> {
        let (lo, hi) = cell.bounding_box().map_err(TessellationError::from)?;
        let window = self.window();
        for _ in 0..crate::directions::MAX_REJECTIONS {
            let x: Vector = lo
                .iter()
                .zip(&hi)
                .map(|(l, h)| l + (h - l) * rng.random::<f64>())
                .collect();
            if cell.contains(&x)
                && window.contains(&x)
                && (matches!(self, MuSampler::Uniform { .. })
                    || rng.random::<f64>() <= self.relative_density(&x))
            {
                return Ok(x);
            }
        }
        Err(
            TessellationError::Direction(crate::directions::DirectionError::RejectionCap(
                crate::directions::MAX_REJECTIONS,
            ))
            .into(),
        )
    }
}

/// Draws `n` points `X ~ mu`, `Y = f(X) + N(0, sigma^2)`.
pub fn sample_dataset(
    f: &dyn Fn(&[f64]) -> f64,
    mu: &MuSampler,
    n: usize,
    sigma: f64,
    rng: &mut RngStream,
) -> Result<Dataset> {
    let noise = Normal::new(0.0, sigma.max(0.0)).map_err(|e| ForestError::Schema(e.to_string()))?;
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi = mu.sample(rng);
        y.push(f(&xi) + if sigma > 0.0 { noise.sample(rng) } else { 0.0 });
        x.push(xi);
    }
    Dataset::new(mu.window().clone(), x, y)
}

/// Monte Carlo risk `E[(f_hat(X) - f(X))^2]` over `n_test` fresh points.
pub fn estimate_risk(
    model: &ForestModel,
    f: &dyn Fn(&[f64]) -> f64,
    mu: &MuSampler,
    n_test: usize,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    let mut errs = Vec::with_capacity(n_test);
    for _ in 0..n_test {
        let x = mu.sample(rng);
        errs.push((predict_forest(model, &x)? - f(&x)).powi(2));
    }
    Ok(mean_and_se(&errs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Hyperplane;
    use crate::tessellation::{sample_stit, PartitionDocument};
    use approx::assert_abs_diff_eq;

    fn split_square() -> Partition {
        let doc = serde_json::json!({
            "format_version": 1,
            "window": {"kind": "box", "lower": [0.0, 0.0], "upper": [1.0, 1.0]},
            "phi": {"kind": "axis"},
            "lifetime": 1.0,
            "cell_cap": 100,
            "cuts": {"stit": {"nodes": [
                {"node": "internal", "cut": Hyperplane::new(vec![1.0, 0.0], 0.5).unwrap(),
                 "cut_time": 0.5, "below": 1, "above": 2},
                {"node": "leaf", "cell": HPolytope::from_box(&[0.0, 0.0], &[0.5, 1.0]), "birth_time": 0.5},
                {"node": "leaf", "cell": HPolytope::from_box(&[0.5, 0.0], &[1.0, 1.0]), "birth_time": 0.5}
            ]}}
        });
        let doc: PartitionDocument = serde_json::from_value(doc).unwrap();
        Partition::from_document(doc).unwrap()
    }

    fn single_cell() -> Partition {
        let w = Window::unit_cube(2);
        Partition::Stit(
            sample_stit(
                &w,
                &DirectionalDistribution::axis(2),
                1e-9,
                &RngStream::new(1),
            )
            .unwrap(),
        )
    }

    fn data(points: Vec<(Vector, f64)>) -> Dataset {
        let (x, y) = points.into_iter().unzip();
        Dataset::new(Window::unit_cube(2), x, y).unwrap()
    }

    #[test]
    fn single_cell_predicts_mean() {
        let d = data(vec![
            (vec![0.1, 0.2], 1.0),
            (vec![0.9, 0.9], 2.0),
            (vec![0.5, 0.5], 6.0),
        ]);
        let t = fit_tree(single_cell(), &d).unwrap();
        assert_eq!(predict_tree(&t, &[0.3, 0.3]).unwrap(), 3.0);
    }

    #[test]
    fn two_cells_and_empty_cell() {
        let d = data(vec![(vec![0.2, 0.5], 1.0), (vec![0.8, 0.5], 3.0)]);
        let t = fit_tree(split_square(), &d).unwrap();
        assert_eq!(predict_tree(&t, &[0.1, 0.1]).unwrap(), 1.0);
        assert_eq!(predict_tree(&t, &[0.7, 0.1]).unwrap(), 3.0);
        let only_below = data(vec![(vec![0.2, 0.5], 1.0)]);
        let t = fit_tree(split_square(), &only_below).unwrap();
        assert_eq!(predict_tree(&t, &[0.7, 0.1]).unwrap(), 0.0);
        let empty = data(vec![]);
        let t = fit_tree(split_square(), &empty).unwrap();
        assert_eq!(predict_tree(&t, &[0.2, 0.2]).unwrap(), 0.0);
        assert!(predict_tree(&t, &[1.2, 0.2]).is_err());
    }

    #[test]
    fn forest_averages_trees() {
        let t1 = fit_tree(split_square(), &data(vec![(vec![0.2, 0.5], 1.0)])).unwrap();
        let t3 = fit_tree(split_square(), &data(vec![(vec![0.2, 0.5], 3.0)])).unwrap();
        let f = ForestModel::new(vec![t1.clone(), t3], 1.0).unwrap();
        assert_eq!(predict_forest(&f, &[0.1, 0.1]).unwrap(), 2.0);
        let single = ForestModel::new(vec![t1.clone()], 1.0).unwrap();
        assert_eq!(
            predict_forest(&single, &[0.1, 0.1]).unwrap(),
            predict_tree(&t1, &[0.1, 0.1]).unwrap()
        );
        assert!(ForestModel::new(vec![], 1.0).is_err());
    }

    #[test]
    fn prediction_matches_brute_force() {
        let w = Window::unit_cube(2);
        let phi = DirectionalDistribution::isotropic(2);
        let mut rng = RngStream::new(3);
        let d = sample_dataset(
            &|x| x[0] + x[1],
            &MuSampler::uniform(w.clone()),
            300,
            0.1,
            &mut rng,
        )
        .unwrap();
        let p = Partition::Stit(sample_stit(&w, &phi, 6.0, &RngStream::new(4)).unwrap());
        let t = fit_tree(p.clone(), &d).unwrap();
        for _ in 0..200 {
            let q = w.sample_uniform(&mut rng);
            let r = p.cell_of(&q).unwrap();
            let ys: Vec<f64> = d
                .points()
                .iter()
                .zip(d.responses())
                .filter(|(x, _)| p.cell_of(x).unwrap() == r)
                .map(|(_, y)| *y)
                .collect();
            let expect = if ys.is_empty() {
                0.0
            } else {
                ys.iter().sum::<f64>() / ys.len() as f64
            };
            assert_abs_diff_eq!(predict_tree(&t, &q).unwrap(), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn risk_examples() {
        let w = Window::unit_cube(1);
        let mu = MuSampler::uniform(w.clone());
        let mut rng = RngStream::new(5);
        let d = sample_dataset(&|_| 2.0, &mu, 2000, 0.0, &mut rng).unwrap();
        let p = Partition::Stit(
            sample_stit(&w, &DirectionalDistribution::axis(1), 3.0, &rng.derive(1)).unwrap(),
        );
        let mut m = ForestModel::new(vec![fit_tree(p.clone(), &d).unwrap()], 3.0).unwrap();
        let (r, _) = estimate_risk(&m, &|_| 2.0, &mu, 1000, &mut rng).unwrap();
        assert_eq!(m.trees()[0].aggregates().len(), p.cell_count().unwrap());
        assert_eq!(r, 0.0);
        m = ForestModel::new(
            vec![fit_tree(p, &Dataset::new(w.clone(), vec![], vec![]).unwrap()).unwrap()],
            3.0,
        )
        .unwrap();
        let (r, se) = estimate_risk(&m, &|_| 2.0, &mu, 1000, &mut rng).unwrap();
        assert_eq!((r, se), (4.0, 0.0));
        // f(x) = x, one cell, large n: risk -> Var(X) = 1/12
        let big = sample_dataset(&|x| x[0], &mu, 20000, 0.0, &mut rng).unwrap();
        let one = Partition::Stit(
            sample_stit(&w, &DirectionalDistribution::axis(1), 1e-9, &rng.derive(2)).unwrap(),
        );
        let m = ForestModel::new(vec![fit_tree(one, &big).unwrap()], 1e-9).unwrap();
        let (r, se) = estimate_risk(&m, &|x| x[0], &mu, 4000, &mut rng).unwrap();
        assert!((r - 1.0 / 12.0).abs() <= 4.0 * se + 1e-3, "{r} +- {se}");
    }

    #[test]
    fn density_grid_sampler() {
        let w = Window::unit_cube(1);
        // density proportional to 1 + x on [0, 1]: mean 5/9
        let mu = MuSampler::density_grid(w, vec![2], vec![1.0, 2.0]).unwrap();
        let mut rng = RngStream::new(6);
        let xs: Vec<f64> = (0..20000).map(|_| mu.sample(&mut rng)[0]).collect();
        let (m, se) = mean_and_se(&xs);
        assert!((m - 5.0 / 9.0).abs() <= 4.0 * se);
        assert!(MuSampler::density_grid(Window::unit_cube(1), vec![2], vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let d = data(vec![(vec![0.1, 0.2], 1.5), (vec![0.3, 0.4], -2.0)]);
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(&buf[..], Window::unit_cube(2)).unwrap();
        assert_eq!(back, d);
        let bad = "x1,x2,y\n0.1,0.2,1\n1.5,0.2,1\n";
        match Dataset::read_csv(bad.as_bytes(), Window::unit_cube(2)) {
            Err(ForestError::Row { row, .. }) => assert_eq!(row, 1),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            Dataset::read_csv("a,b\n1,2\n".as_bytes(), Window::unit_cube(2)),
            Err(ForestError::Schema(_))
        ));
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        let w = Window::unit_cube(2);
        let mu = MuSampler::uniform(w.clone());
        let mut rng = RngStream::new(8);
        let d = sample_dataset(&|x| (x[0] * 7.0).sin(), &mu, 200, 0.3, &mut rng).unwrap();
        for kind in [PartitionKind::Stit, PartitionKind::Pht] {
            let m = fit_forest(
                kind,
                &DirectionalDistribution::isotropic(2),
                4.0,
                3,
                &d,
                &RngStream::new(9),
                1000,
            )
            .unwrap();
            let mut buf = Vec::new();
            m.save(&mut buf).unwrap();
            let back = ForestModel::load(&buf[..]).unwrap();
            for _ in 0..100 {
                let x = w.sample_uniform(&mut rng);
                assert_eq!(
                    predict_forest(&m, &x).unwrap().to_bits(),
                    predict_forest(&back, &x).unwrap().to_bits()
                );
            }
        }
    }
}
