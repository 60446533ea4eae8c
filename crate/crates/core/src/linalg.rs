//! Small dense vector arithmetic and a dense simplex LP solver.
//!
//! Every geometric query on an H-polytope reduces to
//!
//! ```text
//! maximize  <c, x>   subject to  <a_i, x> <= b_i,  x free in R^d
//! ```
//!
//! with `d` small (at most ~10) and the number of constraints `m` at most a
//! few hundred. The solver works on the dual program
//!
//! ```text
//! minimize  <b, y>   subject to  sum_i y_i a_i = c,  y >= 0
//! ```
//!
//! whose tableau has only `d` rows. Phase 1 finds a dual feasible basis with
//! artificial variables, phase 2 optimizes; Bland's rule is used for both the
//! entering and leaving choice, which rules out cycling and makes the pivot
//! sequence a deterministic function of the input. The primal optimizer is
//! read off the simplex multipliers of the final basis.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute feasibility/optimality tolerance for geometric LPs.
pub const EPS_LP: f64 = 1e-9;

/// Pivot elements smaller than this are treated as zero.
const EPS_PIVOT: f64 = 1e-11;
/// Reduced costs above `-EPS_COST` are treated as nonnegative.
const EPS_COST: f64 = 1e-11;

pub type Vector = Vec<f64>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vector {
    a.iter().map(|x| x * s).collect()
}

pub fn neg(a: &[f64]) -> Vector {
    a.iter().map(|x| -x).collect()
}

/// Returns `a / |a|`, or `None` for a (numerically) zero vector.
pub fn normalized(a: &[f64]) -> Option<Vector> {
    let n = norm(a);
    (n > 1e-300 && n.is_finite()).then(|| scale(a, 1.0 / n))
}

pub fn unit_axis(d: usize, i: usize) -> Vector {
    let mut e = vec![0.0; d];
    e[i] = 1.0;
    e
}

/// Closed halfspace `{x : <normal, x> <= bound}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vector,
    pub bound: f64,
}

impl Halfspace {
    pub fn new(normal: Vector, bound: f64) -> Self {
        Self { normal, bound }
    }

    /// Signed slack `bound - <normal, x>`; nonnegative inside.
    pub fn slack(&self, x: &[f64]) -> f64 {
        self.bound - dot(&self.normal, x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub objective: Vector,
    pub constraints: Vec<Halfspace>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub optimal_value: f64,
    pub optimizer: Vector,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("simplex iteration limit reached")]
    IterationLimit,
}

/// Solves `max <objective, x>` over the constraints.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, LpError> {
    let dim = problem.objective.len();
    validate(dim, &problem.constraints)?;
    if problem.objective.iter().any(|v| !v.is_finite()) {
        return Err(LpError::Malformed(
            "objective has non-finite entries".into(),
        ));
    }
    match solve_via_dual(&problem.objective, &problem.constraints)? {
        DualOutcome::Optimal(x) => Ok(LpSolution {
            optimal_value: dot(&problem.objective, &x),
            optimizer: x,
        }),
        DualOutcome::DualUnbounded => Err(LpError::Infeasible),
        DualOutcome::DualInfeasible => {
            // Primal is unbounded or infeasible; the Chebyshev program always
            // has an optimum and settles which.
            let (_, radius) = chebyshev_center(dim, &problem.constraints)?;
            if radius >= -EPS_LP {
                Err(LpError::Unbounded)
            } else {
                Err(LpError::Infeasible)
            }
        }
    }
}

/// Returns a point satisfying every constraint within [`EPS_LP`].
///
/// The point is the center of a largest inscribed ball (radius capped at 1),
/// so it sits in the interior whenever the interior is nonempty.
pub fn feasible_point(dim: usize, constraints: &[Halfspace]) -> Result<Vector, LpError> {
    let (x, radius) = chebyshev_center(dim, constraints)?;
    if radius >= -EPS_LP {
        Ok(x)
    } else {
        Err(LpError::Infeasible)
    }
}

/// Solves `max s` subject to `<a_i, x> + |a_i| s <= b_i` and `s <= 1`.
///
/// Returns the center and the (capped) inscribed radius. A negative radius
/// means the constraint set is empty; its magnitude is the smallest uniform
/// relaxation that would make it feasible.
pub fn chebyshev_center(dim: usize, constraints: &[Halfspace]) -> Result<(Vector, f64), LpError> {
    validate(dim, constraints)?;
    let mut lifted = Vec::with_capacity(constraints.len() + 1);
    for h in constraints {
        let mut n = h.normal.clone();
        n.push(norm(&h.normal));
        lifted.push(Halfspace::new(n, h.bound));
    }
    lifted.push(Halfspace::new(unit_axis(dim + 1, dim), 1.0));
    let objective = unit_axis(dim + 1, dim);
    match solve_via_dual(&objective, &lifted)? {
        DualOutcome::Optimal(mut x) => {
            let s = x.pop().expect("lifted dimension");
            Ok((x, s))
        }
        // y = e_cap is always dual feasible and the primal is always feasible,
        // so neither case can occur for well-formed input.
        _ => Err(LpError::Malformed(
            "Chebyshev program without optimum (non-finite data?)".into(),
        )),
    }
}

fn validate(dim: usize, constraints: &[Halfspace]) -> Result<(), LpError> {
    if dim == 0 {
        return Err(LpError::Malformed("dimension must be at least 1".into()));
    }
    if constraints.is_empty() {
        return Err(LpError::Malformed(
            "at least one constraint required".into(),
        ));
    }
    for (i, h) in constraints.iter().enumerate() {
        if h.normal.len() != dim {
            return Err(LpError::Malformed(format!(
                "constraint {i} has dimension {} (expected {dim})",
                h.normal.len()
            )));
        }
        if !h.bound.is_finite() || h.normal.iter().any(|v| !v.is_finite()) {
            return Err(LpError::Malformed(format!("constraint {i} is not finite")));
        }
        if norm(&h.normal) == 0.0 {
            return Err(LpError::Malformed(format!(
                "constraint {i} has a zero normal"
            )));
        }
    }
    Ok(())
}

enum DualOutcome {
    Optimal(Vector),
    DualInfeasible,
    DualUnbounded,
}

/// Dense simplex tableau for `min cost^T y, A y = rhs, y >= 0` with an
/// identity block of artificials appended.
struct Tableau {
    rows: usize,
    /// Number of structural (dual) variables; artificials follow.
    structural: usize,
    /// Row-major, `rows x (structural + rows + 1)`; last column is the rhs.
    data: Vec<f64>,
    /// Reduced costs for every column plus the negated objective at the end.
    reduced: Vec<f64>,
    basis: Vec<usize>,
    /// Row sign flips applied so that the initial rhs is nonnegative.
    signs: Vec<f64>,
}

impl Tableau {
    fn width(&self) -> usize {
        self.structural + self.rows + 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width() + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width() - 1)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width();
        let p = self.data[pr * w + pc];
        for c in 0..w {
            self.data[pr * w + c] /= p;
        }
        let (before, rest) = self.data.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[pc];
            if f != 0.0 {
                for c in 0..w {
                    row[c] -= f * prow[c];
                }
                row[pc] = 0.0;
            }
        }
        let f = self.reduced[pc];
        if f != 0.0 {
            for c in 0..w {
                self.reduced[c] -= f * prow[c];
            }
            self.reduced[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Recomputes reduced costs for a cost vector over all columns.
    fn price(&mut self, cost: &[f64]) {
        let w = self.width();
        self.reduced = cost.to_vec();
        self.reduced.push(0.0);
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for c in 0..w {
                    self.reduced[c] -= cb * self.data[r * w + c];
                }
            }
        }
    }

    /// Runs Bland-rule simplex over the columns `< allowed`.
    /// Returns `false` if the objective is unbounded below.
    fn optimize(&mut self, allowed: usize) -> Result<bool, LpError> {
        let limit = 50 * (self.width() + 10) * (self.rows + 1);
        for _ in 0..limit {
            let entering =
                (0..allowed).find(|&c| self.reduced[c] < -EPS_COST && !self.basis.contains(&c));
            let Some(pc) = entering else {
                return Ok(true);
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > EPS_PIVOT {
                    let ratio = self.rhs(r).max(0.0) / a;
                    best = match best {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - 1e-14
                                || (ratio <= bratio + 1e-14 && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            match best {
                Some((pr, _)) => self.pivot(pr, pc),
                None => return Ok(false),
            }
        }
        Err(LpError::IterationLimit)
    }
}

fn solve_via_dual(objective: &[f64], constraints: &[Halfspace]) -> Result<DualOutcome, LpError> {
    let d = objective.len();
    let m = constraints.len();
    let w = m + d + 1;
    let mut data = vec![0.0; d * w];
    let mut signs = vec![1.0; d];
    for k in 0..d {
        let s = if objective[k] < 0.0 { -1.0 } else { 1.0 };
        signs[k] = s;
        for (j, h) in constraints.iter().enumerate() {
            data[k * w + j] = s * h.normal[k];
        }
        data[k * w + m + k] = 1.0;
        data[k * w + w - 1] = s * objective[k];
    }
    let mut t = Tableau {
        rows: d,
        structural: m,
        data,
        reduced: Vec::new(),
        basis: (m..m + d).collect(),
        signs,
    };

    // Phase 1: minimize the sum of artificials.
    let mut cost1 = vec![0.0; m + d];
    cost1[m..].iter_mut().for_each(|c| *c = 1.0);
    t.price(&cost1);
    t.optimize(m)?;
    let infeasibility: f64 = (0..d).filter(|&r| t.basis[r] >= m).map(|r| t.rhs(r)).sum();
    let scale_c = objective.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    if infeasibility > 1e-9 * scale_c {
        return Ok(DualOutcome::DualInfeasible);
    }
    // Drive remaining artificials out of the basis where possible; rows whose
    // structural part vanishes are redundant and keep their artificial at 0.
    for r in 0..d {
        if t.basis[r] >= m {
            let mut best: Option<(usize, f64)> = None;
            for c in 0..m {
                let a = t.at(r, c).abs();
                if a > EPS_PIVOT && !t.basis.contains(&c) && best.is_none_or(|(_, ba)| a > ba) {
                    best = Some((c, a));
                }
            }
            if let Some((c, _)) = best {
                t.pivot(r, c);
            }
        }
    }

    // Phase 2: minimize <b, y> over structural columns only.
    let mut cost2: Vec<f64> = constraints.iter().map(|h| h.bound).collect();
    cost2.extend(std::iter::repeat_n(0.0, d));
    t.price(&cost2);
    if !t.optimize(m)? {
        return Ok(DualOutcome::DualUnbounded);
    }

    // Simplex multipliers: reduced cost of artificial k is -w_k, and the
    // primal point is x = S w.
    let x = (0..d).map(|k| -t.signs[k] * t.reduced[m + k]).collect();
    Ok(DualOutcome::Optimal(x))
}
