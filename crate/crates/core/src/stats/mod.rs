//! Closed-form cell counts, Monte Carlo summaries, the two-sample
//! Kolmogorov-Smirnov test, tuning rules, and the experiment drivers.

mod experiments;

pub use experiments::*;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::geometry::unit_ball_volume;

/// Sample mean and its standard error (`sd / sqrt(n)`, `n - 1` denominator).
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Sample variance with `n - 1` denominator.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let (m, _) = mean_and_se(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len().max(2) - 1) as f64
}

/// Two-sample Kolmogorov-Smirnov test.
///
/// Returns the sup-distance between the empirical CDFs and the asymptotic
/// p-value `Q_KS(sqrt(n_e) D)` with `n_e = n m / (n + m)`. Ties (discrete
/// data) are handled by stepping both CDFs over equal values together.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return (0.0, 1.0);
    }
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = a[i].min(b[j]);
        while i < n && a[i] <= v {
            i += 1;
        }
        while j < m && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    (d, kolmogorov_survival(ne.sqrt() * d))
}

/// `Q_KS(x) = P(K > x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2)`.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // Jacobi-theta form, fast for small x:
        // P(K <= x) = sqrt(2 pi)/x sum_{k>=1} exp(-(2k-1)^2 pi^2 / (8 x^2)).
        let t = std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let cdf: f64 = (1..=6)
            .map(|k| (-((2 * k - 1) as f64).powi(2) * t).exp())
            .sum::<f64>()
            * (2.0 * std::f64::consts::PI).sqrt()
            / x;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for k in 1..=100 {
            let term = (-2.0 * (k * k) as f64 * x * x).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// Ordinary least squares fit `y = intercept + slope x`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Closed-form expected cell counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum ClosedFormCount {
    /// Axis directions on `[0,1]^d` in the Mondrian lifetime convention
    /// (STIT lifetime `d * lambda`): `(1 + lambda)^d`.
    MondrianCube { d: usize, lambda: f64 },
    /// Isotropic directions on a convex body given by its intrinsic volumes
    /// `V_0..V_d`: `sum_k (prod_{j<=k} gamma_j) lambda^k / k! V_k(W)`.
    IsotropicBody {
        d: usize,
        lambda: f64,
        intrinsic_volumes: Vec<f64>,
    },
    /// Isotropic directions on the ball of radius `R`:
    /// `sum_k (lambda R)^k kappa_k V_k(Pi)`.
    IsotropicBall { d: usize, lambda: f64, radius: f64 },
}

/// `gamma_j = Gamma((j+1)/2) Gamma(d/2) / (Gamma(j/2) Gamma((d+1)/2))`.
pub fn integral_geometric_constant(j: usize, d: usize) -> f64 {
    let (j, d) = (j as f64, d as f64);
    gamma((j + 1.0) / 2.0) * gamma(d / 2.0) / (gamma(j / 2.0) * gamma((d + 1.0) / 2.0))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Intrinsic volumes `V_0..V_d` of a box: elementary symmetric polynomials
/// of the side lengths.
pub fn box_intrinsic_volumes(sides: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; sides.len() + 1];
    e[0] = 1.0;
    for (i, s) in sides.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] += e[k - 1] * s;
        }
    }
    e
}

/// Intrinsic volumes of the ball `R B^d`: `R^k C(d,k) kappa_d / kappa_{d-k}`.
pub fn ball_intrinsic_volumes(d: usize, radius: f64) -> Vec<f64> {
    (0..=d)
        .map(|k| {
            radius.powi(k as i32) * binomial(d, k) * unit_ball_volume(d) / unit_ball_volume(d - k)
        })
        .collect()
}

pub fn expected_cell_count(case: &ClosedFormCount) -> f64 {
    match case {
        ClosedFormCount::MondrianCube { d, lambda } => (1.0 + lambda).powi(*d as i32),
        ClosedFormCount::IsotropicBody {
            d,
            lambda,
            intrinsic_volumes,
        } => {
            let mut total = 0.0;
            let mut prod = 1.0;
            let mut factorial = 1.0;
            for (k, vk) in intrinsic_volumes.iter().enumerate().take(d + 1) {
                if k > 0 {
                    prod *= integral_geometric_constant(k, *d);
                    factorial *= k as f64;
                }
                total += prod * lambda.powi(k as i32) / factorial * vk;
            }
            total
        }
        ClosedFormCount::IsotropicBall { d, lambda, radius } => {
            let c = crate::directions::isotropic_zonoid_radius(*d);
            let zonoid = ball_intrinsic_volumes(*d, c);
            (0..=*d)
                .map(|k| (lambda * radius).powi(k as i32) * unit_ball_volume(k) * zonoid[k])
                .sum()
        }
    }
}

/// Smoothness class of the regression function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothnessClass {
    /// `C^{0,beta}`: tree tuning.
    C0,
    /// `C^{1,beta}`: forest tuning.
    C1,
}

/// Lifetime tuned for `n` samples: `(L^2 n)^{1/(d + 2 beta)}` for `C0`,
/// `(L^2 n)^{1/(d + 2 beta + 2)}` for `C1`.
pub fn tune_lambda(rule: SmoothnessClass, n: usize, lipschitz: f64, d: usize, beta: f64) -> f64 {
    let denom = match rule {
        SmoothnessClass::C0 => d as f64 + 2.0 * beta,
        SmoothnessClass::C1 => d as f64 + 2.0 * beta + 2.0,
    };
    lipschitz.powf(2.0 / denom) * (n as f64).powf(1.0 / denom)
}

/// Forest size `ceil(L^{4 beta/(d+2beta+2)} n^{2 beta/(d+2beta+2)})`, at least 1.
///
/// The ceiling ignores a relative excess below 1e-9 so that exact powers
/// (e.g. `3125^{2/5} = 25`) are not bumped by rounding.
pub fn tune_forest_size(n: usize, lipschitz: f64, d: usize, beta: f64) -> usize {
    let denom = d as f64 + 2.0 * beta + 2.0;
    let m = lipschitz.powf(4.0 * beta / denom) * (n as f64).powf(2.0 * beta / denom);
    let rounded = m.round();
    let m = if (m - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded
    } else {
        m.ceil()
    };
    (m as usize).max(1)
}
