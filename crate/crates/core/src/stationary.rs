//! Stationary distribution of a backlog chain.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chain::TransitionMatrix;
use crate::error::{Error, Result};

pub const POWER_TOLERANCE: f64 = 1e-13;
/// `P^(2^1100)` is far past any mixing time representable in `f64` arithmetic.
pub const MAX_SQUARINGS: usize = 1100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    /// Gaussian elimination with partial pivoting on the balance equations.
    #[default]
    Direct,
    /// Uniform vector pushed through `P^(2^k)`, squaring until rank one.
    PowerIteration,
}

impl FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(SolverMethod::Direct),
            "power" | "power-iteration" => Ok(SolverMethod::PowerIteration),
            other => Err(Error::InvalidConfig(format!(
                "unknown solver method `{other}` (expected direct or power-iteration)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDistribution {
    pub pi: Vec<f64>,
    /// `max_j |(pi P)_j - pi_j|`.
    pub residual: f64,
    pub method: SolverMethod,
    /// Squarings used by power iteration; 0 for the direct method.
    pub iterations: usize,
}

impl StationaryDistribution {
    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }
}

pub fn solve_stationary(
    matrix: &TransitionMatrix,
    method: SolverMethod,
) -> Result<StationaryDistribution> {
    solve_with_normalization_row(matrix, method, matrix.size() - 1)
}

/// As [`solve_stationary`], choosing which balance equation the direct
/// method replaces by `sum pi = 1`. Ignored by power iteration.
pub fn solve_with_normalization_row(
    matrix: &TransitionMatrix,
    method: SolverMethod,
    replaced: usize,
) -> Result<StationaryDistribution> {
    let (raw, iterations) = match method {
        SolverMethod::Direct => (direct(matrix, replaced)?, 0),
        SolverMethod::PowerIteration => power_iteration(matrix)?,
    };
    let pi = clean(raw)?;
    let residual = residual(matrix, &pi);
    Ok(StationaryDistribution {
        pi,
        residual,
        method,
        iterations,
    })
}

/// `max_j |(pi P)_j - pi_j|`.
pub fn residual(matrix: &TransitionMatrix, pi: &[f64]) -> f64 {
    left_multiply(matrix, pi)
        .iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn left_multiply(matrix: &TransitionMatrix, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; matrix.size()];
    for (xi, row) in x.iter().zip(matrix.rows()) {
        if *xi == 0.0 {
            continue;
        }
        for (o, p) in out.iter_mut().zip(row) {
            *o += xi * p;
        }
    }
    out
}

/// Solves `(P^T - I) x = 0` with equation `replaced` swapped for `sum x = 1`.
fn direct(matrix: &TransitionMatrix, replaced: usize) -> Result<Vec<f64>> {
    let n = matrix.size();
    if replaced >= n {
        return Err(Error::IndexOutOfRange {
            index: replaced as i64,
            max: n - 1,
        });
    }
    // augmented system, row-major, n x (n + 1)
    let w = n + 1;
    let mut a = vec![0.0; n * w];
    for j in 0..n {
        for i in 0..n {
            a[j * w + i] = matrix.get(i, j) - if i == j { 1.0 } else { 0.0 };
        }
    }
    for i in 0..n {
        a[replaced * w + i] = 1.0;
    }
    a[replaced * w + n] = 1.0;

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r * w + col].abs().total_cmp(&a[s * w + col].abs()))
            .expect("non-empty range");
        if a[pivot * w + col].abs() < 1e-300 {
            return Err(Error::SingularSystem);
        }
        if pivot != col {
            for k in 0..w {
                a.swap(pivot * w + k, col * w + k);
            }
        }
        let diag = a[col * w + col];
        for r in col + 1..n {
            let factor = a[r * w + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..w {
                a[r * w + k] -= factor * a[col * w + k];
            }
        }
    }

    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|k| a[r * w + k] * x[k]).sum();
        x[r] = (a[r * w + n] - tail) / a[r * w + r];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(x)
}

/// Power iteration accelerated by repeated squaring: `Q <- Q^2` starting
/// from `Q = P`, so after `k` rounds the uniform start vector has been pushed
/// through `P^(2^k)`. Stops once every column of `Q` is constant to within
/// [`POWER_TOLERANCE`]; at that point every row, and so the iterate, is within
/// the tolerance of the stationary law whatever the mixing time.
fn power_iteration(matrix: &TransitionMatrix) -> Result<(Vec<f64>, usize)> {
    let n = matrix.size();
    let mut q: Vec<f64> = matrix.rows().flatten().copied().collect();
    let mut spread = column_spread(&q, n);
    for round in 0..=MAX_SQUARINGS {
        if spread <= POWER_TOLERANCE {
            let uniform = vec![1.0 / n as f64; n];
            let mut x = vec![0.0; n];
            for (xi, row) in uniform.iter().zip(q.chunks(n)) {
                for (o, p) in x.iter_mut().zip(row) {
                    *o += xi * p;
                }
            }
            return Ok((x, round));
        }
        q = square(&q, n);
        spread = column_spread(&q, n);
    }
    Err(Error::NotConverged {
        iterations: MAX_SQUARINGS,
        last_change: spread,
    })
}

fn square(q: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let row = &q[i * n..(i + 1) * n];
        let dst = &mut out[i * n..(i + 1) * n];
        for (k, &a) in row.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (d, b) in dst.iter_mut().zip(&q[k * n..(k + 1) * n]) {
                *d += a * b;
            }
        }
        // keep rows stochastic against drift over hundreds of squarings
        let total: f64 = dst.iter().sum();
        dst.iter_mut().for_each(|d| *d /= total);
    }
    out
}

/// `max_j (max_i Q[i][j] - min_i Q[i][j])`.
fn column_spread(q: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|j| {
            let (lo, hi) = (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
                let v = q[i * n + j];
                (lo.min(v), hi.max(v))
            });
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// Clamps round-off negatives to zero and renormalizes.
fn clean(mut pi: Vec<f64>) -> Result<Vec<f64>> {
    for p in pi.iter_mut() {
        if *p < -1e-12 {
            return Err(Error::SingularSystem);
        }
        if *p <= 0.0 {
            *p = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    if !(total > 0.0) {
        return Err(Error::SingularSystem);
    }
    if total != 1.0 {
        pi.iter_mut().for_each(|p| *p /= total);
    }
    Ok(pi)
}

/// Total-variation distance `(1/2) sum |a_i - b_i|`.
pub fn occupancy_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let l1: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    Ok((0.5 * l1).clamp(0.0, 1.0))
}
