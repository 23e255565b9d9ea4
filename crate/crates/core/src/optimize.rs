//! Retransmission probability maximizing the stationary throughput.

use rayon::prelude::*;
use serde::Serialize;

use crate::chain::TransitionMatrix;
use crate::error::{Error, Result};
use crate::metrics::throughput;
use crate::model::{ModelParams, Variant};
use crate::stationary::{solve_stationary, SolverMethod};

pub const MIN_GRID_STEP: f64 = 1e-4;
pub const MAX_GRID_STEP: f64 = 0.1;
/// Final bracket width of the golden-section refinement.
pub const REFINE_WIDTH: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub users: usize,
    pub p_a: f64,
    pub variant: Variant,
    pub grid_step: f64,
    pub qr_star: f64,
    pub th_star: f64,
    /// `(q_r, Th)` at every grid point, in increasing `q_r`.
    pub trace: Vec<(f64, f64)>,
}

/// Stationary throughput `Th` at one retransmission probability.
pub fn throughput_at(users: usize, p_a: f64, q_r: f64, variant: Variant) -> Result<f64> {
    let params = ModelParams::new(users, p_a, q_r, variant)?;
    let pi = solve_stationary(&TransitionMatrix::build(&params), SolverMethod::Direct)?;
    Ok(throughput(&pi, &params))
}

/// Grid points `step, 2 step, ..., 1 - step`.
pub fn grid(step: f64) -> Vec<f64> {
    let count = ((1.0 - 2.0 * step) / step + 1e-9).floor() as usize + 1;
    (1..=count).map(|k| k as f64 * step).collect()
}

pub fn maximize_throughput(
    users: usize,
    p_a: f64,
    variant: Variant,
    grid_step: f64,
) -> Result<OptimizationResult> {
    if !(MIN_GRID_STEP..=MAX_GRID_STEP).contains(&grid_step) {
        return Err(Error::OutOfRange {
            name: "grid_step",
            value: grid_step,
            expected: "1e-4 <= step <= 0.1",
        });
    }
    // validates users and p_a up front
    ModelParams::new(users, p_a, 0.5, variant)?;

    let trace = grid(grid_step)
        .into_par_iter()
        .map(|q| throughput_at(users, p_a, q, variant).map(|th| (q, th)))
        .collect::<Result<Vec<_>>>()?;

    // first strict maximum, so ties go to the smallest q_r
    let (best_index, &(mut qr_star, mut th_star)) = trace
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, &(f64, f64))>, (i, point)| match best {
            Some((_, b)) if b.1 >= point.1 => best,
            _ => Some((i, point)),
        })
        .expect("grid is never empty");

    let lo = if best_index == 0 { qr_star * 0.5 } else { trace[best_index - 1].0 };
    let hi = match trace.get(best_index + 1) {
        Some(&(q, _)) => q,
        None => 0.5 * (qr_star + 1.0),
    };
    let (q, th) = golden_section(lo, hi, |q| throughput_at(users, p_a, q, variant))?;
    if th > th_star {
        qr_star = q;
        th_star = th;
    }

    Ok(OptimizationResult {
        users,
        p_a,
        variant,
        grid_step,
        qr_star,
        th_star,
        trace,
    })
}

/// Maximizes `f` on `[lo, hi]` until the bracket is narrower than
/// [`REFINE_WIDTH`]; returns the best point evaluated.
fn golden_section<F>(mut lo: f64, mut hi: f64, f: F) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > REFINE_WIDTH {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}
