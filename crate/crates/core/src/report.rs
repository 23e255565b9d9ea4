//! Full analytic pipeline for one parameter set: matrix, stationary law,
//! metrics, drift and stability verdict.

use serde::Serialize;

use crate::chain::TransitionMatrix;
use crate::error::Result;
use crate::metrics::{classify_stability, drift_curve, DriftCurve, MetricsReport, StabilityVerdict};
use crate::model::ModelParams;
use crate::stationary::{solve_stationary, SolverMethod, StationaryDistribution};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolvedModel {
    pub params: ModelParams,
    pub stationary: StationaryDistribution,
    pub metrics: MetricsReport,
    pub drift: DriftCurve,
    pub verdict: StabilityVerdict,
}

pub fn solve_model(params: &ModelParams, method: SolverMethod) -> Result<SolvedModel> {
    let matrix = TransitionMatrix::build(params);
    let stationary = solve_stationary(&matrix, method)?;
    let metrics = MetricsReport::compute(&stationary, params);
    let drift = drift_curve(params);
    let verdict = classify_stability(&drift);
    Ok(SolvedModel {
        params: *params,
        stationary,
        metrics,
        drift,
        verdict,
    })
}
