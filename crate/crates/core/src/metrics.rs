//! Throughput, backlog, delay and drift from a solved chain.

use serde::Serialize;

use crate::chain::{model_for, TransitionMatrix};
use crate::error::{Error, Result};
use crate::model::{Kernels, ModelParams, Variant};
use crate::stationary::StationaryDistribution;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub variant: Variant,
    pub params: ModelParams,
    /// Packets per frame, `p_a (M - S_B)`.
    pub throughput_total: f64,
    pub avg_backlog: f64,
    /// Frames; `None` when the throughput is zero.
    pub delay_total: Option<f64>,
    pub throughput_new: f64,
    /// Alternative new-packet throughput that counts every recovered packet.
    pub throughput_new_consistent: f64,
    pub throughput_backlogged: f64,
    pub delay_backlogged: Option<f64>,
}

impl MetricsReport {
    pub fn compute(pi: &StationaryDistribution, params: &ModelParams) -> Self {
        let throughput_total = throughput(pi, params);
        let avg_backlog = avg_backlog(pi);
        let delay_total = delay(throughput_total, avg_backlog).ok();
        let (throughput_new, throughput_new_consistent) = throughput_new(pi, params);
        let (throughput_backlogged, delay_backlogged) =
            backlogged_metrics(throughput_total, throughput_new, avg_backlog);
        MetricsReport {
            variant: params.variant(),
            params: *params,
            throughput_total,
            avg_backlog,
            delay_total,
            throughput_new,
            throughput_new_consistent,
            throughput_backlogged,
            delay_backlogged: delay_backlogged.ok(),
        }
    }
}

/// `Th = p_a sum_N pi_N (M - N)`.
pub fn throughput(pi: &StationaryDistribution, params: &ModelParams) -> f64 {
    let m = params.users() as f64;
    params.p_a()
        * pi.pi
            .iter()
            .enumerate()
            .map(|(n, p)| p * (m - n as f64))
            .sum::<f64>()
}

/// `S_B = sum_N pi_N N`.
pub fn avg_backlog(pi: &StationaryDistribution) -> f64 {
    pi.pi.iter().enumerate().map(|(n, p)| p * n as f64).sum()
}

/// Little's law: `D = 1 + S_B / Th`, in frames.
pub fn delay(throughput: f64, backlog: f64) -> Result<f64> {
    if throughput > 0.0 {
        Ok(1.0 + backlog / throughput)
    } else {
        Err(Error::UndefinedDelay(throughput))
    }
}

/// New-packet throughput `T`, returned as `(as specified, consistent)`.
///
/// For the ZigZag chains the first value is `sum pi_N [Q_a(1,N) + Q_a(2,N) Q_r(0,N)]`;
/// the second weights a double new arrival by two and lets a lone new packet
/// survive one concurrent retransmission.
pub fn throughput_new(pi: &StationaryDistribution, params: &ModelParams) -> (f64, f64) {
    let model = model_for(params.variant());
    pi.pi
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(verbatim, consistent), (n, &p)| {
            if p == 0.0 {
                return (verbatim, consistent);
            }
            let k = Kernels::new(params, n);
            (
                verbatim + p * model.new_packet_rate(&k),
                consistent + p * model.new_packet_rate_consistent(&k),
            )
        })
}

/// `(T_bar, D_bar)` with `T_bar = Th - T` and `D_bar = 1 + S_B / T_bar`.
pub fn backlogged_metrics(
    throughput_total: f64,
    throughput_new: f64,
    avg_backlog: f64,
) -> (f64, Result<f64>) {
    let backlogged = throughput_total - throughput_new;
    (backlogged, delay(backlogged, avg_backlog))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EquilibriumKind {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Equilibrium {
    /// Backlog level where the drift crosses zero, linearly interpolated.
    pub location: f64,
    pub kind: EquilibriumKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityVerdict {
    Monostable,
    Bistable,
    Degenerate,
}

impl StabilityVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            StabilityVerdict::Monostable => "monostable",
            StabilityVerdict::Bistable => "bistable",
            StabilityVerdict::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftCurve {
    pub variant: Variant,
    /// `D_N = (M - N) p_a - P_succ(N)`.
    pub values: Vec<f64>,
    pub psucc: Vec<f64>,
    /// `(M - N) p_a`.
    pub arrival_rate: Vec<f64>,
    /// Exact expected one-frame backlog change of the chain.
    pub chain_drift: Vec<f64>,
    pub equilibria: Vec<Equilibrium>,
}

impl DriftCurve {
    pub fn stable_count(&self) -> usize {
        self.equilibria
            .iter()
            .filter(|e| e.kind == EquilibriumKind::Stable)
            .count()
    }

    /// Builds a curve from raw drift values (no model attached).
    pub fn from_values(variant: Variant, values: Vec<f64>) -> Self {
        let equilibria = equilibria(&values);
        let n = values.len();
        DriftCurve {
            variant,
            values,
            psucc: vec![f64::NAN; n],
            arrival_rate: vec![f64::NAN; n],
            chain_drift: vec![f64::NAN; n],
            equilibria,
        }
    }
}

pub fn drift_curve(params: &ModelParams) -> DriftCurve {
    let model = model_for(params.variant());
    let m = params.users();
    let mut psucc = Vec::with_capacity(m + 1);
    let mut arrival_rate = Vec::with_capacity(m + 1);
    let mut values = Vec::with_capacity(m + 1);
    for n in 0..=m {
        let k = Kernels::new(params, n);
        let s = model.success_probability(&k);
        let a = (m - n) as f64 * params.p_a();
        psucc.push(s);
        arrival_rate.push(a);
        values.push(a - s);
    }
    let chain_drift = TransitionMatrix::build(params).expected_increments();
    DriftCurve {
        variant: params.variant(),
        equilibria: equilibria(&values),
        values,
        psucc,
        arrival_rate,
        chain_drift,
    }
}

/// Sign of each drift value; zeros inherit the left neighbour's sign and a
/// leading zero counts as positive (drift at an empty backlog is arrivals only).
fn signs(values: &[f64]) -> Vec<bool> {
    let mut out = Vec::with_capacity(values.len());
    let mut previous = true;
    for &v in values {
        let positive = if v > 0.0 {
            true
        } else if v < 0.0 {
            false
        } else {
            previous
        };
        out.push(positive);
        previous = positive;
    }
    out
}

fn equilibria(values: &[f64]) -> Vec<Equilibrium> {
    let signs = signs(values);
    let mut out = Vec::new();
    for n in 1..values.len() {
        if signs[n] == signs[n - 1] {
            continue;
        }
        let (a, b) = (values[n - 1], values[n]);
        let location = if a == b {
            n as f64
        } else {
            (n - 1) as f64 + a / (a - b)
        };
        let kind = if signs[n - 1] {
            EquilibriumKind::Stable
        } else {
            EquilibriumKind::Unstable
        };
        out.push(Equilibrium { location, kind });
    }
    out
}

pub fn classify_stability(curve: &DriftCurve) -> StabilityVerdict {
    match curve.stable_count() {
        0 => StabilityVerdict::Degenerate,
        1 => StabilityVerdict::Monostable,
        _ => StabilityVerdict::Bistable,
    }
}
