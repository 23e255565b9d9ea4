//! Backlog transition matrices and the registry of chain models.
//!
//! Each protocol variant is a [`ChainModel`]: it knows how to lay out one
//! row of the frame-indexed transition matrix from the kernels at that
//! backlog level, and what it counts as a successful transmission for the
//! drift analysis. Models are looked up by name through [`registry`] /
//! [`lookup`], so the CLI and sweeps never match on the variant themselves.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Kernels, ModelParams, Variant};

/// A protocol variant expressed as a backlog Markov chain.
pub trait ChainModel: Send + Sync {
    fn variant(&self) -> Variant;

    fn name(&self) -> &'static str {
        self.variant().name()
    }

    fn description(&self) -> &'static str;

    /// Largest possible one-frame decrease of the backlog.
    fn max_backlog_drop(&self) -> usize;

    /// Writes `P[N][*]` into `row` (length `M + 1`, zero-filled on entry).
    fn fill_row(&self, k: &Kernels, row: &mut [f64]);

    /// Per-frame success probability entering the drift `(M-N) p_a - P_succ`.
    fn success_probability(&self, k: &Kernels) -> f64;

    /// Per-state rate of successful first-attempt packets, as used for the
    /// new-packet throughput `T`.
    fn new_packet_rate(&self, k: &Kernels) -> f64;

    /// Per-state expected number of first-attempt packets delivered, counting
    /// every packet the receiver actually recovers.
    fn new_packet_rate_consistent(&self, k: &Kernels) -> f64;
}

struct AlohaBaseline;
struct ZigzagPaper;
struct ZigzagStrict;

static ALOHA_BASELINE: AlohaBaseline = AlohaBaseline;
static ZIGZAG_PAPER: ZigzagPaper = ZigzagPaper;
static ZIGZAG_STRICT: ZigzagStrict = ZigzagStrict;

static REGISTRY: [&dyn ChainModel; 3] = [&ALOHA_BASELINE, &ZIGZAG_PAPER, &ZIGZAG_STRICT];

/// All registered chain models, in a fixed order.
pub fn registry() -> &'static [&'static dyn ChainModel] {
    &REGISTRY
}

pub fn lookup(name: &str) -> Result<&'static dyn ChainModel> {
    registry()
        .iter()
        .copied()
        .find(|m| m.name() == name.trim())
        .ok_or_else(|| Error::UnknownVariant(name.to_string()))
}

pub fn model_for(variant: Variant) -> &'static dyn ChainModel {
    registry()
        .iter()
        .copied()
        .find(|m| m.variant() == variant)
        .expect("every variant is registered")
}

fn put(row: &mut [f64], n: usize, delta: isize, value: f64) {
    let target = n as isize + delta;
    if target >= 0 && (target as usize) < row.len() {
        row[target as usize] += value;
    }
}

impl ChainModel for AlohaBaseline {
    fn variant(&self) -> Variant {
        Variant::AlohaBaseline
    }

    fn description(&self) -> &'static str {
        "classic slotted Aloha; two or more transmissions collide"
    }

    fn max_backlog_drop(&self) -> usize {
        1
    }

    fn fill_row(&self, k: &Kernels, row: &mut [f64]) {
        let n = k.backlog();
        for i in 2..k.arrival_law().len() {
            put(row, n, i as isize, k.qa(i));
        }
        put(row, n, 1, k.qa(1) * k.qr_at_least(1));
        put(row, n, 0, k.qa(1) * k.qr(0) + k.qa(0) * (k.qr(0) + k.qr_at_least(2)));
        put(row, n, -1, k.qa(0) * k.qr(1));
    }

    fn success_probability(&self, k: &Kernels) -> f64 {
        k.qa(1) * k.qr(0) + k.qr(1) * k.qa(0)
    }

    fn new_packet_rate(&self, k: &Kernels) -> f64 {
        k.qa(1) * k.qr(0)
    }

    fn new_packet_rate_consistent(&self, k: &Kernels) -> f64 {
        k.qa(1) * k.qr(0)
    }
}

/// Terms shared by both ZigZag chains. `pair_drops` selects where the
/// one-new-plus-one-backlogged ZigZag frame lands: `false` keeps it on the
/// diagonal (term-for-term transcription), `true` moves it to `N - 1`.
fn fill_zigzag_row(k: &Kernels, row: &mut [f64], pair_drops: bool) {
    let n = k.backlog();
    for i in 3..k.arrival_law().len() {
        put(row, n, i as isize, k.qa(i));
    }
    put(row, n, 1, k.qa(1) * k.qr_at_least(2));
    put(row, n, 2, k.qa(2) * k.qr_at_least(1));

    // Q_a(0)[1 - Q_r(1) - Q_r(2)] = Q_a(0)[Q_r(0) + Q_r(>=3)]
    let idle_or_jam = k.qa(0) * (k.qr(0) + k.qr_at_least(3));
    let pair = k.qa(1) * k.qr(1);
    let stay = idle_or_jam + k.qr(0) * k.qa(1) + k.qr(0) * k.qa(2);
    let one_down = k.qa(0) * k.qr(1);
    if pair_drops {
        put(row, n, 0, stay);
        put(row, n, -1, one_down + pair);
    } else {
        put(row, n, 0, stay + pair);
        put(row, n, -1, one_down);
    }
    put(row, n, -2, k.qa(0) * k.qr(2));
}

fn zigzag_success(k: &Kernels) -> f64 {
    (k.qa(1) + k.qa(2)) * k.qr(0) + (k.qr(1) + k.qr(2)) * k.qa(0)
}

fn zigzag_new_consistent(k: &Kernels) -> f64 {
    k.qa(1) * (k.qr(0) + k.qr(1)) + 2.0 * k.qa(2) * k.qr(0)
}

impl ChainModel for ZigzagPaper {
    fn variant(&self) -> Variant {
        Variant::ZigzagPaper
    }

    fn description(&self) -> &'static str {
        "ZigZag receiver; one new + one backlogged ZigZag frame leaves the backlog unchanged"
    }

    fn max_backlog_drop(&self) -> usize {
        2
    }

    fn fill_row(&self, k: &Kernels, row: &mut [f64]) {
        fill_zigzag_row(k, row, false);
    }

    fn success_probability(&self, k: &Kernels) -> f64 {
        zigzag_success(k)
    }

    fn new_packet_rate(&self, k: &Kernels) -> f64 {
        k.qa(1) + k.qa(2) * k.qr(0)
    }

    fn new_packet_rate_consistent(&self, k: &Kernels) -> f64 {
        zigzag_new_consistent(k)
    }
}

impl ChainModel for ZigzagStrict {
    fn variant(&self) -> Variant {
        Variant::ZigzagStrict
    }

    fn description(&self) -> &'static str {
        "ZigZag receiver; any two simultaneous packets are both delivered"
    }

    fn max_backlog_drop(&self) -> usize {
        2
    }

    fn fill_row(&self, k: &Kernels, row: &mut [f64]) {
        fill_zigzag_row(k, row, true);
    }

    fn success_probability(&self, k: &Kernels) -> f64 {
        zigzag_success(k)
    }

    fn new_packet_rate(&self, k: &Kernels) -> f64 {
        k.qa(1) + k.qa(2) * k.qr(0)
    }

    fn new_packet_rate_consistent(&self, k: &Kernels) -> f64 {
        zigzag_new_consistent(k)
    }
}

/// Dense `(M+1) x (M+1)` row-stochastic matrix over backlog levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionMatrix {
    params: ModelParams,
    size: usize,
    entries: Vec<f64>,
}

impl TransitionMatrix {
    /// Builds the matrix for `params.variant()` through the registry.
    pub fn build(params: &ModelParams) -> Self {
        Self::build_with(model_for(params.variant()), params)
    }

    fn build_with(model: &dyn ChainModel, params: &ModelParams) -> Self {
        let size = params.states();
        let mut entries = vec![0.0; size * size];
        for (n, row) in entries.chunks_mut(size).enumerate() {
            let k = Kernels::new(params, n);
            model.fill_row(&k, row);
            // products of distributions summing to one can overshoot by an ulp
            row.iter_mut().for_each(|p| *p = p.min(1.0));
        }
        TransitionMatrix {
            params: *params,
            size,
            entries,
        }
    }

    /// Wraps an arbitrary square matrix, e.g. for solver tests.
    pub fn from_rows(params: &ModelParams, rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if size != params.states() {
            return Err(Error::LengthMismatch(size, params.states()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != size) {
            return Err(Error::LengthMismatch(bad.len(), size));
        }
        Ok(TransitionMatrix {
            params: *params,
            size,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn variant(&self) -> Variant {
        self.params.variant()
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[from * self.size + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.entries[from * self.size..(from + 1) * self.size]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.size)
    }

    /// Largest `|sum_j P[i][j] - 1|` over rows.
    pub fn max_row_sum_error(&self) -> f64 {
        self.rows()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Expected one-frame backlog change from each state, `sum_i i P[N][N+i]`.
    pub fn expected_increments(&self) -> Vec<f64> {
        self.rows()
            .enumerate()
            .map(|(n, r)| {
                r.iter()
                    .enumerate()
                    .map(|(to, p)| (to as f64 - n as f64) * p)
                    .sum()
            })
            .collect()
    }

    /// States reachable from `start` along positive entries.
    pub fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.size];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for (j, &p) in self.row(i).iter().enumerate() {
                if p > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    }

    /// Writes one row per line, comma separated, shortest round-trip decimals.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

impl fmt::Display for TransitionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|p| format!("{p:.6}")).collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

fn build_checked(expected: Variant, params: &ModelParams) -> Result<TransitionMatrix> {
    if params.variant() != expected {
        return Err(Error::VariantMismatch {
            expected: expected.name(),
            found: params.variant().name(),
        });
    }
    Ok(TransitionMatrix::build(params))
}

pub fn build_zigzag_paper(params: &ModelParams) -> Result<TransitionMatrix> {
    build_checked(Variant::ZigzagPaper, params)
}

pub fn build_zigzag_strict(params: &ModelParams) -> Result<TransitionMatrix> {
    build_checked(Variant::ZigzagStrict, params)
}

pub fn build_aloha_baseline(params: &ModelParams) -> Result<TransitionMatrix> {
    build_checked(Variant::AlohaBaseline, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(m: usize, p_a: f64, q_r: f64, v: Variant) -> ModelParams {
        ModelParams::new(m, p_a, q_r, v).unwrap()
    }

    #[test]
    fn registry_lookup() {
        let names: Vec<_> = registry().iter().map(|m| m.name()).collect();
        assert_eq!(names, ["aloha-baseline", "zigzag-paper", "zigzag-strict"]);
        for v in Variant::ALL {
            assert_eq!(lookup(v.name()).unwrap().variant(), v);
            assert_eq!(model_for(v).variant(), v);
        }
        assert!(matches!(lookup("csma"), Err(Error::UnknownVariant(_))));
    }

    #[test]
    fn variant_mismatch() {
        let p = params(3, 0.1, 0.5, Variant::ZigzagPaper);
        assert!(build_zigzag_paper(&p).is_ok());
        assert!(matches!(
            build_zigzag_strict(&p),
            Err(Error::VariantMismatch { .. })
        ));
        assert!(matches!(
            build_aloha_baseline(&p),
            Err(Error::VariantMismatch { .. })
        ));
    }

    #[test]
    fn single_user_rows() {
        for v in Variant::ALL {
            let m = TransitionMatrix::build(&params(1, 0.3, 0.5, v));
            assert_eq!(m.row(0), [1.0, 0.0], "{v}");
            assert_eq!(m.row(1), [0.5, 0.5], "{v}");
        }
    }

    #[test]
    fn pair_event_placement() {
        // M=2, p_a=q_r=0.5, N=1: Q_a(.,1) = (0.5, 0.5), Q_r(.,1) = (0.5, 0.5)
        let paper = build_zigzag_paper(&params(2, 0.5, 0.5, Variant::ZigzagPaper)).unwrap();
        let strict = build_zigzag_strict(&params(2, 0.5, 0.5, Variant::ZigzagStrict)).unwrap();
        assert_eq!(paper.get(1, 0), 0.25);
        assert_eq!(strict.get(1, 0), 0.5);
        assert_eq!(paper.get(1, 1), 0.75);
        assert_eq!(strict.get(1, 1), 0.5);
    }

    #[test]
    fn baseline_two_users_from_empty() {
        let m = build_aloha_baseline(&params(2, 0.5, 0.5, Variant::AlohaBaseline)).unwrap();
        assert_eq!(m.row(0), [0.75, 0.0, 0.25]);
    }

    #[test]
    fn paper_rows_m10() {
        let m = TransitionMatrix::build(&params(10, 0.04, 0.8, Variant::ZigzagPaper));
        assert_eq!(m.size(), 11);
        assert!(m.max_row_sum_error() <= 1e-12);
    }

    #[test]
    fn csv_export() {
        let m = TransitionMatrix::build(&params(1, 0.3, 0.5, Variant::ZigzagPaper));
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1,0\n0.5,0.5\n");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_variant() -> impl Strategy<Value = Variant> {
            prop_oneof![
                Just(Variant::AlohaBaseline),
                Just(Variant::ZigzagPaper),
                Just(Variant::ZigzagStrict)
            ]
        }

        proptest! {
            #[test]
            fn stochastic_and_banded(m in 1usize..60, p_a in 1e-3f64..0.999, q_r in 1e-3f64..0.999, v in any_variant()) {
                let mat = TransitionMatrix::build(&params(m, p_a, q_r, v));
                prop_assert!(mat.max_row_sum_error() <= 1e-12);
                let drop = model_for(v).max_backlog_drop();
                for (n, row) in mat.rows().enumerate() {
                    for (to, &p) in row.iter().enumerate() {
                        prop_assert!((0.0..=1.0).contains(&p));
                        if to + drop < n {
                            prop_assert_eq!(p, 0.0);
                        }
                    }
                }
            }

            #[test]
            fn strict_differs_by_pair_mass(m in 1usize..40, p_a in 1e-3f64..0.999, q_r in 1e-3f64..0.999) {
                let paper = TransitionMatrix::build(&params(m, p_a, q_r, Variant::ZigzagPaper));
                let strict = TransitionMatrix::build(&params(m, p_a, q_r, Variant::ZigzagStrict));
                for n in 0..=m {
                    let k = Kernels::new(paper.params(), n);
                    let moved = k.qa(1) * k.qr(1);
                    for to in 0..=m {
                        let diff = strict.get(n, to) - paper.get(n, to);
                        let expected = if n >= 1 && to == n - 1 {
                            moved
                        } else if to == n {
                            -moved
                        } else {
                            0.0
                        };
                        prop_assert!((diff - expected).abs() <= 1e-15, "n={} to={} diff={} expected={}", n, to, diff, expected);
                    }
                }
            }

            #[test]
            fn single_recurrent_class(m in 3usize..40, p_a in 1e-3f64..0.999, q_r in 1e-3f64..0.999, v in any_variant()) {
                // From M >= 3 every variant is irreducible: check every state reaches every other.
                let mat = TransitionMatrix::build(&params(m, p_a, q_r, v));
                for start in 0..=m {
                    prop_assert!(mat.reachable_from(start).iter().all(|&r| r), "start {}", start);
                }
            }
        }
    }
}
