//! Protocol parameters and the binomial transmission kernels.
//!
//! A population of `M` identical users shares one channel. At the start of
//! every frame each unbacklogged user sends a fresh packet with probability
//! `p_a` and each backlogged user resends its pending packet with probability
//! `q_r`. Everything downstream (transition matrices, drift, throughput) is
//! assembled from the two binomial laws implemented here.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_USERS: usize = 1000;

/// Which chain the parameters describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Classic slotted Aloha: any two or more simultaneous transmissions collide.
    AlohaBaseline,
    /// ZigZag receiver, transition law transcribed term for term.
    ZigzagPaper,
    /// ZigZag receiver where a new + backlogged pair both depart.
    ZigzagStrict,
}

impl Variant {
    pub const ALL: [Variant; 3] = [
        Variant::AlohaBaseline,
        Variant::ZigzagPaper,
        Variant::ZigzagStrict,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::AlohaBaseline => "aloha-baseline",
            Variant::ZigzagPaper => "zigzag-paper",
            Variant::ZigzagStrict => "zigzag-strict",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s.trim())
            .ok_or_else(|| Error::UnknownVariant(s.to_string()))
    }
}

/// Validated protocol parameters.
///
/// Construct through [`ModelParams::new`]; every accepted value set yields a
/// chain with a single recurrent class, so the stationary law is unique.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    users: usize,
    p_a: f64,
    q_r: f64,
    variant: Variant,
}

impl ModelParams {
    pub fn new(users: usize, p_a: f64, q_r: f64, variant: Variant) -> Result<Self> {
        if !(1..=MAX_USERS).contains(&users) {
            return Err(Error::OutOfRange {
                name: "users",
                value: users as f64,
                expected: "1 <= M <= 1000",
            });
        }
        check_open_unit("p_a", p_a)?;
        check_open_unit("q_r", q_r)?;
        Ok(ModelParams {
            users,
            p_a,
            q_r,
            variant,
        })
    }

    /// Validates a raw tuple where the variant is still a string.
    pub fn parse(users: i64, p_a: f64, q_r: f64, variant: &str) -> Result<Self> {
        let variant: Variant = variant.parse()?;
        if users < 1 {
            return Err(Error::OutOfRange {
                name: "users",
                value: users as f64,
                expected: "1 <= M <= 1000",
            });
        }
        ModelParams::new(users as usize, p_a, q_r, variant)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn p_a(&self) -> f64 {
        self.p_a
    }

    pub fn q_r(&self) -> f64 {
        self.q_r
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn with_q_r(&self, q_r: f64) -> Result<Self> {
        ModelParams::new(self.users, self.p_a, q_r, self.variant)
    }

    pub fn with_p_a(&self, p_a: f64) -> Result<Self> {
        ModelParams::new(self.users, p_a, self.q_r, self.variant)
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        ModelParams { variant, ..*self }
    }

    /// Number of backlog states, `M + 1`.
    pub fn states(&self) -> usize {
        self.users + 1
    }

    pub fn state(&self, backlog: usize) -> Result<BacklogState> {
        BacklogState::new(backlog, self.users)
    }
}

fn check_open_unit(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            expected: "open interval (0, 1)",
        })
    }
}

/// Number of backlogged packets at the start of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BacklogState(usize);

impl BacklogState {
    pub fn new(backlog: usize, users: usize) -> Result<Self> {
        if backlog > users {
            return Err(Error::IndexOutOfRange {
                index: backlog as i64,
                max: users,
            });
        }
        Ok(BacklogState(backlog))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// Receiver feedback at the end of the first slot of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameOutcome {
    Idle,
    Success,
    ZigZag,
    Collision,
}

impl FrameOutcome {
    pub fn classify(transmitters: usize) -> Self {
        match transmitters {
            0 => FrameOutcome::Idle,
            1 => FrameOutcome::Success,
            2 => FrameOutcome::ZigZag,
            _ => FrameOutcome::Collision,
        }
    }

    pub fn slots_consumed(self) -> u64 {
        match self {
            FrameOutcome::ZigZag => 2,
            _ => 1,
        }
    }
}

/// Binomial probability `C(n, k) p^k (1-p)^(n-k)`.
///
/// The coefficient is accumulated multiplicatively; `C(1000, 500)` is about
/// 2.7e299 so it stays finite over the whole parameter range. When a power
/// underflows the product is redone in log space.
pub fn binomial_pmf(n: usize, k: usize, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    let coef = binomial_coefficient(n, k);
    let hits = p.powi(k as i32);
    let misses = (1.0 - p).powi((n - k) as i32);
    if hits >= f64::MIN_POSITIVE && misses >= f64::MIN_POSITIVE {
        return coef * hits * misses;
    }
    if (k > 0 && p == 0.0) || (k < n && p == 1.0) {
        return 0.0;
    }
    let mut log = coef.ln();
    if k > 0 {
        log += k as f64 * p.ln();
    }
    if k < n {
        log += (n - k) as f64 * (-p).ln_1p();
    }
    log.exp()
}

pub fn binomial_coefficient(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0_f64;
    for j in 1..=k {
        c = c * (n - k + j) as f64 / j as f64;
    }
    // exact below 2^53, where the recurrence can drift by an ulp
    if c < 9.007_199_254_740_992e15 {
        c.round()
    } else {
        c
    }
}

/// `Q_a(i, N)`: probability that exactly `i` of the `M - N` unbacklogged
/// users transmit a new packet.
pub fn q_arrive(i: i64, backlog: BacklogState, params: &ModelParams) -> Result<f64> {
    let idle = params.users - backlog.get();
    let i = checked_index(i, idle)?;
    Ok(binomial_pmf(idle, i, params.p_a))
}

/// `Q_r(i, N)`: probability that exactly `i` of the `N` backlogged users
/// retransmit.
pub fn q_retransmit(i: i64, backlog: BacklogState, params: &ModelParams) -> Result<f64> {
    let i = checked_index(i, backlog.get())?;
    Ok(binomial_pmf(backlog.get(), i, params.q_r))
}

/// Probability that exactly two backlogged users retransmit, `C(N,2)(1-q_r)^(N-2) q_r^2`.
pub fn p_zigzag(backlog: BacklogState, params: &ModelParams) -> f64 {
    binomial_pmf(backlog.get(), 2, params.q_r)
}

fn checked_index(i: i64, max: usize) -> Result<usize> {
    if i < 0 || i as u64 > max as u64 {
        Err(Error::IndexOutOfRange { index: i, max })
    } else {
        Ok(i as usize)
    }
}

/// Both kernels tabulated for one backlog level.
///
/// Out-of-range lookups return zero, which is what lets the transition rules
/// be written without special cases near `N = 0` and `N = M`.
#[derive(Debug, Clone)]
pub struct Kernels {
    backlog: usize,
    users: usize,
    arrive: Vec<f64>,
    retransmit: Vec<f64>,
}

impl Kernels {
    pub fn new(params: &ModelParams, backlog: usize) -> Self {
        debug_assert!(backlog <= params.users);
        let idle = params.users - backlog;
        Kernels {
            backlog,
            users: params.users,
            arrive: (0..=idle).map(|i| binomial_pmf(idle, i, params.p_a)).collect(),
            retransmit: (0..=backlog)
                .map(|i| binomial_pmf(backlog, i, params.q_r))
                .collect(),
        }
    }

    pub fn backlog(&self) -> usize {
        self.backlog
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// `Q_a(i, N)`.
    pub fn qa(&self, i: usize) -> f64 {
        self.arrive.get(i).copied().unwrap_or(0.0)
    }

    /// `Q_r(i, N)`.
    pub fn qr(&self, i: usize) -> f64 {
        self.retransmit.get(i).copied().unwrap_or(0.0)
    }

    /// `P(at least i backlogged users retransmit)`, summed from the tail so it
    /// never goes negative.
    pub fn qr_at_least(&self, i: usize) -> f64 {
        self.retransmit.iter().skip(i).rev().sum()
    }

    pub fn arrival_law(&self) -> &[f64] {
        &self.arrive
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(m: usize, p_a: f64, q_r: f64) -> ModelParams {
        ModelParams::new(m, p_a, q_r, Variant::ZigzagPaper).unwrap()
    }

    #[test]
    fn validation() {
        assert!(ModelParams::parse(10, 0.04, 0.8, "zigzag-paper").is_ok());
        assert!(matches!(
            ModelParams::parse(5, 0.0, 0.5, "zigzag-paper"),
            Err(Error::OutOfRange { name: "p_a", .. })
        ));
        assert!(matches!(
            ModelParams::parse(0, 0.1, 0.1, "aloha-baseline"),
            Err(Error::OutOfRange { name: "users", .. })
        ));
        assert!(matches!(
            ModelParams::parse(5, 0.1, 1.0, "aloha-baseline"),
            Err(Error::OutOfRange { name: "q_r", .. })
        ));
        assert!(ModelParams::parse(1001, 0.1, 0.1, "aloha-baseline").is_err());
        assert!(ModelParams::parse(5, f64::NAN, 0.1, "aloha-baseline").is_err());
        assert!(matches!(
            ModelParams::parse(5, 0.1, 0.1, "zigzag"),
            Err(Error::UnknownVariant(_))
        ));
    }

    #[test]
    fn arrival_kernel() {
        let p = params(2, 0.5, 0.5);
        assert_eq!(q_arrive(1, p.state(0).unwrap(), &p).unwrap(), 0.5);
        assert_eq!(q_arrive(0, p.state(2).unwrap(), &p).unwrap(), 1.0);

        let p = params(10, 0.04, 0.8);
        let got = q_arrive(1, p.state(0).unwrap(), &p).unwrap();
        let mut power = 1.0;
        for _ in 0..9 {
            power *= 0.96;
        }
        let expected = 10.0 * 0.04 * power;
        assert!((got - expected).abs() < 1e-15, "{got} vs {expected}");

        assert!(matches!(
            q_arrive(-1, p.state(0).unwrap(), &p),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(q_arrive(4, p.state(7).unwrap(), &p).is_err());
    }

    #[test]
    fn retransmit_kernel() {
        let p = params(5, 0.1, 0.5);
        assert_eq!(q_retransmit(0, p.state(0).unwrap(), &p).unwrap(), 1.0);
        assert_eq!(q_retransmit(2, p.state(2).unwrap(), &p).unwrap(), 0.25);
        let p = params(5, 0.1, 0.3);
        let got = q_retransmit(1, p.state(3).unwrap(), &p).unwrap();
        assert!((got - 0.441).abs() < 1e-15);
        assert!(q_retransmit(4, p.state(3).unwrap(), &p).is_err());
    }

    #[test]
    fn zigzag_pair() {
        let p = params(5, 0.1, 0.5);
        assert_eq!(p_zigzag(p.state(1).unwrap(), &p), 0.0);
        assert_eq!(p_zigzag(p.state(2).unwrap(), &p), 0.25);
        assert_eq!(p_zigzag(p.state(3).unwrap(), &p), 0.375);
    }

    #[test]
    fn state_range() {
        let p = params(3, 0.1, 0.5);
        assert!(p.state(3).is_ok());
        assert!(p.state(4).is_err());
    }

    #[test]
    fn outcomes() {
        assert_eq!(FrameOutcome::classify(0), FrameOutcome::Idle);
        assert_eq!(FrameOutcome::classify(2).slots_consumed(), 2);
        assert_eq!(FrameOutcome::classify(7), FrameOutcome::Collision);
        for k in [0, 1, 3] {
            assert_eq!(FrameOutcome::classify(k).slots_consumed(), 1);
        }
    }

    #[test]
    fn large_population_stays_finite() {
        let total: f64 = (0..=1000).map(|k| binomial_pmf(1000, k, 0.37)).sum();
        assert!((total - 1.0).abs() < 1e-12, "{total}");
        assert_eq!(binomial_coefficient(1000, 500).is_finite(), true);
        assert_eq!(binomial_coefficient(50, 3), 19600.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn kernels_are_distributions(m in 1usize..200, p_a in 1e-4f64..0.9999, q_r in 1e-4f64..0.9999, frac in 0.0f64..=1.0) {
                let p = params(m, p_a, q_r);
                let n = ((m as f64) * frac).round() as usize;
                let state = p.state(n).unwrap();
                let arrive: Vec<f64> = (0..=(m - n) as i64).map(|i| q_arrive(i, state, &p).unwrap()).collect();
                let retx: Vec<f64> = (0..=n as i64).map(|i| q_retransmit(i, state, &p).unwrap()).collect();
                prop_assert!(arrive.iter().all(|&x| x >= 0.0));
                prop_assert!(retx.iter().all(|&x| x >= 0.0));
                prop_assert!((arrive.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                prop_assert!((retx.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                let two = if n >= 2 { q_retransmit(2, state, &p).unwrap() } else { 0.0 };
                prop_assert_eq!(p_zigzag(state, &p), two);
            }
        }
    }
}
