//! Signed log-domain arithmetic and the entropy (expectation) semiring.
//!
//! Path weights are kept as natural-log probabilities. The accumulator
//! `Σ ω·log ω` can be negative (and for unnormalized weights, of either
//! sign), so it is carried as a sign plus the log of its magnitude. Every
//! operation here is total over finite values, `-inf` and exact zeros.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg};

use num_bigint::BigUint;

use crate::error::{Error, Result};

/// Natural log of a probability or of an unnormalized weight.
/// `f64::NEG_INFINITY` encodes zero.
pub type LogProb = f64;

pub const LOG_ZERO: LogProb = f64::NEG_INFINITY;

/// Entropies in `[-ENTROPY_CLAMP_TOL, 0)` are treated as round-off and clamped to 0.
pub const ENTROPY_CLAMP_TOL: f64 = 1e-9;

/// Tolerance on the semiring axioms (relative).
pub const SEMIRING_AXIOM_TOL: f64 = 1e-10;

/// Tolerance on entropy against an explicit enumeration of paths.
pub const ORACLE_ENTROPY_TOL: f64 = 1e-8;

/// `log(e^x + e^y)` without overflow or underflow.
#[inline]
pub fn logprob_add(x: LogProb, y: LogProb) -> LogProb {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    if lo == LOG_ZERO {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `log Σ e^{x_i}`; the empty sum is `-inf`.
pub fn log_sum_exp(xs: &[LogProb]) -> LogProb {
    let max = xs.iter().copied().fold(LOG_ZERO, f64::max);
    if max == LOG_ZERO {
        return LOG_ZERO;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `log(1 - e^x)` for `x <= 0`.
#[inline]
fn log1m_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Neg = -1,
    Zero = 0,
    Pos = 1,
}

impl Sign {
    fn of(x: f64) -> Sign {
        if x > 0.0 {
            Sign::Pos
        } else if x < 0.0 {
            Sign::Neg
        } else {
            Sign::Zero
        }
    }

    fn as_f64(self) -> f64 {
        self as i8 as f64
    }
}

impl Mul for Sign {
    type Output = Sign;

    fn mul(self, rhs: Sign) -> Sign {
        match (self as i8) * (rhs as i8) {
            1 => Sign::Pos,
            -1 => Sign::Neg,
            _ => Sign::Zero,
        }
    }
}

/// A real number stored as a sign and the natural log of its magnitude.
#[derive(Clone, Copy, PartialEq)]
pub struct SignedLogValue {
    sign: Sign,
    log_mag: f64,
}

impl SignedLogValue {
    pub const ZERO: SignedLogValue = SignedLogValue {
        sign: Sign::Zero,
        log_mag: LOG_ZERO,
    };

    pub const ONE: SignedLogValue = SignedLogValue {
        sign: Sign::Pos,
        log_mag: 0.0,
    };

    /// Builds a value from its parts. A `-inf` magnitude or a zero sign
    /// yields the canonical zero.
    pub fn new(sign: Sign, log_mag: f64) -> Self {
        assert!(!log_mag.is_nan(), "log magnitude must not be NaN");
        if sign == Sign::Zero || log_mag == LOG_ZERO {
            Self::ZERO
        } else {
            SignedLogValue { sign, log_mag }
        }
    }

    /// The positive number `e^log_value`.
    pub fn from_log(log_value: LogProb) -> Self {
        Self::new(Sign::Pos, log_value)
    }

    pub fn from_f64(x: f64) -> Self {
        Self::new(Sign::of(x), x.abs().ln())
    }

    pub fn to_f64(self) -> f64 {
        match self.sign {
            Sign::Zero => 0.0,
            s => s.as_f64() * self.log_mag.exp(),
        }
    }

    pub fn sign(self) -> Sign {
        self.sign
    }

    /// Log of the magnitude; `-inf` for zero.
    pub fn log_mag(self) -> f64 {
        self.log_mag
    }

    pub fn is_zero(self) -> bool {
        self.sign == Sign::Zero
    }

    /// `self / e^log_divisor`, returned as a plain real.
    pub fn ratio_to_f64(self, log_divisor: LogProb) -> f64 {
        match self.sign {
            Sign::Zero => 0.0,
            s => s.as_f64() * (self.log_mag - log_divisor).exp(),
        }
    }
}

impl fmt::Debug for SignedLogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            Sign::Zero => write!(f, "SignedLog(0)"),
            Sign::Pos => write!(f, "SignedLog(+e^{})", self.log_mag),
            Sign::Neg => write!(f, "SignedLog(-e^{})", self.log_mag),
        }
    }
}

/// Exact signed addition in log space.
pub fn slv_add(x: SignedLogValue, y: SignedLogValue) -> SignedLogValue {
    if x.is_zero() {
        return y;
    }
    if y.is_zero() {
        return x;
    }
    if x.sign == y.sign {
        return SignedLogValue::new(x.sign, logprob_add(x.log_mag, y.log_mag));
    }
    let (big, small) = match x.log_mag.partial_cmp(&y.log_mag) {
        Some(Ordering::Greater) => (x, y),
        Some(Ordering::Less) => (y, x),
        _ => return SignedLogValue::ZERO,
    };
    SignedLogValue::new(
        big.sign,
        big.log_mag + log1m_exp(small.log_mag - big.log_mag),
    )
}

pub fn slv_mul(x: SignedLogValue, y: SignedLogValue) -> SignedLogValue {
    SignedLogValue::new(x.sign * y.sign, x.log_mag + y.log_mag)
}

impl Add for SignedLogValue {
    type Output = SignedLogValue;

    fn add(self, rhs: Self) -> Self {
        slv_add(self, rhs)
    }
}

impl Mul for SignedLogValue {
    type Output = SignedLogValue;

    fn mul(self, rhs: Self) -> Self {
        slv_mul(self, rhs)
    }
}

impl Neg for SignedLogValue {
    type Output = SignedLogValue;

    fn neg(self) -> Self {
        SignedLogValue::new(self.sign * Sign::Neg, self.log_mag)
    }
}

/// A semiring `(K, ⊕, ⊗, 0, 1)` over which lattice path sums are taken.
pub trait Semiring: Clone {
    fn zero() -> Self;
    fn one() -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn times(&self, other: &Self) -> Self;
}

/// The log semiring: `⊕` is log-sum-exp, `⊗` is addition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogWeight(pub LogProb);

impl Semiring for LogWeight {
    fn zero() -> Self {
        LogWeight(LOG_ZERO)
    }

    fn one() -> Self {
        LogWeight(0.0)
    }

    fn plus(&self, other: &Self) -> Self {
        LogWeight(logprob_add(self.0, other.0))
    }

    fn times(&self, other: &Self) -> Self {
        LogWeight(self.0 + other.0)
    }
}

/// Path counting over the natural numbers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathCount(pub BigUint);

impl Semiring for PathCount {
    fn zero() -> Self {
        PathCount(BigUint::ZERO)
    }

    fn one() -> Self {
        PathCount(BigUint::from(1u8))
    }

    fn plus(&self, other: &Self) -> Self {
        PathCount(&self.0 + &other.0)
    }

    fn times(&self, other: &Self) -> Self {
        PathCount(&self.0 * &other.0)
    }
}

/// Element of the entropy (expectation) semiring: `alpha = log Σ ω` and
/// `a = Σ ω·log ω` over a set of paths.
///
/// `(α1, A1) ⊕ (α2, A2) = (α1 + α2, A1 + A2)` and
/// `(α1, A1) ⊗ (α2, A2) = (α1·α2, α1·A2 + α2·A1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyWeight {
    pub alpha: LogProb,
    pub a: SignedLogValue,
}

impl EntropyWeight {
    pub const ZERO: EntropyWeight = EntropyWeight {
        alpha: LOG_ZERO,
        a: SignedLogValue::ZERO,
    };

    pub const ONE: EntropyWeight = EntropyWeight {
        alpha: 0.0,
        a: SignedLogValue::ZERO,
    };

    /// Lifts one arc weight `ω` to `(ω, ω·log ω)`.
    pub fn arc(omega_log: LogProb) -> Self {
        assert!(!omega_log.is_nan(), "arc weight must not be NaN");
        let a = if omega_log == 0.0 || omega_log == LOG_ZERO {
            SignedLogValue::ZERO
        } else {
            SignedLogValue::new(Sign::of(omega_log), omega_log.abs().ln() + omega_log)
        };
        EntropyWeight {
            alpha: omega_log,
            a,
        }
    }

    /// `H = -A/α + log α`: entropy of the normalized path distribution.
    pub fn entropy(&self) -> Result<f64> {
        if self.alpha == LOG_ZERO {
            return Err(Error::EmptyLattice);
        }
        let h = self.alpha - self.a.ratio_to_f64(self.alpha);
        if h < 0.0 && h >= -ENTROPY_CLAMP_TOL {
            Ok(0.0)
        } else {
            Ok(h)
        }
    }

    /// `A/α`: expected path log-weight under the normalized distribution.
    pub fn mean_log_weight(&self) -> f64 {
        self.a.ratio_to_f64(self.alpha)
    }
}

impl Semiring for EntropyWeight {
    fn zero() -> Self {
        Self::ZERO
    }

    fn one() -> Self {
        Self::ONE
    }

    fn plus(&self, other: &Self) -> Self {
        ew_plus(*self, *other)
    }

    fn times(&self, other: &Self) -> Self {
        ew_times(*self, *other)
    }
}

pub fn ew_arc(omega_log: LogProb) -> EntropyWeight {
    EntropyWeight::arc(omega_log)
}

pub fn ew_plus(x: EntropyWeight, y: EntropyWeight) -> EntropyWeight {
    EntropyWeight {
        alpha: logprob_add(x.alpha, y.alpha),
        a: x.a + y.a,
    }
}

pub fn ew_times(x: EntropyWeight, y: EntropyWeight) -> EntropyWeight {
    let alpha = if x.alpha == LOG_ZERO || y.alpha == LOG_ZERO {
        LOG_ZERO
    } else {
        x.alpha + y.alpha
    };
    EntropyWeight {
        alpha,
        a: SignedLogValue::from_log(x.alpha) * y.a + SignedLogValue::from_log(y.alpha) * x.a,
    }
}

pub fn ew_entropy(w: EntropyWeight) -> Result<f64> {
    w.entropy()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn logprob_add_examples() {
        assert_eq!(logprob_add(0.5f64.ln(), 0.5f64.ln()), 0.0);
        assert_eq!(logprob_add(LOG_ZERO, -3.2), -3.2);
        assert_eq!(logprob_add(-3.2, LOG_ZERO), -3.2);
        assert_eq!(logprob_add(LOG_ZERO, LOG_ZERO), LOG_ZERO);
        // log(e^-1 + e^-2), evaluated with mpmath at 40 digits
        assert!((logprob_add(-1.0, -2.0) - -0.686_738_312_481_777_2).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_matches_pairwise() {
        let xs = [-1.0, -2.5, -0.3, LOG_ZERO];
        let pairwise = xs.iter().copied().fold(LOG_ZERO, logprob_add);
        assert!((log_sum_exp(&xs) - pairwise).abs() < 1e-14);
        assert_eq!(log_sum_exp(&[]), LOG_ZERO);
    }

    #[test]
    fn signed_add_examples() {
        let two = 2f64.ln();
        let sum = SignedLogValue::new(Sign::Pos, two) + SignedLogValue::new(Sign::Neg, two);
        assert!(sum.is_zero());

        let sum = SignedLogValue::new(Sign::Neg, 3f64.ln()) + SignedLogValue::new(Sign::Neg, 0.0);
        assert_eq!(sum.sign(), Sign::Neg);
        assert!((sum.log_mag() - 4f64.ln()).abs() < 1e-15);

        let sum = SignedLogValue::new(Sign::Pos, 5f64.ln()) + SignedLogValue::new(Sign::Neg, two);
        assert_eq!(sum.sign(), Sign::Pos);
        assert!((sum.to_f64() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn signed_mul_examples() {
        let p = SignedLogValue::new(Sign::Neg, 2f64.ln()) * SignedLogValue::new(Sign::Neg, 3f64.ln());
        assert_eq!(p.sign(), Sign::Pos);
        assert!((p.to_f64() - 6.0).abs() < 1e-14);

        assert!((SignedLogValue::ZERO * SignedLogValue::from_f64(-7.0)).is_zero());

        let p = SignedLogValue::from_f64(0.5) * SignedLogValue::from_f64(-4.0);
        assert_eq!(p.sign(), Sign::Neg);
        assert!((p.to_f64() + 2.0).abs() < 1e-14);
    }

    #[test]
    fn arc_lifting() {
        assert_eq!(ew_arc(0.0), EntropyWeight::ONE);

        let w = ew_arc(-1.0);
        assert_eq!(w.alpha, -1.0);
        assert!((w.a.to_f64() + (-1f64).exp()).abs() < 1e-16);

        let w = ew_arc(0.25f64.ln());
        assert!((w.a.to_f64() - 0.25 * 0.25f64.ln()).abs() < 1e-15);
        assert!((w.a.to_f64() - -0.346_573_590_279_972_6).abs() < 1e-15);

        let w = ew_arc(LOG_ZERO);
        assert_eq!(w, EntropyWeight::ZERO);
    }

    #[test]
    fn identities() {
        let x = ew_times(ew_arc(-0.7), ew_arc(-1.3));
        assert_eq!(ew_times(EntropyWeight::ONE, x), x);
        assert_eq!(ew_plus(EntropyWeight::ZERO, x), x);
        assert_eq!(ew_times(EntropyWeight::ZERO, x).alpha, LOG_ZERO);
        assert!(ew_times(EntropyWeight::ZERO, x).a.is_zero());
    }

    #[test]
    fn two_path_sum() {
        let w = ew_plus(ew_arc(0.2f64.ln()), ew_arc(0.3f64.ln()));
        assert!((w.alpha.exp() - 0.5).abs() < 1e-15);
        let a = 0.2 * 0.2f64.ln() + 0.3 * 0.3f64.ln();
        assert!((w.a.to_f64() - a).abs() < 1e-15);
        // normalized: {0.4, 0.6}
        let h = -(0.4 * 0.4f64.ln() + 0.6 * 0.6f64.ln());
        assert!((ew_entropy(w).unwrap() - h).abs() < 1e-14);
        assert!((h - 0.673_011_667_009_256_1).abs() < 1e-15);
    }

    #[test]
    fn entropy_of_single_and_uniform_paths() {
        for &lw in &[0.0, -0.1, -3.0, -40.0] {
            assert!(ew_entropy(ew_arc(lw)).unwrap().abs() < 1e-12);
        }
        let n = 7;
        let w = (0..n).fold(EntropyWeight::ZERO, |acc, _| ew_plus(acc, ew_arc(-2.0)));
        assert!((ew_entropy(w).unwrap() - (n as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_rejects_empty() {
        assert!(matches!(
            ew_entropy(EntropyWeight::ZERO),
            Err(Error::EmptyLattice)
        ));
    }

    fn special_values() -> Vec<f64> {
        vec![0.0, -0.0, LOG_ZERO, -1e-300, -1e-12, -0.5, -1.0, -30.0, -700.0, 1.0, 20.0]
    }

    #[test]
    fn no_nan_on_special_values() {
        let vals = special_values();
        for &x in &vals {
            for &y in &vals {
                assert!(!logprob_add(x, y).is_nan());
                let (ex, ey) = (ew_arc(x), ew_arc(y));
                for w in [ew_plus(ex, ey), ew_times(ex, ey)] {
                    assert!(!w.alpha.is_nan(), "{x} {y}");
                    assert!(!w.a.log_mag().is_nan(), "{x} {y}");
                    if let Ok(h) = ew_entropy(w) {
                        assert!(!h.is_nan(), "{x} {y}");
                    }
                }
                for sx in [Sign::Neg, Sign::Zero, Sign::Pos] {
                    for sy in [Sign::Neg, Sign::Zero, Sign::Pos] {
                        let a = SignedLogValue::new(sx, x);
                        let b = SignedLogValue::new(sy, y);
                        assert!(!(a + b).log_mag().is_nan());
                        assert!(!(a * b).log_mag().is_nan());
                    }
                }
            }
        }
    }

    fn slv() -> impl Strategy<Value = SignedLogValue> {
        (-1i8..=1, -20.0f64..20.0).prop_map(|(s, m)| {
            let sign = match s {
                -1 => Sign::Neg,
                0 => Sign::Zero,
                _ => Sign::Pos,
            };
            SignedLogValue::new(sign, m)
        })
    }

    fn ew() -> impl Strategy<Value = EntropyWeight> {
        (-20.0f64..5.0, slv()).prop_map(|(alpha, a)| EntropyWeight { alpha, a })
    }

    fn ew_close(x: EntropyWeight, y: EntropyWeight, tol: f64) -> bool {
        let alpha_ok = close(x.alpha.exp(), y.alpha.exp(), tol);
        let scale = 1.0 + x.a.to_f64().abs().max(y.a.to_f64().abs());
        alpha_ok && (x.a.to_f64() - y.a.to_f64()).abs() <= tol * scale
    }

    proptest! {
        #[test]
        fn signed_ops_commute_and_associate(a in slv(), b in slv(), c in slv()) {
            let tol = 1e-12;
            let scale = 1.0 + a.to_f64().abs() + b.to_f64().abs() + c.to_f64().abs();
            prop_assert!(((a + b).to_f64() - (b + a).to_f64()).abs() <= tol * scale);
            prop_assert!((((a + b) + c).to_f64() - (a + (b + c)).to_f64()).abs() <= tol * scale);
            prop_assert!(close((a * b).to_f64(), (b * a).to_f64(), tol));
            prop_assert!(close(((a * b) * c).to_f64(), (a * (b * c)).to_f64(), tol));
        }

        #[test]
        fn signed_add_matches_plain(x in -1e6f64..1e6, y in -1e6f64..1e6) {
            let s = SignedLogValue::from_f64(x) + SignedLogValue::from_f64(y);
            prop_assert!((s.to_f64() - (x + y)).abs() <= 1e-9 * (1.0 + x.abs() + y.abs()));
        }

        #[test]
        fn semiring_axioms(x in ew(), y in ew(), z in ew()) {
            let tol = SEMIRING_AXIOM_TOL;
            prop_assert!(ew_close(ew_plus(x, y), ew_plus(y, x), tol));
            prop_assert!(ew_close(ew_plus(ew_plus(x, y), z), ew_plus(x, ew_plus(y, z)), tol));
            prop_assert!(ew_close(ew_times(ew_times(x, y), z), ew_times(x, ew_times(y, z)), tol));
            prop_assert!(ew_close(ew_times(x, y), ew_times(y, x), tol));
            prop_assert!(ew_close(
                ew_times(x, ew_plus(y, z)),
                ew_plus(ew_times(x, y), ew_times(x, z)),
                1e-9,
            ));
            prop_assert!(ew_close(ew_times(EntropyWeight::ONE, x), x, tol));
            prop_assert!(ew_close(ew_plus(EntropyWeight::ZERO, x), x, tol));
        }

        #[test]
        fn log_domain_matches_plain_domain(ws in proptest::collection::vec(1e-30f64..1.0, 1..12)) {
            let log_domain = ws.iter().fold(EntropyWeight::ZERO, |acc, &w| ew_plus(acc, ew_arc(w.ln())));
            let alpha: f64 = ws.iter().sum();
            let a: f64 = ws.iter().map(|w| w * w.ln()).sum();
            prop_assert!(close(log_domain.alpha.exp(), alpha, 1e-9));
            prop_assert!(close(log_domain.a.to_f64(), a, 1e-9));
        }
    }
}
