//! Exact exponent algebra for mixed Lebesgue admissibility conditions.
//!
//! Everything here is computed with exact rationals plus a symbolic infinity;
//! floating point only appears when a weight is handed to the numerical side.
//! Admissibility lines are sharp inequalities, so boundary cases must not be
//! decided by float rounding.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type Rational = Ratio<i64>;

/// A Lebesgue exponent in `(0, ∞]`, stored exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Exponent {
    Finite(Rational),
    Infinity,
}

impl Exponent {
    pub const INFINITY: Exponent = Exponent::Infinity;

    /// Integer exponent. Panics if `v <= 0`.
    pub fn int(v: i64) -> Self {
        assert!(v > 0, "exponent must be positive, got {v}");
        Exponent::Finite(Ratio::from_integer(v))
    }

    /// Rational exponent `num/den`. Panics on nonpositive values.
    pub fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        let r = Ratio::new(num, den);
        assert!(r > Ratio::zero(), "exponent must be positive, got {r}");
        Exponent::Finite(r)
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Exponent::Finite(_))
    }

    /// `1/p`, with the convention `1/∞ = 0`. Always finite since `p > 0`.
    pub fn recip(self) -> Rational {
        match self {
            Exponent::Finite(r) => r.recip(),
            Exponent::Infinity => Ratio::zero(),
        }
    }

    /// Hölder conjugate `p'` with `1/p + 1/p' = 1`. Requires `p >= 1`.
    pub fn conjugate(self) -> Exponent {
        let one = Ratio::from_integer(1);
        match self {
            Exponent::Infinity => Exponent::Finite(one),
            Exponent::Finite(r) => {
                assert!(r >= one, "conjugate needs p >= 1, got {r}");
                if r == one {
                    Exponent::Infinity
                } else {
                    Exponent::Finite(r / (r - one))
                }
            }
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Exponent::Finite(r) => r.to_f64().expect("rational to f64"),
            Exponent::Infinity => f64::INFINITY,
        }
    }

    /// Nearest-rational exponent for a float `p >= 1` (∞ maps to ∞).
    pub fn from_f64(p: f64) -> Self {
        if p.is_infinite() {
            return Exponent::Infinity;
        }
        assert!(p >= 1.0, "exponent must be >= 1, got {p}");
        Exponent::Finite(Ratio::approximate_float(p).expect("representable exponent"))
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Exponent {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Exponent::Infinity, Exponent::Infinity) => Ordering::Equal,
            (Exponent::Infinity, _) => Ordering::Greater,
            (_, Exponent::Infinity) => Ordering::Less,
            (Exponent::Finite(a), Exponent::Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Infinity => write!(f, "inf"),
            Exponent::Finite(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Exponent::Finite(r) => write!(f, "{}/{}", r.numer(), r.denom()),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExponentError {
    #[error("cannot parse exponent from {0:?}")]
    Parse(String),
    #[error("interpolation exponent theta = {theta} lies outside (0,1); q = {q} is inadmissible for n = {n}")]
    ThetaOutOfRange { theta: Rational, q: Exponent, n: u32 },
}

impl FromStr for Exponent {
    type Err = ExponentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s == "∞" || s.eq_ignore_ascii_case("infinity") {
            return Ok(Exponent::Infinity);
        }
        let parse_int = |t: &str| t.parse::<i64>().map_err(|_| ExponentError::Parse(s.into()));
        let r = if let Some((num, den)) = s.split_once('/') {
            Ratio::new(parse_int(num)?, parse_int(den)?)
        } else {
            Ratio::from_integer(parse_int(s)?)
        };
        if r <= Ratio::zero() {
            return Err(ExponentError::Parse(s.into()));
        }
        Ok(Exponent::Finite(r))
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// The `(n, q, r)` triple entering the divergence integrability condition:
/// `div(b) ∈ L^r_t(L^q_x)` on the `n`-torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExponentPair {
    pub n: u32,
    pub q: Exponent,
    pub r: Exponent,
}

impl ExponentPair {
    pub fn new(n: u32, q: Exponent, r: Exponent) -> Self {
        assert!(n >= 1, "spatial dimension must be >= 1");
        ExponentPair { n, q, r }
    }

    /// The parabolic admissibility quantity `n/(2q) + 1/r`, exact.
    pub fn parabolic_sum(&self) -> Rational {
        Ratio::from_integer(self.n as i64) * self.q.recip() / Ratio::from_integer(2)
            + self.r.recip()
    }

    /// True when `n/(2q) + 1/r = 1`, the scaling-critical line.
    pub fn is_critical(&self) -> bool {
        self.parabolic_sum() == Ratio::from_integer(1)
    }
}

/// Named clause of the admissibility condition violated by a pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DivbViolation {
    /// `q < 1` or `r < 1`.
    ExponentBelowOne,
    /// `n/(2q) + 1/r > 1`.
    ParabolicSumExceedsOne,
    /// For `n >= 2`: `q <= n/2` (the interval for q is open at n/2).
    QNotAboveHalfDimension,
    /// For `n >= 2`: `r = ∞` is excluded (`r ∈ [1, ∞)`).
    RInfiniteInDimensionAtLeastTwo,
    /// For `n = 1`: `r > 2` (`r ∈ [1, 2]`).
    RAboveTwoInDimensionOne,
}

impl fmt::Display for DivbViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DivbViolation::ExponentBelowOne => write!(f, "q >= 1 and r >= 1 required"),
            DivbViolation::ParabolicSumExceedsOne => write!(f, "n/(2q) + 1/r <= 1 violated"),
            DivbViolation::QNotAboveHalfDimension => {
                write!(f, "q in (n/2, inf] required for n >= 2")
            }
            DivbViolation::RInfiniteInDimensionAtLeastTwo => {
                write!(f, "r in [1, inf) required for n >= 2")
            }
            DivbViolation::RAboveTwoInDimensionOne => write!(f, "r in [1, 2] required for n = 1"),
        }
    }
}

/// Outcome of the divergence admissibility check, with every violated clause.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivbVerdict {
    pub admissible: bool,
    pub violations: Vec<DivbViolation>,
}

impl fmt::Display for DivbVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.admissible {
            write!(f, "admissible")
        } else {
            let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
            write!(f, "inadmissible: {}", msgs.join("; "))
        }
    }
}

/// Checks the divergence integrability condition: `n/(2q) + 1/r <= 1` with
/// `r ∈ [1, ∞), q ∈ (n/2, ∞]` for `n >= 2`, and `r ∈ [1, 2], q ∈ [1, ∞]`
/// for `n = 1`. Total function; the verdict names each violated clause.
pub fn check_divb_admissible(ep: &ExponentPair) -> DivbVerdict {
    let one = Ratio::from_integer(1);
    let mut violations = Vec::new();

    let q_ge_1 = ep.q >= Exponent::Finite(one);
    let r_ge_1 = ep.r >= Exponent::Finite(one);
    if !q_ge_1 || !r_ge_1 {
        violations.push(DivbViolation::ExponentBelowOne);
    }

    if ep.n >= 2 {
        // q strictly above n/2
        let half_n = Ratio::new(ep.n as i64, 2);
        let q_ok = match ep.q {
            Exponent::Infinity => true,
            Exponent::Finite(q) => q > half_n,
        };
        if !q_ok {
            violations.push(DivbViolation::QNotAboveHalfDimension);
        }
        if !ep.r.is_finite() {
            violations.push(DivbViolation::RInfiniteInDimensionAtLeastTwo);
        }
    } else if ep.r > Exponent::int(2) {
        violations.push(DivbViolation::RAboveTwoInDimensionOne);
    }

    if ep.parabolic_sum() > one {
        violations.push(DivbViolation::ParabolicSumExceedsOne);
    }

    DivbVerdict {
        admissible: violations.is_empty(),
        violations,
    }
}

/// The interpolation data produced by solving the Gagliardo-Nirenberg
/// relation `1/(2q') = 1/2 - θ/n` for a given spatial exponent `q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GNExponents {
    /// Interpolation exponent `θ ∈ (0,1)`; equals `n/(2q)` exactly.
    pub theta: Rational,
    /// Hölder conjugate `q'` of `q`.
    pub q_conj: Exponent,
    /// Temporal exponent `r = 1/(1-θ)`, which saturates `n/(2q) + 1/r = 1`.
    pub r_derived: Exponent,
}

/// Solves the interpolation relation for `θ` and derives `r = 1/(1-θ)`.
///
/// Fails when the resulting `θ` falls outside `(0,1)`, which happens exactly
/// when `q = ∞` (θ = 0) or `q <= n/2` (θ >= 1).
pub fn gn_from_q(n: u32, q: Exponent) -> Result<GNExponents, ExponentError> {
    let one = Ratio::from_integer(1);
    // 1/(2q') = 1/2 - θ/n  with 1/q' = 1 - 1/q  collapses to θ = n/(2q).
    let theta = Ratio::from_integer(n as i64) * q.recip() / Ratio::from_integer(2);
    if theta <= Ratio::zero() || theta >= one {
        return Err(ExponentError::ThetaOutOfRange { theta, q, n });
    }
    Ok(GNExponents {
        theta,
        q_conj: q.conjugate(),
        r_derived: Exponent::Finite((one - theta).recip()),
    })
}

/// True iff `(n, Q, R)` sits in the Aronson-Serrin interpolated range
/// `n/(2Q) + 1/R <= 1/2` with `R >= 2` and `Q > n`.
pub fn check_aronson_serrin_range(n: u32, big_q: Exponent, big_r: Exponent) -> bool {
    let half = Ratio::new(1, 2);
    let sum = Ratio::from_integer(n as i64) * big_q.recip() / Ratio::from_integer(2)
        + big_r.recip();
    let q_ok = match big_q {
        Exponent::Infinity => true,
        Exponent::Finite(q) => q > Ratio::from_integer(n as i64),
    };
    sum <= half && big_r >= Exponent::int(2) && q_ok
}

/// Factor by which the mixed norm of `div(b_λ)` scales under the parabolic
/// rescaling `b_λ(x,t) = λ b(λx, λ²t)`: exactly `λ^(2 - n/q - 2/r)`.
/// Returns exactly `1.0` on the critical line `n/(2q) + 1/r = 1`.
pub fn scaling_weight(lambda: f64, ep: &ExponentPair) -> f64 {
    assert!(lambda > 0.0, "scaling parameter must be positive");
    let expo = Ratio::from_integer(2)
        - Ratio::from_integer(ep.n as i64) * ep.q.recip()
        - Ratio::from_integer(2) * ep.r.recip();
    if expo.is_zero() {
        1.0
    } else {
        lambda.powf(expo.to_f64().expect("rational to f64"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair(n: u32, q: Exponent, r: Exponent) -> ExponentPair {
        ExponentPair::new(n, q, r)
    }

    #[test]
    fn divb_examples() {
        // n/(2q) + 1/r = 2/4 + 1/2 = 1 <= 1 and q = 2 > n/2 = 1.
        let v = check_divb_admissible(&pair(2, Exponent::int(2), Exponent::int(2)));
        assert!(v.admissible, "{v}");

        // q = 1 <= n/2 is excluded by the open interval.
        let v = check_divb_admissible(&pair(2, Exponent::int(1), Exponent::Infinity));
        assert!(!v.admissible);
        assert!(v.violations.contains(&DivbViolation::QNotAboveHalfDimension));

        // n = 1 branch: 0 + 1/2 <= 1 and r in [1,2].
        let v = check_divb_admissible(&pair(1, Exponent::Infinity, Exponent::int(2)));
        assert!(v.admissible, "{v}");
    }

    #[test]
    fn divb_dimension_one_r_cap() {
        let v = check_divb_admissible(&pair(1, Exponent::Infinity, Exponent::int(3)));
        assert!(!v.admissible);
        assert_eq!(v.violations, vec![DivbViolation::RAboveTwoInDimensionOne]);
    }

    #[test]
    fn divb_r_infinite_excluded_for_n2() {
        let v = check_divb_admissible(&pair(2, Exponent::int(4), Exponent::Infinity));
        assert!(!v.admissible);
        assert!(v
            .violations
            .contains(&DivbViolation::RInfiniteInDimensionAtLeastTwo));
    }

    #[test]
    fn gn_examples() {
        // (n=2, q=2): q' = 2, θ = 1/2, r = 2, solved by hand from 1/4 = 1/2 - θ/2.
        let gn = gn_from_q(2, Exponent::int(2)).unwrap();
        assert_eq!(gn.theta, Ratio::new(1, 2));
        assert_eq!(gn.q_conj, Exponent::int(2));
        assert_eq!(gn.r_derived, Exponent::int(2));

        // (n=3, q=3): q' = 3/2, θ = 1/2 from 1/3 = 1/2 - θ/3, r = 2.
        let gn = gn_from_q(3, Exponent::int(3)).unwrap();
        assert_eq!(gn.q_conj, Exponent::ratio(3, 2));
        assert_eq!(gn.theta, Ratio::new(1, 2));
        assert_eq!(gn.r_derived, Exponent::int(2));

        // Degenerate endpoint q = ∞ gives θ = 0.
        let err = gn_from_q(2, Exponent::Infinity).unwrap_err();
        assert!(matches!(err, ExponentError::ThetaOutOfRange { .. }));
    }

    #[test]
    fn gn_round_trip_is_exactly_critical() {
        // For every admissible q the derived pair saturates the critical line,
        // in exact rational arithmetic.
        for n in 1..=3u32 {
            for num in 1..=40i64 {
                for den in 1..=6i64 {
                    let q = Ratio::new(num, den);
                    if q < Ratio::from_integer(1) {
                        continue;
                    }
                    let q = Exponent::Finite(q);
                    if let Ok(gn) = gn_from_q(n, q) {
                        let ep = pair(n, q, gn.r_derived);
                        assert_eq!(ep.parabolic_sum(), Ratio::from_integer(1));
                    }
                }
            }
        }
    }

    #[test]
    fn aronson_serrin_examples() {
        assert!(check_aronson_serrin_range(2, Exponent::Infinity, Exponent::int(2)));
        // 2/8 = 1/4 <= 1/2 and Q = 4 > 2.
        assert!(check_aronson_serrin_range(2, Exponent::int(4), Exponent::Infinity));
        // Q > n violated.
        assert!(!check_aronson_serrin_range(2, Exponent::int(2), Exponent::int(4)));
    }

    #[test]
    fn scaling_weight_examples() {
        // Critical pairs scale with factor exactly 1.
        assert_eq!(
            scaling_weight(2.0, &pair(2, Exponent::int(2), Exponent::int(2))),
            1.0
        );
        assert_eq!(
            scaling_weight(2.0, &pair(2, Exponent::Infinity, Exponent::int(1))),
            1.0
        );
        // Subcritical pair: 4^(2 - 1/2 - 1/2) = 4.
        let w = scaling_weight(4.0, &pair(2, Exponent::int(4), Exponent::int(4)));
        assert!((w - 4.0).abs() < 1e-12);
    }

    #[test]
    fn scaling_weight_is_one_on_critical_line_for_random_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let critical = [
            pair(2, Exponent::int(2), Exponent::int(2)),
            pair(2, Exponent::int(4), Exponent::ratio(4, 3)),
            pair(2, Exponent::Infinity, Exponent::int(1)),
            pair(1, Exponent::int(1), Exponent::int(2)),
            pair(1, Exponent::int(2), Exponent::ratio(4, 3)),
        ];
        for _ in 0..100 {
            let lambda: f64 = rng.random_range(1e-9..=10.0);
            for ep in &critical {
                assert!(ep.is_critical());
                assert_eq!(scaling_weight(lambda, ep), 1.0);
            }
        }
    }

    #[test]
    fn admissibility_is_monotone_in_q_and_r() {
        // Increasing q or r within the branch ranges never flips true -> false.
        let qs = [
            Exponent::ratio(3, 2),
            Exponent::int(2),
            Exponent::int(3),
            Exponent::int(8),
            Exponent::Infinity,
        ];
        let rs = [
            Exponent::int(1),
            Exponent::ratio(3, 2),
            Exponent::int(2),
            Exponent::int(4),
            Exponent::int(100),
        ];
        for n in [1u32, 2] {
            for (i, &q) in qs.iter().enumerate() {
                for (j, &r) in rs.iter().enumerate() {
                    if !check_divb_admissible(&pair(n, q, r)).admissible {
                        continue;
                    }
                    for &q2 in &qs[i..] {
                        for &r2 in &rs[j..] {
                            // Stay inside the n = 1 branch cap on r.
                            if n == 1 && r2 > Exponent::int(2) && r <= Exponent::int(2) {
                                continue;
                            }
                            assert!(
                                check_divb_admissible(&pair(n, q2, r2)).admissible,
                                "monotonicity broken at n={n} q={q2} r={r2}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn exponent_parse_and_display_round_trip() {
        for s in ["inf", "2", "3/2", "4/3"] {
            let e: Exponent = s.parse().unwrap();
            assert_eq!(e.to_string(), s);
        }
        assert!("0".parse::<Exponent>().is_err());
        assert!("-2".parse::<Exponent>().is_err());
    }

    #[test]
    fn conjugate_endpoints() {
        assert_eq!(Exponent::int(1).conjugate(), Exponent::Infinity);
        assert_eq!(Exponent::Infinity.conjugate(), Exponent::int(1));
        assert_eq!(Exponent::int(2).conjugate(), Exponent::int(2));
        assert_eq!(Exponent::int(4).conjugate(), Exponent::ratio(4, 3));
    }
}
