use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};

/// Arbitrary-precision rational in canonical form: `gcd(|num|, den) = 1`,
/// `den >= 1`, zero stored as `0/1`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BigRat(BigRational);

impl BigRat {
    /// Builds `num/den` in reduced form. Panics when `den` is zero.
    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Self {
        let den = den.into();
        assert!(!den.is_zero(), "zero denominator");
        BigRat(BigRational::new(num.into(), den))
    }

    pub fn from_integer(n: impl Into<BigInt>) -> Self {
        BigRat(BigRational::from_integer(n.into()))
    }

    pub fn zero() -> Self {
        BigRat(BigRational::zero())
    }

    pub fn one() -> Self {
        BigRat(BigRational::one())
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    /// -1, 0 or +1.
    pub fn signum(&self) -> i32 {
        match self.0.numer().sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    pub fn abs(&self) -> Self {
        BigRat(self.0.abs())
    }

    pub fn recip(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(BigRat(self.0.recip()))
        }
    }

    pub fn pow(&self, exp: u32) -> Self {
        BigRat(num_traits::pow(self.0.clone(), exp as usize))
    }

    /// Smallest `U` for which this value is `U`-rational: `max(|num|, den)`,
    /// or 1 for zero.
    pub fn precision(&self) -> BigInt {
        if self.is_zero() {
            return BigInt::one();
        }
        let n = self.numer().abs();
        let d = self.denom().clone();
        n.max(d)
    }

    /// Storage size: sign plus numerator and denominator bits.
    pub fn bits(&self) -> u64 {
        1 + self.numer().bits() + self.denom().bits()
    }

    /// True iff the value lies in `{±p/q : p, q ∈ [1, U]} ∪ {0}`.
    pub fn is_u_rational(&self, u: &BigInt) -> bool {
        self.is_zero() || (self.numer().abs() <= *u && self.denom() <= u)
    }

    pub fn inner(&self) -> &BigRational {
        &self.0
    }

    pub fn into_inner(self) -> BigRational {
        self.0
    }

    /// Exact rational square root when both reduced parts are perfect squares.
    pub fn sqrt(&self) -> Option<Self> {
        if self.is_negative() {
            return None;
        }
        let n = exact_isqrt(self.numer())?;
        let d = exact_isqrt(self.denom())?;
        Some(BigRat::new(n, d))
    }
}

fn exact_isqrt(v: &BigInt) -> Option<BigInt> {
    let r = num_integer::Roots::sqrt(v);
    (&r * &r == *v).then_some(r)
}

/// `U`-rational membership as a free function.
pub fn is_u_rational(r: &BigRat, u: &BigInt) -> bool {
    r.is_u_rational(u)
}

/// Precision bounds for sums and products of `k` values with individual
/// bounds `U_1..U_k`: the product is `∏U_i`-rational and the sum is
/// `k·∏U_i`-rational.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrecisionBound {
    pub sum: BigInt,
    pub product: BigInt,
}

/// Returns `None` for an empty list.
pub fn sum_precision_bound(bounds: &[BigInt]) -> Option<PrecisionBound> {
    if bounds.is_empty() {
        return None;
    }
    let product: BigInt = bounds.iter().product();
    let sum = &product * BigInt::from(bounds.len());
    Some(PrecisionBound { sum, product })
}

impl From<BigRational> for BigRat {
    fn from(r: BigRational) -> Self {
        BigRat(r)
    }
}

impl From<i64> for BigRat {
    fn from(v: i64) -> Self {
        BigRat::from_integer(v)
    }
}

impl From<BigInt> for BigRat {
    fn from(v: BigInt) -> Self {
        BigRat::from_integer(v)
    }
}

impl fmt::Display for BigRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom().is_one() {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for BigRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseRatError(pub String);

impl fmt::Display for ParseRatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid rational '{}'", self.0)
    }
}

impl std::error::Error for ParseRatError {}

impl FromStr for BigRat {
    type Err = ParseRatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseRatError(s.to_string());
        let (num, den) = match s.split_once('/') {
            Some((n, d)) => (n, Some(d)),
            None => (s, None),
        };
        let digits_ok = |t: &str, signed: bool| {
            let t = if signed {
                t.strip_prefix(['+', '-']).unwrap_or(t)
            } else {
                t
            };
            !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit())
        };
        if !digits_ok(num, true) {
            return Err(err());
        }
        let num: BigInt = num.trim_start_matches('+').parse().map_err(|_| err())?;
        let den: BigInt = match den {
            Some(d) if digits_ok(d, false) => d.parse().map_err(|_| err())?,
            Some(_) => return Err(err()),
            None => BigInt::one(),
        };
        if den.is_zero() {
            return Err(err());
        }
        Ok(BigRat::new(num, den))
    }
}

impl Serialize for BigRat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident) => {
        impl $tr<&BigRat> for &BigRat {
            type Output = BigRat;
            fn $method(self, rhs: &BigRat) -> BigRat {
                BigRat((&self.0).$method(&rhs.0))
            }
        }
        impl $tr<BigRat> for BigRat {
            type Output = BigRat;
            fn $method(self, rhs: BigRat) -> BigRat {
                BigRat(self.0.$method(rhs.0))
            }
        }
        impl $tr<&BigRat> for BigRat {
            type Output = BigRat;
            fn $method(self, rhs: &BigRat) -> BigRat {
                BigRat(self.0.$method(&rhs.0))
            }
        }
        impl $tr<BigRat> for &BigRat {
            type Output = BigRat;
            fn $method(self, rhs: BigRat) -> BigRat {
                BigRat((&self.0).$method(rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl AddAssign<&BigRat> for BigRat {
    fn add_assign(&mut self, rhs: &BigRat) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&BigRat> for BigRat {
    fn sub_assign(&mut self, rhs: &BigRat) {
        self.0 -= &rhs.0;
    }
}

impl MulAssign<&BigRat> for BigRat {
    fn mul_assign(&mut self, rhs: &BigRat) {
        self.0 *= &rhs.0;
    }
}

impl Neg for BigRat {
    type Output = BigRat;
    fn neg(self) -> BigRat {
        BigRat(-self.0)
    }
}

impl Neg for &BigRat {
    type Output = BigRat;
    fn neg(self) -> BigRat {
        BigRat(-&self.0)
    }
}

impl std::iter::Sum for BigRat {
    fn sum<I: Iterator<Item = BigRat>>(iter: I) -> BigRat {
        iter.fold(BigRat::zero(), |acc, x| acc + x)
    }
}
