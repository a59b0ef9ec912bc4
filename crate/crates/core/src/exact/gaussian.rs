use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use serde::Serialize;

use super::BigRat;

/// Exact complex number `re + im·i` with rational parts.
///
/// Ordering is lexicographic on `(re, im)`; it has no geometric meaning and
/// exists so multisets can be sorted and compared.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct GaussianRat {
    pub re: BigRat,
    pub im: BigRat,
}

impl GaussianRat {
    pub fn new(re: BigRat, im: BigRat) -> Self {
        GaussianRat { re, im }
    }

    pub fn from_ints(re: i64, im: i64) -> Self {
        GaussianRat::new(BigRat::from(re), BigRat::from(im))
    }

    pub fn real(re: BigRat) -> Self {
        GaussianRat::new(re, BigRat::zero())
    }

    pub fn zero() -> Self {
        GaussianRat::from_ints(0, 0)
    }

    pub fn one() -> Self {
        GaussianRat::from_ints(1, 0)
    }

    pub fn i() -> Self {
        GaussianRat::from_ints(0, 1)
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        GaussianRat::new(self.re.clone(), -&self.im)
    }

    /// `|z|²`.
    pub fn norm_sq(&self) -> BigRat {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn mul_i(&self) -> Self {
        GaussianRat::new(-&self.im, self.re.clone())
    }

    pub fn scale(&self, k: &BigRat) -> Self {
        GaussianRat::new(&self.re * k, &self.im * k)
    }

    pub fn inv(&self) -> Option<Self> {
        let n = self.norm_sq();
        let r = n.recip()?;
        Some(self.conj().scale(&r))
    }

    pub fn div(&self, rhs: &GaussianRat) -> Option<Self> {
        Some(self * &rhs.inv()?)
    }

    pub fn pow(&self, exp: u64) -> Self {
        let mut base = self.clone();
        let mut acc = GaussianRat::one();
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Largest precision of the two parts.
    pub fn precision(&self) -> BigInt {
        self.re.precision().max(self.im.precision())
    }

    pub fn bits(&self) -> u64 {
        self.re.bits() + self.im.bits()
    }

    pub fn is_u_rational(&self, u: &BigInt) -> bool {
        self.re.is_u_rational(u) && self.im.is_u_rational(u)
    }
}

impl fmt::Display for GaussianRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.re, self.im)
    }
}

impl fmt::Debug for GaussianRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} + {}i)", self.re, self.im)
    }
}

impl Add for &GaussianRat {
    type Output = GaussianRat;
    fn add(self, rhs: &GaussianRat) -> GaussianRat {
        GaussianRat::new(&self.re + &rhs.re, &self.im + &rhs.im)
    }
}

impl Add for GaussianRat {
    type Output = GaussianRat;
    fn add(self, rhs: GaussianRat) -> GaussianRat {
        &self + &rhs
    }
}

impl Sub for &GaussianRat {
    type Output = GaussianRat;
    fn sub(self, rhs: &GaussianRat) -> GaussianRat {
        GaussianRat::new(&self.re - &rhs.re, &self.im - &rhs.im)
    }
}

impl Sub for GaussianRat {
    type Output = GaussianRat;
    fn sub(self, rhs: GaussianRat) -> GaussianRat {
        &self - &rhs
    }
}

impl Mul for &GaussianRat {
    type Output = GaussianRat;
    fn mul(self, rhs: &GaussianRat) -> GaussianRat {
        GaussianRat::new(
            &self.re * &rhs.re - &self.im * &rhs.im,
            &self.re * &rhs.im + &self.im * &rhs.re,
        )
    }
}

impl Mul for GaussianRat {
    type Output = GaussianRat;
    fn mul(self, rhs: GaussianRat) -> GaussianRat {
        &self * &rhs
    }
}

impl Neg for &GaussianRat {
    type Output = GaussianRat;
    fn neg(self) -> GaussianRat {
        GaussianRat::new(-&self.re, -&self.im)
    }
}

impl Neg for GaussianRat {
    type Output = GaussianRat;
    fn neg(self) -> GaussianRat {
        -&self
    }
}

impl std::iter::Sum for GaussianRat {
    fn sum<I: Iterator<Item = GaussianRat>>(iter: I) -> GaussianRat {
        iter.fold(GaussianRat::zero(), |acc, z| &acc + &z)
    }
}

/// `|z|²` as a free function.
pub fn norm_sq(z: &GaussianRat) -> BigRat {
    z.norm_sq()
}
