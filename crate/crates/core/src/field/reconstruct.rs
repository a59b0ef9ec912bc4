use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::{FpElem, FpPrime, FpiElem};
use crate::exact::{BigRat, GaussianRat};

/// Recovers the unique `a/b` with `|a| ≤ N`, `1 ≤ b ≤ D`, `gcd(a, b) = 1`
/// and `a·b⁻¹ ≡ x (mod p)`, if one exists.
///
/// Uniqueness needs `p > 2ND`; the caller is responsible for that. The
/// extended Euclidean sweep on `(p, x)` stops at the first remainder `≤ N`;
/// the matching cofactor is the only possible denominator.
///
/// Works for any odd prime modulus, not only the field primes.
pub fn rational_reconstruct(x: &FpElem, n: &BigInt, d: &BigInt, p: &BigUint) -> Option<BigRat> {
    let modulus = BigInt::from_biguint(Sign::Plus, p.clone());
    let mut r0 = modulus.clone();
    let mut r1 = BigInt::from_biguint(Sign::Plus, x % p);
    let mut t0 = BigInt::zero();
    let mut t1 = BigInt::one();
    while r1 > *n {
        let (q, r) = r0.div_rem(&r1);
        r0 = std::mem::replace(&mut r1, r);
        let t = &t0 - &q * &t1;
        t0 = std::mem::replace(&mut t1, t);
    }
    if t1.is_zero() || t1.abs() > *d || !r1.gcd(&t1).is_one() {
        return None;
    }
    let out = BigRat::new(r1, t1);
    debug_assert!(
        ((out.numer() - out.denom() * BigInt::from_biguint(Sign::Plus, x.clone())) % &modulus)
            .is_zero()
    );
    Some(out)
}

/// Componentwise reconstruction of an F_p[i] element.
pub fn reconstruct_gaussian(
    x: &FpiElem,
    n: &BigInt,
    d: &BigInt,
    p: &FpPrime,
) -> Option<GaussianRat> {
    Some(GaussianRat::new(
        rational_reconstruct(&x.re, n, d, p.p())?,
        rational_reconstruct(&x.im, n, d, p.p())?,
    ))
}
