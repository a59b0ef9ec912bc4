//! Arithmetic in F_p and F_p[i] for primes `p ≡ 3 (mod 4)`, the reduction
//! map φ_p, prime sampling, rational reconstruction and `2^j`-th roots.

mod prime;
mod reconstruct;
mod roots;

use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Zero};
use rand::SeedableRng;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exact::{BigRat, GaussianRat};

pub use prime::{is_probable_prime, next_prime, sample_prime, DEFAULT_PRIME_ATTEMPTS, MR_ROUNDS};
pub use reconstruct::{rational_reconstruct, reconstruct_gaussian};
pub use roots::{brute_force_pow2roots, pow2root_in_fpi};

/// Element of F_p, always reduced into `[0, p)`.
pub type FpElem = BigUint;

/// Element `re + im·i` of F_p[i].
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FpiElem {
    pub re: FpElem,
    pub im: FpElem,
}

impl FpiElem {
    pub fn new(re: FpElem, im: FpElem) -> Self {
        FpiElem { re, im }
    }

    pub fn zero() -> Self {
        FpiElem::new(BigUint::zero(), BigUint::zero())
    }

    pub fn one() -> Self {
        FpiElem::new(BigUint::one(), BigUint::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    /// Serialized size in bits.
    pub fn bits(&self) -> u64 {
        self.re.bits() + self.im.bits()
    }
}

impl fmt::Debug for FpiElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}i", self.re, self.im)
    }
}

impl Serialize for FpiElem {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("FpiElem", 2)?;
        st.serialize_field("re", &self.re.to_string())?;
        st.serialize_field("im", &self.im.to_string())?;
        st.end()
    }
}

/// A prime `p ≡ 3 (mod 4)` together with the residue class it was drawn
/// from. All field operations go through this context.
#[derive(Clone, PartialEq, Eq)]
pub struct FpPrime {
    p: BigUint,
    residue: u32,
    modulus: u32,
    sqrt_exp: BigUint,
}

impl FpPrime {
    /// Validates primality and `p ≡ residue (mod modulus)`. `residue` is
    /// always 3 and `modulus` must be a multiple of 4 so that `x² + 1` is
    /// irreducible.
    pub fn new(p: BigUint, modulus: u32) -> Result<Self> {
        let residue = 3u32;
        if modulus == 0 || !modulus.is_multiple_of(4) || &p % modulus != BigUint::from(residue) {
            return Err(Error::NotFieldPrime(p.to_string()));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        if !is_probable_prime(&p, MR_ROUNDS, &mut rng) {
            return Err(Error::NotFieldPrime(p.to_string()));
        }
        let sqrt_exp = (&p + 1u32) >> 2u32;
        Ok(FpPrime {
            p,
            residue,
            modulus,
            sqrt_exp,
        })
    }

    /// Samples a random prime in `[Δ, 4Δ]` congruent to 3 mod `modulus`.
    pub fn sample(delta: &BigUint, modulus: u32, rng: &mut dyn rand::RngCore) -> Result<Self> {
        let p = sample_prime(delta, 3, modulus, rng, DEFAULT_PRIME_ATTEMPTS)?;
        FpPrime::new(p, modulus)
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn residue(&self) -> u32 {
        self.residue
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    /// Bit length of `p`.
    pub fn bits(&self) -> u64 {
        self.p.bits()
    }

    // ---- F_p ----

    pub fn reduce(&self, v: &BigUint) -> FpElem {
        v % &self.p
    }

    pub fn reduce_int(&self, v: &BigInt) -> FpElem {
        let p = BigInt::from_biguint(Sign::Plus, self.p.clone());
        let r = ((v % &p) + &p) % &p;
        r.to_biguint().expect("non-negative after reduction")
    }

    pub fn add(&self, a: &FpElem, b: &FpElem) -> FpElem {
        let s = a + b;
        if s >= self.p {
            s - &self.p
        } else {
            s
        }
    }

    pub fn sub(&self, a: &FpElem, b: &FpElem) -> FpElem {
        if a >= b {
            a - b
        } else {
            &self.p - (b - a)
        }
    }

    pub fn neg(&self, a: &FpElem) -> FpElem {
        if a.is_zero() {
            BigUint::zero()
        } else {
            &self.p - a
        }
    }

    pub fn mul(&self, a: &FpElem, b: &FpElem) -> FpElem {
        (a * b) % &self.p
    }

    pub fn pow(&self, a: &FpElem, e: &BigUint) -> FpElem {
        a.modpow(e, &self.p)
    }

    /// Inverse by Fermat's little theorem; `None` for zero.
    pub fn inv(&self, a: &FpElem) -> Option<FpElem> {
        if a.is_zero() {
            None
        } else {
            Some(a.modpow(&(&self.p - 2u32), &self.p))
        }
    }

    pub fn from_u64(&self, v: u64) -> FpElem {
        BigUint::from(v) % &self.p
    }

    /// Square root in F_p as `a^((p+1)/4)`, if `a` is a square.
    pub fn sqrt(&self, a: &FpElem) -> Option<FpElem> {
        if a.is_zero() {
            return Some(BigUint::zero());
        }
        let r = a.modpow(&self.sqrt_exp, &self.p);
        (self.mul(&r, &r) == *a).then_some(r)
    }

    /// φ_p on a rational `a/b`: `a·b⁻¹ mod p`.
    pub fn phi_rat(&self, r: &BigRat) -> Result<FpElem> {
        let den = self.reduce_int(r.denom());
        let inv = self.inv(&den).ok_or(Error::UndefinedUnderPhi)?;
        Ok(self.mul(&self.reduce_int(r.numer()), &inv))
    }

    // ---- F_p[i] ----

    /// φ_p on a Gaussian rational, componentwise.
    pub fn phi(&self, z: &GaussianRat) -> Result<FpiElem> {
        Ok(FpiElem::new(self.phi_rat(&z.re)?, self.phi_rat(&z.im)?))
    }

    pub fn fpi_add(&self, a: &FpiElem, b: &FpiElem) -> FpiElem {
        FpiElem::new(self.add(&a.re, &b.re), self.add(&a.im, &b.im))
    }

    pub fn fpi_sub(&self, a: &FpiElem, b: &FpiElem) -> FpiElem {
        FpiElem::new(self.sub(&a.re, &b.re), self.sub(&a.im, &b.im))
    }

    pub fn fpi_neg(&self, a: &FpiElem) -> FpiElem {
        FpiElem::new(self.neg(&a.re), self.neg(&a.im))
    }

    pub fn fpi_mul(&self, a: &FpiElem, b: &FpiElem) -> FpiElem {
        let rr = &a.re * &b.re;
        let ii = &a.im * &b.im;
        let re = if rr >= ii {
            (rr - ii) % &self.p
        } else {
            self.neg(&((ii - rr) % &self.p))
        };
        let im = (&a.re * &b.im + &a.im * &b.re) % &self.p;
        FpiElem::new(re, im)
    }

    pub fn fpi_sqr(&self, a: &FpiElem) -> FpiElem {
        self.fpi_mul(a, a)
    }

    pub fn fpi_scale(&self, a: &FpiElem, k: &FpElem) -> FpiElem {
        FpiElem::new(self.mul(&a.re, k), self.mul(&a.im, k))
    }

    pub fn fpi_conj(&self, a: &FpiElem) -> FpiElem {
        FpiElem::new(a.re.clone(), self.neg(&a.im))
    }

    /// Field norm `a² + b²` of `a + bi`, which equals `|z|²` under φ_p.
    pub fn fpi_norm(&self, a: &FpiElem) -> FpElem {
        (&a.re * &a.re + &a.im * &a.im) % &self.p
    }

    /// `(a + bi)⁻¹ = (a − bi) / (a² + b²)`.
    pub fn fpi_inv(&self, a: &FpiElem) -> Result<FpiElem> {
        let n = self.fpi_norm(a);
        let inv = self.inv(&n).ok_or(Error::DivisionByZero)?;
        Ok(self.fpi_scale(&self.fpi_conj(a), &inv))
    }

    pub fn fpi_pow(&self, a: &FpiElem, e: &BigUint) -> FpiElem {
        let mut acc = FpiElem::one();
        for i in (0..e.bits()).rev() {
            acc = self.fpi_sqr(&acc);
            if e.bit(i) {
                acc = self.fpi_mul(&acc, a);
            }
        }
        acc
    }

    /// `a^(2^j)` by repeated squaring.
    pub fn fpi_pow2(&self, a: &FpiElem, j: u32) -> FpiElem {
        (0..j).fold(a.clone(), |x, _| self.fpi_sqr(&x))
    }

    /// All square roots of `w` in F_p[i] (0, 1 or 2 of them).
    ///
    /// Uses the norm map: if `z² = w` then `N(z)² = N(w)`, and `N(w)` has an
    /// F_p square root by a single exponentiation. The real and imaginary
    /// parts then follow from the half-angle relations `x² = (a + n)/2`,
    /// `y² = (n − a)/2`, `2xy = b`.
    pub fn fpi_sqrt(&self, w: &FpiElem) -> Vec<FpiElem> {
        if w.is_zero() {
            return vec![FpiElem::zero()];
        }
        let Some(n0) = self.sqrt(&self.fpi_norm(w)) else {
            return Vec::new();
        };
        let half = self.inv(&self.from_u64(2)).expect("p is odd");
        let mut out: Vec<FpiElem> = Vec::new();
        for n in [n0.clone(), self.neg(&n0)] {
            let x2 = self.mul(&self.add(&w.re, &n), &half);
            let Some(x) = self.sqrt(&x2) else { continue };
            let ys = if x.is_zero() {
                let y2 = self.mul(&self.sub(&n, &w.re), &half);
                match self.sqrt(&y2) {
                    Some(y) => vec![y],
                    None => continue,
                }
            } else {
                let two_x_inv = self.inv(&self.add(&x, &x)).expect("x nonzero");
                vec![self.mul(&w.im, &two_x_inv)]
            };
            for y in ys {
                let z = FpiElem::new(x.clone(), y);
                if self.fpi_sqr(&z) == *w {
                    for c in [self.fpi_neg(&z), z] {
                        if !out.contains(&c) {
                            out.push(c);
                        }
                    }
                }
            }
            if !out.is_empty() {
                break;
            }
        }
        out
    }
}

impl fmt::Debug for FpPrime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "FpPrime({} ≡ {} mod {})",
            self.p, self.residue, self.modulus
        )
    }
}

impl Serialize for FpPrime {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("FpPrime", 3)?;
        st.serialize_field("p", &self.p.to_string())?;
        st.serialize_field("residue", &self.residue)?;
        st.serialize_field("modulus", &self.modulus)?;
        st.end()
    }
}
