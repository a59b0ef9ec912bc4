//! Karp–Rabin multiset fingerprints `Σ b^idx(x) mod q` and the injective
//! index maps used to feed them.

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_traits::{One, Signed, Zero};
use rand::RngCore;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exact::{BigRat, GaussianRat};
use crate::field::{is_probable_prime, MR_ROUNDS};

/// `code_V(a/b) = (a + V)·V + (b − 1)`, a value in `[0, (2V+1)·V)`.
pub fn code(r: &BigRat, v: &BigInt) -> Result<BigInt> {
    if !r.is_u_rational(v) {
        return Err(Error::DomainViolation(format!("{r} is not {v}-rational")));
    }
    Ok((r.numer() + v) * v + (r.denom() - 1))
}

/// Number of distinct codes, `(2V+1)·V`.
pub fn code_range(v: &BigInt) -> BigInt {
    (v * 2 + 1) * v
}

/// `idx(z) = code(re)·(2V+1)² + code(im) + 1`, in `[1, (2V+1)⁴]`.
pub fn idx_point(z: &GaussianRat, v: &BigInt) -> Result<BigUint> {
    let w: BigInt = v * 2 + 1;
    let i: BigInt = code(&z.re, v)? * &w * &w + code(&z.im, v)? + 1u32;
    Ok(i.to_biguint().expect("codes are non-negative"))
}

/// Upper end of the `idx_point` range, `(2V+1)⁴`.
pub fn idx_point_max(v: &BigInt) -> BigUint {
    let w = (v * BigInt::from(2) + 1u32).to_biguint().unwrap();
    num_traits::pow(w, 4)
}

/// Precision class of squared distances between `U`-rational points,
/// `W = 2¹¹U¹⁶`.
pub fn gamma_precision(u: &BigInt) -> BigInt {
    (BigInt::one() << 11u32) * num_traits::pow(u.clone(), 16)
}

fn sign_digit(sigma: i8) -> Result<u32> {
    match sigma {
        -1 => Ok(0),
        0 => Ok(1),
        1 => Ok(2),
        _ => Err(Error::DomainViolation(format!(
            "sign {sigma} not in {{-1, 0, 1}}"
        ))),
    }
}

/// Index of `({d1 ≤ d2}, σ)`: `(code(d1)·K + code(d2))·3 + (σ+1) + 1` with
/// `K = (2W+1)·W`.
pub fn idx_gamma(d1: &BigRat, d2: &BigRat, sigma: i8, w: &BigInt) -> Result<BigUint> {
    if d1 > d2 {
        return Err(Error::DomainViolation("distance pair is not sorted".into()));
    }
    idx_tuple(&[d1, d2], sigma, w)
}

/// Mixed-radix index of a tuple of `V`-rationals plus a sign:
/// `((code(x₁)·K + code(x₂))·K + …)·3 + (σ+1) + 1`, `K = (2V+1)·V`.
pub fn idx_tuple(xs: &[&BigRat], sigma: i8, v: &BigInt) -> Result<BigUint> {
    let k = code_range(v);
    let mut acc = BigInt::zero();
    for x in xs {
        acc = acc * &k + code(x, v)?;
    }
    let i: BigInt = acc * 3u32 + sign_digit(sigma)? + 1u32;
    Ok(i.to_biguint().expect("non-negative"))
}

/// Largest value of [`idx_tuple`] over `arity` coordinates.
pub fn idx_tuple_max(arity: u32, v: &BigInt) -> BigUint {
    let k = code_range(v).to_biguint().unwrap();
    num_traits::pow(k, arity as usize) * 3u32
}

/// Random prime in `[lo, hi]` by rejection sampling.
pub fn choose_q(lo: &BigUint, hi: &BigUint, rng: &mut dyn RngCore) -> Result<BigUint> {
    if lo > hi || *hi < BigUint::from(2u32) {
        return Err(Error::InvalidConfig(format!(
            "empty prime range [{lo}, {hi}]"
        )));
    }
    let lo = lo.max(&BigUint::from(2u32)).clone();
    let attempts = 100_000;
    for _ in 0..attempts {
        let c = rng.gen_biguint_range(&lo, &(hi + 1u32));
        if is_probable_prime(&c, MR_ROUNDS, rng) {
            return Ok(c);
        }
    }
    Err(Error::PrimeSearchExhausted { attempts })
}

/// Base in `[0, q)` derived from a seed and a domain tag by SHA-256, so that
/// independent parties with the same seed agree on it.
pub fn derive_base(seed: u64, q: &BigUint, tag: &[u8]) -> BigUint {
    let mut h = Sha256::new();
    h.update(b"congstream-kr-base");
    h.update(seed.to_le_bytes());
    h.update(q.to_bytes_le());
    h.update(tag);
    // Two blocks so the reduction bias is negligible for q up to 2^256.
    let first = h.clone().chain_update([0u8]).finalize();
    let second = h.chain_update([1u8]).finalize();
    let mut bytes = first.to_vec();
    bytes.extend_from_slice(&second);
    BigUint::from_bytes_le(&bytes) % q
}

/// Running fingerprint `acc = Σ b^idx mod q`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KRState {
    #[serde(serialize_with = "crate::ser::display")]
    pub q: BigUint,
    #[serde(serialize_with = "crate::ser::display")]
    pub base: BigUint,
    #[serde(serialize_with = "crate::ser::display")]
    pub acc: BigUint,
    pub aborted: bool,
}

impl KRState {
    pub fn new(q: BigUint, base: BigUint) -> Self {
        let base = base % &q;
        KRState {
            q,
            base,
            acc: BigUint::zero(),
            aborted: false,
        }
    }

    /// Fingerprint with a uniformly random base.
    pub fn random(q: BigUint, rng: &mut dyn RngCore) -> Self {
        let b = rng.gen_biguint_below(&q);
        KRState::new(q, b)
    }

    /// Adds `b^index`.
    pub fn feed(&mut self, index: &BigUint) {
        if self.aborted {
            return;
        }
        let term = self.base.modpow(index, &self.q);
        self.acc = (&self.acc + term) % &self.q;
    }

    pub fn abort(&mut self) {
        self.aborted = true;
    }

    pub fn value(&self) -> &BigUint {
        &self.acc
    }

    /// Combines two fingerprints of disjoint parts of a multiset.
    pub fn merge(&mut self, other: &KRState) -> Result<()> {
        if self.q != other.q || self.base != other.base {
            return Err(Error::InvalidConfig("fingerprint parameters differ".into()));
        }
        self.acc = (&self.acc + &other.acc) % &self.q;
        self.aborted |= other.aborted;
        Ok(())
    }

    /// Live size: modulus, base and accumulator.
    pub fn bits(&self) -> u64 {
        3 * self.q.bits() + 1
    }
}

/// Largest precision among `xs`, or 1 when empty.
pub fn max_precision<'a>(xs: impl IntoIterator<Item = &'a BigRat>) -> BigInt {
    xs.into_iter()
        .map(|x| x.precision())
        .max()
        .unwrap_or_else(BigInt::one)
        .abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::collections::HashSet;

    fn all_v_rationals(v: i64) -> Vec<BigRat> {
        let mut out: Vec<BigRat> = Vec::new();
        for a in -v..=v {
            for b in 1..=v {
                let r = BigRat::new(a, b);
                if !out.contains(&r) {
                    out.push(r);
                }
            }
        }
        out
    }

    #[test]
    fn idx_point_hand_value() {
        let v = BigInt::one();
        assert_eq!(code(&BigRat::zero(), &v).unwrap(), BigInt::one());
        assert_eq!(
            idx_point(&GaussianRat::zero(), &v).unwrap(),
            BigUint::from(11u32)
        );
    }

    #[test]
    fn idx_point_injective_on_q2() {
        let v = BigInt::from(2);
        let vals = all_v_rationals(2);
        let max = idx_point_max(&v);
        let mut seen = HashSet::new();
        for re in &vals {
            for im in &vals {
                let i = idx_point(&GaussianRat::new(re.clone(), im.clone()), &v).unwrap();
                assert!(i >= BigUint::one() && i <= max);
                assert!(seen.insert(i));
            }
        }
        assert!(idx_point(&GaussianRat::from_ints(3, 0), &v).is_err());
    }

    #[test]
    fn idx_gamma_injective_for_unit_precision() {
        let w = gamma_precision(&BigInt::one());
        // A sample of the W-rational domain dense near zero.
        let vals: Vec<BigRat> = all_v_rationals(6)
            .into_iter()
            .filter(|r| !r.is_negative())
            .collect();
        let mut seen = HashSet::new();
        for (i, d1) in vals.iter().enumerate() {
            for d2 in &vals {
                if d1 > d2 {
                    continue;
                }
                for s in [-1i8, 0, 1] {
                    assert!(seen.insert(idx_gamma(d1, d2, s, &w).unwrap()), "{i}");
                }
            }
        }
        let a = idx_gamma(&BigRat::one(), &BigRat::from(2), -1, &w).unwrap();
        let b = idx_gamma(&BigRat::one(), &BigRat::from(2), 1, &w).unwrap();
        assert_ne!(a, b);
        assert!(idx_gamma(&BigRat::from(2), &BigRat::one(), 0, &w).is_err());
        assert!(idx_gamma(&BigRat::one(), &BigRat::one(), 2, &w).is_err());
    }

    #[test]
    fn equal_multisets_equal_fingerprints() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let q = choose_q(
            &BigUint::from(10_000u32),
            &BigUint::from(20_000u32),
            &mut rng,
        )
        .unwrap();
        let xs: Vec<u32> = vec![5, 9, 9, 100, 3];
        let mut ys = xs.clone();
        ys.reverse();
        for _ in 0..20 {
            let mut a = KRState::random(q.clone(), &mut rng);
            let mut b = KRState::new(q.clone(), a.base.clone());
            for x in &xs {
                a.feed(&BigUint::from(*x));
            }
            for y in &ys {
                b.feed(&BigUint::from(*y));
            }
            assert_eq!(a.value(), b.value());
        }
        let empty = KRState::random(q, &mut rng);
        assert!(empty.value().is_zero());
    }

    #[test]
    fn collision_rate_within_degree_bound() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let degree = 200u32;
        let trials = 500u32;
        let q = choose_q(
            &BigUint::from(16 * degree * trials),
            &BigUint::from(32 * degree * trials),
            &mut rng,
        )
        .unwrap();
        let mut collisions = 0;
        for _ in 0..trials {
            let mut xs: Vec<u32> = (0..10).map(|_| rng.gen_range(1..=degree)).collect();
            let mut a = KRState::random(q.clone(), &mut rng);
            let mut b = KRState::new(q.clone(), a.base.clone());
            for x in &xs {
                a.feed(&BigUint::from(*x));
            }
            xs[0] = if xs[0] == degree { 1 } else { xs[0] + 1 };
            for x in &xs {
                b.feed(&BigUint::from(*x));
            }
            if a.value() == b.value() {
                collisions += 1;
            }
        }
        // Expected at most degree/q per trial, i.e. < 1/(16·trials) each.
        assert!(collisions <= 2, "{collisions}");
    }

    #[test]
    fn derived_bases_are_stable() {
        let q = BigUint::from(1_000_003u32);
        assert_eq!(derive_base(7, &q, b"x"), derive_base(7, &q, b"x"));
        assert_ne!(derive_base(7, &q, b"x"), derive_base(8, &q, b"x"));
        assert!(derive_base(7, &q, b"x") < q);
    }

    #[test]
    fn merged_shards_equal_whole() {
        let q = BigUint::from(1_000_003u32);
        let base = BigUint::from(12345u32);
        let mut whole = KRState::new(q.clone(), base.clone());
        let mut left = KRState::new(q.clone(), base.clone());
        let mut right = KRState::new(q, base);
        for (i, x) in [4u32, 8, 15, 16, 23, 42].iter().enumerate() {
            whole.feed(&BigUint::from(*x));
            if i < 3 {
                left.feed(&BigUint::from(*x));
            } else {
                right.feed(&BigUint::from(*x));
            }
        }
        left.merge(&right).unwrap();
        assert_eq!(left.value(), whole.value());
    }
}
