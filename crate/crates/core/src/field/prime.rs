use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;

use crate::error::{Error, Result};

/// Witness rounds used by [`is_probable_prime`].
pub const MR_ROUNDS: usize = 40;

/// Default number of candidates drawn by [`sample_prime`] before giving up.
pub const DEFAULT_PRIME_ATTEMPTS: usize = 200_000;

const SMALL_PRIMES: [u32; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

/// Miller–Rabin with `rounds` random witnesses after trial division by the
/// primes below 256.
pub fn is_probable_prime(n: &BigUint, rounds: usize, rng: &mut dyn RngCore) -> bool {
    if let Some(small) = n.to_u32() {
        if small < 2 {
            return false;
        }
        if SMALL_PRIMES.contains(&small) {
            return true;
        }
    }
    for &sp in &SMALL_PRIMES {
        if (n % sp).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    let two = BigUint::from(2u32);
    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'witness;
            }
            if x == one {
                return false;
            }
        }
        return false;
    }
    true
}

/// Draws a random prime `p ∈ [Δ, 4Δ]` with `p ≡ residue (mod modulus)` by
/// rejection sampling.
pub fn sample_prime(
    delta: &BigUint,
    residue: u32,
    modulus: u32,
    rng: &mut dyn RngCore,
    max_attempts: usize,
) -> Result<BigUint> {
    if *delta < BigUint::from(3u32) {
        return Err(Error::InvalidConfig(format!(
            "prime range lower bound {delta} < 3"
        )));
    }
    if modulus == 0 || residue >= modulus {
        return Err(Error::InvalidConfig(format!(
            "residue {residue} is not reduced mod {modulus}"
        )));
    }
    let hi = delta * 4u32;
    let m = BigUint::from(modulus);
    let r = BigUint::from(residue);
    for _ in 0..max_attempts {
        let c = rng.gen_biguint_range(delta, &(&hi + 1u32));
        let mut c = &c - (&c % &m) + &r;
        if c < *delta {
            c += &m;
        }
        if c > hi {
            continue;
        }
        if is_probable_prime(&c, MR_ROUNDS, rng) {
            return Ok(c);
        }
    }
    Err(Error::PrimeSearchExhausted {
        attempts: max_attempts,
    })
}

/// Smallest prime `≥ lo` (deterministic scan); used for small fixed moduli.
pub fn next_prime(lo: &BigUint, rng: &mut dyn RngCore) -> BigUint {
    let mut c = lo.clone().max(BigUint::from(2u32));
    if c > BigUint::from(2u32) && c.is_even() {
        c += 1u32;
    }
    while !is_probable_prime(&c, MR_ROUNDS, rng) {
        c += if c == BigUint::from(2u32) { 1u32 } else { 2u32 };
    }
    c
}
