//! Prime ranges and reconstruction bounds shared by the streaming
//! algorithms.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

/// `Full` uses prime ranges large enough for every uniqueness guarantee.
/// `Fast` uses much smaller primes and clamps reconstruction bounds to
/// what the prime supports; its answers are still verified by
/// fingerprints, but the good-prime guarantee no longer holds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Full,
    Fast,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Mode::Full),
            "fast" => Ok(Mode::Fast),
            _ => Err(Error::InvalidConfig(format!("unknown mode '{s}'"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::Fast => "fast",
        })
    }
}

fn big(v: &BigInt) -> BigUint {
    v.to_biguint().expect("non-negative parameter")
}

fn pow(u: &BigInt, e: usize) -> BigUint {
    num_traits::pow(big(u), e)
}

fn shl(e: u32) -> BigUint {
    BigUint::one() << e
}

/// Lower end of the prime range for the 2D identification run:
/// `2⁸⁶U¹²⁸n⁴` in full mode, `2¹⁶(nU)⁴` in fast mode.
pub fn delta_2d(mode: Mode, u: &BigInt, n: usize) -> BigUint {
    let n4 = num_traits::pow(BigUint::from(n), 4);
    match mode {
        Mode::Full => shl(86) * pow(u, 128) * n4,
        Mode::Fast => shl(16) * pow(u, 4) * n4,
    }
}

/// Verification prime range `[2¹²U⁴n, 2¹³U⁴n]`.
pub fn verify_q_range_2d(u: &BigInt, n: usize) -> (BigUint, BigUint) {
    let base = pow(u, 4) * BigUint::from(n.max(1));
    (shl(12) * &base, shl(13) * base)
}

/// Lower end of the prime range for signatures of `m` sets of size `n`:
/// `2⁸⁷U¹²⁸n⁶m³` in full mode, `2¹⁶(nU)⁴m` in fast mode.
pub fn delta_geomsign(mode: Mode, u: &BigInt, n: usize, m: usize) -> BigUint {
    let n = BigUint::from(n.max(1));
    let m = BigUint::from(m.max(1));
    match mode {
        Mode::Full => shl(87) * pow(u, 128) * num_traits::pow(n, 6) * num_traits::pow(m, 3),
        Mode::Fast => shl(16) * pow(u, 4) * num_traits::pow(n, 4) * m,
    }
}

/// Signature prime range `[2⁴⁷U⁶⁴nm², 2⁴⁸U⁶⁴nm²]`.
pub fn signature_q_range(u: &BigInt, n: usize, m: usize) -> (BigUint, BigUint) {
    let m = BigUint::from(m.max(1));
    let base = pow(u, 64) * BigUint::from(n.max(1)) * &m * &m;
    (shl(47) * &base, shl(48) * base)
}

/// Lower end of the prime range for the 3D centroid sphere, `2⁴⁰(nU)⁴`.
pub fn delta_3d(u: &BigInt, n: usize) -> BigUint {
    shl(40) * pow(u, 4) * num_traits::pow(BigUint::from(n.max(1)), 4)
}

/// Largest `N = D` with `p > 2N²`.
pub fn max_reconstruction_bound(p: &BigUint) -> BigInt {
    if p.is_zero() {
        return BigInt::zero();
    }
    BigInt::from((p - 1u32) / 2u32).sqrt()
}

/// The bound to use for reconstructing a value known to be
/// `bound`-rational. Full mode requires `p > 2·bound²`; fast mode clamps.
pub fn reconstruction_bound(mode: Mode, bound: &BigInt, p: &BigUint) -> Result<BigInt> {
    let limit = max_reconstruction_bound(p);
    if *bound <= limit {
        return Ok(bound.clone());
    }
    match mode {
        Mode::Full => Err(Error::InvalidConfig(format!(
            "prime {p} too small for unique reconstruction with bound {bound}"
        ))),
        Mode::Fast => Ok(limit),
    }
}
