use std::collections::BTreeSet;

use num_bigint::BigUint;

use super::{FpPrime, FpiElem};

/// All `z ∈ F_p[i]` with `z^(2^j) = w`, found by iterating square roots
/// with full branching. The result has either no elements or
/// `gcd(2^j, p² − 1)` of them (one when `w = 0`).
pub fn pow2root_in_fpi(w: &FpiElem, j: u32, p: &FpPrime) -> Vec<FpiElem> {
    let mut level: BTreeSet<FpiElem> = BTreeSet::from([w.clone()]);
    for _ in 0..j {
        level = level.iter().flat_map(|x| p.fpi_sqrt(x)).collect();
        if level.is_empty() {
            break;
        }
    }
    level.into_iter().collect()
}

/// Reference enumeration of `z^(2^j) = w` over every element of a small
/// field.
pub fn brute_force_pow2roots(w: &FpiElem, j: u32, p: &FpPrime) -> Vec<FpiElem> {
    let q: u64 = p.p().try_into().expect("small field");
    let mut out = Vec::new();
    for a in 0..q {
        for b in 0..q {
            let z = FpiElem::new(BigUint::from(a), BigUint::from(b));
            if p.fpi_pow2(&z, j) == *w {
                out.push(z);
            }
        }
    }
    out.sort();
    out
}
