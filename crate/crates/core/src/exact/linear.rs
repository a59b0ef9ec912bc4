use num_bigint::BigInt;

use super::{BigRat, GaussianRat};
use crate::error::{Error, Result};

/// Solves `[a1 a2; a3 a4]·(x, y) = (a5, a6)` by Cramer's rule.
///
/// With `U`-rational inputs both outputs are `4U⁸`-rational; debug builds
/// assert this.
pub fn solve_2x2(
    a1: &BigRat,
    a2: &BigRat,
    a3: &BigRat,
    a4: &BigRat,
    a5: &BigRat,
    a6: &BigRat,
) -> Result<(BigRat, BigRat)> {
    let det = a1 * a4 - a2 * a3;
    let inv = det.recip().ok_or(Error::SingularSystem)?;
    let x = (a4 * a5 - a2 * a6) * &inv;
    let y = (a1 * a6 - a3 * a5) * &inv;
    #[cfg(debug_assertions)]
    {
        let u = [a1, a2, a3, a4, a5, a6]
            .iter()
            .map(|a| a.precision())
            .max()
            .unwrap();
        let bound = BigInt::from(4) * num_traits::pow(u, 8);
        debug_assert!(x.is_u_rational(&bound) && y.is_u_rational(&bound));
    }
    Ok((x, y))
}

/// Precision classes of a recovered rotation and translation for
/// `U`-rational anchors: `ρ ∈ Q_{2¹⁰U¹⁶}[i]`, `t ∈ Q_{2²²U³⁵}[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RotationBounds {
    pub rho: BigInt,
    pub t: BigInt,
}

impl RotationBounds {
    pub fn for_precision(u: &BigInt) -> Self {
        RotationBounds {
            rho: (BigInt::from(1) << 10u32) * num_traits::pow(u.clone(), 16),
            t: (BigInt::from(1) << 22u32) * num_traits::pow(u.clone(), 35),
        }
    }
}

/// Finds the rotation `ρ` (with `|ρ|² = 1`) and translation `t` taking
/// `a1 ↦ b1` and `a2 ↦ b2`, if one exists.
pub fn recover_rotation(
    a1: &GaussianRat,
    a2: &GaussianRat,
    b1: &GaussianRat,
    b2: &GaussianRat,
) -> Option<(GaussianRat, GaussianRat)> {
    if a1 == a2 || b1 == b2 {
        return None;
    }
    let c = b2 - b1;
    let d = a2 - a1;
    let (sin, cos) = solve_2x2(&-&d.im, &d.re, &d.re, &d.im, &c.re, &c.im).ok()?;
    let rho = GaussianRat::new(cos, sin);
    if !rho.norm_sq().is_one() {
        return None;
    }
    let t = b1 - &(&rho * a1);
    #[cfg(debug_assertions)]
    {
        let u = [a1, a2, b1, b2]
            .iter()
            .map(|z| z.precision())
            .max()
            .unwrap();
        let bounds = RotationBounds::for_precision(&u);
        debug_assert!(rho.is_u_rational(&bounds.rho) && t.is_u_rational(&bounds.t));
    }
    Some((rho, t))
}
