use serde::Serialize;

use super::{BigRat, Mat3, Rat3};
use crate::error::{Error, Result};

/// `x ↦ Rx + t` with `R` orthogonal; `det R = −1` for mirrored matches.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RigidMotion {
    pub r: Mat3,
    pub t: Rat3,
}

impl RigidMotion {
    pub fn apply(&self, v: &Rat3) -> Rat3 {
        &self.r.apply(v) + &self.t
    }

    pub fn is_reflection(&self) -> bool {
        self.r.det().is_negative()
    }
}

/// Householder reflection `x ↦ x − 2(x·w / w·w)w`; `None` for `w = 0`.
pub fn householder(w: &Rat3) -> Option<Mat3> {
    if w.is_zero() {
        return None;
    }
    let k = BigRat::from(2) / w.norm_sq();
    let c = w.coords();
    let mut m = Mat3::identity();
    for r in 0..3 {
        for s in 0..3 {
            m.0[r][s] -= &(&(c[r] * c[s]) * &k);
        }
    }
    Some(m)
}

/// A rational rotation taking `u` to `v`, for `|u|² = |v|² ≠ 0`: a
/// reflection swapping them followed by one that fixes `v`.
pub fn rotation_aligning(u: &Rat3, v: &Rat3) -> Option<Mat3> {
    if u.is_zero() || u.norm_sq() != v.norm_sq() {
        return None;
    }
    if u == v {
        return Some(Mat3::identity());
    }
    let swap = householder(&(u - v))?;
    let fix = [
        Rat3::from_ints(1, 0, 0),
        Rat3::from_ints(0, 1, 0),
        Rat3::from_ints(0, 0, 1),
    ]
    .iter()
    .map(|e| v.cross(e))
    .find(|w| !w.is_zero())
    .and_then(|w| householder(&w))?;
    let r = fix.mul(&swap);
    debug_assert!(r.is_rotation() && r.apply(u) == *v);
    Some(r)
}

/// Orthonormal-free frame `(v2 − v1, v3 − v1, (v2 − v1) × (v3 − v1))` as
/// matrix columns.
fn frame(t: [&Rat3; 3]) -> Mat3 {
    let e1 = t[1] - t[0];
    let e2 = t[2] - t[0];
    let e3 = e1.cross(&e2);
    Mat3::from_cols(&e1, &e2, &e3)
}

/// The rigid motion `x ↦ Rx + t` taking triple `a` onto triple `b` in
/// order.
pub fn recover_rigid(a: [&Rat3; 3], b: [&Rat3; 3]) -> Result<(Mat3, Rat3)> {
    let fa = frame(a);
    let inv = fa.inverse().ok_or(Error::DegenerateFrame)?;
    let r = frame(b).mul(&inv);
    if !r.is_rotation() {
        return Err(Error::NotOrthogonal);
    }
    let t = b[0] - &r.apply(a[0]);
    Ok((r, t))
}
