use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_bigint::BigInt;
use serde::Serialize;

use super::BigRat;

/// Exact point or vector in Q³.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Rat3 {
    pub x: BigRat,
    pub y: BigRat,
    pub z: BigRat,
}

impl Rat3 {
    pub fn new(x: BigRat, y: BigRat, z: BigRat) -> Self {
        Rat3 { x, y, z }
    }

    pub fn from_ints(x: i64, y: i64, z: i64) -> Self {
        Rat3::new(x.into(), y.into(), z.into())
    }

    pub fn zero() -> Self {
        Rat3::from_ints(0, 0, 0)
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() && self.y.is_zero() && self.z.is_zero()
    }

    pub fn coords(&self) -> [&BigRat; 3] {
        [&self.x, &self.y, &self.z]
    }

    pub fn from_array(c: [BigRat; 3]) -> Self {
        let [x, y, z] = c;
        Rat3 { x, y, z }
    }

    pub fn dot(&self, o: &Rat3) -> BigRat {
        &self.x * &o.x + &self.y * &o.y + &self.z * &o.z
    }

    pub fn cross(&self, o: &Rat3) -> Rat3 {
        Rat3::new(
            &self.y * &o.z - &self.z * &o.y,
            &self.z * &o.x - &self.x * &o.z,
            &self.x * &o.y - &self.y * &o.x,
        )
    }

    pub fn scale(&self, k: &BigRat) -> Rat3 {
        Rat3::new(&self.x * k, &self.y * k, &self.z * k)
    }

    pub fn norm_sq(&self) -> BigRat {
        self.dot(self)
    }

    pub fn precision(&self) -> BigInt {
        self.x
            .precision()
            .max(self.y.precision())
            .max(self.z.precision())
    }

    pub fn is_u_rational(&self, u: &BigInt) -> bool {
        self.coords().iter().all(|c| c.is_u_rational(u))
    }

    pub fn bits(&self) -> u64 {
        self.coords().iter().map(|c| c.bits()).sum()
    }
}

/// Sign of the triple product `a · (b × c)`.
pub fn orient3(a: &Rat3, b: &Rat3, c: &Rat3) -> i32 {
    a.dot(&b.cross(c)).signum()
}

impl fmt::Display for Rat3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.x, self.y, self.z)
    }
}

impl fmt::Debug for Rat3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl Add for &Rat3 {
    type Output = Rat3;
    fn add(self, o: &Rat3) -> Rat3 {
        Rat3::new(&self.x + &o.x, &self.y + &o.y, &self.z + &o.z)
    }
}

impl Sub for &Rat3 {
    type Output = Rat3;
    fn sub(self, o: &Rat3) -> Rat3 {
        Rat3::new(&self.x - &o.x, &self.y - &o.y, &self.z - &o.z)
    }
}

impl Neg for &Rat3 {
    type Output = Rat3;
    fn neg(self) -> Rat3 {
        Rat3::new(-&self.x, -&self.y, -&self.z)
    }
}

/// Points accepted by [`dist_sq`].
pub trait Point {
    fn dist_sq(&self, other: &Self) -> BigRat;
}

impl Point for Rat3 {
    fn dist_sq(&self, other: &Self) -> BigRat {
        (self - other).norm_sq()
    }
}

impl Point for super::GaussianRat {
    fn dist_sq(&self, other: &Self) -> BigRat {
        (self - other).norm_sq()
    }
}

/// Exact squared Euclidean distance.
pub fn dist_sq<P: Point>(u: &P, v: &P) -> BigRat {
    u.dist_sq(v)
}

/// Exact 3×3 rational matrix, row-major.
#[derive(Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Mat3(pub [[BigRat; 3]; 3]);

impl Mat3 {
    pub fn identity() -> Self {
        let o = BigRat::one;
        let z = BigRat::zero;
        Mat3([[o(), z(), z()], [z(), o(), z()], [z(), z(), o()]])
    }

    pub fn from_cols(c0: &Rat3, c1: &Rat3, c2: &Rat3) -> Self {
        let cols = [c0, c1, c2];
        Mat3(std::array::from_fn(|r| {
            std::array::from_fn(|c| cols[c].coords()[r].clone())
        }))
    }

    pub fn apply(&self, v: &Rat3) -> Rat3 {
        let row =
            |r: usize| &(&self.0[r][0] * &v.x + &self.0[r][1] * &v.y) + &(&self.0[r][2] * &v.z);
        Rat3::new(row(0), row(1), row(2))
    }

    pub fn mul(&self, o: &Mat3) -> Mat3 {
        Mat3(std::array::from_fn(|r| {
            std::array::from_fn(|c| {
                (0..3)
                    .map(|k| &self.0[r][k] * &o.0[k][c])
                    .fold(BigRat::zero(), |a, b| a + b)
            })
        }))
    }

    pub fn transpose(&self) -> Mat3 {
        Mat3(std::array::from_fn(|r| {
            std::array::from_fn(|c| self.0[c][r].clone())
        }))
    }

    pub fn det(&self) -> BigRat {
        let m = &self.0;
        let minor =
            |a: usize, b: usize, c: usize, d: usize| &m[1][a] * &m[2][b] - &m[1][c] * &m[2][d];
        &m[0][0] * &minor(1, 2, 2, 1) - &m[0][1] * &minor(0, 2, 2, 0)
            + &m[0][2] * &minor(0, 1, 1, 0)
    }

    /// Inverse via the adjugate; `None` when singular.
    pub fn inverse(&self) -> Option<Mat3> {
        let d = self.det();
        let inv_d = d.recip()?;
        let m = &self.0;
        let cof = |r: usize, c: usize| {
            let rs: Vec<usize> = (0..3).filter(|&i| i != r).collect();
            let cs: Vec<usize> = (0..3).filter(|&i| i != c).collect();
            let v = &m[rs[0]][cs[0]] * &m[rs[1]][cs[1]] - &m[rs[0]][cs[1]] * &m[rs[1]][cs[0]];
            if (r + c).is_multiple_of(2) {
                v
            } else {
                -v
            }
        };
        Some(Mat3(std::array::from_fn(|r| {
            std::array::from_fn(|c| cof(c, r) * &inv_d)
        })))
    }

    pub fn is_identity(&self) -> bool {
        *self == Mat3::identity()
    }

    /// `RᵀR = I` and `det R = 1`.
    pub fn is_rotation(&self) -> bool {
        self.transpose().mul(self).is_identity() && self.det().is_one()
    }

    pub fn precision(&self) -> BigInt {
        self.0
            .iter()
            .flatten()
            .map(BigRat::precision)
            .max()
            .unwrap_or_else(|| BigInt::from(1))
    }
}

impl fmt::Debug for Mat3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances() {
        assert_eq!(
            dist_sq(&Rat3::zero(), &Rat3::from_ints(1, 1, 1)),
            BigRat::from(3)
        );
    }

    #[test]
    fn matrix_inverse_round_trip() {
        let m = Mat3([
            [2.into(), 1.into(), 0.into()],
            [0.into(), 1.into(), 3.into()],
            [1.into(), 0.into(), 1.into()],
        ]);
        let inv = m.inverse().unwrap();
        assert!(m.mul(&inv).is_identity());
        assert_eq!(m.det(), BigRat::from(5));
    }

    #[test]
    fn quarter_turn_is_rotation() {
        let r = Mat3([
            [0.into(), (-1).into(), 0.into()],
            [1.into(), 0.into(), 0.into()],
            [0.into(), 0.into(), 1.into()],
        ]);
        assert!(r.is_rotation());
        assert_eq!(r.apply(&Rat3::from_ints(1, 0, 0)), Rat3::from_ints(0, 1, 0));
        let flip = Mat3([
            [1.into(), 0.into(), 0.into()],
            [0.into(), 1.into(), 0.into()],
            [0.into(), 0.into(), (-1).into()],
        ]);
        assert!(!flip.is_rotation());
    }
}
