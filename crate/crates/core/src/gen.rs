//! Random instance generators with exactly representable planted
//! transforms.

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{BigRat, GaussianRat, Mat3, Rat3};
use crate::stream::{InstanceHeader, Label, MemoryStream, Point};

const POINT_ATTEMPTS: usize = 400;
const INSTANCE_ATTEMPTS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Congruent,
    NonCongruent,
    Degenerate,
    PlanarCounterexample,
}

impl std::str::FromStr for Kind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "congruent" => Ok(Kind::Congruent),
            "non-congruent" => Ok(Kind::NonCongruent),
            "degenerate" => Ok(Kind::Degenerate),
            "planar-counterexample" => Ok(Kind::PlanarCounterexample),
            _ => Err(Error::InvalidConfig(format!("unknown instance kind '{s}'"))),
        }
    }
}

/// Uniform element of `{±p/q : p, q ∈ [1, U]} ∪ {0}` (by numerator and
/// denominator, not by value).
pub fn random_u_rational(rng: &mut impl Rng, u: i64) -> BigRat {
    BigRat::new(rng.gen_range(-u..=u), rng.gen_range(1..=u))
}

pub fn random_point_2d(rng: &mut impl Rng, u: i64) -> GaussianRat {
    GaussianRat::new(random_u_rational(rng, u), random_u_rational(rng, u))
}

pub fn random_point_3d(rng: &mut impl Rng, u: i64) -> Rat3 {
    Rat3::new(
        random_u_rational(rng, u),
        random_u_rational(rng, u),
        random_u_rational(rng, u),
    )
}

/// `((m² − k²) + 2mk·i) / (m² + k²)`, a rational point on the unit circle.
pub fn pythagorean_unit(m: i64, k: i64) -> GaussianRat {
    let d = m * m + k * k;
    GaussianRat::new(BigRat::new(m * m - k * k, d), BigRat::new(2 * m * k, d))
}

/// Random rational unit: a Pythagorean unit with parameters up to `max`,
/// turned by a random power of `i`.
pub fn random_unit(rng: &mut impl Rng, max: i64) -> GaussianRat {
    let m = rng.gen_range(1..=max);
    let k = rng.gen_range(0..=max);
    let mut z = pythagorean_unit(m, k);
    for _ in 0..rng.gen_range(0..4) {
        z = z.mul_i();
    }
    z
}

/// `n` rational points on the circle of squared radius `r²` about 0, from
/// `((t² − 1) + 2t·i)/(t² + 1)·r` with random rational `t`; so every point
/// has squared modulus exactly `radius²`.
pub fn circle_points(
    rng: &mut impl Rng,
    n: usize,
    radius: &BigRat,
    t_max: i64,
) -> Vec<GaussianRat> {
    (0..n)
        .map(|_| {
            let t = BigRat::new(rng.gen_range(-t_max..=t_max), rng.gen_range(1..=t_max));
            let t2 = &t * &t;
            let den = (&t2 + &BigRat::one()).recip().unwrap();
            let z = GaussianRat::new((&t2 - &BigRat::one()) * &den, &t * &BigRat::from(2) * &den);
            let mut z = z.scale(radius);
            for _ in 0..rng.gen_range(0..4) {
                z = z.mul_i();
            }
            z
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Instance2d {
    pub a: Vec<GaussianRat>,
    pub b: Vec<GaussianRat>,
    pub u: i64,
    /// Planted `(ρ, t)` with `B = ρA + t`, when one was planted.
    pub truth: Option<(GaussianRat, GaussianRat)>,
}

impl Instance2d {
    /// Stream with the labels interleaved in a random order.
    pub fn to_stream(&self, rng: &mut impl Rng) -> Result<MemoryStream> {
        let mut recs: Vec<(Label, Point)> = self
            .a
            .iter()
            .map(|z| (Label::A, Point::Plane(z.clone())))
            .chain(self.b.iter().map(|z| (Label::B, Point::Plane(z.clone()))))
            .collect();
        recs.shuffle(rng);
        let header = InstanceHeader {
            dim: 2,
            u: BigInt::from(self.u),
            n_a: self.a.len(),
            n_b: Some(self.b.len()),
        };
        MemoryStream::new(header, recs)
    }
}

#[derive(Clone, Debug)]
pub struct Instance3d {
    pub a: Vec<Rat3>,
    pub b: Vec<Rat3>,
    pub u: i64,
    pub truth: Option<(Mat3, Rat3)>,
}

impl Instance3d {
    pub fn to_stream(&self, rng: &mut impl Rng) -> Result<MemoryStream> {
        let mut recs: Vec<(Label, Point)> = self
            .a
            .iter()
            .map(|v| (Label::A, Point::Space(v.clone())))
            .chain(self.b.iter().map(|v| (Label::B, Point::Space(v.clone()))))
            .collect();
        recs.shuffle(rng);
        let header = InstanceHeader {
            dim: 3,
            u: BigInt::from(self.u),
            n_a: self.a.len(),
            n_b: Some(self.b.len()),
        };
        MemoryStream::new(header, recs)
    }
}

fn units_2d(u: i64) -> Vec<GaussianRat> {
    let mut out = vec![
        GaussianRat::from_ints(1, 0),
        GaussianRat::from_ints(0, 1),
        GaussianRat::from_ints(-1, 0),
        GaussianRat::from_ints(0, -1),
    ];
    // Units whose denominator fits the precision bound.
    for m in 1..=4i64 {
        for k in 1..m {
            if m * m + k * k <= u.max(1) * 2 {
                let z = pythagorean_unit(m, k);
                let mut w = z.clone();
                for _ in 0..4 {
                    out.push(w.clone());
                    w = w.mul_i();
                }
            }
        }
    }
    out
}

/// Planted congruent pair: `B = ρA + t` with coordinates kept in `Q_U` by
/// per-point rejection.
pub fn congruent_2d(rng: &mut impl Rng, n: usize, u: i64) -> Result<Instance2d> {
    let u_big = BigInt::from(u);
    let units = units_2d(u);
    for _ in 0..INSTANCE_ATTEMPTS {
        let rho = units.choose(rng).unwrap().clone();
        let t = if rng.gen_bool(0.5) {
            GaussianRat::from_ints(rng.gen_range(-1..=1), rng.gen_range(-1..=1))
        } else {
            random_point_2d(rng, u)
        };
        let mut a = Vec::with_capacity(n);
        let mut ok = true;
        while a.len() < n {
            if !a.is_empty() && rng.gen_bool(0.1) {
                let dup = a.choose(rng).cloned().unwrap();
                a.push(dup);
                continue;
            }
            let found = (0..POINT_ATTEMPTS).find_map(|_| {
                let z = random_point_2d(rng, u);
                (&(&rho * &z) + &t).is_u_rational(&u_big).then_some(z)
            });
            match found {
                Some(z) => a.push(z),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let mut b: Vec<GaussianRat> = a.iter().map(|z| &(&rho * z) + &t).collect();
        b.shuffle(rng);
        return Ok(Instance2d {
            a,
            b,
            u,
            truth: Some((rho, t)),
        });
    }
    Err(Error::GenerationExhausted(INSTANCE_ATTEMPTS))
}

/// A pair that is usually not congruent: either independent random sets or
/// a congruent pair with one point of `B` moved.
pub fn non_congruent_2d(rng: &mut impl Rng, n: usize, u: i64) -> Result<Instance2d> {
    if rng.gen_bool(0.5) || u == 1 && n == 1 {
        let a = (0..n).map(|_| random_point_2d(rng, u)).collect();
        let b = (0..n).map(|_| random_point_2d(rng, u)).collect();
        return Ok(Instance2d {
            a,
            b,
            u,
            truth: None,
        });
    }
    let mut inst = congruent_2d(rng, n, u)?;
    let i = rng.gen_range(0..n);
    inst.b[i] = random_point_2d(rng, u);
    inst.truth = None;
    Ok(inst)
}

/// `n` copies of one point per set.
pub fn degenerate_2d(rng: &mut impl Rng, n: usize, u: i64) -> Instance2d {
    let za = random_point_2d(rng, u);
    let zb = random_point_2d(rng, u);
    let t = &zb - &za;
    Instance2d {
        a: vec![za; n],
        b: vec![zb; n],
        u,
        truth: Some((GaussianRat::one(), t)),
    }
}

/// Rotation matrix of the rational quaternion `(a, b, c, d)`, divided by
/// its squared norm so the result is exactly orthogonal.
pub fn quaternion_rotation(a: i64, b: i64, c: i64, d: i64) -> Option<Mat3> {
    let n = a * a + b * b + c * c + d * d;
    if n == 0 {
        return None;
    }
    let e = |v: i64| BigRat::new(v, n);
    Some(Mat3([
        [
            e(a * a + b * b - c * c - d * d),
            e(2 * (b * c - a * d)),
            e(2 * (b * d + a * c)),
        ],
        [
            e(2 * (b * c + a * d)),
            e(a * a - b * b + c * c - d * d),
            e(2 * (c * d - a * b)),
        ],
        [
            e(2 * (b * d - a * c)),
            e(2 * (c * d + a * b)),
            e(a * a - b * b - c * c + d * d),
        ],
    ]))
}

fn rotation_pool() -> Vec<Mat3> {
    let mut out = Vec::new();
    for a in -2i64..=2 {
        for b in -2i64..=2 {
            for c in -2i64..=2 {
                for d in -2i64..=2 {
                    if let Some(r) = quaternion_rotation(a, b, c, d) {
                        if !out.contains(&r) {
                            out.push(r);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Planted congruent 3D pair `B = RA + t`.
pub fn congruent_3d(rng: &mut impl Rng, n: usize, u: i64) -> Result<Instance3d> {
    let u_big = BigInt::from(u);
    let pool = rotation_pool();
    for _ in 0..INSTANCE_ATTEMPTS {
        let r = pool.choose(rng).unwrap().clone();
        let t = Rat3::from_ints(
            rng.gen_range(-1..=1),
            rng.gen_range(-1..=1),
            rng.gen_range(-1..=1),
        );
        let mut a: Vec<Rat3> = Vec::with_capacity(n);
        let mut ok = true;
        while a.len() < n {
            if !a.is_empty() && rng.gen_bool(0.05) {
                let dup = a.choose(rng).cloned().unwrap();
                a.push(dup);
                continue;
            }
            let found = (0..POINT_ATTEMPTS).find_map(|_| {
                let v = random_point_3d(rng, u);
                (&r.apply(&v) + &t).is_u_rational(&u_big).then_some(v)
            });
            match found {
                Some(v) => a.push(v),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let mut b: Vec<Rat3> = a.iter().map(|v| &r.apply(v) + &t).collect();
        b.shuffle(rng);
        return Ok(Instance3d {
            a,
            b,
            u,
            truth: Some((r, t)),
        });
    }
    Err(Error::GenerationExhausted(INSTANCE_ATTEMPTS))
}

/// Independent random sets, or a planted pair with one point moved.
pub fn non_congruent_3d(rng: &mut impl Rng, n: usize, u: i64) -> Result<Instance3d> {
    if rng.gen_bool(0.5) {
        let a = (0..n).map(|_| random_point_3d(rng, u)).collect();
        let b = (0..n).map(|_| random_point_3d(rng, u)).collect();
        return Ok(Instance3d {
            a,
            b,
            u,
            truth: None,
        });
    }
    let mut inst = congruent_3d(rng, n, u)?;
    let i = rng.gen_range(0..n);
    inst.b[i] = random_point_3d(rng, u);
    inst.truth = None;
    Ok(inst)
}

pub fn degenerate_3d(rng: &mut impl Rng, n: usize, u: i64) -> Instance3d {
    let va = random_point_3d(rng, u);
    let vb = random_point_3d(rng, u);
    let t = &vb - &va;
    Instance3d {
        a: vec![va; n],
        b: vec![vb; n],
        u,
        truth: Some((Mat3::identity(), t)),
    }
}

/// Five coplanar points with `‖u‖² = 98` and zero sum whose planar
/// moments all vanish, so planar moment arguments cannot certify them.
pub fn planar_counterexample() -> Vec<Rat3> {
    [(7, 0, -7), (0, -7, 7), (5, -8, 3), (-7, 7, 0), (-5, 8, -3)]
        .iter()
        .map(|&(x, y, z)| Rat3::from_ints(x, y, z))
        .collect()
}

/// The counterexample set paired with a copy rotated by a signed
/// permutation; its coordinates need `U ≥ 8`.
pub fn planar_counterexample_pair(rng: &mut impl Rng) -> Instance3d {
    let a = planar_counterexample();
    let r = quaternion_rotation(1, 1, 0, 0).unwrap();
    let mut b: Vec<Rat3> = a.iter().map(|v| r.apply(v)).collect();
    b.shuffle(rng);
    Instance3d {
        a,
        b,
        u: 8,
        truth: Some((r, Rat3::zero())),
    }
}

/// Generates a 2D instance of the requested kind.
pub fn generate_2d(rng: &mut impl Rng, kind: Kind, n: usize, u: i64) -> Result<Instance2d> {
    if n == 0 || u < 1 {
        return Err(Error::InvalidConfig("need n ≥ 1 and U ≥ 1".into()));
    }
    match kind {
        Kind::Congruent => congruent_2d(rng, n, u),
        Kind::NonCongruent => non_congruent_2d(rng, n, u),
        Kind::Degenerate => Ok(degenerate_2d(rng, n, u)),
        Kind::PlanarCounterexample => Err(Error::InvalidConfig(
            "the planar counterexample is a 3D instance".into(),
        )),
    }
}

/// Generates a 3D instance of the requested kind.
pub fn generate_3d(rng: &mut impl Rng, kind: Kind, n: usize, u: i64) -> Result<Instance3d> {
    if n == 0 || u < 1 {
        return Err(Error::InvalidConfig("need n ≥ 1 and U ≥ 1".into()));
    }
    match kind {
        Kind::Congruent => congruent_3d(rng, n, u),
        Kind::NonCongruent => non_congruent_3d(rng, n, u),
        Kind::Degenerate => Ok(degenerate_3d(rng, n, u)),
        Kind::PlanarCounterexample => Ok(planar_counterexample_pair(rng)),
    }
}

/// Converts a precision bound to `i64` when it fits.
pub fn small_u(u: &BigInt) -> Option<i64> {
    u.to_i64()
}
