//! Complex moments, exact and reduced mod p.

use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{BigRat, GaussianRat};
use crate::field::{FpElem, FpPrime, FpiElem};
use crate::stream::Label;

/// `M_{p,q}(S) = Σ z^p · conj(z)^q`.
pub fn complex_moment(s: &[GaussianRat], p: u64, q: u64) -> GaussianRat {
    s.iter().map(|z| &z.pow(p) * &z.conj().pow(q)).sum()
}

/// `M_k(S) = M_{k,0}(S)`.
pub fn moment(s: &[GaussianRat], k: u64) -> GaussianRat {
    complex_moment(s, k, 0)
}

/// The multiset `{u_j · u_k : j < k}`.
pub fn cross_set(t: &[GaussianRat]) -> Vec<GaussianRat> {
    let mut out = Vec::with_capacity(t.len() * t.len().saturating_sub(1) / 2);
    for (j, u) in t.iter().enumerate() {
        for v in &t[j + 1..] {
            out.push(u * v);
        }
    }
    out
}

/// Checks `M_p(T_×) = ½(M_p(T)² − M_{2p}(T))` exactly.
pub fn cross_set_identity_holds(t: &[GaussianRat], p: u64) -> bool {
    let lhs = moment(&cross_set(t), p);
    let mp = moment(t, p);
    let rhs = (&mp * &mp - moment(t, 2 * p)).scale(&BigRat::new(1, 2));
    lhs == rhs
}

/// 2-adic valuation; `v2(0)` is defined as 0.
pub fn v2(n: usize) -> u32 {
    if n == 0 {
        0
    } else {
        n.trailing_zeros()
    }
}

/// `⌊log₂ n⌋`, with 0 for `n ≤ 1`.
pub fn floor_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - 1 - n.leading_zeros()
    }
}

/// Smallest `j` with `M_{2^j}(S) ≠ 0` for a nonempty multiset of points of
/// equal modulus. A witness always exists with `j ≤ v₂(|S|)`; `None` means
/// that guarantee was violated. Points of differing modulus are rejected.
pub fn nonzero_moment_witness(s: &[GaussianRat]) -> Result<Option<u32>> {
    let Some(first) = s.first() else {
        return Err(Error::DomainViolation("empty multiset".into()));
    };
    let r2 = first.norm_sq();
    if s.iter().any(|z| z.norm_sq() != r2) {
        return Err(Error::DomainViolation("points differ in modulus".into()));
    }
    // Powers are carried forward by squaring, so each step costs one
    // multiplication per point.
    let mut powers: Vec<GaussianRat> = s.to_vec();
    for j in 0..=floor_log2(s.len()) {
        let m: GaussianRat = powers.iter().cloned().sum();
        if !m.is_zero() {
            return Ok(Some(j));
        }
        powers = powers.iter().map(|z| z * z).collect();
    }
    Ok(None)
}

/// Exact centroid.
pub fn centroid(s: &[GaussianRat]) -> GaussianRat {
    if s.is_empty() {
        return GaussianRat::zero();
    }
    let sum: GaussianRat = s.iter().cloned().sum();
    sum.scale(&BigRat::new(1, s.len() as i64))
}

/// Exact recentred power-of-two moments over one reference circle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactMomentSet {
    pub centroid: GaussianRat,
    pub r_sq: BigRat,
    /// `M'_{2^j}(S)` for `j = 0..=J`.
    pub moments: Vec<GaussianRat>,
}

impl ExactMomentSet {
    /// Moments of `z − c_S` over the points with `|z − c_S|² = r_sq`.
    pub fn compute(s: &[GaussianRat], r_sq: &BigRat, j_max: u32) -> Self {
        let c = centroid(s);
        let mut moments = vec![GaussianRat::zero(); j_max as usize + 1];
        for z in s {
            let d = z - &c;
            if d.norm_sq() != *r_sq {
                continue;
            }
            let mut x = d;
            for m in moments.iter_mut() {
                *m = &*m + &x;
                x = &x * &x;
            }
        }
        ExactMomentSet {
            centroid: c,
            r_sq: r_sq.clone(),
            moments,
        }
    }

    /// Smallest `j` with a nonzero moment.
    pub fn first_nonzero(&self) -> Option<u32> {
        self.moments
            .iter()
            .position(|m| !m.is_zero())
            .map(|j| j as u32)
    }
}

/// First-pass state: per-label sums of φ_p(z).
#[derive(Clone, Debug)]
pub struct CentroidSketch {
    sums: [FpiElem; 2],
    counts: [usize; 2],
}

impl Default for CentroidSketch {
    fn default() -> Self {
        CentroidSketch {
            sums: [FpiElem::zero(), FpiElem::zero()],
            counts: [0, 0],
        }
    }
}

impl CentroidSketch {
    pub fn update(&mut self, p: &FpPrime, label: Label, z: &GaussianRat) -> Result<()> {
        let i = label.index();
        self.sums[i] = p.fpi_add(&self.sums[i], &p.phi(z)?);
        self.counts[i] += 1;
        Ok(())
    }

    /// `ĉ_S = φ_p(n⁻¹) · Σ φ_p(z)`; a label with no points gets 0.
    pub fn finalize(&self, p: &FpPrime) -> Result<[FpiElem; 2]> {
        let fin = |i: usize| -> Result<FpiElem> {
            if self.counts[i] == 0 {
                return Ok(FpiElem::zero());
            }
            let inv = p
                .inv(&p.from_u64(self.counts[i] as u64))
                .ok_or(Error::UndefinedUnderPhi)?;
            Ok(p.fpi_scale(&self.sums[i], &inv))
        };
        Ok([fin(0)?, fin(1)?])
    }

    pub fn live_bits(&self, p: &FpPrime) -> u64 {
        4 * p.bits() + 2 * usize::BITS as u64
    }

    pub fn merge(&mut self, p: &FpPrime, other: &CentroidSketch) {
        for i in 0..2 {
            self.sums[i] = p.fpi_add(&self.sums[i], &other.sums[i]);
            self.counts[i] += other.counts[i];
        }
    }
}

/// Second-pass state: reference radius and per-label power-of-two moments
/// of `φ_p(z) − ĉ_S` over the points whose reduced squared distance to the
/// centroid equals the radius.
#[derive(Clone, Debug, Serialize)]
pub struct MomentSketch {
    pub j_max: u32,
    pub c_hat: [FpiElem; 2],
    #[serde(serialize_with = "crate::ser::opt_display")]
    pub r_hat: Option<FpElem>,
    /// Stream position of the datum that fixed the radius.
    pub z_star: Option<usize>,
    pub moments: [Vec<FpiElem>; 2],
}

impl MomentSketch {
    /// A sketch whose radius is fixed by the first record with a nonzero
    /// reduced distance.
    pub fn new(c_hat: [FpiElem; 2], j_max: u32) -> Self {
        let zeros = vec![FpiElem::zero(); j_max as usize + 1];
        MomentSketch {
            j_max,
            c_hat,
            r_hat: None,
            z_star: None,
            moments: [zeros.clone(), zeros],
        }
    }

    /// A sketch with a radius chosen in advance.
    pub fn with_radius(c_hat: [FpiElem; 2], r_hat: FpElem, j_max: u32) -> Self {
        let mut s = MomentSketch::new(c_hat, j_max);
        s.r_hat = Some(r_hat);
        s
    }

    /// `d̂_z = φ_p(|z − c_S|²)`, computed as the norm of `φ_p(z) − ĉ_S`.
    pub fn reduced_distance(&self, p: &FpPrime, label: Label, z: &GaussianRat) -> Result<FpElem> {
        let x = p.fpi_sub(&p.phi(z)?, &self.c_hat[label.index()]);
        Ok(p.fpi_norm(&x))
    }

    pub fn update(
        &mut self,
        p: &FpPrime,
        label: Label,
        z: &GaussianRat,
        position: usize,
    ) -> Result<()> {
        let i = label.index();
        let x = p.fpi_sub(&p.phi(z)?, &self.c_hat[i]);
        let d = p.fpi_norm(&x);
        let r = match &self.r_hat {
            Some(r) => r,
            None => {
                if d.is_zero() {
                    return Ok(());
                }
                self.z_star = Some(position);
                self.r_hat.insert(d.clone())
            }
        };
        if d != *r {
            return Ok(());
        }
        let mut x = x;
        for m in self.moments[i].iter_mut() {
            *m = p.fpi_add(m, &x);
            x = p.fpi_sqr(&x);
        }
        Ok(())
    }

    /// True when no record had a nonzero reduced distance.
    pub fn is_degenerate(&self) -> bool {
        self.r_hat.is_none()
    }

    /// Fixed-width size: `r̂`, two centroids and `2(J+1)` moments, each
    /// F_p coordinate counted at `bitlen(p)`.
    pub fn live_bits(&self, p: &FpPrime) -> u64 {
        let elems = 1 + 4 + 4 * (self.j_max as u64 + 1);
        elems * p.bits()
    }

    /// Merges a sketch computed on a later shard of the same stream. Both
    /// must agree on the radius whenever both have one.
    pub fn merge(&mut self, p: &FpPrime, other: &MomentSketch) -> Result<()> {
        if self.j_max != other.j_max || self.c_hat != other.c_hat {
            return Err(Error::InvalidConfig("sketch parameters differ".into()));
        }
        match (&self.r_hat, &other.r_hat) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::InvalidConfig("sketch radii differ".into()))
            }
            (None, Some(b)) => {
                self.r_hat = Some(b.clone());
                self.z_star = other.z_star;
            }
            (Some(_), Some(_)) => {
                self.z_star = match (self.z_star, other.z_star) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                };
            }
            _ => {}
        }
        for i in 0..2 {
            for (m, o) in self.moments[i].iter_mut().zip(&other.moments[i]) {
                *m = p.fpi_add(m, o);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::circle_points;
    use num_bigint::BigUint;
    use rand::{Rng, SeedableRng};

    fn g(a: i64, b: i64) -> GaussianRat {
        GaussianRat::from_ints(a, b)
    }

    fn units() -> Vec<GaussianRat> {
        vec![g(1, 0), g(0, 1), g(-1, 0), g(0, -1)]
    }

    fn rand_set(rng: &mut impl Rng, n: usize) -> Vec<GaussianRat> {
        (0..n)
            .map(|_| {
                GaussianRat::new(
                    BigRat::new(rng.gen_range(-9i64..=9), rng.gen_range(1i64..=9)),
                    BigRat::new(rng.gen_range(-9i64..=9), rng.gen_range(1i64..=9)),
                )
            })
            .collect()
    }

    #[test]
    fn moment_examples() {
        assert!(complex_moment(&units(), 1, 0).is_zero());
        assert_eq!(complex_moment(&units(), 4, 0), g(4, 0));
        let s = vec![g(1, 2), g(-3, 1)];
        let m11 = complex_moment(&s, 1, 1);
        assert!(m11.im.is_zero());
        assert_eq!(m11.re, BigRat::from(15));
    }

    #[test]
    fn cross_set_examples() {
        let t = vec![g(1, 0), g(0, 1)];
        assert_eq!(cross_set(&t), vec![g(0, 1)]);
        assert!(cross_set_identity_holds(&t, 1));
        assert_eq!(cross_set(&[g(1, 0), g(1, 0)]), vec![g(1, 0)]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let t = rand_set(&mut rng, 5);
        for p in [1, 2, 4] {
            assert!(cross_set_identity_holds(&t, p));
        }
    }

    #[test]
    fn witness_examples() {
        assert_eq!(
            nonzero_moment_witness(&[g(1, 0), g(0, 1), g(-1, 0)]).unwrap(),
            Some(0)
        );
        assert_eq!(moment(&[g(1, 0), g(0, 1), g(-1, 0)], 1), g(0, 1));
        assert_eq!(nonzero_moment_witness(&units()).unwrap(), Some(2));
        let z = g(3, -2);
        assert_eq!(
            nonzero_moment_witness(&[z.clone(), z.clone()]).unwrap(),
            Some(0)
        );
        assert!(nonzero_moment_witness(&[g(1, 0), g(2, 0)]).is_err());
        assert!(nonzero_moment_witness(&[]).is_err());
    }

    #[test]
    fn rotation_covariance_additivity_conjugate_symmetry() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let rho = GaussianRat::new(BigRat::new(5, 13), BigRat::new(-12, 13));
        for _ in 0..20 {
            let s = rand_set(&mut rng, 6);
            let t = rand_set(&mut rng, 4);
            let rs: Vec<GaussianRat> = s.iter().map(|z| &rho * z).collect();
            for k in 0..5 {
                assert_eq!(moment(&rs, k), &rho.pow(k) * &moment(&s, k));
            }
            let st: Vec<GaussianRat> = s.iter().chain(&t).cloned().collect();
            assert_eq!(
                complex_moment(&st, 2, 1),
                &complex_moment(&s, 2, 1) + &complex_moment(&t, 2, 1)
            );
            assert_eq!(complex_moment(&s, 3, 1), complex_moment(&s, 1, 3).conj());
        }
    }

    #[test]
    fn witness_on_circles() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let n = rng.gen_range(1..=24);
            let radius = BigRat::new(rng.gen_range(1i64..5), rng.gen_range(1i64..5));
            let s = circle_points(&mut rng, n, &radius, 6);
            let j = nonzero_moment_witness(&s).unwrap().expect("witness");
            assert!(j <= v2(s.len()));
        }
    }

    #[test]
    fn sketch_matches_exact_moments_under_good_prime() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let p = FpPrime::sample(&(BigUint::from(1u32) << 120u32), 16, &mut rng).unwrap();
        for _ in 0..20 {
            let n = rng.gen_range(2..10);
            let a = rand_set(&mut rng, n);
            let b = rand_set(&mut rng, n);
            let mut cs = CentroidSketch::default();
            for z in &a {
                cs.update(&p, Label::A, z).unwrap();
            }
            for z in &b {
                cs.update(&p, Label::B, z).unwrap();
            }
            let c_hat = cs.finalize(&p).unwrap();
            assert_eq!(c_hat[0], p.phi(&centroid(&a)).unwrap());
            let j_max = floor_log2(n);
            let mut ms = MomentSketch::new(c_hat, j_max);
            for (pos, (label, z)) in a
                .iter()
                .map(|z| (Label::A, z))
                .chain(b.iter().map(|z| (Label::B, z)))
                .enumerate()
            {
                ms.update(&p, label, z, pos).unwrap();
            }
            // Radius: first datum (in stream order) not at its centroid.
            let ca = centroid(&a);
            let cb = centroid(&b);
            let first = a
                .iter()
                .map(|z| (z - &ca).norm_sq())
                .chain(b.iter().map(|z| (z - &cb).norm_sq()))
                .find(|d| !d.is_zero());
            let Some(r2) = first else { continue };
            assert_eq!(ms.r_hat.as_ref(), Some(&p.phi_rat(&r2).unwrap()));
            for (label, set) in [(Label::A, &a), (Label::B, &b)] {
                let exact = ExactMomentSet::compute(set, &r2, j_max);
                for j in 0..=j_max as usize {
                    assert_eq!(
                        ms.moments[label.index()][j],
                        p.phi(&exact.moments[j]).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn degenerate_sketch_and_merge() {
        let p = FpPrime::new(BigUint::from(1_000_003u32), 4).unwrap();
        let z = GaussianRat::new(BigRat::new(1, 2), BigRat::new(1, 2));
        let c = p.phi(&z).unwrap();
        let mut ms = MomentSketch::new([c.clone(), c.clone()], 1);
        for pos in 0..4 {
            ms.update(&p, Label::A, &z, pos).unwrap();
        }
        assert!(ms.is_degenerate());

        // Sharded accumulation equals sequential accumulation.
        let pts = vec![g(1, 0), g(0, 1), g(-1, 0), g(0, -1), g(1, 0)];
        let c_hat = [p.phi(&centroid(&pts)).unwrap(), FpiElem::zero()];
        let r = p.phi_rat(&(&pts[0] - &centroid(&pts)).norm_sq()).unwrap();
        let mut whole = MomentSketch::with_radius(c_hat.clone(), r.clone(), 2);
        let mut left = MomentSketch::with_radius(c_hat.clone(), r.clone(), 2);
        let mut right = MomentSketch::with_radius(c_hat, r, 2);
        for (i, z) in pts.iter().enumerate() {
            whole.update(&p, Label::A, z, i).unwrap();
            if i < 2 {
                left.update(&p, Label::A, z, i).unwrap();
            } else {
                right.update(&p, Label::A, z, i).unwrap();
            }
        }
        left.merge(&p, &right).unwrap();
        assert_eq!(left.moments, whole.moments);
    }
}
