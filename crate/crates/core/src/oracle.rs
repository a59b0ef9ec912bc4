//! Exact reference answers: the real-register moment shortlist and
//! brute-force congruence search in 2D and 3D. No space limits apply here.

use std::collections::BTreeSet;

use crate::congiden2d::TransformCandidate;
use crate::exact::{
    dist_sq, pow2root_in_qi, recover_rigid, recover_rotation, rotation_aligning, GaussianRat, Mat3,
    Rat3, RigidMotion,
};
use crate::moments::{centroid, floor_log2, ExactMomentSet};

/// Outcome of the exact moment shortlist: up to four `(t, ρ)` pairs, one of
/// which is valid whenever the inputs are congruent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ShortlistResult {
    Candidates(Vec<(GaussianRat, GaussianRat)>),
    CertifiedNotCongruent,
}

/// Two-pass exact shortlist. The reference radius comes from the first
/// point, scanning `A` then `B`, that is not its set's centroid.
pub fn congslist_exact(a: &[GaussianRat], b: &[GaussianRat]) -> ShortlistResult {
    if a.len() != b.len() || a.is_empty() {
        return ShortlistResult::CertifiedNotCongruent;
    }
    let (c_a, c_b) = (centroid(a), centroid(b));
    let r_sq = a
        .iter()
        .map(|z| (z - &c_a).norm_sq())
        .chain(b.iter().map(|z| (z - &c_b).norm_sq()))
        .find(|d| !d.is_zero());
    let Some(r_sq) = r_sq else {
        return ShortlistResult::Candidates(vec![(&c_b - &c_a, GaussianRat::one())]);
    };
    let j_max = floor_log2(a.len());
    let m_a = ExactMomentSet::compute(a, &r_sq, j_max);
    let m_b = ExactMomentSet::compute(b, &r_sq, j_max);
    let Some(j) =
        (0..=j_max as usize).find(|&j| !m_a.moments[j].is_zero() || !m_b.moments[j].is_zero())
    else {
        return ShortlistResult::CertifiedNotCongruent;
    };
    let (ma, mb) = (&m_a.moments[j], &m_b.moments[j]);
    if ma.is_zero() || mb.is_zero() {
        return ShortlistResult::CertifiedNotCongruent;
    }
    let w = mb.div(ma).expect("nonzero");
    if !w.norm_sq().is_one() {
        return ShortlistResult::CertifiedNotCongruent;
    }
    let Some(rho) = pow2root_in_qi(&w, j as u32).into_iter().next() else {
        return ShortlistResult::CertifiedNotCongruent;
    };
    let irho = rho.mul_i();
    let orbit = [rho.clone(), -rho, irho.clone(), -irho];
    ShortlistResult::Candidates(
        orbit
            .into_iter()
            .map(|r| (&c_b - &(&r * &c_a), r))
            .collect(),
    )
}

fn sorted<T: Ord + Clone>(s: &[T]) -> Vec<T> {
    let mut v = s.to_vec();
    v.sort();
    v
}

fn distinct<T: Ord + Clone>(s: &[T]) -> Vec<T> {
    s.iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Exact multiset check of `B = cand(A)`.
pub fn maps_onto_2d(a: &[GaussianRat], b: &[GaussianRat], cand: &TransformCandidate) -> bool {
    a.len() == b.len() && sorted(&a.iter().map(|z| cand.apply(z)).collect::<Vec<_>>()) == sorted(b)
}

/// Exact multiset check of `B = m(A)`.
pub fn maps_onto_3d(a: &[Rat3], b: &[Rat3], m: &RigidMotion) -> bool {
    a.len() == b.len() && sorted(&a.iter().map(|v| m.apply(v)).collect::<Vec<_>>()) == sorted(b)
}

/// Every transform taking `A` onto `B`. Mirrored maps are included when
/// `allow_reflection` is set. When `A` is a single repeated point only the
/// translation with `ρ = 1` is reported.
pub fn all_transforms_2d(
    a: &[GaussianRat],
    b: &[GaussianRat],
    allow_reflection: bool,
) -> Vec<TransformCandidate> {
    if a.len() != b.len() || a.is_empty() {
        return Vec::new();
    }
    let db = distinct(b);
    let mut out = Vec::new();
    let orientations: &[bool] = if allow_reflection {
        &[false, true]
    } else {
        &[false]
    };
    for &reflected in orientations {
        let src: Vec<GaussianRat> = if reflected {
            a.iter().map(|z| z.conj()).collect()
        } else {
            a.to_vec()
        };
        let da = distinct(&src);
        if da.len() == 1 {
            if db.len() == 1 && !reflected {
                out.push(TransformCandidate {
                    rho: GaussianRat::one(),
                    t: &db[0] - &da[0],
                    reflected: false,
                });
            }
            continue;
        }
        let (a1, a2) = (&da[0], &da[1]);
        let target = dist_sq(a1, a2);
        for b1 in &db {
            for b2 in &db {
                if b1 == b2 || dist_sq(b1, b2) != target {
                    continue;
                }
                let Some((rho, t)) = recover_rotation(a1, a2, b1, b2) else {
                    continue;
                };
                // `rho`/`t` act on the (possibly conjugated) source.
                let cand = TransformCandidate { rho, t, reflected };
                if maps_onto_2d(a, b, &cand) && !out.contains(&cand) {
                    out.push(cand);
                }
            }
        }
    }
    out
}

/// Some transform taking `A` onto `B`, if one exists.
pub fn brute_force_2d(
    a: &[GaussianRat],
    b: &[GaussianRat],
    allow_reflection: bool,
) -> Option<TransformCandidate> {
    all_transforms_2d(a, b, allow_reflection).into_iter().next()
}

fn collinear(a: &Rat3, b: &Rat3, c: &Rat3) -> bool {
    (b - a).cross(&(c - a)).is_zero()
}

/// Some rigid motion taking `A` onto `B`, if one exists. Proper rotations
/// are tried first; with `allow_reflection`, mirrored maps as well.
pub fn brute_force_3d(a: &[Rat3], b: &[Rat3], allow_reflection: bool) -> Option<RigidMotion> {
    if a.len() != b.len() || a.is_empty() {
        return None;
    }
    let found = search_3d(a, b);
    if found.is_some() || !allow_reflection {
        return found;
    }
    // Mirror through the origin, solve, then fold the mirror into R.
    let neg: Vec<Rat3> = a.iter().map(|v| -v).collect();
    let m = search_3d(&neg, b)?;
    let mut r = m.r;
    for row in r.0.iter_mut() {
        for x in row.iter_mut() {
            *x = -&*x;
        }
    }
    let out = RigidMotion { r, t: m.t };
    debug_assert!(maps_onto_3d(a, b, &out));
    Some(out)
}

fn search_3d(a: &[Rat3], b: &[Rat3]) -> Option<RigidMotion> {
    let (da, db) = (distinct(a), distinct(b));
    if da.len() != db.len() {
        return None;
    }
    let check = |r: Mat3, t: Rat3| {
        let m = RigidMotion { r, t };
        maps_onto_3d(a, b, &m).then_some(m)
    };
    if da.len() == 1 {
        return check(Mat3::identity(), &db[0] - &da[0]);
    }
    let a1 = &da[0];
    let a2 = &da[1];
    let a3 = da.iter().find(|v| !collinear(a1, a2, v));
    let d12 = dist_sq(a1, a2);
    match a3 {
        None => {
            for b1 in &db {
                for b2 in &db {
                    if b1 == b2 || dist_sq(b1, b2) != d12 {
                        continue;
                    }
                    let Some(r) = rotation_aligning(&(a2 - a1), &(b2 - b1)) else {
                        continue;
                    };
                    let t = b1 - &r.apply(a1);
                    if let Some(m) = check(r, t) {
                        return Some(m);
                    }
                }
            }
            None
        }
        Some(a3) => {
            let (d13, d23) = (dist_sq(a1, a3), dist_sq(a2, a3));
            for b1 in &db {
                for b2 in &db {
                    if b1 == b2 || dist_sq(b1, b2) != d12 {
                        continue;
                    }
                    for b3 in &db {
                        if dist_sq(b1, b3) != d13 || dist_sq(b2, b3) != d23 {
                            continue;
                        }
                        let Ok((r, t)) = recover_rigid([a1, a2, a3], [b1, b2, b3]) else {
                            continue;
                        };
                        if let Some(m) = check(r, t) {
                            return Some(m);
                        }
                    }
                }
            }
            None
        }
    }
}
