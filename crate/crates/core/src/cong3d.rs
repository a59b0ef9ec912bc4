//! Six-pass streaming identification of a rigid motion taking `A` onto `B`
//! in rational 3-space.
//!
//! Each set builds candidate anchor triples `(v1, v2, v3)` and both sets are
//! processed side by side in every pass:
//!
//! 1. centroids reduced into F_p³;
//! 2. the first point with a nonzero reduced distance fixes one sphere about
//!    the centroids, and the points on it give the `v1` candidates (the
//!    points themselves, or the centre of their circle or sphere);
//! 3. `v2` is a bottom-k sample of the nearest nonempty sphere about `v1`;
//! 4. the nearest sphere about `v1` holding points off the line `v1v2` is
//!    cut into slices `(v2 − v1)·(v − v1) = κ` and the slices nearest `v1`
//!    are counted;
//! 5. `v3` is a bottom-k sample of the nearest sparse slice;
//! 6. triple pairs with equal side lengths are compared by Karp–Rabin
//!    fingerprints of `{θ(v)}`, where `θ(v)` is the squared distances of
//!    `v` to the anchors plus the side of the anchor plane.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Display;

use num_bigint::{BigInt, BigUint};
use num_integer::Roots;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exact::{recover_rigid, rotation_aligning, BigRat, Mat3, Rat3, RigidMotion};
use crate::field::{FpElem, FpPrime};
use crate::fingerprint::{choose_q, idx_tuple, idx_tuple_max, KRState};
use crate::params::delta_3d;
use crate::stream::{PassDriver, PassHandler, PointRecord, StreamSource};

/// Passes used by one attempt.
pub const PASSES: usize = 6;

/// `⌈80·√(3n)⌉` second anchors per first anchor.
pub fn v2_sample_size(n: usize) -> usize {
    (80.0 * (3.0 * n as f64).sqrt()).ceil() as usize
}

/// `⌈80·n^{1/3}⌉` third anchors per anchor pair.
pub fn v3_sample_size(n: usize) -> usize {
    (80.0 * (n as f64).cbrt()).ceil() as usize
}

#[derive(Clone, Debug, Default)]
pub struct Config {
    pub seed: u64,
    /// Also accept `B = RA + t` with `det R = −1`.
    pub allow_reflection: bool,
    /// Fresh-prime reruns after a bad-prime outcome.
    pub retries: u32,
    /// Overrides the prime range `[Δ, 4Δ]`.
    pub delta: Option<BigUint>,
}

/// Bottom-k sample of distinct values: the `k` values with the smallest
/// salted SHA-256 keys. Repeated values share a key and never take two
/// slots.
#[derive(Clone, Debug)]
pub struct DistinctSampler<T> {
    k: usize,
    salt: Vec<u8>,
    kept: BTreeSet<(u64, T)>,
}

impl<T: Ord + Clone + Display> DistinctSampler<T> {
    pub fn new(k: usize, salt: &[u8]) -> Self {
        DistinctSampler {
            k,
            salt: salt.to_vec(),
            kept: BTreeSet::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.k
    }

    pub fn key(&self, x: &T) -> u64 {
        let d = Sha256::new()
            .chain_update(&self.salt)
            .chain_update(x.to_string().as_bytes())
            .finalize();
        u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
    }

    pub fn offer(&mut self, x: &T) {
        if self.k == 0 {
            return;
        }
        let key = self.key(x);
        if self.kept.len() == self.k && self.kept.last().is_some_and(|(top, _)| key > *top) {
            return;
        }
        self.kept.insert((key, x.clone()));
        if self.kept.len() > self.k {
            self.kept.pop_last();
        }
    }

    pub fn clear(&mut self) {
        self.kept.clear();
    }

    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    /// Sampled values in key order.
    pub fn sample(&self) -> Vec<T> {
        self.kept.iter().map(|(_, x)| x.clone()).collect()
    }

    pub fn live_bits(&self, size: impl Fn(&T) -> u64) -> u64 {
        self.kept.iter().map(|(_, x)| 64 + size(x)).sum()
    }
}

/// Slice order: nearer `v1` first, and on a tie the side of `v2` (κ > 0).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct SliceKey {
    abs: BigRat,
    negative: bool,
}

impl SliceKey {
    fn new(kappa: &BigRat) -> Self {
        SliceKey {
            abs: kappa.abs(),
            negative: kappa.is_negative(),
        }
    }

    fn kappa(&self) -> BigRat {
        if self.negative {
            -&self.abs
        } else {
            self.abs.clone()
        }
    }
}

/// Exact counts of the `cap` slices nearest `v1` seen so far. Once full,
/// the farthest tracked key only moves closer, so an evicted slice can
/// never come back with a partial count.
#[derive(Clone, Debug)]
pub struct SliceCounter {
    cap: usize,
    counts: BTreeMap<SliceKey, usize>,
}

impl SliceCounter {
    pub fn new(cap: usize) -> Self {
        SliceCounter {
            cap,
            counts: BTreeMap::new(),
        }
    }

    /// Tracks `⌊n^{1/3}⌋ + 1` slices, one more than the most dense slices
    /// a set of size `n` can have.
    pub fn for_size(n: usize) -> Self {
        SliceCounter::new(n.cbrt() + 1)
    }

    pub fn add(&mut self, kappa: &BigRat) {
        let key = SliceKey::new(kappa);
        if let Some(c) = self.counts.get_mut(&key) {
            *c += 1;
            return;
        }
        if self.counts.len() == self.cap {
            match self.counts.last_key_value() {
                Some((last, _)) if key < *last => {
                    self.counts.pop_last();
                }
                _ => return,
            }
        }
        self.counts.insert(key, 1);
    }

    pub fn clear(&mut self) {
        self.counts.clear();
    }

    /// `(κ, count)` in slice order.
    pub fn counts(&self) -> Vec<(BigRat, usize)> {
        self.counts.iter().map(|(k, &c)| (k.kappa(), c)).collect()
    }

    fn live_bits(&self) -> u64 {
        self.counts.keys().map(|k| k.abs.bits() + 1 + 64).sum()
    }
}

/// `count > n^{2/3}`.
fn is_dense(count: usize, n: usize) -> bool {
    let c = count as u128;
    let n = n as u128;
    c * c * c > n * n
}

/// The nearest sparse slice, or `None` when every tracked slice is dense.
pub fn slice_select(counter: &SliceCounter, n: usize) -> Option<BigRat> {
    let dense = counter.counts.values().filter(|&&c| is_dense(c, n)).count();
    assert!(
        dense.pow(3) <= n,
        "{dense} dense slices in a set of {n} points"
    );
    counter
        .counts
        .iter()
        .find(|(_, &c)| !is_dense(c, n))
        .map(|(k, _)| k.kappa())
}

/// How a first anchor was found on the centroid sphere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum V1Case {
    /// Fewer than four distinct points on the sphere; each is a candidate.
    SpherePoint,
    /// Four or more coplanar points; the centre of their circle.
    CircleCenter,
    /// Four or more non-coplanar points; the centre of the sphere.
    SphereCenter,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Anchors {
    /// Every point of the set equals `v1`.
    Single,
    /// Every point lies on the line through `v1` and `v2`.
    Line { v2: Rat3 },
    Triple {
        v2: Rat3,
        v3: Rat3,
        #[serde(serialize_with = "crate::ser::display")]
        slice: BigRat,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TripleCandidate {
    pub v1: Rat3,
    pub case: V1Case,
    pub anchors: Anchors,
}

impl TripleCandidate {
    /// Side lengths; candidates of two sets can match only when these
    /// agree.
    fn shape(&self) -> (u8, Vec<BigRat>) {
        match &self.anchors {
            Anchors::Single => (0, Vec::new()),
            Anchors::Line { v2 } => (1, vec![(v2 - &self.v1).norm_sq()]),
            Anchors::Triple { v2, v3, .. } => (
                2,
                vec![
                    (v2 - &self.v1).norm_sq(),
                    (v3 - &self.v1).norm_sq(),
                    (v3 - v2).norm_sq(),
                ],
            ),
        }
    }

    fn precision(&self) -> BigInt {
        let mut p = self.v1.precision();
        match &self.anchors {
            Anchors::Single => {}
            Anchors::Line { v2 } => p = p.max(v2.precision()),
            Anchors::Triple { v2, v3, .. } => p = p.max(v2.precision()).max(v3.precision()),
        }
        p
    }

    fn bits(&self) -> u64 {
        self.v1.bits()
            + match &self.anchors {
                Anchors::Single => 0,
                Anchors::Line { v2 } => v2.bits(),
                Anchors::Triple { v2, v3, slice } => v2.bits() + v3.bits() + slice.bits(),
            }
    }
}

/// `θ(v)` for a candidate: distances to the anchors and the side of the
/// anchor plane.
struct Theta<'a> {
    cand: &'a TripleCandidate,
    normal: Option<Rat3>,
}

impl<'a> Theta<'a> {
    fn new(cand: &'a TripleCandidate) -> Self {
        let normal = match &cand.anchors {
            Anchors::Triple { v2, v3, .. } => Some((v2 - &cand.v1).cross(&(v3 - &cand.v1))),
            _ => None,
        };
        Theta { cand, normal }
    }

    fn eval(&self, v: &Rat3) -> (Vec<BigRat>, i8) {
        let w = v - &self.cand.v1;
        let mut d = vec![w.norm_sq()];
        match &self.cand.anchors {
            Anchors::Single => {}
            Anchors::Line { v2 } => d.push((v - v2).norm_sq()),
            Anchors::Triple { v2, v3, .. } => {
                d.push((v - v2).norm_sq());
                d.push((v - v3).norm_sq());
            }
        }
        let sigma = self
            .normal
            .as_ref()
            .map_or(0, |nrm| w.dot(nrm).signum() as i8);
        (d, sigma)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict3d {
    Congruent(RigidMotion),
    NotCongruent,
    BadPrimeSuspected,
}

/// Candidate counts of one attempt, per set.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StageCounts {
    pub v1: [usize; 2],
    pub pairs: [usize; 2],
    /// Anchor pairs dropped because every tracked slice was dense.
    pub discarded: [usize; 2],
    pub triples: [usize; 2],
    /// Candidates fingerprinted in the last pass.
    pub fingerprinted: [usize; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct CongIden3dResult {
    pub verdict: Verdict3d,
    pub passes: usize,
    pub peak_bits: u64,
    #[serde(serialize_with = "crate::ser::display_vec")]
    pub primes: Vec<BigUint>,
    #[serde(serialize_with = "crate::ser::display_vec")]
    pub fingerprint_primes: Vec<BigUint>,
    /// Sampler capacities for `v2` and `v3`.
    pub sample_sizes: [usize; 2],
    /// Counts of the last attempt.
    pub counts: StageCounts,
}

/// Per-candidate state driven by the records of its own set.
trait Track {
    fn see(&mut self, v: &Rat3);
    fn bits(&self) -> u64;
}

struct LabelPass<S> {
    states: [Vec<S>; 2],
}

impl<S: Track> PassHandler for LabelPass<S> {
    fn observe(&mut self, rec: &PointRecord) -> Result<()> {
        let v = rec.space()?;
        for s in &mut self.states[rec.label.index()] {
            s.see(v);
        }
        Ok(())
    }
    fn live_bits(&self) -> u64 {
        self.states.iter().flatten().map(Track::bits).sum()
    }
}

struct CentroidPass<'a> {
    p: &'a FpPrime,
    sums: [[FpElem; 3]; 2],
    counts: [usize; 2],
}

impl PassHandler for CentroidPass<'_> {
    fn observe(&mut self, rec: &PointRecord) -> Result<()> {
        let v = rec.space()?;
        let l = rec.label.index();
        for (s, c) in self.sums[l].iter_mut().zip(v.coords()) {
            *s = self.p.add(s, &self.p.phi_rat(c)?);
        }
        self.counts[l] += 1;
        Ok(())
    }
    fn live_bits(&self) -> u64 {
        6 * self.p.bits() + 128
    }
}

impl CentroidPass<'_> {
    fn finalize(&self) -> Result<[[FpElem; 3]; 2]> {
        let mut out: [[FpElem; 3]; 2] = Default::default();
        for l in 0..2 {
            let inv = self
                .p
                .inv(&self.p.from_u64(self.counts[l] as u64))
                .ok_or(Error::UndefinedUnderPhi)?;
            for i in 0..3 {
                out[l][i] = self.p.mul(&self.sums[l][i], &inv);
            }
        }
        Ok(out)
    }
}

fn coplanar(a: &Rat3, b: &Rat3, c: &Rat3, d: &Rat3) -> bool {
    (b - a).cross(&(c - a)).dot(&(d - a)).is_zero()
}

/// Centre of the circle through three non-collinear points.
pub fn circle_center(a: &Rat3, b: &Rat3, c: &Rat3) -> Result<Rat3> {
    let u = b - a;
    let v = c - a;
    let w = u.cross(&v);
    let den = w.norm_sq() * BigRat::from(2);
    let k = den.recip().ok_or(Error::SingularSystem)?;
    let num = (&v.scale(&u.norm_sq()) - &u.scale(&v.norm_sq())).cross(&w);
    Ok(a + &num.scale(&k))
}

/// Centre of the sphere through four non-coplanar points.
pub fn sphere_center(p: [&Rat3; 4]) -> Result<Rat3> {
    let half = BigRat::new(1, 2);
    let base = p[0].norm_sq();
    let rows: Vec<Rat3> = p[1..].iter().map(|q| *q - p[0]).collect();
    let m = Mat3(std::array::from_fn(|r| {
        let [x, y, z] = rows[r].coords();
        [x.clone(), y.clone(), z.clone()]
    }));
    let rhs = Rat3::from_array(std::array::from_fn(|r| {
        (p[r + 1].norm_sq() - &base) * &half
    }));
    let inv = m.inverse().ok_or(Error::SingularSystem)?;
    Ok(inv.apply(&rhs))
}

/// Online case split over the distinct points of one sphere: the first
/// four distinct points and the first point off the plane of the first
/// three.
#[derive(Clone, Debug, Default)]
pub struct CaseSplit {
    pts: Vec<Rat3>,
    witness: Option<Rat3>,
}

impl CaseSplit {
    pub fn add(&mut self, v: &Rat3) {
        if self.witness.is_some() {
            return;
        }
        if self.pts.len() >= 3 && !coplanar(&self.pts[0], &self.pts[1], &self.pts[2], v) {
            self.witness = Some(v.clone());
            return;
        }
        if self.pts.len() < 4 && !self.pts.contains(v) {
            self.pts.push(v.clone());
        }
    }

    /// The first-anchor candidates, in stream order for sphere points.
    pub fn candidates(&self) -> Result<Vec<(Rat3, V1Case)>> {
        let p = &self.pts;
        if let Some(w) = &self.witness {
            let c = sphere_center([&p[0], &p[1], &p[2], w])?;
            return Ok(vec![(c, V1Case::SphereCenter)]);
        }
        if p.len() == 4 {
            // Distinct points of a sphere are never collinear.
            let c = circle_center(&p[0], &p[1], &p[2])?;
            return Ok(vec![(c, V1Case::CircleCenter)]);
        }
        Ok(p.iter().map(|v| (v.clone(), V1Case::SpherePoint)).collect())
    }

    fn bits(&self) -> u64 {
        self.pts.iter().chain(&self.witness).map(Rat3::bits).sum()
    }
}

struct SpherePass<'a> {
    p: &'a FpPrime,
    c_hat: [[FpElem; 3]; 2],
    r_hat: Option<FpElem>,
    first: [Option<Rat3>; 2],
    split: [CaseSplit; 2],
}

impl PassHandler for SpherePass<'_> {
    fn observe(&mut self, rec: &PointRecord) -> Result<()> {
        let v = rec.space()?;
        let l = rec.label.index();
        if self.first[l].is_none() {
            self.first[l] = Some(v.clone());
        }
        let mut d = FpElem::zero();
        for (c, x) in self.c_hat[l].iter().zip(v.coords()) {
            let e = self.p.sub(&self.p.phi_rat(x)?, c);
            d = self.p.add(&d, &self.p.mul(&e, &e));
        }
        if d.is_zero() {
            return Ok(());
        }
        match &self.r_hat {
            None => self.r_hat = Some(d),
            Some(r) if *r != d => return Ok(()),
            Some(_) => {}
        }
        self.split[l].add(v);
        Ok(())
    }
    fn live_bits(&self) -> u64 {
        let fixed = 7 * self.p.bits();
        fixed
            + self.first.iter().flatten().map(Rat3::bits).sum::<u64>()
            + self.split.iter().map(CaseSplit::bits).sum::<u64>()
    }
}

/// Bottom-k sample of the nearest nonempty sphere about `v1`. A closer
/// point resets the sample, so the result covers exactly the points at the
/// minimal nonzero distance.
struct NearestSphere {
    v1: Rat3,
    case: V1Case,
    radius: Option<BigRat>,
    sampler: DistinctSampler<Rat3>,
}

impl Track for NearestSphere {
    fn see(&mut self, v: &Rat3) {
        let d = (v - &self.v1).norm_sq();
        if d.is_zero() {
            return;
        }
        if self.radius.as_ref().is_none_or(|r| d < *r) {
            self.radius = Some(d);
            self.sampler.clear();
        } else if self.radius.as_ref() != Some(&d) {
            return;
        }
        self.sampler.offer(v);
    }
    fn bits(&self) -> u64 {
        self.v1.bits()
            + self.radius.as_ref().map_or(0, BigRat::bits)
            + self.sampler.live_bits(Rat3::bits)
    }
}

/// Slice counts on the nearest sphere about `v1` holding a point off the
/// line `v1v2`. Points on the line, including `v2` and its antipode, are
/// never counted.
struct SliceCount {
    v1: Rat3,
    case: V1Case,
    v2: Rat3,
    dir: Rat3,
    radius: Option<BigRat>,
    counter: SliceCounter,
}

impl Track for SliceCount {
    fn see(&mut self, v: &Rat3) {
        let w = v - &self.v1;
        if w.cross(&self.dir).is_zero() {
            return;
        }
        let d = w.norm_sq();
        if self.radius.as_ref().is_none_or(|r| d < *r) {
            self.radius = Some(d);
            self.counter.clear();
        } else if self.radius.as_ref() != Some(&d) {
            return;
        }
        self.counter.add(&self.dir.dot(&w));
    }
    fn bits(&self) -> u64 {
        self.v1.bits()
            + self.v2.bits()
            + self.radius.as_ref().map_or(0, BigRat::bits)
            + self.counter.live_bits()
    }
}

struct SliceSample {
    v1: Rat3,
    case: V1Case,
    v2: Rat3,
    dir: Rat3,
    radius: BigRat,
    kappa: BigRat,
    sampler: DistinctSampler<Rat3>,
}

impl Track for SliceSample {
    fn see(&mut self, v: &Rat3) {
        let w = v - &self.v1;
        if w.cross(&self.dir).is_zero()
            || w.norm_sq() != self.radius
            || self.dir.dot(&w) != self.kappa
        {
            return;
        }
        self.sampler.offer(v);
    }
    fn bits(&self) -> u64 {
        self.v1.bits()
            + self.v2.bits()
            + self.radius.bits()
            + self.kappa.bits()
            + self.sampler.live_bits(Rat3::bits)
    }
}

struct Fingerprint<'a> {
    theta: Theta<'a>,
    v: BigInt,
    h: KRState,
    /// Fingerprint of the mirror image, `σ` negated.
    h_mirror: Option<KRState>,
    error: Option<Error>,
}

impl Track for Fingerprint<'_> {
    fn see(&mut self, v: &Rat3) {
        if self.error.is_some() {
            return;
        }
        let (d, sigma) = self.theta.eval(v);
        let xs: Vec<&BigRat> = d.iter().collect();
        let fed = idx_tuple(&xs, sigma, &self.v).and_then(|i| {
            self.h.feed(&i);
            if let Some(m) = &mut self.h_mirror {
                m.feed(&idx_tuple(&xs, -sigma, &self.v)?);
            }
            Ok(())
        });
        if let Err(e) = fed {
            self.error = Some(e);
        }
    }
    fn bits(&self) -> u64 {
        self.theta.cand.bits() + self.h.bits() + self.h_mirror.as_ref().map_or(0, KRState::bits)
    }
}

fn salt(seed: u64, attempt: u32, stage: u8, label: usize, index: usize) -> Vec<u8> {
    let mut s = b"congstream-3d".to_vec();
    s.extend_from_slice(&seed.to_le_bytes());
    s.extend_from_slice(&attempt.to_le_bytes());
    s.push(stage);
    s.push(label as u8);
    s.extend_from_slice(&(index as u64).to_le_bytes());
    s
}

/// `diag(1, 1, −1)`.
fn mirror_matrix() -> Mat3 {
    let mut m = Mat3::identity();
    m.0[2][2] = BigRat::from(-1);
    m
}

fn mirror(v: &Rat3) -> Rat3 {
    Rat3::new(v.x.clone(), v.y.clone(), -&v.z)
}

/// The motion taking candidate `a` onto candidate `b`, mirroring `a` first
/// when `mirrored`.
fn motion(a: &TripleCandidate, b: &TripleCandidate, mirrored: bool) -> Option<RigidMotion> {
    let (r, t) = match (&a.anchors, &b.anchors) {
        (Anchors::Single, Anchors::Single) => (Mat3::identity(), &b.v1 - &a.v1),
        (Anchors::Line { v2: a2 }, Anchors::Line { v2: b2 }) => {
            let r = rotation_aligning(&(a2 - &a.v1), &(b2 - &b.v1))?;
            let t = &b.v1 - &r.apply(&a.v1);
            (r, t)
        }
        (Anchors::Triple { v2: a2, v3: a3, .. }, Anchors::Triple { v2: b2, v3: b3, .. }) => {
            if mirrored {
                let m = [mirror(&a.v1), mirror(a2), mirror(a3)];
                let (r, t) = recover_rigid([&m[0], &m[1], &m[2]], [&b.v1, b2, b3]).ok()?;
                (r.mul(&mirror_matrix()), t)
            } else {
                recover_rigid([&a.v1, a2, a3], [&b.v1, b2, b3]).ok()?
            }
        }
        _ => return None,
    };
    Some(RigidMotion { r, t })
}

struct Attempt<'a> {
    cfg: &'a Config,
    round: u32,
    n: usize,
    u: BigInt,
    counts: StageCounts,
}

impl Attempt<'_> {
    /// Passes 1 and 2. `None` when the prime is bad.
    fn first_anchors(
        &mut self,
        driver: &mut PassDriver<'_>,
        p: &FpPrime,
    ) -> Result<Option<[Vec<(Rat3, V1Case)>; 2]>> {
        let mut first = CentroidPass {
            p,
            sums: Default::default(),
            counts: [0, 0],
        };
        let c_hat = match driver.run_pass(&mut first).and_then(|_| first.finalize()) {
            Ok(c) => Some(c),
            Err(Error::UndefinedUnderPhi) => None,
            Err(e) => return Err(e),
        };
        let Some(c_hat) = c_hat else {
            driver.run_pass(&mut LabelPass::<NearestSphere> {
                states: Default::default(),
            })?;
            return Ok(None);
        };
        let mut second = SpherePass {
            p,
            c_hat,
            r_hat: None,
            first: [None, None],
            split: Default::default(),
        };
        match driver.run_pass(&mut second) {
            Ok(()) => {}
            Err(Error::UndefinedUnderPhi) => return Ok(None),
            Err(e) => return Err(e),
        }
        let mut out: [Vec<(Rat3, V1Case)>; 2] = Default::default();
        for l in 0..2 {
            out[l] = match &second.r_hat {
                None => second.first[l]
                    .iter()
                    .map(|v| (v.clone(), V1Case::SpherePoint))
                    .collect(),
                Some(_) => second.split[l].candidates()?,
            };
            self.counts.v1[l] = out[l].len();
        }
        Ok(Some(out))
    }

    /// Passes 3 to 5.
    fn triples(
        &mut self,
        driver: &mut PassDriver<'_>,
        v1s: [Vec<(Rat3, V1Case)>; 2],
    ) -> Result<[Vec<TripleCandidate>; 2]> {
        let (k2, k3) = (v2_sample_size(self.n), v3_sample_size(self.n));
        let mut out: [Vec<TripleCandidate>; 2] = Default::default();

        let mut third = LabelPass {
            states: std::array::from_fn(|l| {
                v1s[l]
                    .iter()
                    .enumerate()
                    .map(|(i, (v1, case))| NearestSphere {
                        v1: v1.clone(),
                        case: *case,
                        radius: None,
                        sampler: DistinctSampler::new(
                            k2,
                            &salt(self.cfg.seed, self.round, 3, l, i),
                        ),
                    })
                    .collect()
            }),
        };
        driver.run_pass(&mut third)?;

        let mut fourth = LabelPass::<SliceCount> {
            states: Default::default(),
        };
        for (l, states) in third.states.into_iter().enumerate() {
            for s in states {
                if s.radius.is_none() {
                    out[l].push(TripleCandidate {
                        v1: s.v1,
                        case: s.case,
                        anchors: Anchors::Single,
                    });
                    continue;
                }
                for v2 in s.sampler.sample() {
                    fourth.states[l].push(SliceCount {
                        dir: &v2 - &s.v1,
                        v1: s.v1.clone(),
                        case: s.case,
                        v2,
                        radius: None,
                        counter: SliceCounter::for_size(self.n),
                    });
                }
            }
            self.counts.pairs[l] = fourth.states[l].len();
        }
        driver.run_pass(&mut fourth)?;

        let mut fifth = LabelPass::<SliceSample> {
            states: Default::default(),
        };
        for (l, states) in fourth.states.into_iter().enumerate() {
            for (i, s) in states.into_iter().enumerate() {
                let Some(radius) = s.radius else {
                    out[l].push(TripleCandidate {
                        v1: s.v1,
                        case: s.case,
                        anchors: Anchors::Line { v2: s.v2 },
                    });
                    continue;
                };
                let Some(kappa) = slice_select(&s.counter, self.n) else {
                    self.counts.discarded[l] += 1;
                    continue;
                };
                fifth.states[l].push(SliceSample {
                    v1: s.v1,
                    case: s.case,
                    v2: s.v2,
                    dir: s.dir,
                    radius,
                    kappa,
                    sampler: DistinctSampler::new(k3, &salt(self.cfg.seed, self.round, 5, l, i)),
                });
            }
        }
        driver.run_pass(&mut fifth)?;

        for (l, states) in fifth.states.into_iter().enumerate() {
            for s in states {
                for v3 in s.sampler.sample() {
                    out[l].push(TripleCandidate {
                        v1: s.v1.clone(),
                        case: s.case,
                        anchors: Anchors::Triple {
                            v2: s.v2.clone(),
                            v3,
                            slice: s.kappa.clone(),
                        },
                    });
                }
            }
            self.counts.triples[l] = out[l].len();
        }
        Ok(out)
    }

    /// Pass 6 and matching.
    fn verify(
        &mut self,
        driver: &mut PassDriver<'_>,
        cands: &[Vec<TripleCandidate>; 2],
        rng: &mut ChaCha20Rng,
    ) -> Result<(Option<RigidMotion>, BigUint)> {
        let shapes: [Vec<(u8, Vec<BigRat>)>; 2] =
            std::array::from_fn(|l| cands[l].iter().map(TripleCandidate::shape).collect());
        let mut by_shape: HashMap<&(u8, Vec<BigRat>), Vec<usize>> = HashMap::new();
        for (j, s) in shapes[1].iter().enumerate() {
            by_shape.entry(s).or_default().push(j);
        }
        let live_a: Vec<usize> = (0..cands[0].len())
            .filter(|&i| by_shape.contains_key(&shapes[0][i]))
            .collect();
        let shapes_a: std::collections::HashSet<&(u8, Vec<BigRat>)> =
            live_a.iter().map(|&i| &shapes[0][i]).collect();
        let live_b: Vec<usize> = (0..cands[1].len())
            .filter(|&j| shapes_a.contains(&shapes[1][j]))
            .collect();
        self.counts.fingerprinted = [live_a.len(), live_b.len()];

        // θ coordinates are squared distances between U-rational points and
        // W-rational anchors, hence 12(UW)⁶-rational.
        let w = live_a
            .iter()
            .map(|&i| cands[0][i].precision())
            .chain(live_b.iter().map(|&j| cands[1][j].precision()))
            .fold(self.u.clone(), BigInt::max);
        let v = num_traits::pow(&self.u * &w, 6) * 12;
        let lo = idx_tuple_max(3, &v) * BigUint::from(16 * self.n as u64);
        let q = choose_q(&lo, &(&lo * 2u32), rng)?;
        let base = KRState::random(q.clone(), rng).base;

        let reflect = self.cfg.allow_reflection;
        let fp = |c, mirrored: bool| Fingerprint {
            theta: Theta::new(c),
            v: v.clone(),
            h: KRState::new(q.clone(), base.clone()),
            h_mirror: mirrored.then(|| KRState::new(q.clone(), base.clone())),
            error: None,
        };
        let mut sixth = LabelPass {
            states: [
                live_a.iter().map(|&i| fp(&cands[0][i], reflect)).collect(),
                live_b.iter().map(|&j| fp(&cands[1][j], false)).collect(),
            ],
        };
        driver.run_pass(&mut sixth)?;
        if let Some(e) = sixth
            .states
            .iter_mut()
            .flatten()
            .find_map(|f| f.error.take())
        {
            return Err(e);
        }

        let b_pos: HashMap<usize, usize> =
            live_b.iter().enumerate().map(|(k, &j)| (j, k)).collect();
        let orientations: &[bool] = if reflect { &[false, true] } else { &[false] };
        for &mirrored in orientations {
            for (ka, &i) in live_a.iter().enumerate() {
                let fa = &sixth.states[0][ka];
                let ha = if mirrored {
                    fa.h_mirror.as_ref().expect("mirror fingerprint")
                } else {
                    &fa.h
                };
                for &j in &by_shape[&shapes[0][i]] {
                    if sixth.states[1][b_pos[&j]].h.value() != ha.value() {
                        continue;
                    }
                    if let Some(m) = motion(&cands[0][i], &cands[1][j], mirrored) {
                        return Ok((Some(m), q));
                    }
                }
            }
        }
        Ok((None, q))
    }
}

fn attempt(
    driver: &mut PassDriver<'_>,
    cfg: &Config,
    round: u32,
    rng: &mut ChaCha20Rng,
    report: &mut CongIden3dResult,
) -> Result<Verdict3d> {
    let header = driver.header().clone();
    let n = header.n_a;
    let delta = cfg.delta.clone().unwrap_or_else(|| delta_3d(&header.u, n));
    let p = FpPrime::sample(&delta, 4, rng)?;
    report.primes.push(p.p().clone());
    let mut at = Attempt {
        cfg,
        round,
        n,
        u: header.u.clone(),
        counts: StageCounts::default(),
    };
    let v1s = at.first_anchors(driver, &p)?;
    let bad = v1s.is_none();
    // Later passes still run on empty candidate sets, so every attempt
    // has the same pass count.
    let cands = at.triples(driver, v1s.unwrap_or_default())?;
    let (found, q) = at.verify(driver, &cands, rng)?;
    report.fingerprint_primes.push(q);
    report.counts = at.counts;
    Ok(match found {
        Some(m) => Verdict3d::Congruent(m),
        None if bad => Verdict3d::BadPrimeSuspected,
        None => Verdict3d::NotCongruent,
    })
}

/// Runs the full algorithm on a 3D two-set stream.
pub fn run3d(source: &mut dyn StreamSource, cfg: &Config) -> Result<CongIden3dResult> {
    let header = source.header().clone();
    if header.dim != 3 {
        return Err(Error::InvalidConfig("run3d needs a 3D stream".into()));
    }
    let n_b = header
        .n_b
        .ok_or_else(|| Error::InvalidConfig("run3d needs both labels".into()))?;
    if header.n_a == 0 {
        return Err(Error::InvalidConfig("empty input".into()));
    }
    let mut report = CongIden3dResult {
        verdict: Verdict3d::NotCongruent,
        passes: 0,
        peak_bits: 0,
        primes: Vec::new(),
        fingerprint_primes: Vec::new(),
        sample_sizes: [v2_sample_size(header.n_a), v3_sample_size(header.n_a)],
        counts: StageCounts::default(),
    };
    if header.n_a != n_b {
        return Ok(report);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut driver = PassDriver::new(source, PASSES);
    for round in 0..=cfg.retries {
        if round > 0 {
            driver.extend_budget(PASSES);
        }
        report.verdict = attempt(&mut driver, cfg, round, &mut rng, &mut report)?;
        if report.verdict != Verdict3d::BadPrimeSuspected {
            break;
        }
    }
    report.passes = driver.passes();
    report.peak_bits = driver.peak_bits();
    Ok(report)
}
