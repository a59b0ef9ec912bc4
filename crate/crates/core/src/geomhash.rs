//! Six-pass congruence-invariant signatures of planar point multisets, and
//! the hash that runs one signature per set under shared randomness.
//!
//! Pass 1 hashes the centroid. Pass 2 picks the two smallest nonzero
//! reduced radii. Pass 3 takes power-of-two moments on the smallest one.
//! Pass 4 ranks the points on either circle by the reduced distance of
//! `(z − c)^k` to the first nonzero moment. Pass 5 collects the anchors.
//! Pass 6 fingerprints the multiset of (distances to a, b; side of ab) for
//! the closest anchor pairs.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use num_bigint::{BigInt, BigUint};
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{BigRat, GaussianRat};
use crate::field::{FpElem, FpPrime, FpiElem};
use crate::fingerprint::{choose_q, derive_base, gamma_precision, idx_gamma, KRState};
use crate::moments::{floor_log2, CentroidSketch, MomentSketch};
use crate::params::{delta_geomsign, signature_q_range, Mode};
use crate::stream::{Label, PassDriver, PassHandler, PointRecord, StreamSource};

pub const PASSES: usize = 6;
pub const MAX_ANCHORS: usize = 64;

const BASE_TAG: &[u8] = b"geomsign";

/// Primes and fingerprint base common to every set hashed together.
#[derive(Clone, Debug, Serialize)]
pub struct SharedRandomness {
    pub p: FpPrime,
    #[serde(serialize_with = "crate::ser::display")]
    pub q: BigUint,
    pub base_seed: u64,
    #[serde(serialize_with = "crate::ser::display")]
    pub base: BigUint,
    #[serde(serialize_with = "crate::ser::display")]
    pub u: BigInt,
    pub n: usize,
    pub m: usize,
}

impl SharedRandomness {
    pub fn generate(
        mode: Mode,
        u: &BigInt,
        n: usize,
        m: usize,
        seed: u64,
        delta: Option<BigUint>,
    ) -> Result<Self> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let delta = delta.unwrap_or_else(|| delta_geomsign(mode, u, n, m));
        let p = FpPrime::sample(&delta, 4, &mut rng)?;
        let (lo, hi) = signature_q_range(u, n, m);
        let q = choose_q(&lo, &hi, &mut rng)?;
        let base = derive_base(seed, &q, BASE_TAG);
        Ok(SharedRandomness {
            p,
            q,
            base_seed: seed,
            base,
            u: u.clone(),
            n,
            m,
        })
    }

    /// Width of each of the numerator and denominator fields.
    pub fn len_field_bits(&self) -> u64 {
        let u32_ = num_traits::pow(self.u.clone(), 32);
        let v: BigInt = (BigInt::from(1) << 23u32) * u32_ + 1;
        v.bits()
    }

    pub fn fp_field_bits(&self) -> u64 {
        self.q.bits()
    }

    pub fn signature_bits(&self) -> u64 {
        2 * self.len_field_bits() + self.fp_field_bits()
    }
}

/// Smallest and second-smallest distinct values, or the minimum twice when
/// only one distinct value exists.
pub fn second_min(values: &[FpElem]) -> Result<(FpElem, FpElem)> {
    let mut t = TwoSmallest::default();
    for v in values {
        t.insert(v);
    }
    t.get().ok_or(Error::EmptySet)
}

#[derive(Clone, Debug, Default)]
struct TwoSmallest {
    first: Option<FpElem>,
    second: Option<FpElem>,
}

impl TwoSmallest {
    fn insert(&mut self, v: &FpElem) {
        match &self.first {
            None => self.first = Some(v.clone()),
            Some(a) if v == a => {}
            Some(a) if v < a => self.second = self.first.replace(v.clone()),
            Some(_) => match &self.second {
                Some(b) if v >= b => {}
                _ => self.second = Some(v.clone()),
            },
        }
    }

    fn get(&self) -> Option<(FpElem, FpElem)> {
        let a = self.first.clone()?;
        let b = self.second.clone().unwrap_or_else(|| a.clone());
        Some((a, b))
    }

    fn contains(&self, v: &FpElem) -> bool {
        self.first.as_ref() == Some(v) || self.second.as_ref() == Some(v)
    }

    fn bits(&self, p: &FpPrime) -> u64 {
        2 * p.bits()
    }
}

/// `(|a − b|², F_{a,b}(S))` with a fixed-width hex encoding. Sets with a
/// single distinct point get the reserved tuple `(0/0, 0)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Signature {
    #[serde(serialize_with = "crate::ser::opt_display")]
    pub len_sq: Option<BigRat>,
    #[serde(serialize_with = "crate::ser::display")]
    pub fp: BigUint,
    pub encoded: String,
}

impl Signature {
    fn new(len_sq: Option<BigRat>, fp: BigUint, shared: &SharedRandomness) -> Self {
        let w = shared.len_field_bits();
        let (num, den) = match &len_sq {
            Some(l) => (
                l.numer().to_biguint().expect("squared length"),
                l.denom().to_biguint().expect("positive"),
            ),
            None => (BigUint::zero(), BigUint::zero()),
        };
        assert!(
            num.bits() <= w && den.bits() <= w,
            "length exceeds its field"
        );
        let packed = (((num << w) | den) << shared.fp_field_bits()) | &fp;
        let digits = shared.signature_bits().div_ceil(4) as usize;
        let encoded = format!("{:0>digits$}", packed.to_str_radix(16));
        Signature {
            len_sq,
            fp,
            encoded,
        }
    }

    pub fn degenerate(shared: &SharedRandomness) -> Self {
        Signature::new(None, BigUint::zero(), shared)
    }

    pub fn is_degenerate(&self) -> bool {
        self.len_sq.is_none()
    }

    fn key_cmp(&self, other: &Signature) -> Ordering {
        self.len_sq
            .cmp(&other.len_sq)
            .then_with(|| self.fp.cmp(&other.fp))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignOutcome {
    Signature(Signature),
    BadPrimeSuspected { reason: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct GeomSignResult {
    pub outcome: SignOutcome,
    pub passes: usize,
    pub peak_bits: u64,
    /// Largest anchor set seen, over the orientations tried.
    pub anchors: usize,
}

#[derive(Clone, Debug, Default)]
pub struct GeomConfig {
    pub mode: Mode,
    pub seed: u64,
    /// Make the signature invariant under mirroring as well.
    pub allow_reflection: bool,
    pub delta: Option<BigUint>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Status {
    Running,
    Degenerate,
    Bad(String),
}

struct AnchorPair {
    a: GaussianRat,
    b: GaussianRat,
    kr: KRState,
}

/// The whole pipeline for one orientation of the input.
struct Orientation {
    conj: bool,
    status: Status,
    centroid: CentroidSketch,
    c_hat: FpiElem,
    radii: TwoSmallest,
    sketch: Option<MomentSketch>,
    j: u32,
    m_k: FpiElem,
    k_radii: TwoSmallest,
    anchors: BTreeSet<GaussianRat>,
    pairs: Vec<AnchorPair>,
    len_sq: Option<BigRat>,
}

impl Orientation {
    fn new(conj: bool) -> Self {
        Orientation {
            conj,
            status: Status::Running,
            centroid: CentroidSketch::default(),
            c_hat: FpiElem::zero(),
            radii: TwoSmallest::default(),
            sketch: None,
            j: 0,
            m_k: FpiElem::zero(),
            k_radii: TwoSmallest::default(),
            anchors: BTreeSet::new(),
            pairs: Vec::new(),
            len_sq: None,
        }
    }

    fn bad(&mut self, why: impl Into<String>) {
        if self.status == Status::Running {
            self.status = Status::Bad(why.into());
        }
    }

    /// Offset from the centroid and its reduced squared length.
    fn offset(&self, p: &FpPrime, z: &GaussianRat) -> Result<(FpiElem, FpElem)> {
        let x = p.fpi_sub(&p.phi(z)?, &self.c_hat);
        let d = p.fpi_norm(&x);
        Ok((x, d))
    }

    /// Reduced `|(z − c)^k − M_k|²` for a point on one of the two circles.
    fn k_distance(&self, p: &FpPrime, z: &GaussianRat) -> Result<Option<FpElem>> {
        let (x, d) = self.offset(p, z)?;
        if !self.radii.contains(&d) {
            return Ok(None);
        }
        let y = p.fpi_sub(&p.fpi_pow2(&x, self.j), &self.m_k);
        Ok(Some(p.fpi_norm(&y)))
    }

    fn observe(
        &mut self,
        pass: usize,
        sh: &SharedRandomness,
        z: &GaussianRat,
        position: usize,
    ) -> Result<()> {
        let p = &sh.p;
        match pass {
            1 => self.centroid.update(p, Label::A, z)?,
            2 => {
                let (_, d) = self.offset(p, z)?;
                if !d.is_zero() {
                    self.radii.insert(&d);
                }
            }
            3 => {
                self.sketch
                    .as_mut()
                    .expect("set at pass start")
                    .update(p, Label::A, z, position)?
            }
            4 => {
                if let Some(v) = self.k_distance(p, z)? {
                    self.k_radii.insert(&v);
                }
            }
            5 => {
                if let Some(v) = self.k_distance(p, z)? {
                    if self.k_radii.contains(&v)
                        && self.anchors.insert(z.clone())
                        && self.anchors.len() > MAX_ANCHORS
                    {
                        self.bad(format!("more than {MAX_ANCHORS} anchors"));
                    }
                }
            }
            6 => {
                let w = gamma_precision(&sh.u);
                for pair in &mut self.pairs {
                    let (a, b) = (&pair.a, &pair.b);
                    let da = (z - a).norm_sq();
                    let db = (z - b).norm_sq();
                    let (d1, d2) = if da <= db { (da, db) } else { (db, da) };
                    let e = b - a;
                    let f = z - a;
                    let sigma = (&e.re * &f.im - &e.im * &f.re).signum() as i8;
                    pair.kr.feed(&idx_gamma(&d1, &d2, sigma, &w)?);
                }
            }
            _ => unreachable!("six passes"),
        }
        Ok(())
    }

    fn begin(&mut self, pass: usize, sh: &SharedRandomness) {
        if pass == 3 {
            let (r, _) = self.radii.get().expect("checked after pass 2");
            let j_max = floor_log2(sh.n);
            self.sketch = Some(MomentSketch::with_radius(
                [self.c_hat.clone(), FpiElem::zero()],
                r,
                j_max,
            ));
        }
    }

    fn end(&mut self, pass: usize, sh: &SharedRandomness) -> Result<()> {
        let p = &sh.p;
        match pass {
            1 => self.c_hat = self.centroid.finalize(p)?[0].clone(),
            2 => {
                if self.radii.get().is_none() {
                    self.status = Status::Degenerate;
                }
            }
            3 => {
                let sketch = self.sketch.take().expect("set at pass start");
                match sketch.moments[0].iter().position(|m| !m.is_zero()) {
                    Some(j) => {
                        self.j = j as u32;
                        self.m_k = sketch.moments[0][j].clone();
                    }
                    None => self.bad("all moments vanish"),
                }
            }
            4 => {
                if self.k_radii.get().is_none() {
                    self.bad("no point on the reference circles");
                }
            }
            5 => self.choose_pairs(sh),
            _ => {}
        }
        Ok(())
    }

    /// Keeps only the ordered anchor pairs at minimal distance; only they can
    /// win the lexicographic comparison.
    fn choose_pairs(&mut self, sh: &SharedRandomness) {
        let anchors: Vec<&GaussianRat> = self.anchors.iter().collect();
        let fresh = || KRState::new(sh.q.clone(), sh.base.clone());
        if anchors.len() == 1 {
            self.len_sq = Some(BigRat::zero());
            self.pairs.push(AnchorPair {
                a: anchors[0].clone(),
                b: anchors[0].clone(),
                kr: fresh(),
            });
            return;
        }
        let mut best: Option<BigRat> = None;
        let mut pairs = Vec::new();
        for a in &anchors {
            for b in &anchors {
                if a == b {
                    continue;
                }
                let d = (*b - *a).norm_sq();
                match best.as_ref().map(|x| d.cmp(x)) {
                    Some(Ordering::Greater) => continue,
                    Some(Ordering::Less) | None => {
                        best = Some(d);
                        pairs.clear();
                    }
                    Some(Ordering::Equal) => {}
                }
                pairs.push(((*a).clone(), (*b).clone()));
            }
        }
        self.len_sq = best;
        self.pairs = pairs
            .into_iter()
            .map(|(a, b)| AnchorPair { a, b, kr: fresh() })
            .collect();
    }

    fn signature(&self, sh: &SharedRandomness) -> std::result::Result<Signature, String> {
        match &self.status {
            Status::Bad(why) => Err(why.clone()),
            Status::Degenerate => Ok(Signature::degenerate(sh)),
            Status::Running => {
                let fp = self
                    .pairs
                    .iter()
                    .map(|pr| pr.kr.value().clone())
                    .min()
                    .ok_or_else(|| "no anchor pairs".to_string())?;
                Ok(Signature::new(self.len_sq.clone(), fp, sh))
            }
        }
    }

    fn live_bits(&self, pass: usize, p: &FpPrime) -> u64 {
        if self.status != Status::Running {
            return 0;
        }
        let f = p.bits();
        match pass {
            1 => self.centroid.live_bits(p),
            2 => 2 * f + self.radii.bits(p),
            3 => self.radii.bits(p) + self.sketch.as_ref().map_or(0, |s| s.live_bits(p)),
            4 => 5 * f + self.radii.bits(p) + self.k_radii.bits(p),
            5 => {
                5 * f
                    + self.radii.bits(p)
                    + self.k_radii.bits(p)
                    + self.anchors.iter().map(|a| a.bits()).sum::<u64>()
            }
            _ => {
                let anchors: u64 = self.anchors.iter().map(|a| a.bits()).sum();
                let len = self.len_sq.as_ref().map_or(0, |l| l.bits());
                // Each pair is two anchor indices plus one accumulator.
                let pairs: u64 = self.pairs.iter().map(|pr| 16 + pr.kr.bits()).sum();
                anchors + len + pairs
            }
        }
    }
}

struct SignPass<'a> {
    shared: &'a SharedRandomness,
    pass: usize,
    orients: Vec<Orientation>,
}

impl PassHandler for SignPass<'_> {
    fn begin_pass(&mut self, pass: usize) -> Result<()> {
        self.pass = pass;
        for o in &mut self.orients {
            if o.status == Status::Running {
                o.begin(pass, self.shared);
            }
        }
        Ok(())
    }

    fn observe(&mut self, rec: &PointRecord) -> Result<()> {
        if rec.label != Label::A {
            return Ok(());
        }
        let z = rec.plane()?;
        for o in &mut self.orients {
            if o.status != Status::Running {
                continue;
            }
            let zz = if o.conj { z.conj() } else { z.clone() };
            match o.observe(self.pass, self.shared, &zz, rec.position) {
                Ok(()) => {}
                Err(Error::UndefinedUnderPhi) => o.bad("input undefined mod p"),
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    fn end_pass(&mut self, pass: usize) -> Result<()> {
        for o in &mut self.orients {
            if o.status != Status::Running {
                continue;
            }
            match o.end(pass, self.shared) {
                Ok(()) => {}
                Err(Error::UndefinedUnderPhi) => o.bad("input undefined mod p"),
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    fn live_bits(&self) -> u64 {
        self.orients
            .iter()
            .map(|o| o.live_bits(self.pass.max(1), &self.shared.p))
            .sum()
    }
}

/// Computes the signature of the set labelled `A` in `source`.
pub fn geomsign(
    source: &mut dyn StreamSource,
    shared: &SharedRandomness,
    allow_reflection: bool,
) -> Result<GeomSignResult> {
    if source.header().dim != 2 {
        return Err(Error::InvalidConfig(
            "signatures need a planar stream".into(),
        ));
    }
    if source.header().n_a == 0 {
        return Err(Error::InvalidConfig("empty input".into()));
    }
    let mut orients = vec![Orientation::new(false)];
    if allow_reflection {
        orients.push(Orientation::new(true));
    }
    let mut handler = SignPass {
        shared,
        pass: 0,
        orients,
    };
    let mut driver = PassDriver::new(source, PASSES);
    for _ in 0..PASSES {
        driver.run_pass(&mut handler)?;
    }
    let anchors = handler
        .orients
        .iter()
        .map(|o| o.anchors.len())
        .max()
        .unwrap_or(0);
    let mut best: Option<Signature> = None;
    let mut outcome = None;
    for o in &handler.orients {
        match o.signature(shared) {
            Ok(s) => {
                if best.as_ref().is_none_or(|b| s.key_cmp(b) == Ordering::Less) {
                    best = Some(s);
                }
            }
            Err(reason) => {
                outcome.get_or_insert(SignOutcome::BadPrimeSuspected { reason });
            }
        }
    }
    let outcome = outcome.unwrap_or_else(|| SignOutcome::Signature(best.expect("one orientation")));
    Ok(GeomSignResult {
        outcome,
        passes: driver.passes(),
        peak_bits: driver.peak_bits(),
        anchors,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GeomHashResult {
    pub shared: SharedRandomness,
    pub results: Vec<GeomSignResult>,
}

impl GeomHashResult {
    /// `H(i)`: the encoded signature, or `None` after a bad-prime event.
    pub fn hash(&self, i: usize) -> Option<&str> {
        match &self.results[i].outcome {
            SignOutcome::Signature(s) => Some(&s.encoded),
            SignOutcome::BadPrimeSuspected { .. } => None,
        }
    }
}

/// Signs every set with one shared set of random choices.
pub fn geomhash(sources: &mut [&mut dyn StreamSource], cfg: &GeomConfig) -> Result<GeomHashResult> {
    let m = sources.len();
    let n = sources.iter().map(|s| s.header().n_a).max().unwrap_or(1);
    let u = sources
        .iter()
        .map(|s| s.header().u.clone())
        .max()
        .unwrap_or_else(|| BigInt::from(1));
    let shared = SharedRandomness::generate(cfg.mode, &u, n, m, cfg.seed, cfg.delta.clone())?;
    let results = sources
        .iter_mut()
        .map(|s| geomsign(*s, &shared, cfg.allow_reflection))
        .collect::<Result<Vec<_>>>()?;
    Ok(GeomHashResult { shared, results })
}
