//! Three-pass streaming identification of a rotation and translation
//! taking `A` onto `B` in the rational plane.
//!
//! Pass 1 hashes both centroids into F_p[i]. Pass 2 keeps the power-of-two
//! moments of the points on one reference circle; post-processing turns
//! their ratio into at most eight candidate rotations, each reconstructed
//! back to Q[i]. Pass 3 checks every candidate with Karp–Rabin
//! fingerprints.

use num_bigint::{BigInt, BigUint};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{GaussianRat, RotationBounds};
use crate::field::{pow2root_in_fpi, reconstruct_gaussian, FpPrime};
use crate::fingerprint::{choose_q, idx_point, KRState};
use crate::moments::{floor_log2, CentroidSketch, MomentSketch};
use crate::params::{delta_2d, reconstruction_bound, verify_q_range_2d, Mode};
use crate::stream::{Label, PassDriver, PassHandler, PointRecord, StreamSource};

/// Passes used by one attempt.
pub const PASSES: usize = 3;

#[derive(Clone, Debug, Default)]
pub struct Config {
    pub mode: Mode,
    pub seed: u64,
    /// Also accept `B = ρ·conj(A) + t`.
    pub allow_reflection: bool,
    /// Fresh-prime reruns after a bad-prime outcome.
    pub retries: u32,
    /// Overrides the mode's prime range.
    pub delta: Option<BigUint>,
}

/// A map `z ↦ ρz + t`, or `z ↦ ρ·conj(z) + t` when `reflected`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TransformCandidate {
    pub rho: GaussianRat,
    pub t: GaussianRat,
    pub reflected: bool,
}

impl TransformCandidate {
    pub fn apply(&self, z: &GaussianRat) -> GaussianRat {
        let z = if self.reflected { z.conj() } else { z.clone() };
        &self.rho * &z + self.t.clone()
    }

    fn bits(&self) -> u64 {
        self.rho.bits() + self.t.bits() + 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Congruent(TransformCandidate),
    NotCongruent,
    BadPrimeSuspected,
}

#[derive(Clone, Debug, Serialize)]
pub struct CongIdenResult {
    pub verdict: Verdict,
    pub passes: usize,
    pub peak_bits: u64,
    /// Field prime of each attempt.
    #[serde(serialize_with = "crate::ser::display_vec")]
    pub primes: Vec<BigUint>,
    /// Verification prime of each attempt.
    #[serde(serialize_with = "crate::ser::display_vec")]
    pub verify_primes: Vec<BigUint>,
    /// Candidates reaching the verification pass, summed over attempts.
    pub candidates: usize,
}

/// Outcome of the post-processing stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PostProcess {
    Candidates(Vec<TransformCandidate>),
    NotCongruent,
    BadPrimeSuspected,
}

struct CentroidPass<'a> {
    p: &'a FpPrime,
    sketch: CentroidSketch,
}

impl PassHandler for CentroidPass<'_> {
    fn observe(&mut self, rec: &PointRecord) -> Result<()> {
        self.sketch.update(self.p, rec.label, rec.plane()?)
    }
    fn live_bits(&self) -> u64 {
        self.sketch.live_bits(self.p)
    }
}

struct MomentPass<'a> {
    p: &'a FpPrime,
    sketch: MomentSketch,
}

impl PassHandler for MomentPass<'_> {
    fn observe(&mut self, rec: &PointRecord) -> Result<()> {
        self.sketch
            .update(self.p, rec.label, rec.plane()?, rec.position)
    }
    fn live_bits(&self) -> u64 {
        self.sketch.live_bits(self.p)
    }
}

struct Idle;

impl PassHandler for Idle {
    fn observe(&mut self, _rec: &PointRecord) -> Result<()> {
        Ok(())
    }
    fn live_bits(&self) -> u64 {
        0
    }
}

struct Check {
    cand: TransformCandidate,
    h_a: KRState,
    h_b: KRState,
}

struct VerifyPass {
    u: BigInt,
    checks: Vec<Check>,
}

impl PassHandler for VerifyPass {
    fn observe(&mut self, rec: &PointRecord) -> Result<()> {
        let z = rec.plane()?;
        for c in &mut self.checks {
            match rec.label {
                Label::A => {
                    if c.h_a.aborted {
                        continue;
                    }
                    let w = c.cand.apply(z);
                    if w.is_u_rational(&self.u) {
                        c.h_a.feed(&idx_point(&w, &self.u)?);
                    } else {
                        c.h_a.abort();
                    }
                }
                Label::B => c.h_b.feed(&idx_point(z, &self.u)?),
            }
        }
        Ok(())
    }
    fn live_bits(&self) -> u64 {
        self.checks
            .iter()
            .map(|c| c.cand.bits() + c.h_a.bits() + c.h_b.bits())
            .sum()
    }
}

/// Turns the moment sketch into candidate transforms.
pub fn post_process_candidates(
    p: &FpPrime,
    sketch: &MomentSketch,
    u: &BigInt,
    mode: Mode,
    allow_reflection: bool,
) -> Result<PostProcess> {
    if sketch.is_degenerate() {
        // Every point sits on its centroid, so both centroids are inputs.
        let n = reconstruction_bound(mode, u, p.p())?;
        let c_a = reconstruct_gaussian(&sketch.c_hat[0], &n, &n, p);
        let c_b = reconstruct_gaussian(&sketch.c_hat[1], &n, &n, p);
        return Ok(match (c_a, c_b) {
            (Some(c_a), Some(c_b)) => PostProcess::Candidates(vec![TransformCandidate {
                rho: GaussianRat::one(),
                t: c_b - c_a,
                reflected: false,
            }]),
            _ => PostProcess::BadPrimeSuspected,
        });
    }
    let [m_a, m_b] = &sketch.moments;
    let Some(j) = (0..m_a.len()).find(|&j| !m_a[j].is_zero() || !m_b[j].is_zero()) else {
        return Ok(PostProcess::BadPrimeSuspected);
    };
    if m_a[j].is_zero() || m_b[j].is_zero() {
        return Ok(PostProcess::NotCongruent);
    }
    let bounds = RotationBounds::for_precision(u);
    let n_rho = reconstruction_bound(mode, &bounds.rho, p.p())?;
    let n_t = reconstruction_bound(mode, &bounds.t, p.p())?;
    let mut out = Vec::new();
    let orientations: &[bool] = if allow_reflection {
        &[false, true]
    } else {
        &[false]
    };
    for &reflected in orientations {
        let (ma, ca) = if reflected {
            (p.fpi_conj(&m_a[j]), p.fpi_conj(&sketch.c_hat[0]))
        } else {
            (m_a[j].clone(), sketch.c_hat[0].clone())
        };
        let w = p.fpi_mul(&m_b[j], &p.fpi_inv(&ma)?);
        for g in pow2root_in_fpi(&w, j as u32, p) {
            let t_hat = p.fpi_sub(&sketch.c_hat[1], &p.fpi_mul(&g, &ca));
            let Some(rho) = reconstruct_gaussian(&g, &n_rho, &n_rho, p) else {
                continue;
            };
            if !rho.norm_sq().is_one() {
                continue;
            }
            let Some(t) = reconstruct_gaussian(&t_hat, &n_t, &n_t, p) else {
                continue;
            };
            out.push(TransformCandidate { rho, t, reflected });
        }
    }
    Ok(PostProcess::Candidates(out))
}

/// Runs the verification pass and returns the candidates whose
/// fingerprints of `ρA + t` and `B` agree.
pub fn verify_pass(
    driver: &mut PassDriver<'_>,
    candidates: &[TransformCandidate],
    rng: &mut ChaCha20Rng,
) -> Result<(Vec<TransformCandidate>, BigUint)> {
    let header = driver.header().clone();
    let (lo, hi) = verify_q_range_2d(&header.u, header.n_a);
    let q = choose_q(&lo, &hi, rng)?;
    let checks = candidates
        .iter()
        .map(|c| {
            let h_a = KRState::random(q.clone(), rng);
            let h_b = KRState::new(q.clone(), h_a.base.clone());
            Check {
                cand: c.clone(),
                h_a,
                h_b,
            }
        })
        .collect();
    let mut pass = VerifyPass {
        u: header.u.clone(),
        checks,
    };
    driver.run_pass(&mut pass)?;
    let survivors = pass
        .checks
        .into_iter()
        .filter(|c| !c.h_a.aborted && c.h_a.value() == c.h_b.value())
        .map(|c| c.cand)
        .collect();
    Ok((survivors, q))
}

fn attempt(
    driver: &mut PassDriver<'_>,
    cfg: &Config,
    rng: &mut ChaCha20Rng,
    report: &mut CongIdenResult,
) -> Result<Verdict> {
    let header = driver.header().clone();
    let n = header.n_a;
    let delta = cfg
        .delta
        .clone()
        .unwrap_or_else(|| delta_2d(cfg.mode, &header.u, n));
    let p = FpPrime::sample(&delta, 16, rng)?;
    report.primes.push(p.p().clone());

    let mut first = CentroidPass {
        p: &p,
        sketch: CentroidSketch::default(),
    };
    // A bad prime seen in the first two passes still leaves the remaining
    // passes to run empty, so every attempt has the same pass count.
    let post = match driver
        .run_pass(&mut first)
        .and_then(|_| first.sketch.finalize(&p))
    {
        Ok(c_hat) => {
            let mut second = MomentPass {
                p: &p,
                sketch: MomentSketch::new(c_hat, floor_log2(n)),
            };
            match driver.run_pass(&mut second) {
                Ok(()) => post_process_candidates(
                    &p,
                    &second.sketch,
                    &header.u,
                    cfg.mode,
                    cfg.allow_reflection,
                )?,
                Err(Error::UndefinedUnderPhi) => PostProcess::BadPrimeSuspected,
                Err(e) => return Err(e),
            }
        }
        Err(Error::UndefinedUnderPhi) => {
            driver.run_pass(&mut Idle)?;
            PostProcess::BadPrimeSuspected
        }
        Err(e) => return Err(e),
    };
    let candidates = match &post {
        PostProcess::Candidates(c) => c.clone(),
        _ => Vec::new(),
    };
    report.candidates += candidates.len();

    let (survivors, q) = verify_pass(driver, &candidates, rng)?;
    report.verify_primes.push(q);
    Ok(match (post, survivors.into_iter().next()) {
        (_, Some(c)) => Verdict::Congruent(c),
        (PostProcess::BadPrimeSuspected, None) => Verdict::BadPrimeSuspected,
        _ => Verdict::NotCongruent,
    })
}

/// Runs the full algorithm on a planar two-set stream.
pub fn run(source: &mut dyn StreamSource, cfg: &Config) -> Result<CongIdenResult> {
    let header = source.header().clone();
    if header.dim != 2 {
        return Err(Error::InvalidConfig("run2d needs a planar stream".into()));
    }
    let n_b = header
        .n_b
        .ok_or_else(|| Error::InvalidConfig("run2d needs both labels".into()))?;
    let mut report = CongIdenResult {
        verdict: Verdict::NotCongruent,
        passes: 0,
        peak_bits: 0,
        primes: Vec::new(),
        verify_primes: Vec::new(),
        candidates: 0,
    };
    if header.n_a == 0 {
        return Err(Error::InvalidConfig("empty input".into()));
    }
    if header.n_a != n_b {
        return Ok(report);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut driver = PassDriver::new(source, PASSES);
    for round in 0..=cfg.retries {
        if round > 0 {
            driver.extend_budget(PASSES);
        }
        report.verdict = attempt(&mut driver, cfg, &mut rng, &mut report)?;
        if report.verdict != Verdict::BadPrimeSuspected {
            break;
        }
    }
    report.passes = driver.passes();
    report.peak_bits = driver.peak_bits();
    Ok(report)
}
