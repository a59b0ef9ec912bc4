//! Acceptance suite: one line per criterion, nonzero exit on any failure.

use std::process::ExitCode;
use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use congstream::bench::{fit_log_model, sweep};
use congstream::cong3d::{self, run3d, Verdict3d};
use congstream::congiden2d::{self, Verdict};
use congstream::exact::{BigRat, GaussianRat, Rat3};
use congstream::field::{
    brute_force_pow2roots, next_prime, pow2root_in_fpi, rational_reconstruct, FpPrime, FpiElem,
};
use congstream::gen::{
    circle_points, congruent_2d, congruent_3d, non_congruent_2d, non_congruent_3d,
    planar_counterexample, planar_counterexample_pair, pythagorean_unit, random_point_2d,
};
use congstream::geomhash::{geomhash, GeomConfig, SignOutcome, MAX_ANCHORS};
use congstream::moments::{cross_set_identity_holds, moment, nonzero_moment_witness, v2};
use congstream::oracle::{brute_force_2d, maps_onto_2d, maps_onto_3d};
use congstream::params::Mode;
use congstream::stream::{MemoryStream, PassDriver, PassHandler, PointRecord};
use congstream::Error;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut agree, mut recheck_failures, mut total) = (0, 0, 0);
    for i in 0..500u64 {
        let n = rng.gen_range(2..=12);
        let u = rng.gen_range(1..=8);
        let inst = if i % 2 == 0 {
            congruent_2d(&mut rng, n, u)
        } else {
            non_congruent_2d(&mut rng, n, u)
        }
        .map_err(|e| e.to_string())?;
        let mut s = inst.to_stream(&mut rng).map_err(|e| e.to_string())?;
        let cfg = congiden2d::Config {
            mode: Mode::Full,
            seed: i,
            ..Default::default()
        };
        let r = congiden2d::run(&mut s, &cfg).map_err(|e| e.to_string())?;
        let truth = brute_force_2d(&inst.a, &inst.b, false).is_some();
        if let Verdict::Congruent(c) = &r.verdict {
            if !maps_onto_2d(&inst.a, &inst.b, c) {
                recheck_failures += 1;
            }
        }
        if matches!(r.verdict, Verdict::Congruent(_)) == truth {
            agree += 1;
        }
        total += 1;
    }
    check(
        agree * 100 >= total * 95 && recheck_failures == 0,
        format!(
            "{agree}/{total} verdicts agree with brute force, {recheck_failures} recheck failures"
        ),
    )
}

/// Points of one circle about 0, built from orbits under `z ↦ iz` and
/// `z ↦ −z` so that low moments cancel.
fn symmetric_circle_set(rng: &mut ChaCha8Rng, size: usize) -> Vec<GaussianRat> {
    let radius = BigRat::new(rng.gen_range(1..=9), rng.gen_range(1..=9));
    let mut out = Vec::with_capacity(size);
    while out.len() < size {
        let left = size - out.len();
        let orbit = [1, 2, 4][rng.gen_range(0..3)].min(if left >= 4 {
            4
        } else if left >= 2 {
            2
        } else {
            1
        });
        let z = circle_points(rng, 1, &radius, 12).remove(0);
        let copies = if rng.gen_bool(0.2) { 2 } else { 1 };
        for _ in 0..copies {
            if out.len() + orbit > size {
                break;
            }
            match orbit {
                1 => out.push(z.clone()),
                2 => out.extend([z.clone(), -&z]),
                _ => out.extend([z.clone(), z.mul_i(), -&z, -&z.mul_i()]),
            }
        }
    }
    out
}

fn moment_theorems() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = Vec::new();
    let mut max_j = 0;
    for _ in 0..1000 {
        let size = rng.gen_range(2..=64);
        let s = symmetric_circle_set(&mut rng, size);
        match nonzero_moment_witness(&s) {
            Ok(Some(j)) if j <= v2(s.len()) => max_j = max_j.max(j),
            other => failures.push(format!("witness {other:?} for |S| = {}", s.len())),
        }
    }
    for _ in 0..200 {
        let size = rng.gen_range(1..=12);
        let t: Vec<GaussianRat> = (0..size).map(|_| random_point_2d(&mut rng, 6)).collect();
        for p in [1, 2, 4] {
            if !cross_set_identity_holds(&t, p) {
                failures.push(format!("cross-set identity fails for p = {p}"));
            }
        }
    }
    for _ in 0..500 {
        let size = 2 * rng.gen_range(0..32) + 1;
        let s = symmetric_circle_set(&mut rng, size);
        if moment(&s, 1).is_zero() {
            failures.push(format!("M1 = 0 for odd |S| = {size}"));
        }
    }
    check(
        failures.is_empty(),
        format!(
            "1000 witnesses (largest j = {max_j}), 600 identity checks, 500 odd sets; {} failures{}",
            failures.len(),
            failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
        ),
    )
}

fn sorted(mut v: Vec<FpiElem>) -> Vec<FpiElem> {
    v.sort();
    v.dedup();
    v
}

fn root_solvers() -> Outcome {
    let mut failures = 0;
    let mut checked = 0;
    for prime in [19u32, 31] {
        let p = FpPrime::new(BigUint::from(prime), 4).map_err(|e| e.to_string())?;
        for j in 0..=4 {
            for re in 0..prime {
                for im in 0..prime {
                    let w = FpiElem::new(BigUint::from(re), BigUint::from(im));
                    if sorted(pow2root_in_fpi(&w, j, &p))
                        != sorted(brute_force_pow2roots(&w, j, &p))
                    {
                        failures += 1;
                    }
                    checked += 1;
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut q_failures = 0;
    for _ in 0..200 {
        let m = rng.gen_range(1..=9);
        let k = rng.gen_range(0..=9);
        let mut rho = pythagorean_unit(m, k);
        for _ in 0..rng.gen_range(0..4) {
            rho = rho.mul_i();
        }
        let j = rng.gen_range(0..=4);
        let w = rho.pow(1 << j);
        if !congstream::exact::pow2root_in_qi(&w, j).contains(&rho) {
            q_failures += 1;
        }
    }
    check(
        failures == 0 && q_failures == 0,
        format!("{checked} F_p[i] cases with {failures} mismatches, 200 Q[i] roots with {q_failures} misses"),
    )
}

fn reconstruction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let bound = BigInt::from(20);
    let mut failures = 0;
    let mut checked = 0;
    let mut primes = Vec::new();
    for _ in 0..5 {
        let lo = BigUint::from(rng.gen_range(801u32..100_000));
        let p = next_prime(&lo, &mut rng);
        let field = FpPrime::new(p.clone(), 4).ok();
        for a in -20i64..=20 {
            for b in 1i64..=20 {
                if num_integer::gcd(a, b) != 1 {
                    continue;
                }
                let r = BigRat::new(a, b);
                let x = match &field {
                    Some(f) => f.phi_rat(&r).map_err(|e| e.to_string())?,
                    None => reduce(&r, &p),
                };
                if rational_reconstruct(&x, &bound, &bound, &p) != Some(r) {
                    failures += 1;
                }
                checked += 1;
            }
        }
        primes.push(p.to_string());
    }
    check(
        failures == 0,
        format!(
            "{checked} fractions over primes {} with {failures} failures",
            primes.join(", ")
        ),
    )
}

/// `a·b⁻¹ mod p` for primes that are not ≡ 3 mod 4.
fn reduce(r: &BigRat, p: &BigUint) -> BigUint {
    let p = BigInt::from(p.clone());
    let num = ((r.numer() % &p) + &p) % &p;
    let inv = r.denom().modpow(&(&p - 2), &p);
    ((num * inv) % &p).to_biguint().unwrap()
}

fn geomhash_pair(
    a: &[GaussianRat],
    b: &[GaussianRat],
    seed: u64,
) -> Result<congstream::geomhash::GeomHashResult, Error> {
    let mut sa = MemoryStream::single_2d(a)?;
    let mut sb = MemoryStream::single_2d(b)?;
    let cfg = GeomConfig {
        mode: Mode::Full,
        seed,
        ..Default::default()
    };
    geomhash(&mut [&mut sa, &mut sb], &cfg)
}

fn geomhash_criteria() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut same, mut unexplained, mut bad_events, mut anchor_violations) = (0, 0, 0, 0);
    let mut max_anchors = 0;
    let mut note = |r: &congstream::geomhash::GeomHashResult| {
        for s in &r.results {
            if let SignOutcome::Signature(_) = s.outcome {
                max_anchors = max_anchors.max(s.anchors);
                if s.anchors > MAX_ANCHORS {
                    anchor_violations += 1;
                }
            }
        }
    };
    for i in 0..200u64 {
        let n = rng.gen_range(2..=12);
        let u = rng.gen_range(1..=8);
        let inst = congruent_2d(&mut rng, n, u).map_err(|e| e.to_string())?;
        let r = geomhash_pair(&inst.a, &inst.b, i).map_err(|e| e.to_string())?;
        note(&r);
        match (r.hash(0), r.hash(1)) {
            (Some(x), Some(y)) if x == y => same += 1,
            (Some(_), Some(_)) => unexplained += 1,
            _ => bad_events += 1,
        }
    }
    let (mut collisions, mut total) = (0, 0);
    while total < 500 {
        let n = rng.gen_range(2..=12);
        let u = rng.gen_range(1..=8);
        let inst = non_congruent_2d(&mut rng, n, u).map_err(|e| e.to_string())?;
        // Signatures cannot tell mirror images apart, so pairs congruent
        // up to reflection are not counted as non-congruent.
        if brute_force_2d(&inst.a, &inst.b, true).is_some() {
            continue;
        }
        let r = geomhash_pair(&inst.a, &inst.b, 10_000 + total).map_err(|e| e.to_string())?;
        note(&r);
        if matches!((r.hash(0), r.hash(1)), (Some(x), Some(y)) if x == y) {
            collisions += 1;
        }
        total += 1;
    }
    check(
        same * 100 >= 200 * 99 && unexplained == 0 && collisions * 100 <= total && anchor_violations == 0,
        format!(
            "{same}/200 congruent pairs share a signature ({bad_events} bad-prime events, {unexplained} unexplained), \
             {collisions}/{total} non-congruent collisions, largest anchor set {max_anchors}"
        ),
    )
}

fn space_accounting() -> Outcome {
    let ns: Vec<usize> = (4..=12).map(|e| 1 << e).collect();
    let us = [2i64, 16, 256];
    let fast = sweep(Mode::Fast, &ns, &us, 6).map_err(|e| e.to_string())?;
    let full = sweep(Mode::Full, &ns, &us, 6).map_err(|e| e.to_string())?;
    let over: Vec<String> = fast
        .iter()
        .chain(&full)
        .filter(|r| !r.within_bound())
        .map(|r| format!("{} n={} U={}", r.mode, r.n, r.u))
        .collect();
    let fit = fit_log_model(&fast);
    check(
        over.is_empty() && fit.r2 >= 0.95,
        format!(
            "{} runs, {} over the bit bound; fast fit peak ≈ {:.0} + {:.2}·log n·(log n + log U), R² = {:.4} \
             (R² = {:.4} without intercept)",
            fast.len() + full.len(),
            over.len(),
            fit.c0,
            fit.c1,
            fit.r2,
            fit.r2_origin
        ),
    )
}

fn three_d() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut recovered, mut recheck_failures, mut false_positives) = (0, 0, 0);
    for i in 0..100u64 {
        let n = rng.gen_range(4..=40);
        let u = rng.gen_range(2..=5);
        let inst = congruent_3d(&mut rng, n, u).map_err(|e| e.to_string())?;
        let mut s = inst.to_stream(&mut rng).map_err(|e| e.to_string())?;
        let cfg = cong3d::Config {
            seed: i,
            ..Default::default()
        };
        let r = run3d(&mut s, &cfg).map_err(|e| e.to_string())?;
        if let Verdict3d::Congruent(m) = &r.verdict {
            if maps_onto_3d(&inst.a, &inst.b, m) {
                recovered += 1;
            } else {
                recheck_failures += 1;
            }
        }
        let inst = non_congruent_3d(&mut rng, n, u).map_err(|e| e.to_string())?;
        let mut s = inst.to_stream(&mut rng).map_err(|e| e.to_string())?;
        let r = run3d(&mut s, &cfg).map_err(|e| e.to_string())?;
        if let Verdict3d::Congruent(m) = &r.verdict {
            if !maps_onto_3d(&inst.a, &inst.b, m) {
                false_positives += 1;
            }
        }
    }
    let pts = planar_counterexample();
    let sum = pts.iter().fold(Rat3::zero(), |acc, v| &acc + v);
    let normal = Rat3::from_ints(1, 1, 1);
    let planar_ok = sum.is_zero()
        && pts
            .iter()
            .all(|v| v.norm_sq() == BigRat::from(98) && v.dot(&normal).is_zero());
    let pair = planar_counterexample_pair(&mut rng);
    let mut s = pair.to_stream(&mut rng).map_err(|e| e.to_string())?;
    let r = run3d(&mut s, &cong3d::Config::default()).map_err(|e| e.to_string())?;
    let pair_ok =
        matches!(&r.verdict, Verdict3d::Congruent(m) if maps_onto_3d(&pair.a, &pair.b, m));
    check(
        recovered >= 60 && recheck_failures == 0 && false_positives == 0 && planar_ok && pair_ok,
        format!(
            "{recovered}/100 recovered, {recheck_failures} recheck failures, {false_positives} false positives; \
             planar set pinned: {planar_ok}, identified: {pair_ok}"
        ),
    )
}

struct Idle;

impl PassHandler for Idle {
    fn observe(&mut self, _: &PointRecord) -> congstream::Result<()> {
        Ok(())
    }
    fn live_bits(&self) -> u64 {
        0
    }
}

fn pass_discipline() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut counts = [Vec::new(), Vec::new(), Vec::new()];
    for i in 0..20u64 {
        let n = rng.gen_range(2..=12);
        let kind_congruent = i % 2 == 0;
        let inst = if kind_congruent {
            congruent_2d(&mut rng, n, 4)
        } else {
            non_congruent_2d(&mut rng, n, 4)
        }
        .map_err(|e| e.to_string())?;
        let mut s = inst.to_stream(&mut rng).map_err(|e| e.to_string())?;
        let r = congiden2d::run(
            &mut s,
            &congiden2d::Config {
                seed: i,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        counts[0].push(r.passes);
        let g = geomhash_pair(&inst.a, &inst.b, i).map_err(|e| e.to_string())?;
        counts[1].extend(g.results.iter().map(|x| x.passes));
        let inst = if kind_congruent {
            congruent_3d(&mut rng, n, 3)
        } else {
            non_congruent_3d(&mut rng, n, 3)
        }
        .map_err(|e| e.to_string())?;
        let mut s = inst.to_stream(&mut rng).map_err(|e| e.to_string())?;
        let r = run3d(
            &mut s,
            &cong3d::Config {
                seed: i,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        counts[2].push(r.passes);
    }
    let exact = |v: &[usize], k: usize| v.iter().all(|&p| p == k);
    let mut s = MemoryStream::single_2d(&[GaussianRat::one()]).map_err(|e| e.to_string())?;
    let mut driver = PassDriver::new(&mut s, 1);
    let first = driver.run_pass(&mut Idle).is_ok();
    let enforced = first
        && matches!(
            driver.run_pass(&mut Idle),
            Err(Error::PassBudgetExceeded { .. })
        );
    check(
        exact(&counts[0], 3) && exact(&counts[1], 6) && exact(&counts[2], 6) && enforced,
        format!(
            "run2d passes {:?}, geomsign passes {:?}, run3d passes {:?}, budget overrun rejected: {enforced}",
            summary(&counts[0]),
            summary(&counts[1]),
            summary(&counts[2])
        ),
    )
}

fn summary(v: &[usize]) -> Vec<usize> {
    let mut s = v.to_vec();
    s.sort();
    s.dedup();
    s
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("2D oracle agreement", oracle_agreement),
        ("moment theorems", moment_theorems),
        ("root solvers", root_solvers),
        ("rational reconstruction", reconstruction),
        ("GeomHash completeness and soundness", geomhash_criteria),
        ("space accounting", space_accounting),
        ("3D end-to-end", three_d),
        ("pass discipline", pass_discipline),
    ];
    let results: Vec<(Outcome, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|(_, f)| {
                s.spawn(move || {
                    let t = Instant::now();
                    (f(), t.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| (Err("panicked".into()), 0.0)))
            .collect()
    });
    let mut all = true;
    for (i, ((name, _), (outcome, secs))) in criteria.iter().zip(&results).enumerate() {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                all = false;
                ("FAIL", d)
            }
        };
        println!("criterion {} ({name}): {tag}: {detail} [{secs:.1}s]", i + 1);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
