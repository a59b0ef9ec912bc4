use std::collections::BTreeMap;

use num_bigint::BigInt;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use congstream::cong3d::{self, Verdict3d};
use congstream::congiden2d::{self, post_process_candidates, PostProcess, Verdict};
use congstream::exact::{GaussianRat, Rat3};
use congstream::field::FpPrime;
use congstream::gen::{congruent_2d, congruent_3d, non_congruent_2d};
use congstream::moments::{floor_log2, CentroidSketch, MomentSketch};
use congstream::oracle::{all_transforms_2d, brute_force_2d};
use congstream::params::delta_2d;
use congstream::stream::{FileStream, Label, PointRecord, StreamSource};
use congstream::Mode;

fn multiset<T: Ord + Clone>(v: impl IntoIterator<Item = T>) -> BTreeMap<T, usize> {
    let mut m = BTreeMap::new();
    for x in v {
        *m.entry(x).or_insert(0) += 1;
    }
    m
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn run2d_congruent_answers_are_exact(seed in any::<u64>(), n in 2usize..10, u in 1i64..7, planted in any::<bool>()) {
        let mut r = rng(seed);
        let inst = if planted { congruent_2d(&mut r, n, u) } else { non_congruent_2d(&mut r, n, u) }.unwrap();
        let mut s = inst.to_stream(&mut r).unwrap();
        let cfg = congiden2d::Config { seed, retries: 2, ..Default::default() };
        let res = congiden2d::run(&mut s, &cfg).unwrap();
        prop_assert_eq!(res.passes % congiden2d::PASSES, 0);
        if let Verdict::Congruent(c) = res.verdict {
            prop_assert_eq!(multiset(inst.a.iter().map(|z| c.apply(z))), multiset(inst.b.iter().cloned()));
            prop_assert!(brute_force_2d(&inst.a, &inst.b, false).is_some());
        }
    }

    #[test]
    fn stream_files_round_trip(seed in any::<u64>(), n in 1usize..12, u in 1i64..9) {
        let mut r = rng(seed);
        let inst = congruent_2d(&mut r, n, u).unwrap();
        let mem = inst.to_stream(&mut r).unwrap();
        let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!("round_trip_{seed}.stream"));
        mem.save(&path).unwrap();
        let mut file = FileStream::open(&path).unwrap();
        prop_assert_eq!(file.header(), mem.header());
        for _ in 0..2 {
            file.rewind().unwrap();
            let mut got: Vec<PointRecord> = Vec::new();
            while let Some(rec) = file.next_record().unwrap() {
                got.push(rec);
            }
            prop_assert_eq!(got.len(), mem.records().len());
            for (rec, (label, point)) in got.iter().zip(mem.records()) {
                prop_assert_eq!(rec.label, *label);
                prop_assert_eq!(&rec.point, point);
            }
        }
        prop_assert_eq!(file.passes(), 2);
        std::fs::remove_file(&path).unwrap();
    }
}

fn sketch_candidates(a: &[GaussianRat], b: &[GaussianRat], u: i64, p: &FpPrime) -> PostProcess {
    let records = || {
        a.iter()
            .map(|z| (Label::A, z))
            .chain(b.iter().map(|z| (Label::B, z)))
            .enumerate()
    };
    let mut c = CentroidSketch::default();
    for (_, (label, z)) in records() {
        c.update(p, label, z).unwrap();
    }
    let mut m = MomentSketch::new(c.finalize(p).unwrap(), floor_log2(a.len()));
    for (i, (label, z)) in records() {
        m.update(p, label, z, i).unwrap();
    }
    post_process_candidates(p, &m, &BigInt::from(u), Mode::Full, false).unwrap()
}

#[test]
fn planted_transform_is_among_candidates() {
    let mut r = rng(77);
    let mut bad = 0;
    for _ in 0..500 {
        let n = rand::Rng::gen_range(&mut r, 2..=10);
        let u = rand::Rng::gen_range(&mut r, 1..=6);
        let inst = congruent_2d(&mut r, n, u).unwrap();
        let p = FpPrime::sample(&delta_2d(Mode::Full, &BigInt::from(u), n), 16, &mut r).unwrap();
        let valid = all_transforms_2d(&inst.a, &inst.b, false);
        assert!(!valid.is_empty());
        match sketch_candidates(&inst.a, &inst.b, u, &p) {
            PostProcess::Candidates(cands) => {
                assert!(
                    cands.iter().any(|c| valid.contains(c)),
                    "no valid transform among {cands:?}"
                );
            }
            PostProcess::BadPrimeSuspected => bad += 1,
            PostProcess::NotCongruent => panic!("congruent instance rejected by the sketch"),
        }
    }
    // Full-range primes are good except with probability about 1/n.
    assert!(bad <= 25, "{bad} bad-prime outcomes");
}

#[test]
fn run3d_recovers_the_generating_rotation() {
    let mut r = rng(5);
    let mut exact = 0;
    let mut congruent = 0;
    for i in 0..30u64 {
        let inst = congruent_3d(&mut r, 8, 5).unwrap();
        let (rot, t) = inst.truth.clone().unwrap();
        let mut s = inst.to_stream(&mut r).unwrap();
        let res = cong3d::run3d(
            &mut s,
            &cong3d::Config {
                seed: i,
                retries: 1,
                ..Default::default()
            },
        )
        .unwrap();
        if let Verdict3d::Congruent(m) = res.verdict {
            congruent += 1;
            let image: Vec<Rat3> = inst.a.iter().map(|v| m.apply(v)).collect();
            assert_eq!(multiset(image), multiset(inst.b.iter().cloned()));
            if m.r == rot && m.t == t {
                exact += 1;
            }
        }
    }
    // Eight random points almost never have a nontrivial symmetry, so a
    // verified motion is the generating one.
    assert!(congruent >= 18, "{congruent}/30 recovered");
    assert_eq!(exact, congruent);
}
