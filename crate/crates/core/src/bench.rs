//! Space sweeps of the 2D identification run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::congiden2d::{run, Config, Verdict};
use crate::error::Result;
use crate::gen::congruent_2d;
use crate::moments::floor_log2;
use crate::params::Mode;

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub u: i64,
    pub mode: Mode,
    pub p_bits: u64,
    pub peak_bits: u64,
    /// `64·(⌊log₂ n⌋ + 1)·bitlen(p)`.
    pub bound: u64,
    pub passes: usize,
    pub congruent: bool,
}

impl BenchRow {
    pub fn within_bound(&self) -> bool {
        self.peak_bits <= self.bound
    }

    /// `log₂ n · (log₂ n + log₂ U)`, the predicted growth term.
    pub fn model_term(&self) -> f64 {
        let ln = (self.n as f64).log2();
        ln * (ln + (self.u as f64).log2())
    }
}

/// Runs one planted congruent instance of size `n` and precision `u`.
pub fn bench_point(mode: Mode, n: usize, u: i64, seed: u64) -> Result<BenchRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((n as u64) << 20) ^ (u as u64));
    let inst = congruent_2d(&mut rng, n, u)?;
    let mut stream = inst.to_stream(&mut rng)?;
    let cfg = Config {
        mode,
        seed,
        ..Config::default()
    };
    let r = run(&mut stream, &cfg)?;
    let p_bits = r.primes.iter().map(|p| p.bits()).max().unwrap_or(0);
    Ok(BenchRow {
        n,
        u,
        mode,
        p_bits,
        peak_bits: r.peak_bits,
        bound: 64 * (floor_log2(n) as u64 + 1) * p_bits,
        passes: r.passes,
        congruent: matches!(r.verdict, Verdict::Congruent(_)),
    })
}

/// Every `(n, u)` combination.
pub fn sweep(mode: Mode, ns: &[usize], us: &[i64], seed: u64) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::with_capacity(ns.len() * us.len());
    for &u in us {
        for &n in ns {
            rows.push(bench_point(mode, n, u, seed)?);
        }
    }
    Ok(rows)
}

/// Least-squares fit of `peak ≈ c₀ + c₁·log n·(log n + log U)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Fit {
    pub c0: f64,
    pub c1: f64,
    pub r2: f64,
    /// R² of the best fit with `c₀ = 0`.
    pub r2_origin: f64,
}

pub fn fit_log_model(rows: &[BenchRow]) -> Fit {
    let xs: Vec<f64> = rows.iter().map(BenchRow::model_term).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.peak_bits as f64).collect();
    let k = xs.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / k;
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = |res: f64| {
        if ss_tot == 0.0 {
            1.0
        } else {
            1.0 - res / ss_tot
        }
    };
    let c1 = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let c0 = my - c1 * mx;
    let res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - c0 - c1 * x).powi(2))
        .sum();
    let raw_xx: f64 = xs.iter().map(|x| x * x).sum();
    let raw_xy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let c = if raw_xx == 0.0 { 0.0 } else { raw_xy / raw_xx };
    let res_origin: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - c * x).powi(2)).sum();
    Fit {
        c0,
        c1,
        r2: r2(res),
        r2_origin: r2(res_origin),
    }
}

/// Parses `2^a..2^b` (powers of two) or a comma-separated list.
pub fn parse_sizes(spec: &str) -> Option<Vec<usize>> {
    if let Some((lo, hi)) = spec.split_once("..") {
        let exp = |s: &str| s.trim().strip_prefix("2^")?.parse::<u32>().ok();
        let (a, b) = (exp(lo)?, exp(hi)?);
        if a > b || b >= usize::BITS {
            return None;
        }
        return Some((a..=b).map(|e| 1usize << e).collect());
    }
    spec.split(',').map(|s| s.trim().parse().ok()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(parse_sizes("2^4..2^6"), Some(vec![16, 32, 64]));
        assert_eq!(parse_sizes("3, 5"), Some(vec![3, 5]));
        assert_eq!(parse_sizes("2^6..2^4"), None);
    }

    #[test]
    fn exact_fit() {
        let rows: Vec<BenchRow> = [(4usize, 2i64), (16, 2), (16, 16), (256, 2)]
            .iter()
            .map(|&(n, u)| {
                let mut r = BenchRow {
                    n,
                    u,
                    mode: Mode::Fast,
                    p_bits: 0,
                    peak_bits: 0,
                    bound: 0,
                    passes: 3,
                    congruent: true,
                };
                r.peak_bits = (r.model_term() * 5.0) as u64 + 100;
                r
            })
            .collect();
        let fit = fit_log_model(&rows);
        assert!((fit.c1 - 5.0).abs() < 0.1);
        assert!((fit.c0 - 100.0).abs() < 1.0);
        assert!(fit.r2 > 0.999);
        assert!(fit.r2_origin < fit.r2);
    }
}
