use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::{json, Value};

use congstream::bench::{fit_log_model, parse_sizes, sweep};
use congstream::cong3d::{self, Verdict3d};
use congstream::congiden2d::{self, Verdict};
use congstream::gen::{generate_2d, generate_3d, Kind};
use congstream::geomhash::{geomhash, GeomConfig, SignOutcome};
use congstream::oracle::{brute_force_2d, brute_force_3d};
use congstream::stream::{read_points, FileStream, Point, StreamSource};
use congstream::{Error, Mode};

const EXIT_CONGRUENT: u8 = 0;
const EXIT_NOT_CONGRUENT: u8 = 1;
const EXIT_BAD_PRIME: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "congstream",
    version,
    about = "Streaming congruence identification and geometric hashing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance and its truth sidecar.
    Gen(GenArgs),
    /// Identify a planar congruence in three passes.
    Run2d(RunArgs),
    /// Identify a spatial congruence in six passes.
    Run3d(RunArgs),
    /// Sign every set listed in a manifest with shared randomness.
    Hash(HashArgs),
    /// Exact brute-force answer for a stream file.
    Oracle(OracleArgs),
    /// Peak sketch size of planted 2D runs over a grid of sizes.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct Knobs {
    #[arg(long, default_value = "full")]
    mode: Mode,
    /// Lower end of the prime range; fast mode only.
    #[arg(long)]
    delta: Option<BigUint>,
    #[arg(long)]
    allow_reflection: bool,
    /// Reruns with fresh randomness after a bad-prime outcome.
    #[arg(long, default_value_t = 0)]
    retry_bad_prime: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl Knobs {
    fn check(&self) -> Result<(), String> {
        if self.delta.is_some() && self.mode != Mode::Fast {
            return Err("--delta requires --mode fast".into());
        }
        Ok(())
    }

    fn echo(&self) -> Value {
        json!({
            "mode": self.mode,
            "delta": self.delta.as_ref().map(|d| d.to_string()),
            "allow_reflection": self.allow_reflection,
            "retry_bad_prime": self.retry_bad_prime,
        })
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 2)]
    dim: u8,
    #[arg(long)]
    n: usize,
    #[arg(long = "u")]
    u: i64,
    #[arg(long, default_value = "congruent")]
    kind: Kind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stream file to write; the truth goes next to it as `<out>.truth.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    knobs: Knobs,
    file: PathBuf,
}

#[derive(Args)]
struct HashArgs {
    #[command(flatten)]
    knobs: Knobs,
    /// One stream path per line, relative to the manifest's directory.
    #[arg(long)]
    manifest: PathBuf,
    /// Expected number of sets.
    #[arg(long)]
    m: Option<usize>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    allow_reflection: bool,
    file: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    knobs: Knobs,
    /// `n=2^a..2^b` or `n=16,32,...`.
    #[arg(long, default_value = "n=2^4..2^12")]
    sweep: String,
    /// Comma-separated precision bounds.
    #[arg(long = "u", default_value = "2,16,256")]
    u: String,
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

struct Report {
    body: Value,
    code: u8,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let start = Instant::now();
    match dispatch(cli.command) {
        Ok(Report { mut body, code }) => {
            body["wall_time_ms"] = json!(start.elapsed().as_secs_f64() * 1e3);
            let text = serde_json::to_string_pretty(&body).expect("report serializes");
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::from(code)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn dispatch(cmd: Command) -> Result<Report, Failure> {
    match cmd {
        Command::Gen(a) => gen(a),
        Command::Run2d(a) => run2d(a),
        Command::Run3d(a) => run3d(a),
        Command::Hash(a) => hash(a),
        Command::Oracle(a) => oracle(a),
        Command::Bench(a) => bench(a),
    }
}

fn base(command: &str, seed: Option<u64>, config: Value) -> Value {
    json!({ "v": 1, "command": command, "seed": seed, "config": config })
}

fn truth_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".truth.json");
    PathBuf::from(s)
}

fn gen(a: GenArgs) -> Result<Report, Failure> {
    let mut rng = ChaCha20Rng::seed_from_u64(a.seed);
    let (stream, truth) = match a.dim {
        2 => {
            let inst = generate_2d(&mut rng, a.kind, a.n, a.u)?;
            let truth = inst
                .truth
                .as_ref()
                .map(|(rho, t)| json!({ "rho": rho, "t": t }));
            (inst.to_stream(&mut rng)?, truth)
        }
        3 => {
            let inst = generate_3d(&mut rng, a.kind, a.n, a.u)?;
            let truth = inst.truth.as_ref().map(|(r, t)| json!({ "r": r, "t": t }));
            (inst.to_stream(&mut rng)?, truth)
        }
        d => return Err(Failure::Usage(format!("--dim must be 2 or 3, got {d}"))),
    };
    stream.save(&a.out)?;
    let sidecar = json!({ "v": 1, "dim": a.dim, "kind": a.kind, "truth": truth });
    let tp = truth_path(&a.out);
    std::fs::write(
        &tp,
        serde_json::to_string_pretty(&sidecar).expect("truth serializes") + "\n",
    )
    .map_err(Error::from)?;
    let mut body = base(
        "gen",
        Some(a.seed),
        json!({ "dim": a.dim, "n": a.n, "u": a.u, "kind": a.kind }),
    );
    body["header"] = json!(stream.header());
    body["stream"] = json!(a.out);
    body["truth_file"] = json!(tp);
    body["truth"] = sidecar["truth"].clone();
    Ok(Report {
        body,
        code: EXIT_CONGRUENT,
    })
}

fn run2d(a: RunArgs) -> Result<Report, Failure> {
    a.knobs.check().map_err(Failure::Usage)?;
    let mut src = FileStream::open(&a.file)?;
    let cfg = congiden2d::Config {
        mode: a.knobs.mode,
        seed: a.knobs.seed,
        allow_reflection: a.knobs.allow_reflection,
        retries: a.knobs.retry_bad_prime,
        delta: a.knobs.delta.clone(),
    };
    let r = congiden2d::run(&mut src, &cfg)?;
    let code = match r.verdict {
        Verdict::Congruent(_) => EXIT_CONGRUENT,
        Verdict::NotCongruent => EXIT_NOT_CONGRUENT,
        Verdict::BadPrimeSuspected => EXIT_BAD_PRIME,
    };
    let mut body = base("run2d", Some(a.knobs.seed), a.knobs.echo());
    body["input"] = json!(a.file);
    body["verdict"] = json!(r.verdict);
    body["primes"] = json!(r.primes.iter().map(ToString::to_string).collect::<Vec<_>>());
    body["verify_primes"] = json!(r
        .verify_primes
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>());
    body["passes"] = json!(r.passes);
    body["peak_bits"] = json!(r.peak_bits);
    body["candidates"] = json!(r.candidates);
    Ok(Report { body, code })
}

fn run3d(a: RunArgs) -> Result<Report, Failure> {
    a.knobs.check().map_err(Failure::Usage)?;
    let mut src = FileStream::open(&a.file)?;
    let cfg = cong3d::Config {
        seed: a.knobs.seed,
        allow_reflection: a.knobs.allow_reflection,
        retries: a.knobs.retry_bad_prime,
        delta: a.knobs.delta.clone(),
    };
    let r = cong3d::run3d(&mut src, &cfg)?;
    let code = match r.verdict {
        Verdict3d::Congruent(_) => EXIT_CONGRUENT,
        Verdict3d::NotCongruent => EXIT_NOT_CONGRUENT,
        Verdict3d::BadPrimeSuspected => EXIT_BAD_PRIME,
    };
    let mut body = base("run3d", Some(a.knobs.seed), a.knobs.echo());
    body["input"] = json!(a.file);
    body["verdict"] = json!(r.verdict);
    body["primes"] = json!(r.primes.iter().map(ToString::to_string).collect::<Vec<_>>());
    body["fingerprint_primes"] = json!(r
        .fingerprint_primes
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>());
    body["passes"] = json!(r.passes);
    body["peak_bits"] = json!(r.peak_bits);
    body["sample_sizes"] = json!(r.sample_sizes);
    body["counts"] = json!(r.counts);
    Ok(Report { body, code })
}

fn read_manifest(path: &Path) -> Result<Vec<PathBuf>, Failure> {
    let text = std::fs::read_to_string(path).map_err(Error::from)?;
    let dir = path.parent().unwrap_or(Path::new(""));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| dir.join(l))
        .collect())
}

fn hash(a: HashArgs) -> Result<Report, Failure> {
    a.knobs.check().map_err(Failure::Usage)?;
    let paths = read_manifest(&a.manifest)?;
    if paths.is_empty() {
        return Err(Failure::Usage("manifest lists no files".into()));
    }
    if let Some(m) = a.m {
        if m != paths.len() {
            return Err(Failure::Usage(format!(
                "--m {m} but the manifest lists {} files",
                paths.len()
            )));
        }
    }
    let mut attempt = 0;
    let (result, seed) = loop {
        let seed = a.knobs.seed.wrapping_add(attempt as u64);
        let mut files = paths
            .iter()
            .map(FileStream::open)
            .collect::<Result<Vec<_>, _>>()?;
        let mut sources: Vec<&mut dyn StreamSource> = files
            .iter_mut()
            .map(|f| f as &mut dyn StreamSource)
            .collect();
        let cfg = GeomConfig {
            mode: a.knobs.mode,
            seed,
            allow_reflection: a.knobs.allow_reflection,
            delta: a.knobs.delta.clone(),
        };
        let r = geomhash(&mut sources, &cfg)?;
        let bad = (0..paths.len()).any(|i| r.hash(i).is_none());
        if !bad || attempt >= a.knobs.retry_bad_prime {
            break (r, seed);
        }
        attempt += 1;
    };
    let bad = (0..paths.len()).any(|i| result.hash(i).is_none());
    let sets: Vec<Value> = paths
        .iter()
        .zip(&result.results)
        .map(|(p, r)| {
            let (signature, reason) = match &r.outcome {
                SignOutcome::Signature(s) => (Some(s.encoded.clone()), None),
                SignOutcome::BadPrimeSuspected { reason } => (None, Some(reason.clone())),
            };
            json!({
                "input": p,
                "signature": signature,
                "bad_prime": reason,
                "passes": r.passes,
                "peak_bits": r.peak_bits,
                "anchors": r.anchors,
            })
        })
        .collect();
    let mut body = base("hash", Some(a.knobs.seed), a.knobs.echo());
    body["manifest"] = json!(a.manifest);
    body["attempts"] = json!(attempt + 1);
    body["attempt_seed"] = json!(seed);
    body["shared"] = json!(result.shared);
    body["primes"] = json!([result.shared.p.p().to_string(), result.shared.q.to_string()]);
    body["passes"] = json!(result.results.iter().map(|r| r.passes).sum::<usize>());
    body["peak_bits"] = json!(result.results.iter().map(|r| r.peak_bits).max());
    body["sets"] = json!(sets);
    let code = if bad { EXIT_BAD_PRIME } else { EXIT_CONGRUENT };
    Ok(Report { body, code })
}

fn oracle(a: OracleArgs) -> Result<Report, Failure> {
    let mut src = FileStream::open(&a.file)?;
    let dim = src.header().dim;
    let [pa, pb] = read_points(&mut src)?;
    let transform = match dim {
        2 => {
            let unwrap = |v: Vec<Point>| {
                v.iter()
                    .filter_map(|p| p.as_plane().cloned())
                    .collect::<Vec<_>>()
            };
            brute_force_2d(&unwrap(pa), &unwrap(pb), a.allow_reflection).map(|t| json!(t))
        }
        _ => {
            let unwrap = |v: Vec<Point>| {
                v.iter()
                    .filter_map(|p| p.as_space().cloned())
                    .collect::<Vec<_>>()
            };
            brute_force_3d(&unwrap(pa), &unwrap(pb), a.allow_reflection).map(|m| json!(m))
        }
    };
    let code = if transform.is_some() {
        EXIT_CONGRUENT
    } else {
        EXIT_NOT_CONGRUENT
    };
    let mut body = base(
        "oracle",
        None,
        json!({ "allow_reflection": a.allow_reflection }),
    );
    body["input"] = json!(a.file);
    body["verdict"] = match transform {
        Some(t) => json!({ "kind": "congruent", "transform": t }),
        None => json!({ "kind": "not_congruent" }),
    };
    body["passes"] = json!(src.passes());
    Ok(Report { body, code })
}

fn bench(a: BenchArgs) -> Result<Report, Failure> {
    a.knobs.check().map_err(Failure::Usage)?;
    let spec = a.sweep.strip_prefix("n=").unwrap_or(&a.sweep);
    let ns =
        parse_sizes(spec).ok_or_else(|| Failure::Usage(format!("bad --sweep '{}'", a.sweep)))?;
    let us =
        a.u.split(',')
            .map(|s| s.trim().parse::<i64>().ok().filter(|&u| u >= 1))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Failure::Usage(format!("bad --u '{}'", a.u)))?;
    if ns.iter().any(|&n| n < 2) {
        return Err(Failure::Usage("sweep sizes must be at least 2".into()));
    }
    let rows = sweep(a.knobs.mode, &ns, &us, a.knobs.seed)?;
    let fit = fit_log_model(&rows);
    let mut body = base("bench", Some(a.knobs.seed), a.knobs.echo());
    body["sweep"] = json!({ "n": ns, "u": us });
    body["passes"] = json!(rows.iter().map(|r| r.passes).sum::<usize>());
    body["peak_bits"] = json!(rows.iter().map(|r| r.peak_bits).max());
    body["all_within_bound"] = json!(rows.iter().all(|r| r.within_bound()));
    body["rows"] = json!(rows);
    body["fit"] = json!(fit);
    Ok(Report {
        body,
        code: EXIT_CONGRUENT,
    })
}
