//! Python bindings: exact 2D and 3D congruence identification, geometric
//! hashing, brute-force oracles and instance generation.
//!
//! Coordinates cross the boundary as `fractions.Fraction` values. Inputs may
//! be anything whose `str()` is an integer or a fraction `p/q`.

use num_bigint::BigUint;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyTuple;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use congstream as cs;
use cs::cong3d::{self, Verdict3d};
use cs::congiden2d::{self, TransformCandidate, Verdict};
use cs::exact::{BigRat, GaussianRat, Rat3, RigidMotion};
use cs::gen::{generate_2d, generate_3d, Kind};
use cs::geomhash::{GeomConfig, SignOutcome};
use cs::stream::{
    min_precision, read_points, FileStream, InstanceHeader, Label, MemoryStream, Point,
    StreamSource,
};
use cs::{Error, Mode};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

fn parse_mode(s: &str) -> PyResult<Mode> {
    s.parse().map_err(to_py)
}

fn rat_in(obj: &Bound<'_, PyAny>) -> PyResult<BigRat> {
    let s = obj.str()?;
    s.to_str()?
        .trim()
        .parse::<BigRat>()
        .map_err(|e| PyValueError::new_err(format!("not a rational: {e}")))
}

fn rat_out<'py>(py: Python<'py>, r: &BigRat) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?
        .getattr("Fraction")?
        .call1((r.numer().clone(), r.denom().clone()))
}

fn coords_in(obj: &Bound<'_, PyAny>, dim: usize) -> PyResult<Vec<BigRat>> {
    let items: Vec<Bound<'_, PyAny>> = obj.extract()?;
    if items.len() != dim {
        return Err(PyValueError::new_err(format!(
            "expected {dim} coordinates, got {}",
            items.len()
        )));
    }
    items.iter().map(rat_in).collect()
}

fn plane_in(obj: &Bound<'_, PyAny>) -> PyResult<GaussianRat> {
    let [re, im]: [BigRat; 2] = coords_in(obj, 2)?.try_into().expect("two coordinates");
    Ok(GaussianRat::new(re, im))
}

fn space_in(obj: &Bound<'_, PyAny>) -> PyResult<Rat3> {
    let [x, y, z]: [BigRat; 3] = coords_in(obj, 3)?.try_into().expect("three coordinates");
    Ok(Rat3::new(x, y, z))
}

fn points_in<T>(
    seq: &Bound<'_, PyAny>,
    f: impl Fn(&Bound<'_, PyAny>) -> PyResult<T>,
) -> PyResult<Vec<T>> {
    let items: Vec<Bound<'_, PyAny>> = seq.extract()?;
    items.iter().map(f).collect()
}

fn tuple_out<'py>(py: Python<'py>, cs: &[&BigRat]) -> PyResult<Bound<'py, PyTuple>> {
    let items = cs
        .iter()
        .map(|c| rat_out(py, c))
        .collect::<PyResult<Vec<_>>>()?;
    PyTuple::new(py, items)
}

fn point_out<'py>(py: Python<'py>, p: &Point) -> PyResult<Bound<'py, PyTuple>> {
    match p {
        Point::Plane(z) => tuple_out(py, &[&z.re, &z.im]),
        Point::Space(v) => tuple_out(py, &[&v.x, &v.y, &v.z]),
    }
}

fn points_out<'py>(py: Python<'py>, ps: &[Point]) -> PyResult<Points<'py>> {
    ps.iter().map(|p| point_out(py, p)).collect()
}

/// `z ↦ ρz + t`, or `z ↦ ρ·conj(z) + t` when reflected.
#[pyclass(frozen, module = "congstream")]
struct Transform2d {
    inner: TransformCandidate,
}

#[pymethods]
impl Transform2d {
    #[getter]
    fn rho<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyTuple>> {
        tuple_out(py, &[&self.inner.rho.re, &self.inner.rho.im])
    }

    #[getter]
    fn t<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyTuple>> {
        tuple_out(py, &[&self.inner.t.re, &self.inner.t.im])
    }

    #[getter]
    fn reflected(&self) -> bool {
        self.inner.reflected
    }

    fn apply<'py>(
        &self,
        py: Python<'py>,
        point: &Bound<'py, PyAny>,
    ) -> PyResult<Bound<'py, PyTuple>> {
        let z = self.inner.apply(&plane_in(point)?);
        tuple_out(py, &[&z.re, &z.im])
    }

    fn __repr__(&self) -> String {
        format!(
            "Transform2d(rho=({}, {}), t=({}, {}), reflected={})",
            self.inner.rho.re,
            self.inner.rho.im,
            self.inner.t.re,
            self.inner.t.im,
            if self.inner.reflected {
                "True"
            } else {
                "False"
            }
        )
    }
}

/// `x ↦ Rx + t` with `R` orthogonal.
#[pyclass(frozen, module = "congstream")]
struct RigidMotion3d {
    inner: RigidMotion,
}

#[pymethods]
impl RigidMotion3d {
    /// Rows of `R`.
    #[getter]
    fn r<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyTuple>>> {
        self.inner
            .r
            .0
            .iter()
            .map(|row| tuple_out(py, &[&row[0], &row[1], &row[2]]))
            .collect()
    }

    #[getter]
    fn t<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyTuple>> {
        let t = &self.inner.t;
        tuple_out(py, &[&t.x, &t.y, &t.z])
    }

    fn is_reflection(&self) -> bool {
        self.inner.is_reflection()
    }

    fn apply<'py>(
        &self,
        py: Python<'py>,
        point: &Bound<'py, PyAny>,
    ) -> PyResult<Bound<'py, PyTuple>> {
        let v = self.inner.apply(&space_in(point)?);
        tuple_out(py, &[&v.x, &v.y, &v.z])
    }

    fn __repr__(&self) -> String {
        let t = &self.inner.t;
        format!(
            "RigidMotion3d(t=({}, {}, {}), reflection={})",
            t.x,
            t.y,
            t.z,
            if self.is_reflection() {
                "True"
            } else {
                "False"
            }
        )
    }
}

/// Outcome of a streaming identification run.
#[pyclass(frozen, get_all, module = "congstream")]
struct RunResult {
    /// `"congruent"`, `"not_congruent"` or `"bad_prime_suspected"`.
    verdict: String,
    /// A `Transform2d` or `RigidMotion3d` when congruent.
    transform: Option<Py<PyAny>>,
    passes: usize,
    peak_bits: u64,
    primes: Vec<BigUint>,
    /// The full report as JSON.
    json: String,
}

#[pymethods]
impl RunResult {
    fn __repr__(&self) -> String {
        format!(
            "RunResult(verdict={:?}, passes={}, peak_bits={})",
            self.verdict, self.passes, self.peak_bits
        )
    }
}

fn result_2d(py: Python<'_>, r: congiden2d::CongIdenResult) -> PyResult<RunResult> {
    let (verdict, transform) = match &r.verdict {
        Verdict::Congruent(c) => (
            "congruent",
            Some(Py::new(py, Transform2d { inner: c.clone() })?.into_any()),
        ),
        Verdict::NotCongruent => ("not_congruent", None),
        Verdict::BadPrimeSuspected => ("bad_prime_suspected", None),
    };
    Ok(RunResult {
        verdict: verdict.into(),
        transform,
        passes: r.passes,
        peak_bits: r.peak_bits,
        primes: r.primes.clone(),
        json: json(&r),
    })
}

fn result_3d(py: Python<'_>, r: cong3d::CongIden3dResult) -> PyResult<RunResult> {
    let (verdict, transform) = match &r.verdict {
        Verdict3d::Congruent(m) => (
            "congruent",
            Some(Py::new(py, RigidMotion3d { inner: m.clone() })?.into_any()),
        ),
        Verdict3d::NotCongruent => ("not_congruent", None),
        Verdict3d::BadPrimeSuspected => ("bad_prime_suspected", None),
    };
    Ok(RunResult {
        verdict: verdict.into(),
        transform,
        passes: r.passes,
        peak_bits: r.peak_bits,
        primes: r.primes.clone(),
        json: json(&r),
    })
}

fn config_2d(
    mode: &str,
    seed: u64,
    allow_reflection: bool,
    retries: u32,
    delta: Option<BigUint>,
) -> PyResult<congiden2d::Config> {
    Ok(congiden2d::Config {
        mode: parse_mode(mode)?,
        seed,
        allow_reflection,
        retries,
        delta,
    })
}

/// Three-pass identification of `B = ρA + t` for planar point lists.
#[allow(clippy::too_many_arguments)]
#[pyfunction]
#[pyo3(signature = (a, b, mode="full", seed=0, allow_reflection=false, retries=0, delta=None))]
fn run2d(
    py: Python<'_>,
    a: &Bound<'_, PyAny>,
    b: &Bound<'_, PyAny>,
    mode: &str,
    seed: u64,
    allow_reflection: bool,
    retries: u32,
    delta: Option<BigUint>,
) -> PyResult<RunResult> {
    let cfg = config_2d(mode, seed, allow_reflection, retries, delta)?;
    let mut s =
        MemoryStream::pair_2d(&points_in(a, plane_in)?, &points_in(b, plane_in)?).map_err(to_py)?;
    result_2d(py, congiden2d::run(&mut s, &cfg).map_err(to_py)?)
}

/// `run2d` over a stream file.
#[pyfunction]
#[pyo3(signature = (path, mode="full", seed=0, allow_reflection=false, retries=0, delta=None))]
fn run2d_file(
    py: Python<'_>,
    path: std::path::PathBuf,
    mode: &str,
    seed: u64,
    allow_reflection: bool,
    retries: u32,
    delta: Option<BigUint>,
) -> PyResult<RunResult> {
    let cfg = config_2d(mode, seed, allow_reflection, retries, delta)?;
    let mut s = FileStream::open(path).map_err(to_py)?;
    result_2d(py, congiden2d::run(&mut s, &cfg).map_err(to_py)?)
}

/// Six-pass identification of `B = RA + t` for 3D point lists.
#[pyfunction]
#[pyo3(signature = (a, b, seed=0, allow_reflection=false, retries=0, delta=None))]
fn run3d(
    py: Python<'_>,
    a: &Bound<'_, PyAny>,
    b: &Bound<'_, PyAny>,
    seed: u64,
    allow_reflection: bool,
    retries: u32,
    delta: Option<BigUint>,
) -> PyResult<RunResult> {
    let cfg = cong3d::Config {
        seed,
        allow_reflection,
        retries,
        delta,
    };
    let mut s =
        MemoryStream::pair_3d(&points_in(a, space_in)?, &points_in(b, space_in)?).map_err(to_py)?;
    result_3d(py, cong3d::run3d(&mut s, &cfg).map_err(to_py)?)
}

/// `run3d` over a stream file.
#[pyfunction]
#[pyo3(signature = (path, seed=0, allow_reflection=false, retries=0, delta=None))]
fn run3d_file(
    py: Python<'_>,
    path: std::path::PathBuf,
    seed: u64,
    allow_reflection: bool,
    retries: u32,
    delta: Option<BigUint>,
) -> PyResult<RunResult> {
    let cfg = cong3d::Config {
        seed,
        allow_reflection,
        retries,
        delta,
    };
    let mut s = FileStream::open(path).map_err(to_py)?;
    result_3d(py, cong3d::run3d(&mut s, &cfg).map_err(to_py)?)
}

/// Signatures of several planar sets under one shared set of random
/// choices. Congruent sets get equal signatures.
#[pyclass(frozen, get_all, module = "congstream")]
struct HashResult {
    /// Hex signature per set, `None` after a bad-prime event.
    signatures: Vec<Option<String>>,
    anchors: Vec<usize>,
    passes: Vec<usize>,
    p: BigUint,
    q: BigUint,
    json: String,
}

#[pymethods]
impl HashResult {
    fn __repr__(&self) -> String {
        format!("HashResult(m={})", self.signatures.len())
    }
}

#[pyfunction]
#[pyo3(signature = (sets, mode="full", seed=0, allow_reflection=false, delta=None))]
fn geomhash(
    sets: &Bound<'_, PyAny>,
    mode: &str,
    seed: u64,
    allow_reflection: bool,
    delta: Option<BigUint>,
) -> PyResult<HashResult> {
    let sets: Vec<Bound<'_, PyAny>> = sets.extract()?;
    let mut streams = sets
        .iter()
        .map(|s| MemoryStream::single_2d(&points_in(s, plane_in)?).map_err(to_py))
        .collect::<PyResult<Vec<_>>>()?;
    let mut sources: Vec<&mut dyn StreamSource> = streams
        .iter_mut()
        .map(|s| s as &mut dyn StreamSource)
        .collect();
    let cfg = GeomConfig {
        mode: parse_mode(mode)?,
        seed,
        allow_reflection,
        delta,
    };
    let r = cs::geomhash::geomhash(&mut sources, &cfg).map_err(to_py)?;
    Ok(HashResult {
        signatures: r
            .results
            .iter()
            .map(|s| match &s.outcome {
                SignOutcome::Signature(sig) => Some(sig.encoded.clone()),
                SignOutcome::BadPrimeSuspected { .. } => None,
            })
            .collect(),
        anchors: r.results.iter().map(|s| s.anchors).collect(),
        passes: r.results.iter().map(|s| s.passes).collect(),
        p: r.shared.p.p().clone(),
        q: r.shared.q.clone(),
        json: json(&r),
    })
}

/// Exact brute-force search for a planar congruence.
#[pyfunction]
#[pyo3(signature = (a, b, allow_reflection=false))]
fn oracle_2d(
    a: &Bound<'_, PyAny>,
    b: &Bound<'_, PyAny>,
    allow_reflection: bool,
) -> PyResult<Option<Transform2d>> {
    let (a, b) = (points_in(a, plane_in)?, points_in(b, plane_in)?);
    Ok(cs::oracle::brute_force_2d(&a, &b, allow_reflection).map(|inner| Transform2d { inner }))
}

/// Exact brute-force search for a 3D rigid motion.
#[pyfunction]
#[pyo3(signature = (a, b, allow_reflection=false))]
fn oracle_3d(
    a: &Bound<'_, PyAny>,
    b: &Bound<'_, PyAny>,
    allow_reflection: bool,
) -> PyResult<Option<RigidMotion3d>> {
    let (a, b) = (points_in(a, space_in)?, points_in(b, space_in)?);
    Ok(cs::oracle::brute_force_3d(&a, &b, allow_reflection).map(|inner| RigidMotion3d { inner }))
}

type Points<'py> = Vec<Bound<'py, PyTuple>>;
type Generated<'py> = (Points<'py>, Points<'py>, Option<Py<PyAny>>);

/// Random instance `(a, b, truth)`; `kind` is one of `congruent`,
/// `non-congruent`, `degenerate`, `planar-counterexample`.
#[pyfunction]
#[pyo3(signature = (dim, n, u, kind="congruent", seed=0))]
fn generate<'py>(
    py: Python<'py>,
    dim: u8,
    n: usize,
    u: i64,
    kind: &str,
    seed: u64,
) -> PyResult<Generated<'py>> {
    let kind: Kind = kind.parse().map_err(to_py)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    match dim {
        2 => {
            let inst = generate_2d(&mut rng, kind, n, u).map_err(to_py)?;
            let pts = |v: &[GaussianRat]| v.iter().cloned().map(Point::Plane).collect::<Vec<_>>();
            let truth = inst
                .truth
                .map(|(rho, t)| {
                    Py::new(
                        py,
                        Transform2d {
                            inner: TransformCandidate {
                                rho,
                                t,
                                reflected: false,
                            },
                        },
                    )
                })
                .transpose()?
                .map(Py::into_any);
            Ok((
                points_out(py, &pts(&inst.a))?,
                points_out(py, &pts(&inst.b))?,
                truth,
            ))
        }
        3 => {
            let inst = generate_3d(&mut rng, kind, n, u).map_err(to_py)?;
            let pts = |v: &[Rat3]| v.iter().cloned().map(Point::Space).collect::<Vec<_>>();
            let truth = inst
                .truth
                .map(|(r, t)| {
                    Py::new(
                        py,
                        RigidMotion3d {
                            inner: RigidMotion { r, t },
                        },
                    )
                })
                .transpose()?
                .map(Py::into_any);
            Ok((
                points_out(py, &pts(&inst.a))?,
                points_out(py, &pts(&inst.b))?,
                truth,
            ))
        }
        d => Err(PyValueError::new_err(format!(
            "dim must be 2 or 3, got {d}"
        ))),
    }
}

/// Reads a stream file into `(dim, a, b)`.
#[pyfunction]
fn read_stream<'py>(
    py: Python<'py>,
    path: std::path::PathBuf,
) -> PyResult<(u8, Points<'py>, Points<'py>)> {
    let mut s = FileStream::open(path).map_err(to_py)?;
    let dim = s.header().dim;
    let [a, b] = read_points(&mut s).map_err(to_py)?;
    Ok((dim, points_out(py, &a)?, points_out(py, &b)?))
}

/// Writes point lists as a stream file; `b` may be omitted for a single set.
#[pyfunction]
#[pyo3(signature = (path, a, b=None))]
fn write_stream(
    path: std::path::PathBuf,
    a: &Bound<'_, PyAny>,
    b: Option<&Bound<'_, PyAny>>,
) -> PyResult<()> {
    let first: Vec<Bound<'_, PyAny>> = a.extract()?;
    let dim = match first.first() {
        Some(p) => p.len()?,
        None => return Err(PyValueError::new_err("a must not be empty")),
    };
    let parse = |seq: &Bound<'_, PyAny>| -> PyResult<Vec<Point>> {
        match dim {
            2 => Ok(points_in(seq, plane_in)?
                .into_iter()
                .map(Point::Plane)
                .collect()),
            3 => Ok(points_in(seq, space_in)?
                .into_iter()
                .map(Point::Space)
                .collect()),
            d => Err(PyValueError::new_err(format!(
                "points must have 2 or 3 coordinates, got {d}"
            ))),
        }
    };
    let pa = parse(a)?;
    let pb = b.map(parse).transpose()?;
    let n_a = pa.len();
    let n_b = pb.as_ref().map(Vec::len);
    let records: Vec<(Label, Point)> = pa
        .into_iter()
        .map(|p| (Label::A, p))
        .chain(pb.into_iter().flatten().map(|p| (Label::B, p)))
        .collect();
    let header = InstanceHeader {
        dim: dim as u8,
        u: min_precision(&records),
        n_a,
        n_b,
    };
    let s = MemoryStream::new(header, records).map_err(to_py)?;
    s.save(path).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "congstream")]
fn congstream_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Transform2d>()?;
    m.add_class::<RigidMotion3d>()?;
    m.add_class::<RunResult>()?;
    m.add_class::<HashResult>()?;
    m.add_function(wrap_pyfunction!(run2d, m)?)?;
    m.add_function(wrap_pyfunction!(run2d_file, m)?)?;
    m.add_function(wrap_pyfunction!(run3d, m)?)?;
    m.add_function(wrap_pyfunction!(run3d_file, m)?)?;
    m.add_function(wrap_pyfunction!(geomhash, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_2d, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_3d, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(read_stream, m)?)?;
    m.add_function(wrap_pyfunction!(write_stream, m)?)?;
    Ok(())
}
