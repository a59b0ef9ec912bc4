//! Replayable multi-pass point streams.
//!
//! File format: a header line `# dim=<d> U=<u> nA=<count> [nB=<count>]`,
//! then one record per line, `<label> <c1> <c2> [<c3>]` with label `A` or
//! `B` and coordinates written as `±p/q` or integers. Multiplicity is
//! expressed by repeating a line.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{BigRat, GaussianRat, Rat3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Label {
    A,
    B,
}

impl Label {
    pub fn as_char(self) -> char {
        match self {
            Label::A => 'A',
            Label::B => 'B',
        }
    }

    pub fn index(self) -> usize {
        match self {
            Label::A => 0,
            Label::B => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Point {
    Plane(GaussianRat),
    Space(Rat3),
}

impl Point {
    pub fn dim(&self) -> u8 {
        match self {
            Point::Plane(_) => 2,
            Point::Space(_) => 3,
        }
    }

    pub fn as_plane(&self) -> Option<&GaussianRat> {
        match self {
            Point::Plane(z) => Some(z),
            Point::Space(_) => None,
        }
    }

    pub fn as_space(&self) -> Option<&Rat3> {
        match self {
            Point::Space(v) => Some(v),
            Point::Plane(_) => None,
        }
    }

    fn coords(&self) -> Vec<&BigRat> {
        match self {
            Point::Plane(z) => vec![&z.re, &z.im],
            Point::Space(v) => v.coords().to_vec(),
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Plane(z) => write!(f, "{z}"),
            Point::Space(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointRecord {
    pub label: Label,
    pub point: Point,
    /// Zero-based position in the stream.
    pub position: usize,
}

impl PointRecord {
    pub fn plane(&self) -> Result<&GaussianRat> {
        self.point
            .as_plane()
            .ok_or_else(|| Error::DomainViolation("expected a planar point".into()))
    }

    pub fn space(&self) -> Result<&Rat3> {
        self.point
            .as_space()
            .ok_or_else(|| Error::DomainViolation("expected a 3D point".into()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InstanceHeader {
    pub dim: u8,
    #[serde(serialize_with = "crate::ser::display")]
    pub u: BigInt,
    pub n_a: usize,
    pub n_b: Option<usize>,
}

impl InstanceHeader {
    pub fn parse(line: &str) -> Result<Self> {
        let err = |msg: String| Error::Parse { line: 1, msg };
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| err("header must start with '#'".into()))?;
        let (mut dim, mut u, mut n_a, mut n_b) = (None, None, None, None);
        for tok in body.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| err(format!("malformed header field '{tok}'")))?;
            let bad = || err(format!("bad value for {k}: '{v}'"));
            match k {
                "dim" => dim = Some(v.parse::<u8>().map_err(|_| bad())?),
                "U" => u = Some(v.parse::<BigInt>().map_err(|_| bad())?),
                "nA" => n_a = Some(v.parse::<usize>().map_err(|_| bad())?),
                "nB" => n_b = Some(v.parse::<usize>().map_err(|_| bad())?),
                _ => return Err(err(format!("unknown header field '{k}'"))),
            }
        }
        let dim = dim.ok_or_else(|| err("missing dim".into()))?;
        if dim != 2 && dim != 3 {
            return Err(err(format!("dim must be 2 or 3, got {dim}")));
        }
        let u = u.ok_or_else(|| err("missing U".into()))?;
        if u < BigInt::from(1) {
            return Err(err("U must be at least 1".into()));
        }
        let n_a = n_a.ok_or_else(|| err("missing nA".into()))?;
        Ok(InstanceHeader { dim, u, n_a, n_b })
    }

    pub fn declared(&self, label: Label) -> usize {
        match label {
            Label::A => self.n_a,
            Label::B => self.n_b.unwrap_or(0),
        }
    }
}

impl fmt::Display for InstanceHeader {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "# dim={} U={} nA={}", self.dim, self.u, self.n_a)?;
        if let Some(nb) = self.n_b {
            write!(f, " nB={nb}")?;
        }
        Ok(())
    }
}

/// Parses and validates one record line (1-based `line` for messages).
pub fn parse_record(
    header: &InstanceHeader,
    text: &str,
    line: usize,
    position: usize,
) -> Result<PointRecord> {
    let mut toks = text.split_whitespace();
    let label = match toks.next() {
        Some("A") => Label::A,
        Some("B") if header.n_b.is_some() => Label::B,
        Some(other) => {
            return Err(Error::Parse {
                line,
                msg: format!("unexpected label '{other}'"),
            })
        }
        None => {
            return Err(Error::Parse {
                line,
                msg: "empty record".into(),
            })
        }
    };
    let mut coords = Vec::with_capacity(3);
    for tok in toks {
        let v: BigRat = tok
            .parse()
            .map_err(|e: crate::exact::ParseRatError| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
        if !v.is_u_rational(&header.u) {
            return Err(Error::PrecisionViolation {
                line,
                value: v.to_string(),
                bound: header.u.to_string(),
            });
        }
        coords.push(v);
    }
    if coords.len() != header.dim as usize {
        return Err(Error::Parse {
            line,
            msg: format!(
                "expected {} coordinates, found {}",
                header.dim,
                coords.len()
            ),
        });
    }
    let point = if header.dim == 2 {
        let im = coords.pop().unwrap();
        let re = coords.pop().unwrap();
        Point::Plane(GaussianRat::new(re, im))
    } else {
        let z = coords.pop().unwrap();
        let y = coords.pop().unwrap();
        let x = coords.pop().unwrap();
        Point::Space(Rat3::new(x, y, z))
    };
    Ok(PointRecord {
        label,
        point,
        position,
    })
}

/// A stream that can be replayed from the start any number of times,
/// yielding the same records in the same order on every pass.
pub trait StreamSource {
    fn header(&self) -> &InstanceHeader;
    /// Next record of the current pass, or `None` at the end.
    fn next_record(&mut self) -> Result<Option<PointRecord>>;
    /// Restarts from the first record and increments the pass counter.
    fn rewind(&mut self) -> Result<()>;
    /// Number of passes started so far.
    fn passes(&self) -> usize;
}

/// A stream file on disk; every pass re-reads and re-validates the file.
pub struct FileStream {
    path: PathBuf,
    header: InstanceHeader,
    reader: Option<std::io::Lines<BufReader<File>>>,
    line_no: usize,
    position: usize,
    counts: [usize; 2],
    passes: usize,
}

impl FileStream {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut lines = BufReader::new(File::open(&path)?).lines();
        let first = lines.next().transpose()?.ok_or(Error::Parse {
            line: 1,
            msg: "empty file".into(),
        })?;
        let header = InstanceHeader::parse(first.trim_end())?;
        Ok(FileStream {
            path,
            header,
            reader: None,
            line_no: 0,
            position: 0,
            counts: [0, 0],
            passes: 0,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn check_counts(&self) -> Result<()> {
        for label in [Label::A, Label::B] {
            let declared = self.header.declared(label);
            let found = self.counts[label.index()];
            if declared != found {
                return Err(Error::CountMismatch {
                    label: label.as_char(),
                    declared,
                    found,
                });
            }
        }
        Ok(())
    }
}

impl StreamSource for FileStream {
    fn header(&self) -> &InstanceHeader {
        &self.header
    }

    fn next_record(&mut self) -> Result<Option<PointRecord>> {
        let Some(reader) = self.reader.as_mut() else {
            return Ok(None);
        };
        loop {
            let Some(line) = reader.next().transpose()? else {
                self.reader = None;
                self.check_counts()?;
                return Ok(None);
            };
            self.line_no += 1;
            let text = line.trim();
            if text.is_empty() {
                continue;
            }
            let rec = parse_record(&self.header, text, self.line_no, self.position)?;
            self.position += 1;
            self.counts[rec.label.index()] += 1;
            return Ok(Some(rec));
        }
    }

    fn rewind(&mut self) -> Result<()> {
        let mut lines = BufReader::new(File::open(&self.path)?).lines();
        lines.next().transpose()?;
        self.reader = Some(lines);
        self.line_no = 1;
        self.position = 0;
        self.counts = [0, 0];
        self.passes += 1;
        Ok(())
    }

    fn passes(&self) -> usize {
        self.passes
    }
}

/// An in-memory stream over validated records.
#[derive(Clone)]
pub struct MemoryStream {
    header: InstanceHeader,
    records: Vec<(Label, Point)>,
    cursor: Option<usize>,
    passes: usize,
}

impl MemoryStream {
    /// Builds a stream from labelled points, validating dimension,
    /// precision and per-label counts against `header`.
    pub fn new(header: InstanceHeader, records: Vec<(Label, Point)>) -> Result<Self> {
        let mut counts = [0usize; 2];
        for (i, (label, point)) in records.iter().enumerate() {
            let line = i + 2;
            if point.dim() != header.dim {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected a {}-dimensional point", header.dim),
                });
            }
            if *label == Label::B && header.n_b.is_none() {
                return Err(Error::Parse {
                    line,
                    msg: "label B in a single-set stream".into(),
                });
            }
            for c in point.coords() {
                if !c.is_u_rational(&header.u) {
                    return Err(Error::PrecisionViolation {
                        line,
                        value: c.to_string(),
                        bound: header.u.to_string(),
                    });
                }
            }
            counts[label.index()] += 1;
        }
        for label in [Label::A, Label::B] {
            if counts[label.index()] != header.declared(label) {
                return Err(Error::CountMismatch {
                    label: label.as_char(),
                    declared: header.declared(label),
                    found: counts[label.index()],
                });
            }
        }
        Ok(MemoryStream {
            header,
            records,
            cursor: None,
            passes: 0,
        })
    }

    /// A two-set planar stream with all of `a` followed by all of `b`, using
    /// the smallest precision bound that admits every coordinate.
    pub fn pair_2d(a: &[GaussianRat], b: &[GaussianRat]) -> Result<Self> {
        let records: Vec<(Label, Point)> = a
            .iter()
            .map(|z| (Label::A, Point::Plane(z.clone())))
            .chain(b.iter().map(|z| (Label::B, Point::Plane(z.clone()))))
            .collect();
        let header = InstanceHeader {
            dim: 2,
            u: min_precision(&records),
            n_a: a.len(),
            n_b: Some(b.len()),
        };
        MemoryStream::new(header, records)
    }

    /// A single-set planar stream (label `A` only).
    pub fn single_2d(s: &[GaussianRat]) -> Result<Self> {
        let records: Vec<(Label, Point)> = s
            .iter()
            .map(|z| (Label::A, Point::Plane(z.clone())))
            .collect();
        let header = InstanceHeader {
            dim: 2,
            u: min_precision(&records),
            n_a: s.len(),
            n_b: None,
        };
        MemoryStream::new(header, records)
    }

    /// A two-set spatial stream with all of `a` followed by all of `b`.
    pub fn pair_3d(a: &[Rat3], b: &[Rat3]) -> Result<Self> {
        let records: Vec<(Label, Point)> = a
            .iter()
            .map(|v| (Label::A, Point::Space(v.clone())))
            .chain(b.iter().map(|v| (Label::B, Point::Space(v.clone()))))
            .collect();
        let header = InstanceHeader {
            dim: 3,
            u: min_precision(&records),
            n_a: a.len(),
            n_b: Some(b.len()),
        };
        MemoryStream::new(header, records)
    }

    pub fn records(&self) -> &[(Label, Point)] {
        &self.records
    }

    /// Writes the stream in the text format.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{}", self.header)?;
        for (label, point) in &self.records {
            writeln!(w, "{} {}", label.as_char(), point)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(File::create(path)?);
        self.write_to(f)
    }
}

/// Smallest `U` such that every coordinate is `U`-rational.
pub fn min_precision(records: &[(Label, Point)]) -> BigInt {
    records
        .iter()
        .flat_map(|(_, p)| {
            p.coords()
                .into_iter()
                .map(BigRat::precision)
                .collect::<Vec<_>>()
        })
        .max()
        .unwrap_or_else(|| BigInt::from(1))
}

impl StreamSource for MemoryStream {
    fn header(&self) -> &InstanceHeader {
        &self.header
    }

    fn next_record(&mut self) -> Result<Option<PointRecord>> {
        let Some(i) = self.cursor else {
            return Ok(None);
        };
        match self.records.get(i) {
            Some((label, point)) => {
                self.cursor = Some(i + 1);
                Ok(Some(PointRecord {
                    label: *label,
                    point: point.clone(),
                    position: i,
                }))
            }
            None => {
                self.cursor = None;
                Ok(None)
            }
        }
    }

    fn rewind(&mut self) -> Result<()> {
        self.cursor = Some(0);
        self.passes += 1;
        Ok(())
    }

    fn passes(&self) -> usize {
        self.passes
    }
}

/// Reads one full pass and splits the points by label. Meant for exact
/// reference computations, which keep the whole input in memory.
pub fn read_points(source: &mut dyn StreamSource) -> Result<[Vec<Point>; 2]> {
    source.rewind()?;
    let mut out = [Vec::new(), Vec::new()];
    while let Some(rec) = source.next_record()? {
        out[rec.label.index()].push(rec.point);
    }
    Ok(out)
}

/// One consumer of a pass. Handlers see every record once per pass, in
/// stream order.
pub trait PassHandler {
    fn begin_pass(&mut self, _pass: usize) -> Result<()> {
        Ok(())
    }
    fn observe(&mut self, rec: &PointRecord) -> Result<()>;
    fn end_pass(&mut self, _pass: usize) -> Result<()> {
        Ok(())
    }
    /// Serialized size of the live sketch state, in bits.
    fn live_bits(&self) -> u64;
}

/// Runs passes over a source, enforcing a pass budget and recording the
/// peak live sketch size at every record boundary.
pub struct PassDriver<'a> {
    source: &'a mut dyn StreamSource,
    budget: usize,
    passes: usize,
    peak_bits: u64,
}

impl<'a> PassDriver<'a> {
    pub fn new(source: &'a mut dyn StreamSource, budget: usize) -> Self {
        PassDriver {
            source,
            budget,
            passes: 0,
            peak_bits: 0,
        }
    }

    pub fn header(&self) -> &InstanceHeader {
        self.source.header()
    }

    /// Runs one full pass with `handler`.
    pub fn run_pass(&mut self, handler: &mut dyn PassHandler) -> Result<()> {
        if self.passes >= self.budget {
            return Err(Error::PassBudgetExceeded {
                budget: self.budget,
            });
        }
        self.source.rewind()?;
        self.passes += 1;
        let pass = self.passes;
        handler.begin_pass(pass)?;
        self.peak_bits = self.peak_bits.max(handler.live_bits());
        while let Some(rec) = self.source.next_record()? {
            handler.observe(&rec)?;
            self.peak_bits = self.peak_bits.max(handler.live_bits());
        }
        handler.end_pass(pass)?;
        self.peak_bits = self.peak_bits.max(handler.live_bits());
        Ok(())
    }

    /// Runs each handler as its own pass, in order.
    pub fn run_all(&mut self, handlers: &mut [&mut dyn PassHandler]) -> Result<()> {
        for h in handlers.iter_mut() {
            self.run_pass(*h)?;
        }
        Ok(())
    }

    pub fn passes(&self) -> usize {
        self.passes
    }

    pub fn peak_bits(&self) -> u64 {
        self.peak_bits
    }

    /// Adds room for more passes, used when a run restarts with a new prime.
    pub fn extend_budget(&mut self, extra: usize) {
        self.budget += extra;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Collect(Vec<PointRecord>);

    impl PassHandler for Collect {
        fn observe(&mut self, rec: &PointRecord) -> Result<()> {
            self.0.push(rec.clone());
            Ok(())
        }
        fn live_bits(&self) -> u64 {
            self.0.len() as u64
        }
    }

    fn write_tmp(name: &str, body: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("congstream-stream-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn parses_records_and_replays() {
        let p = write_tmp(
            "ok.stream",
            "# dim=2 U=3 nA=2 nB=2\nA 1/2 -1/3\nB 0 1\nA 3 3\nB -1/3 2/3\n",
        );
        let mut s = FileStream::open(&p).unwrap();
        let mut first = Collect(Vec::new());
        let mut second = Collect(Vec::new());
        let mut d = PassDriver::new(&mut s, 2);
        d.run_pass(&mut first).unwrap();
        d.run_pass(&mut second).unwrap();
        assert_eq!(first.0, second.0);
        assert_eq!(
            first.0[0].point,
            Point::Plane(GaussianRat::new(BigRat::new(1, 2), BigRat::new(-1, 3)))
        );
        assert_eq!(first.0[0].label, Label::A);
        assert_eq!(d.passes(), 2);
        assert_eq!(d.peak_bits(), 4);
        assert!(matches!(
            d.run_pass(&mut Collect(Vec::new())),
            Err(Error::PassBudgetExceeded { budget: 2 })
        ));
    }

    #[test]
    fn precision_violation() {
        let p = write_tmp("prec.stream", "# dim=2 U=3 nA=1 nB=0\nA 4/3 0\n");
        let mut s = FileStream::open(&p).unwrap();
        s.rewind().unwrap();
        assert!(matches!(
            s.next_record(),
            Err(Error::PrecisionViolation { line: 2, .. })
        ));
    }

    #[test]
    fn count_mismatch_and_parse_errors() {
        let p = write_tmp("count.stream", "# dim=2 U=3 nA=2 nB=0\nA 1 0\n");
        let mut s = FileStream::open(&p).unwrap();
        s.rewind().unwrap();
        assert!(s.next_record().unwrap().is_some());
        assert!(matches!(
            s.next_record(),
            Err(Error::CountMismatch {
                label: 'A',
                declared: 2,
                found: 1
            })
        ));
        let p = write_tmp("bad.stream", "# dim=2 U=3 nA=1\nA 1\n");
        let mut s = FileStream::open(&p).unwrap();
        s.rewind().unwrap();
        assert!(matches!(s.next_record(), Err(Error::Parse { line: 2, .. })));
        let p = write_tmp("hdr.stream", "dim=2 U=3 nA=1\n");
        assert!(matches!(
            FileStream::open(&p),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn empty_stream_runs_cleanly() {
        let header = InstanceHeader::parse("# dim=3 U=1 nA=0 nB=0").unwrap();
        let mut s = MemoryStream::new(header, Vec::new()).unwrap();
        let mut h = Collect(Vec::new());
        let mut d = PassDriver::new(&mut s, 3);
        d.run_all(&mut [&mut h]).unwrap();
        assert!(h.0.is_empty());
        assert_eq!(d.passes(), 1);
    }

    #[test]
    fn memory_stream_round_trips_through_text() {
        let a = vec![
            GaussianRat::from_ints(1, 2),
            GaussianRat::new(BigRat::new(-1, 2), BigRat::zero()),
        ];
        let b = vec![GaussianRat::from_ints(0, 0), GaussianRat::from_ints(2, 2)];
        let m = MemoryStream::pair_2d(&a, &b).unwrap();
        let p = write_tmp("rt.stream", "");
        m.save(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# dim=2 U=2 nA=2 nB=2\nA 1 2\nA -1/2 0\n"));
        let mut f = FileStream::open(&p).unwrap();
        let mut mm = m.clone();
        let (mut x, mut y) = (Collect(Vec::new()), Collect(Vec::new()));
        PassDriver::new(&mut f, 1).run_pass(&mut x).unwrap();
        PassDriver::new(&mut mm, 1).run_pass(&mut y).unwrap();
        assert_eq!(x.0, y.0);
    }
}
