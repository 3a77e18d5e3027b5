//! Persistence: digest-stamped CSV text and a compact binary block for path ensembles.
//!
//! CSV numbers are written with 17 significant digits, which round-trips every `f64`.

use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sampler::{Anchors, Ensemble};

const PATH_MAGIC: &[u8; 8] = b"JLPATHS\0";
const ANCHOR_MAGIC: &[u8; 8] = b"JLANCHR\0";
const VERSION: u32 = 1;

/// First-line prefix of every CSV file.
pub const DIGEST_PREFIX: &str = "# config_digest: ";

/// SHA-256 of `text`, hex encoded.
pub fn digest_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Format(format!("not a number: {s:?}")))
}

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    U(u64),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::U(u) => u.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::U(x as u64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::S(x)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("CSV: {e}"))
}

/// Renders a CSV document: digest comment, header, rows.
pub fn csv_string(digest: &str, header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields");
    format!("{DIGEST_PREFIX}{digest}\n{body}")
}

/// Parsed CSV document.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvDoc {
    pub digest: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvDoc {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| Error::Format(format!("missing column {name:?}")))
    }
}

pub fn parse_csv(text: &str) -> Result<CsvDoc> {
    let (first, body) = text.split_once('\n').unwrap_or((text, ""));
    let digest = first
        .strip_prefix(DIGEST_PREFIX)
        .ok_or_else(|| Error::Format("CSV lacks a config digest line".into()))?
        .trim()
        .to_string();
    let mut r = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header.iter().all(String::is_empty) {
        return Err(Error::Format("CSV lacks a header".into()));
    }
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()).map_err(csv_err))
        .collect::<Result<_>>()?;
    Ok(CsvDoc { digest, header, rows })
}

/// Path CSV rows: `path_index, t, x_1..x_d`.
pub fn paths_csv(digest: &str, e: &Ensemble) -> String {
    let mut header = vec!["path_index".to_string(), "t".to_string()];
    header.extend((1..=e.dim).map(|k| format!("x_{k}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = Vec::with_capacity(e.n_paths * e.n_times());
    for p in 0..e.n_paths {
        for (i, &t) in e.times.iter().enumerate() {
            let mut row = vec![Cell::from(p), Cell::F(t)];
            row.extend(e.point(p, i).iter().map(|&x| Cell::F(x)));
            rows.push(row);
        }
    }
    csv_string(digest, &header, &rows)
}

fn io_err(e: std::io::Error) -> Error {
    Error::Format(format!("I/O: {e}"))
}

fn write_header<W: Write>(w: &mut W, magic: &[u8; 8], digest: &[u8; 32], e: &Ensemble) -> Result<()> {
    w.write_all(magic).map_err(io_err)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(digest).map_err(io_err)?;
    w.write_all(&(e.dim as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(e.n_paths as u64).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(e.times.len() as u64).to_le_bytes()).map_err(io_err)?;
    w.write_all(&e.master_seed.to_le_bytes()).map_err(io_err)?;
    for t in &e.times {
        w.write_all(&t.to_le_bytes()).map_err(io_err)?;
    }
    Ok(())
}

struct Header {
    digest: [u8; 32],
    dim: usize,
    n_paths: usize,
    times: Vec<f64>,
    master_seed: u64,
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(b)
}

fn read_header<R: Read>(r: &mut R, magic: &[u8; 8]) -> Result<Header> {
    if &take::<8, _>(r)? != magic {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(r)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let digest = take::<32, _>(r)?;
    let dim = u32::from_le_bytes(take(r)?) as usize;
    let n_paths = u64::from_le_bytes(take(r)?) as usize;
    let n_times = u64::from_le_bytes(take(r)?) as usize;
    let master_seed = u64::from_le_bytes(take(r)?);
    let times = (0..n_times).map(|_| Ok(f64::from_le_bytes(take(r)?))).collect::<Result<_>>()?;
    Ok(Header { digest, dim, n_paths, times, master_seed })
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf).map_err(io_err)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Writes positions as a binary block (header, grid, row-major doubles).
pub fn write_paths<W: Write>(w: &mut W, digest: &[u8; 32], e: &Ensemble) -> Result<()> {
    write_header(w, PATH_MAGIC, digest, e)?;
    let mut buf = Vec::with_capacity(e.positions.len() * 8);
    for x in &e.positions {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf).map_err(io_err)
}

/// Reads a block written by [`write_paths`]; the kernel hash is not stored.
pub fn read_paths<R: Read>(r: &mut R) -> Result<([u8; 32], Ensemble)> {
    let h = read_header(r, PATH_MAGIC)?;
    let positions = read_f64s(r, h.n_paths * h.times.len() * h.dim)?;
    Ok((
        h.digest,
        Ensemble {
            dim: h.dim,
            times: h.times,
            n_paths: h.n_paths,
            master_seed: h.master_seed,
            kernel_hash: String::new(),
            positions,
            anchors: None,
        },
    ))
}

/// Writes the anchors of `e` in the same framing as [`write_paths`].
pub fn write_anchors<W: Write>(w: &mut W, digest: &[u8; 32], e: &Ensemble) -> Result<()> {
    let a = e.anchors.as_ref().ok_or_else(|| Error::Format("ensemble has no anchors".into()))?;
    write_header(w, ANCHOR_MAGIC, digest, e)?;
    let mut buf = Vec::with_capacity(a.n_big.len() * 12 + a.rest.len() * 8);
    for n in &a.n_big {
        buf.extend_from_slice(&n.to_le_bytes());
    }
    for x in a.max_other.iter().chain(&a.rest) {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf).map_err(io_err)
}

/// Reads anchors and attaches them to `e` after checking the shapes agree.
pub fn read_anchors<R: Read>(r: &mut R, e: &mut Ensemble) -> Result<[u8; 32]> {
    let h = read_header(r, ANCHOR_MAGIC)?;
    if h.dim != e.dim || h.n_paths != e.n_paths || h.times != e.times {
        return Err(Error::Format("anchor block does not match the path block".into()));
    }
    let rows = h.n_paths * h.times.len();
    let mut buf = vec![0u8; rows * 4];
    r.read_exact(&mut buf).map_err(io_err)?;
    let n_big = buf.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect();
    let max_other = read_f64s(r, rows)?;
    let rest = read_f64s(r, rows * h.dim)?;
    e.anchors = Some(Anchors { n_big, max_other, rest });
    Ok(h.digest)
}

pub fn digest_to_hex(d: &[u8; 32]) -> String {
    hex::encode(d)
}

/// Decodes a 64-character hex digest.
pub fn digest_bytes(hex_digest: &str) -> Result<[u8; 32]> {
    let v = hex::decode(hex_digest).map_err(|_| Error::Format("digest is not hex".into()))?;
    v.try_into().map_err(|_| Error::Format("digest must be 32 bytes".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Exec, JumpKernel, Sampler, SamplerConfig};

    #[test]
    fn float_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, f64::MIN_POSITIVE, 123456789.12345679] {
            assert_eq!(parse_f64(&fmt_f64(x)).unwrap(), x);
        }
        assert_eq!(parse_f64("inf").unwrap(), f64::INFINITY);
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![vec![Cell::F(0.1), Cell::U(3), Cell::from("gaussian")]];
        let text = csv_string("abc", &["t", "n", "regime"], &rows);
        let doc = parse_csv(&text).unwrap();
        assert_eq!(doc.digest, "abc");
        assert_eq!(doc.column("regime").unwrap(), 2);
        assert_eq!(parse_f64(&doc.rows[0][0]).unwrap(), 0.1);
        assert!(parse_csv("t,n\n1,2\n").is_err());
    }

    #[test]
    fn binary_round_trip() {
        let s = Sampler::new(JumpKernel::reference(), SamplerConfig::new(vec![1.0, 8.0], 5, 2)).unwrap();
        let e = s.ensemble_with_anchors(Exec::Sequential).unwrap();
        let digest = [7u8; 32];
        let mut buf = Vec::new();
        write_paths(&mut buf, &digest, &e).unwrap();
        let (d, mut back) = read_paths(&mut buf.as_slice()).unwrap();
        assert_eq!(d, digest);
        assert_eq!(back.positions, e.positions);
        assert_eq!(back.times, e.times);
        let mut abuf = Vec::new();
        write_anchors(&mut abuf, &digest, &e).unwrap();
        read_anchors(&mut abuf.as_slice(), &mut back).unwrap();
        assert_eq!(back.anchors, e.anchors);
        buf[0] = b'X';
        assert!(read_paths(&mut buf.as_slice()).is_err());
    }
}
