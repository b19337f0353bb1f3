//! Field file format and CSV import/export.
//!
//! A field file is one JSON header line followed by the raw samples as
//! little-endian `f64`, row-major with x fastest.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::{GridField, Interp, Window};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub nx: usize,
    pub nz: usize,
    pub x0: f64,
    pub x1: f64,
    pub z0: f64,
    pub z1: f64,
    pub periodic: bool,
    pub interp: Interp,
    pub dtype: String,
    pub byte_order: String,
}

impl Header {
    pub fn of(f: &GridField) -> Header {
        let w = f.window_rect();
        Header {
            nx: f.nx(),
            nz: f.nz(),
            x0: w.x0,
            x1: w.x1,
            z0: w.z0,
            z1: w.z1,
            periodic: f.periodic(),
            interp: f.interp(),
            dtype: "f64".into(),
            byte_order: "LE".into(),
        }
    }
}

/// Header lines longer than this are rejected before parsing.
const MAX_HEADER: usize = 4096;

pub fn write_field<W: Write>(f: &GridField, mut w: W) -> Result<()> {
    serde_json::to_writer(&mut w, &Header::of(f))?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(f.samples().len() * 8);
    for v in f.samples() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field<R: Read>(r: R) -> Result<GridField> {
    let mut r = std::io::BufReader::new(r);
    let mut line = Vec::new();
    let n = r.by_ref().take(MAX_HEADER as u64).read_until(b'\n', &mut line)?;
    if n == 0 || line.last() != Some(&b'\n') {
        return Err(Error::Format("missing header line".into()));
    }
    let h: Header = serde_json::from_slice(&line[..line.len() - 1]).map_err(|e| Error::Format(format!("header: {e}")))?;
    decode(h, r)
}

/// Parses a complete field file held in memory.
pub fn decode_bytes(bytes: &[u8]) -> Result<GridField> {
    read_field(bytes)
}

fn decode<R: Read>(h: Header, mut r: R) -> Result<GridField> {
    if h.dtype != "f64" {
        return Err(Error::Format(format!("unsupported dtype {:?}", h.dtype)));
    }
    if h.byte_order != "LE" {
        return Err(Error::Format(format!("unsupported byte order {:?}", h.byte_order)));
    }
    let count = h
        .nx
        .checked_mul(h.nz)
        .filter(|&c| c <= (1usize << 31))
        .ok_or_else(|| Error::Format("sample count overflow".into()))?;
    let window = Window::new(h.x0, h.x1, h.z0, h.z1).map_err(|_| Error::Format("empty window".into()))?;
    // read at most one byte past the payload to detect trailing data
    let mut payload = Vec::new();
    r.by_ref().take(count as u64 * 8 + 1).read_to_end(&mut payload)?;
    if payload.len() != count * 8 {
        return Err(Error::Format(format!("payload is {} bytes, header implies {}", payload.len(), count * 8)));
    }
    let samples = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    GridField::new(h.nx, h.nz, window, samples, h.periodic, h.interp).map_err(|e| Error::Format(e.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    x: f64,
    z: f64,
    psi: f64,
}

/// CSV with columns `x,z,psi`, one row per node, x fastest.
pub fn write_csv<W: Write>(f: &GridField, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for iz in 0..f.nz() {
        for ix in 0..f.nx() {
            let (x, z) = f.node(ix, iz);
            wr.serialize(Row { x, z, psi: f.at_node(ix, iz) })?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Reads a CSV written by `write_csv`. The grid layout is recovered from
/// the distinct coordinates; rows may come in any order but must cover
/// every node exactly once.
pub fn read_csv<R: Read>(r: R, periodic: bool, interp: Interp) -> Result<GridField> {
    let mut rows = Vec::new();
    for rec in csv::Reader::from_reader(r).deserialize() {
        let row: Row = rec?;
        if !(row.x.is_finite() && row.z.is_finite() && row.psi.is_finite()) {
            return Err(Error::Format("non-finite value in CSV".into()));
        }
        rows.push(row);
    }
    let axis = |get: fn(&Row) -> f64| -> Vec<f64> {
        let mut v: Vec<f64> = rows.iter().map(get).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let xs = axis(|r| r.x);
    let zs = axis(|r| r.z);
    let (nx, nz) = (xs.len(), zs.len());
    if nx < 2 || nz < 2 || nx.checked_mul(nz) != Some(rows.len()) {
        return Err(Error::Format(format!("{} rows do not form a grid ({nx} x {nz})", rows.len())));
    }
    let mut samples = vec![f64::NAN; nx * nz];
    for row in &rows {
        let ix = xs.binary_search_by(|v| v.total_cmp(&row.x)).unwrap();
        let iz = zs.binary_search_by(|v| v.total_cmp(&row.z)).unwrap();
        let slot = &mut samples[iz * nx + ix];
        if !slot.is_nan() {
            return Err(Error::Format(format!("duplicate node ({}, {})", row.x, row.z)));
        }
        *slot = row.psi;
    }
    let (hx, hz) = (xs[1] - xs[0], zs[1] - zs[0]);
    let uniform = |v: &[f64], h: f64| v.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1.0));
    if !uniform(&xs, hx) || !uniform(&zs, hz) {
        return Err(Error::Format("CSV nodes are not uniformly spaced".into()));
    }
    let window = if periodic {
        Window::new(xs[0], xs[nx - 1] + hx, zs[0], zs[nz - 1] + hz)
    } else {
        Window::new(xs[0], xs[nx - 1], zs[0], zs[nz - 1])
    }
    .map_err(|_| Error::Format("degenerate CSV window".into()))?;
    GridField::new(nx, nz, window, samples, periodic, interp).map_err(|e| Error::Format(e.to_string()))
}
