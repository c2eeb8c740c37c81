//! Binary grid persistence: little-endian f64 payload in row-major order
//! with a plain-text `key=value` sidecar header, plus 8-bit PGM export for
//! quick visual inspection of slices.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::phantom::ScanGeometry;

/// Ordered key=value header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Header {
    entries: Vec<(String, String)>,
}

impl Header {
    pub fn new() -> Self {
        Header::default()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        if let Some(e) = self.entries.iter_mut().find(|(k, _)| k == key) {
            e.1 = value;
        } else {
            self.entries.push((key.to_string(), value));
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.get(key)
            .ok_or_else(|| Error::Header(format!("missing key '{key}'")))?
            .parse()
            .map_err(|e| Error::Header(format!("key '{key}': {e}")))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.get(key)
            .ok_or_else(|| Error::Header(format!("missing key '{key}'")))?
            .parse()
            .map_err(|e| Error::Header(format!("key '{key}': {e}")))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut h = Header::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Header(format!("malformed header line '{line}'")))?;
            h.set(k.trim(), v.trim());
        }
        Ok(h)
    }

    /// Serialize all scan-geometry fields.
    pub fn set_geometry(&mut self, g: &ScanGeometry) {
        self.set("R", g.r_scan);
        self.set("r_det", g.r_det);
        self.set("H", g.height);
        self.set("T", g.duration);
        self.set("N_sigma", g.n_sigma);
        self.set("N_z", g.n_z);
        self.set("N_t", g.n_t);
        self.set("N_r", g.n_r);
        self.set("n_alpha", g.n_alpha);
    }

    pub fn geometry(&self) -> Result<ScanGeometry> {
        Ok(ScanGeometry {
            r_scan: self.f64("R")?,
            r_det: self.f64("r_det")?,
            height: self.f64("H")?,
            duration: self.f64("T")?,
            n_sigma: self.usize("N_sigma")?,
            n_z: self.usize("N_z")?,
            n_t: self.usize("N_t")?,
            n_r: self.usize("N_r")?,
            n_alpha: self.usize("n_alpha")?,
        })
    }
}

fn header_path(bin_path: &Path) -> PathBuf {
    bin_path.with_extension("hdr")
}

/// Write a 3-D grid as `<path>` (little-endian f64, row-major) plus
/// `<path with .hdr>` carrying the header and the grid shape.
pub fn write_grid(path: &Path, header: &Header, data: &Array3<f64>) -> Result<()> {
    let mut header = header.clone();
    let dim = data.dim();
    header.set("shape0", dim.0);
    header.set("shape1", dim.1);
    header.set("shape2", dim.2);
    std::fs::write(header_path(path), header.to_text())?;
    let mut w = BufWriter::new(File::create(path)?);
    let standard = data.as_standard_layout();
    for &v in standard.as_slice().unwrap() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read a grid written by [`write_grid`]; returns the header and the data.
pub fn read_grid(path: &Path) -> Result<(Header, Array3<f64>)> {
    let header = Header::parse(&std::fs::read_to_string(header_path(path))?)?;
    let shape = (header.usize("shape0")?, header.usize("shape1")?, header.usize("shape2")?);
    let expected = shape.0 * shape.1 * shape.2;
    let mut r = BufReader::new(File::open(path)?);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != expected * 8 {
        return Err(Error::Header(format!(
            "payload is {} bytes, header shape wants {}",
            bytes.len(),
            expected * 8
        )));
    }
    let mut values = Vec::with_capacity(expected);
    for chunk in bytes.chunks_exact(8) {
        values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    let data = Array3::from_shape_vec(shape, values)
        .map_err(|e| Error::Header(format!("shape error: {e}")))?;
    Ok((header, data))
}

/// Export one 2-D slice as an 8-bit binary PGM with min-max windowing; the
/// window is recorded in a comment line.
pub fn write_pgm(path: &Path, slice: ndarray::ArrayView2<'_, f64>) -> Result<()> {
    let (h, w) = slice.dim();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in slice.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Domain("PGM export requires finite values".into()));
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P5\n# window min={lo:.6e} max={hi:.6e}\n{w} {h}\n255\n")?;
    for &v in slice.iter() {
        let byte = (255.0 * (v - lo) / span).round().clamp(0.0, 255.0) as u8;
        out.write_all(&[byte])?;
    }
    out.flush()?;
    Ok(())
}
