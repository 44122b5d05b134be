//! Binary snapshot of a [`RowSketchStore`].
//!
//! Layout, all integers little-endian:
//!
//! | field        | type      |
//! |--------------|-----------|
//! | magic        | 8 bytes `CSKETCH\0` |
//! | version      | u32       |
//! | n, p, b, d   | u64 each  |
//! | seed         | u64       |
//! | standardized | u8        |
//! | ones_built   | u64       |
//!
//! followed by `n * d * b` f64 values (row sketches, row-major), `n` totals
//! and `d * b` values of the ones sketch.

use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::{AmsSketch, RowSketchStore, SketchTransform};

pub const SNAPSHOT_MAGIC: [u8; 8] = *b"CSKETCH\0";
pub const SNAPSHOT_VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(store: &RowSketchStore, mut out: W) -> Result<usize> {
    let t = store.transform();
    let seed = t
        .seed()
        .ok_or_else(|| Error::Format("identity transforms cannot be snapshotted".into()))?;
    let mut written = 0;
    let mut put = |bytes: &[u8], out: &mut W| -> Result<()> {
        out.write_all(bytes)?;
        written += bytes.len();
        Ok(())
    };
    put(&SNAPSHOT_MAGIC, &mut out)?;
    put(&SNAPSHOT_VERSION.to_le_bytes(), &mut out)?;
    for v in [store.n(), store.p(), t.buckets(), t.depth()] {
        put(&(v as u64).to_le_bytes(), &mut out)?;
    }
    put(&seed.to_le_bytes(), &mut out)?;
    put(&[store.is_standardized() as u8], &mut out)?;
    put(&(store.ones_built() as u64).to_le_bytes(), &mut out)?;

    let mut buf = Vec::with_capacity(8 * t.cells());
    for row in store.rows() {
        buf.clear();
        row.values().iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
        put(&buf, &mut out)?;
    }
    buf.clear();
    store.totals().iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
    put(&buf, &mut out)?;
    buf.clear();
    store
        .ones_sketch()
        .values()
        .iter()
        .for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
    put(&buf, &mut out)?;
    out.flush()?;
    Ok(written)
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated snapshot while reading {what}")),
        _ => Error::Io(e),
    })
}

fn read_u64<R: Read>(input: &mut R, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(input, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(input: &mut R, count: usize, what: &str) -> Result<Vec<f64>> {
    let mut raw = vec![0u8; 8 * count];
    read_exact(input, &mut raw, what)?;
    Ok(raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<RowSketchStore> {
    let mut magic = [0u8; 8];
    read_exact(&mut input, &mut magic, "magic")?;
    if magic != SNAPSHOT_MAGIC {
        return Err(Error::Format("bad magic, not a sketch snapshot".into()));
    }
    let mut v = [0u8; 4];
    read_exact(&mut input, &mut v, "version")?;
    let version = u32::from_le_bytes(v);
    if version != SNAPSHOT_VERSION {
        return Err(Error::Format(format!(
            "unsupported snapshot version {version} (expected {SNAPSHOT_VERSION})"
        )));
    }
    let n = read_u64(&mut input, "n")? as usize;
    let p = read_u64(&mut input, "p")? as usize;
    let b = read_u64(&mut input, "b")? as usize;
    let d = read_u64(&mut input, "d")? as usize;
    let seed = read_u64(&mut input, "seed")?;
    let mut flag = [0u8; 1];
    read_exact(&mut input, &mut flag, "standardized flag")?;
    let standardized = match flag[0] {
        0 => false,
        1 => true,
        x => return Err(Error::Format(format!("invalid standardized flag {x}"))),
    };
    let ones_built = read_u64(&mut input, "ones_built")? as usize;
    if n == 0 || ones_built > p {
        return Err(Error::Format(format!("inconsistent header: n = {n}, p = {p}, ones_built = {ones_built}")));
    }
    let transform = SketchTransform::new(p, b, d, seed).map_err(|e| Error::Format(e.to_string()))?;

    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let values = read_f64s(&mut input, d * b, "row sketches")?;
        rows.push(AmsSketch::from_values(d, b, values).map_err(|e| Error::Format(format!("row {i}: {e}")))?);
    }
    let totals = read_f64s(&mut input, n, "totals")?;
    let ones = AmsSketch::from_values(d, b, read_f64s(&mut input, d * b, "ones sketch")?)?;
    let mut probe = [0u8; 1];
    if input.read(&mut probe)? != 0 {
        return Err(Error::Format("trailing bytes after snapshot".into()));
    }
    Ok(RowSketchStore::from_parts(transform, rows, totals, ones, ones_built, standardized))
}
