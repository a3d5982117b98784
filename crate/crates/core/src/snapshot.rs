//! Flat binary container for field snapshots.
//!
//! Byte layout, all integers and floats little-endian:
//!
//! | offset            | size      | content                                   |
//! |-------------------|-----------|-------------------------------------------|
//! | 0                 | 8         | magic `b"ERFIELD1"`                       |
//! | 8                 | 4         | `dim` (u32, 1 or 2)                       |
//! | 12                | 4         | `field_count` (u32)                       |
//! | 16                | 8 * dim   | `N_i` per axis (u64)                      |
//! | 16 + 8 dim        | 8 * dim   | `L_i` per axis (f64)                      |
//! | 16 + 16 dim       | 8         | time `t` (f64)                            |
//! | 24 + 16 dim       | 8 * n * F | field values (f64), field after field     |
//!
//! Each field holds `n = prod N_i` values in row-major order (axis 0 slowest).
//! A [`FieldState`] is written as `field_count = 1 + dim` fields in the order
//! `a, u_1, ..., u_dim`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::{FieldState, SpectralGrid};

pub const MAGIC: &[u8; 8] = b"ERFIELD1";

/// Header of a snapshot container.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHeader {
    pub dim: usize,
    pub modes: Vec<usize>,
    pub lengths: Vec<f64>,
    pub time: f64,
    pub field_count: usize,
}

impl SnapshotHeader {
    pub fn points(&self) -> usize {
        self.modes.iter().product()
    }

    pub fn byte_len(&self) -> usize {
        24 + 16 * self.dim
    }
}

/// Writes raw fields with an explicit header.
pub fn write_fields<W: Write>(mut w: W, header: &SnapshotHeader, fields: &[&[f64]]) -> Result<()> {
    if fields.len() != header.field_count {
        return Err(Error::Format(format!(
            "header declares {} fields, got {}",
            header.field_count,
            fields.len()
        )));
    }
    let n = header.points();
    let mut buf = Vec::with_capacity(header.byte_len() + 8 * n * fields.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(header.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(header.field_count as u32).to_le_bytes());
    for &m in &header.modes {
        buf.extend_from_slice(&(m as u64).to_le_bytes());
    }
    for &l in &header.lengths {
        buf.extend_from_slice(&l.to_le_bytes());
    }
    buf.extend_from_slice(&header.time.to_le_bytes());
    for f in fields {
        if f.len() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                actual: f.len(),
            });
        }
        for v in *f {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8]> {
    let end = *pos + n;
    if end > bytes.len() {
        return Err(Error::Format(format!(
            "truncated container: need {end} bytes, have {}",
            bytes.len()
        )));
    }
    let s = &bytes[*pos..end];
    *pos = end;
    Ok(s)
}

fn read_u32(bytes: &[u8], pos: &mut usize) -> Result<u32> {
    Ok(u32::from_le_bytes(take(bytes, pos, 4)?.try_into().unwrap()))
}

fn read_u64(bytes: &[u8], pos: &mut usize) -> Result<u64> {
    Ok(u64::from_le_bytes(take(bytes, pos, 8)?.try_into().unwrap()))
}

fn read_f64(bytes: &[u8], pos: &mut usize) -> Result<f64> {
    Ok(f64::from_le_bytes(take(bytes, pos, 8)?.try_into().unwrap()))
}

/// Reads a header and its fields.
pub fn read_fields<R: Read>(mut r: R) -> Result<(SnapshotHeader, Vec<Vec<f64>>)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut pos = 0;
    if take(&bytes, &mut pos, 8)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let dim = read_u32(&bytes, &mut pos)? as usize;
    if dim != 1 && dim != 2 {
        return Err(Error::Format(format!("unsupported dimension {dim}")));
    }
    let field_count = read_u32(&bytes, &mut pos)? as usize;
    let modes = (0..dim)
        .map(|_| read_u64(&bytes, &mut pos).map(|m| m as usize))
        .collect::<Result<Vec<_>>>()?;
    let lengths = (0..dim)
        .map(|_| read_f64(&bytes, &mut pos))
        .collect::<Result<Vec<_>>>()?;
    let time = read_f64(&bytes, &mut pos)?;
    let header = SnapshotHeader {
        dim,
        modes,
        lengths,
        time,
        field_count,
    };
    let n = header.points();
    let mut fields = Vec::with_capacity(field_count);
    for _ in 0..field_count {
        let raw = take(&bytes, &mut pos, 8 * n)?;
        fields.push(
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        );
    }
    if pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - pos)));
    }
    Ok((header, fields))
}

/// Writes a [`FieldState`] as fields `a, u_1, ..., u_d`.
pub fn write_state<W: Write>(w: W, grid: &SpectralGrid, state: &FieldState) -> Result<()> {
    state.validate(grid)?;
    let header = SnapshotHeader {
        dim: grid.dim(),
        modes: grid.modes().to_vec(),
        lengths: grid.lengths().to_vec(),
        time: state.t,
        field_count: 1 + grid.dim(),
    };
    let mut fields: Vec<&[f64]> = vec![&state.a];
    fields.extend(state.u.iter().map(|c| c.as_slice()));
    write_fields(w, &header, &fields)
}

/// Reads a [`FieldState`] together with the grid it was written on.
pub fn read_state<R: Read>(r: R) -> Result<(SpectralGrid, FieldState)> {
    let (header, mut fields) = read_fields(r)?;
    if header.field_count != 1 + header.dim {
        return Err(Error::Format(format!(
            "a state needs {} fields, container has {}",
            1 + header.dim,
            header.field_count
        )));
    }
    let grid = SpectralGrid::new(header.dim, &header.lengths, &header.modes)?;
    let u = fields.split_off(1);
    let a = fields.pop().unwrap();
    Ok((grid, FieldState { a, u, t: header.time }))
}
