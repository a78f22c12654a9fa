//! Flat binary and CSV serialization for fields and trajectories.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! magic   4 bytes  b"TDL1"
//! dim     u32
//! n       u32      points per axis
//! count   u64      number of samples
//! times   count × f64
//! values  count × n^dim × f64, row-major per sample
//! ```
//!
//! A single field is a trajectory with one sample at time 0.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::grid::{Grid, GridRef, ScalarField, Trajectory};

const MAGIC: &[u8; 4] = b"TDL1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic; not a trajectory file")]
    BadMagic,
    #[error("unsupported dim {0}")]
    BadDim(u32),
    #[error("corrupt file: {0}")]
    Corrupt(String),
}

pub fn write_trajectory(w: &mut impl Write, traj: &Trajectory) -> Result<(), IoError> {
    let grid = traj.grid();
    w.write_all(MAGIC)?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    w.write_all(&(grid.points_per_axis() as u32).to_le_bytes())?;
    w.write_all(&(traj.len() as u64).to_le_bytes())?;
    for &t in traj.times() {
        w.write_all(&t.to_le_bytes())?;
    }
    for f in traj.fields() {
        for &v in f.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_field(w: &mut impl Write, field: &ScalarField) -> Result<(), IoError> {
    let mut traj = Trajectory::new();
    traj.push(0.0, field.clone()).expect("single sample");
    write_trajectory(w, &traj)
}

pub fn read_trajectory(r: &mut impl Read) -> Result<Trajectory, IoError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(IoError::BadMagic);
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let dim = u32::from_le_bytes(b4);
    if dim != 1 && dim != 2 {
        return Err(IoError::BadDim(dim));
    }
    r.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8) as usize;
    let mut times = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut b8)?;
        times.push(f64::from_le_bytes(b8));
    }
    let grid: GridRef = Grid::new(dim as usize, n);
    let len = grid.len();
    let mut traj = Trajectory::new();
    for &t in &times {
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut b8)?;
            values.push(f64::from_le_bytes(b8));
        }
        traj.push(t, ScalarField::from_values(&grid, values))
            .map_err(|e| IoError::Corrupt(e.to_string()))?;
    }
    Ok(traj)
}

/// CSV with one row per node: `x[,y],value`. Meant for small grids.
pub fn field_to_csv(field: &ScalarField) -> String {
    let grid = field.grid();
    let mut out = String::new();
    if grid.dim() == 1 {
        out.push_str("x,value\n");
    } else {
        out.push_str("x,y,value\n");
    }
    for (idx, v) in field.values().iter().enumerate() {
        let c = grid.coords(idx);
        if grid.dim() == 1 {
            out.push_str(&format!("{},{v}\n", c[0]));
        } else {
            out.push_str(&format!("{},{},{v}\n", c[0], c[1]));
        }
    }
    out
}

/// CSV with one row per (time, node): `t,x[,y],value`.
pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let grid = traj.grid();
    let mut out = String::new();
    if grid.dim() == 1 {
        out.push_str("t,x,value\n");
    } else {
        out.push_str("t,x,y,value\n");
    }
    for (t, f) in traj.iter() {
        for (idx, v) in f.values().iter().enumerate() {
            let c = grid.coords(idx);
            if grid.dim() == 1 {
                out.push_str(&format!("{t},{},{v}\n", c[0]));
            } else {
                out.push_str(&format!("{t},{},{},{v}\n", c[0], c[1]));
            }
        }
    }
    out
}

/// FNV-1a content hash used for manifest integrity records.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn round_trip_small_trajectory() {
        let g = Grid::new(2, 8);
        let mut traj = Trajectory::new();
        for i in 0..3 {
            let t = i as f64 * 0.1;
            traj.push(
                t,
                ScalarField::from_fn(&g, |x, y| (x + 2.0 * y) * (1.0 + t)),
            )
            .unwrap();
        }
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj).unwrap();
        let back = read_trajectory(&mut buf.as_slice()).unwrap();
        assert_eq!(back.times(), traj.times());
        for (a, b) in back.fields().iter().zip(traj.fields()) {
            assert_eq!(a.values(), b.values());
        }
    }

    #[test]
    fn rejects_bad_magic() {
        let buf = b"NOPE".to_vec();
        assert!(matches!(
            read_trajectory(&mut buf.as_slice()),
            Err(IoError::BadMagic)
        ));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = Grid::new(1, 8);
        let f = ScalarField::constant(&g, 2.0);
        let csv = field_to_csv(&f);
        assert!(csv.starts_with("x,value\n"));
        assert_eq!(csv.lines().count(), 9);
    }

    proptest! {
        #[test]
        fn binary_round_trip_is_exact(values in proptest::collection::vec(-1e3f64..1e3, 16)) {
            let g = Grid::new(1, 16);
            let f = ScalarField::from_values(&g, values);
            let mut buf = Vec::new();
            write_field(&mut buf, &f).unwrap();
            let back = read_trajectory(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back.field(0).values(), f.values());
        }
    }
}
