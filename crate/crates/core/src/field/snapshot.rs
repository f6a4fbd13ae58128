//! CLGF binary field snapshots.
//!
//! Layout (all little-endian):
//!
//! | offset | size | content                                   |
//! |--------|------|-------------------------------------------|
//! | 0      | 4    | magic `CLGF`                              |
//! | 4      | 4    | format version, `u32`                     |
//! | 8      | 1    | geometry code (0 periodic, 1 channel)     |
//! | 9      | 12   | `nx, ny, nz` as `u32`                     |
//! | 21     | 24   | `Lx, Ly, Lz` as `f64`                     |
//! | 45     | 1    | component count                           |
//! | 46     | 18   | zero padding                              |
//!
//! The payload follows at byte 64: one block of `nx*ny*nz` `f64` values per
//! component, each block in x-fastest order.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Geometry, LabelGrid, ScalarField, VectorField};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CLGF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;

/// A decoded snapshot: grid plus one data block per component.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub grid: LabelGrid,
    pub comps: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn from_vector(u: &VectorField) -> Self {
        Self {
            grid: *u.grid(),
            comps: u.comps().to_vec(),
        }
    }

    pub fn from_scalar(f: &ScalarField) -> Self {
        Self {
            grid: *f.grid(),
            comps: vec![f.data().to_vec()],
        }
    }

    pub fn into_vector(self) -> Result<VectorField> {
        let grid = self.grid;
        let comps: [Vec<f64>; 3] = self.comps.try_into().map_err(|c: Vec<Vec<f64>>| {
            Error::Format(format!("expected 3 components, found {}", c.len()))
        })?;
        VectorField::new(grid, comps)
    }

    pub fn into_scalar(mut self) -> Result<ScalarField> {
        if self.comps.len() != 1 {
            return Err(Error::Format(format!(
                "expected 1 component, found {}",
                self.comps.len()
            )));
        }
        ScalarField::new(self.grid, self.comps.pop().unwrap_or_default())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let ncomp = u8::try_from(self.comps.len())
            .map_err(|_| Error::Format(format!("too many components: {}", self.comps.len())))?;
        let n = self.grid.len();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * n * self.comps.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.grid.geometry().code());
        for d in self.grid.dims() {
            let d = u32::try_from(d)
                .map_err(|_| Error::Format(format!("dimension {d} exceeds u32")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for l in self.grid.lengths() {
            out.extend_from_slice(&l.to_le_bytes());
        }
        out.push(ncomp);
        out.resize(HEADER_LEN, 0);
        for c in &self.comps {
            if c.len() != n {
                return Err(Error::GridMismatch(format!(
                    "component has {} values, grid has {n}",
                    c.len()
                )));
            }
            for v in c {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "snapshot too short: {} bytes",
                bytes.len()
            )));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::Format("bad magic, not a CLGF snapshot".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let version = u32_at(4);
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported snapshot version {version}"
            )));
        }
        let geometry = Geometry::from_code(bytes[8])
            .ok_or_else(|| Error::Format(format!("unknown geometry code {}", bytes[8])))?;
        let dims = [u32_at(9) as usize, u32_at(13) as usize, u32_at(17) as usize];
        let lengths = [f64_at(21), f64_at(29), f64_at(37)];
        let ncomp = bytes[45] as usize;
        let grid = LabelGrid::new(geometry, dims, lengths)
            .map_err(|e| Error::Format(format!("bad grid in header: {e}")))?;
        let n = grid.len();
        let expected = HEADER_LEN + 8 * n * ncomp;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "snapshot has {} bytes, header implies {expected}",
                bytes.len()
            )));
        }
        let comps = (0..ncomp)
            .map(|c| {
                let base = HEADER_LEN + 8 * n * c;
                (0..n).map(|i| f64_at(base + 8 * i)).collect()
            })
            .collect();
        Ok(Self { grid, comps })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
