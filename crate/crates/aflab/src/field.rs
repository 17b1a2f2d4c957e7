//! Periodic grid and real-valued grid functions.
//!
//! Coordinates follow the fixed chart convention: `z = x + iy`,
//! `d_z d_zbar = (d_xx + d_yy)/4`, `i dz ^ dzbar = 2 dx ^ dy`. Nodes are
//! stored row-major (y outer, x inner) and index arithmetic is periodic in
//! both directions.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const FIELD_MAGIC: &[u8; 6] = b"AFLD1\0";

/// Periodic rectangular lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    /// Origin offset; 0 for flow grids, nonzero for the centered patch
    /// used by the identity checks.
    pub x0: f64,
    pub y0: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        Self::with_origin(nx, ny, lx, ly, 0.0, 0.0)
    }

    pub fn with_origin(nx: usize, ny: usize, lx: f64, ly: f64, x0: f64, y0: f64) -> Result<Self> {
        if nx < 8 || ny < 8 {
            return Err(Error::Validation(format!(
                "grid must be at least 8x8, got {nx}x{ny}"
            )));
        }
        if !(lx > 0.0) || !(ly > 0.0) {
            return Err(Error::Validation(format!(
                "domain lengths must be positive, got lx={lx}, ly={ly}"
            )));
        }
        Ok(Grid { nx, ny, lx, ly, x0, y0 })
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    #[inline]
    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.hx()
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.hy()
    }

    /// Cell weight of the integration rule, without the metric factor.
    #[inline]
    pub fn cell(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self == other
    }
}

/// Real grid function, row-major over a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        ScalarField { grid, values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            let y = grid.y(j);
            for i in 0..grid.nx {
                values.push(f(grid.x(i), y));
            }
        }
        ScalarField { grid, values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination with another field on the same grid.
    pub fn zip(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_same_grid(&self.grid, &other.grid)?;
        Ok(ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Row-major position of the minimum value.
    pub fn argmin(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, &v) in self.values.iter().enumerate() {
            if v < self.values[best] {
                best = k;
            }
        }
        (best % self.grid.nx, best / self.grid.nx)
    }

    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(6 + 8 * 4 + 8 * self.values.len());
        buf.extend_from_slice(FIELD_MAGIC);
        buf.extend_from_slice(&(self.grid.nx as u64).to_le_bytes());
        buf.extend_from_slice(&(self.grid.ny as u64).to_le_bytes());
        buf.extend_from_slice(&self.grid.lx.to_le_bytes());
        buf.extend_from_slice(&self.grid.ly.to_le_bytes());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    pub fn read_dump(path: &Path) -> Result<ScalarField> {
        let bad = |reason: &str| Error::Format { path: path.to_path_buf(), reason: reason.into() };
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 6 + 32 || &bytes[..6] != FIELD_MAGIC {
            return Err(bad("missing AFLD1 magic"));
        }
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let nx = u64_at(6) as usize;
        let ny = u64_at(14) as usize;
        let lx = f64_at(22);
        let ly = f64_at(30);
        let grid = Grid::new(nx, ny, lx, ly)
            .map_err(|e| bad(&format!("bad header: {e}")))?;
        let expected = 38 + 8 * grid.len();
        if bytes.len() != expected {
            return Err(bad(&format!(
                "size mismatch: expected {expected} bytes for {nx}x{ny}, got {}",
                bytes.len()
            )));
        }
        let values = (0..grid.len()).map(|k| f64_at(38 + 8 * k)).collect();
        Ok(ScalarField { grid, values })
    }
}

pub fn check_same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "{}x{} ({} x {}) vs {}x{} ({} x {})",
            a.nx, a.ny, a.lx, a.ly, b.nx, b.ny, b.lx, b.ly
        )))
    }
}
