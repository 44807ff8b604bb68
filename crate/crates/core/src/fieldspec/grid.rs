//! Uniform-lattice scalar samples with multilinear interpolation and the
//! `CFGR` binary file format.
//!
//! File layout (little endian): magic `CFGR`, u32 version = 1, u32 n,
//! u32 shape[n], f64 origin[n], f64 h, then f64 node values in row-major
//! order (last axis fastest).

use crate::error::{Error, Result};
use crate::geometry::AxisBox;
use std::io::{Read, Write};

pub const GRID_MAGIC: &[u8; 4] = b"CFGR";
pub const GRID_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub origin: Vec<f64>,
    pub h: f64,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(origin: Vec<f64>, h: f64, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if h <= 0.0 {
            return Err(Error::NonPositiveRadius(h));
        }
        if origin.len() != shape.len() {
            return Err(Error::DimensionMismatch {
                expected: shape.len(),
                got: origin.len(),
            });
        }
        let count: usize = shape.iter().product();
        if shape.iter().any(|&s| s < 2) || values.len() != count {
            return Err(Error::GridFormat(format!(
                "value count {} does not match shape {:?}",
                values.len(),
                shape
            )));
        }
        Ok(GridField {
            origin,
            h,
            shape,
            values,
        })
    }

    /// Samples a function on a lattice of `shape` nodes starting at `origin`.
    pub fn sample<F: FnMut(&[f64]) -> f64>(
        origin: Vec<f64>,
        h: f64,
        shape: Vec<usize>,
        mut f: F,
    ) -> Result<Self> {
        let n = shape.len();
        let count: usize = shape.iter().product();
        let mut values = Vec::with_capacity(count);
        let mut idx = vec![0usize; n];
        let mut x = vec![0.0; n];
        for _ in 0..count {
            for d in 0..n {
                x[d] = origin[d] + idx[d] as f64 * h;
            }
            values.push(f(&x));
            for d in (0..n).rev() {
                idx[d] += 1;
                if idx[d] < shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        GridField::new(origin, h, shape, values)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    /// The box spanned by the lattice.
    pub fn lattice_box(&self) -> AxisBox {
        let hi = self
            .origin
            .iter()
            .zip(&self.shape)
            .map(|(o, s)| o + (s - 1) as f64 * self.h)
            .collect();
        AxisBox {
            lo: self.origin.clone(),
            hi,
        }
    }

    #[inline]
    pub fn node_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0usize;
        for d in 0..self.shape.len() {
            flat = flat * self.shape[d] + idx[d];
        }
        flat
    }

    pub fn node_point(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .zip(&self.origin)
            .map(|(i, o)| o + *i as f64 * self.h)
            .collect()
    }

    /// Multilinear interpolation; exact at lattice nodes. Callers sit in
    /// quadrature hot loops, so the working set lives on the stack.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        const MAX_DIM: usize = 8;
        let n = self.dim();
        if x.len() != n || n > MAX_DIM {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let mut cell = [0usize; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        for d in 0..n {
            let u = (x[d] - self.origin[d]) / self.h;
            let top = (self.shape[d] - 1) as f64;
            if u < -1e-12 || u > top + 1e-12 {
                return Err(Error::OutsideGrid(x.to_vec()));
            }
            let c = (u.floor().max(0.0) as usize).min(self.shape[d] - 2);
            cell[d] = c;
            frac[d] = (u - c as f64).clamp(0.0, 1.0);
        }
        // Sum over the 2^n cell corners.
        let mut value = 0.0;
        let corners = 1usize << n;
        for corner in 0..corners {
            let mut w = 1.0;
            let mut flat = 0usize;
            for d in 0..n {
                let up = corner >> d & 1 == 1;
                w *= if up { frac[d] } else { 1.0 - frac[d] };
                flat = flat * self.shape[d] + cell[d] + usize::from(up);
            }
            if w != 0.0 {
                value += w * self.values[flat];
            }
        }
        Ok(value)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(GRID_MAGIC)?;
        w.write_all(&GRID_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        for &s in &self.shape {
            w.write_all(&(s as u32).to_le_bytes())?;
        }
        for &o in &self.origin {
            w.write_all(&o.to_le_bytes())?;
        }
        w.write_all(&self.h.to_le_bytes())?;
        for &v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let io_err = |e: std::io::Error| Error::GridFormat(e.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io_err)?;
        if &magic != GRID_MAGIC {
            return Err(Error::GridFormat("bad magic".into()));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf).map_err(io_err)?;
        let version = u32::from_le_bytes(u32buf);
        if version != GRID_VERSION {
            return Err(Error::GridFormat(format!("unsupported version {version}")));
        }
        r.read_exact(&mut u32buf).map_err(io_err)?;
        let n = u32::from_le_bytes(u32buf) as usize;
        if n == 0 || n > 16 {
            return Err(Error::GridFormat(format!("implausible dimension {n}")));
        }
        let mut shape = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut u32buf).map_err(io_err)?;
            shape.push(u32::from_le_bytes(u32buf) as usize);
        }
        let mut f64buf = [0u8; 8];
        let mut origin = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut f64buf).map_err(io_err)?;
            origin.push(f64::from_le_bytes(f64buf));
        }
        r.read_exact(&mut f64buf).map_err(io_err)?;
        let h = f64::from_le_bytes(f64buf);
        let count: usize = shape.iter().product();
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut f64buf).map_err(io_err)?;
            values.push(f64::from_le_bytes(f64buf));
        }
        GridField::new(origin, h, shape, values)
    }

    pub fn write_file(&self, path: &std::path::Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)
    }
}

impl GridField {
    pub fn read_file(path: &std::path::Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(
            std::fs::File::open(path).map_err(|e| Error::GridFormat(e.to_string()))?,
        );
        Self::read_from(&mut f)
    }
}

impl super::ScalarField for GridField {
    fn dim(&self) -> usize {
        self.shape.len()
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        GridField::eval(self, x)
    }
}
