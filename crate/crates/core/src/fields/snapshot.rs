//! Binary snapshot records.
//!
//! Layout (all integers and floats little-endian, floats as raw IEEE-754 bits):
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"AXISNAP1"
//! 8       4     u32 format version (= 1)
//! 12      1     u8 flags: bit 0 = pressure present, bit 1 = zoom provenance present
//! 13      1     u8 z_periodic (0 or 1)
//! 14      2     u16 reserved (= 0)
//! 16      8     u64 n_rho
//! 24      8     u64 n_z
//! 32      8     f64 rho_max
//! 40      8     f64 z_min
//! 48      8     f64 z_max
//! 56      8     f64 t
//! [provenance, if flag bit 1]
//!         8     u64 k
//!         8×6   f64 lambda_k, t_k, rho_k, z_k, m_k, a
//! arrays  nr·nz f64 each, row-major with the radial index outermost:
//!         v_rho, v_phi, v_z, then pressure if flag bit 0
//! ```
//!
//! `nr = n_rho + 1`; `nz = n_z` for periodic grids and `n_z + 1` otherwise.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use super::{AxiField, Grid2D, ScalarField2D};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"AXISNAP1";
pub const VERSION: u32 = 1;

/// Where a zoomed snapshot came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoomProvenance {
    pub k: u64,
    pub lambda_k: f64,
    pub t_k: f64,
    pub rho_k: f64,
    pub z_k: f64,
    pub m_k: f64,
    pub a: f64,
}

/// One record: a velocity field, optionally its pressure and zoom provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRecord {
    pub velocity: AxiField,
    pub pressure: Option<ScalarField2D>,
    pub provenance: Option<ZoomProvenance>,
}

impl SnapshotRecord {
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let g = &self.velocity.grid;
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        let flags = u8::from(self.pressure.is_some()) | (u8::from(self.provenance.is_some()) << 1);
        w.write_u8(flags)?;
        w.write_u8(u8::from(g.z_periodic))?;
        w.write_u16::<LittleEndian>(0)?;
        w.write_u64::<LittleEndian>(g.n_rho as u64)?;
        w.write_u64::<LittleEndian>(g.n_z as u64)?;
        for x in [g.rho_max, g.z_min, g.z_max, self.velocity.t] {
            w.write_f64::<LittleEndian>(x)?;
        }
        if let Some(p) = &self.provenance {
            w.write_u64::<LittleEndian>(p.k)?;
            for x in [p.lambda_k, p.t_k, p.rho_k, p.z_k, p.m_k, p.a] {
                w.write_f64::<LittleEndian>(x)?;
            }
        }
        write_array(w, &self.velocity.v_rho)?;
        write_array(w, &self.velocity.v_phi)?;
        write_array(w, &self.velocity.v_z)?;
        if let Some(q) = &self.pressure {
            if q.values.dim() != g.shape() {
                return Err(Error::ShapeMismatch {
                    expected: g.shape(),
                    found: q.values.dim(),
                });
            }
            write_array(w, &q.values)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let flags = r.read_u8()?;
        let periodic = match r.read_u8()? {
            0 => false,
            1 => true,
            other => return Err(Error::Format(format!("bad periodic flag {other}"))),
        };
        let _reserved = r.read_u16::<LittleEndian>()?;
        let n_rho = r.read_u64::<LittleEndian>()? as usize;
        let n_z = r.read_u64::<LittleEndian>()? as usize;
        let rho_max = r.read_f64::<LittleEndian>()?;
        let z_min = r.read_f64::<LittleEndian>()?;
        let z_max = r.read_f64::<LittleEndian>()?;
        let t = r.read_f64::<LittleEndian>()?;
        let grid = Grid2D::new(rho_max, z_min, z_max, n_rho, n_z, periodic)?;
        let provenance = if flags & 2 != 0 {
            let k = r.read_u64::<LittleEndian>()?;
            let mut x = [0.0; 6];
            for v in x.iter_mut() {
                *v = r.read_f64::<LittleEndian>()?;
            }
            Some(ZoomProvenance {
                k,
                lambda_k: x[0],
                t_k: x[1],
                rho_k: x[2],
                z_k: x[3],
                m_k: x[4],
                a: x[5],
            })
        } else {
            None
        };
        let v_rho = read_array(r, grid.shape())?;
        let v_phi = read_array(r, grid.shape())?;
        let v_z = read_array(r, grid.shape())?;
        let pressure = if flags & 1 != 0 {
            Some(ScalarField2D::new(grid, t, read_array(r, grid.shape())?)?)
        } else {
            None
        };
        Ok(Self {
            velocity: AxiField::new(grid, t, v_rho, v_phi, v_z)?,
            pressure,
            provenance,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }
}

fn write_array(w: &mut impl Write, a: &Array2<f64>) -> Result<()> {
    for &x in a.iter() {
        w.write_f64::<LittleEndian>(x)?;
    }
    Ok(())
}

fn read_array(r: &mut impl Read, shape: (usize, usize)) -> Result<Array2<f64>> {
    let mut data = vec![0.0; shape.0 * shape.1];
    r.read_f64_into::<LittleEndian>(&mut data)?;
    Array2::from_shape_vec(shape, data).map_err(|e| Error::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            vals in proptest::collection::vec(proptest::num::f64::ANY, 4 * 9 * 9),
            t in proptest::num::f64::NORMAL,
            periodic in any::<bool>(),
            with_prov in any::<bool>(),
        ) {
            let g = Grid2D::new(1.0, -1.0, 1.0, 8, if periodic { 9 } else { 8 }, periodic).unwrap();
            let n = g.nr() * g.nz();
            let arr = |k: usize| Array2::from_shape_vec(g.shape(), vals[k * n..(k + 1) * n].to_vec()).unwrap();
            let rec = SnapshotRecord {
                velocity: AxiField::new(g, t, arr(0), arr(1), arr(2)).unwrap(),
                pressure: Some(ScalarField2D::new(g, t, arr(3)).unwrap()),
                provenance: with_prov.then_some(ZoomProvenance {
                    k: 3, lambda_k: 0.25, t_k: -0.5, rho_k: 0.125, z_k: 0.0, m_k: 4.0, a: 1.0,
                }),
            };
            let mut buf = Vec::new();
            rec.write_to(&mut buf).unwrap();
            let back = SnapshotRecord::read_from(&mut buf.as_slice()).unwrap();
            let mut buf2 = Vec::new();
            back.write_to(&mut buf2).unwrap();
            prop_assert_eq!(buf, buf2);
        }
    }

    #[test]
    fn rejects_bad_magic() {
        let mut bytes = vec![0u8; 64];
        bytes[..8].copy_from_slice(b"NOTASNAP");
        assert!(matches!(
            SnapshotRecord::read_from(&mut bytes.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn header_layout_is_fixed() {
        let g = Grid2D::new(1.0, -1.0, 1.0, 4, 4, false).unwrap();
        let rec = SnapshotRecord {
            velocity: AxiField::zeros(g, 0.5),
            pressure: None,
            provenance: None,
        };
        let mut buf = Vec::new();
        rec.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 64 + 3 * 25 * 8);
        assert_eq!(&buf[..8], MAGIC);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(buf[56..64].try_into().unwrap()), 0.5);
    }
}
