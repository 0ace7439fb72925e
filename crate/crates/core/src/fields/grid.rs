use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform (ρ, z) grid over the meridional half-plane.
///
/// Radial nodes are `ρ_i = i·d_rho` for `i = 0..=n_rho`, so node 0 sits on the
/// axis and node `n_rho` on the outer wall. Axial nodes are `z_j = z_min + j·d_z`;
/// a periodic grid stores `n_z` nodes (the node at `z_max` is the image of
/// `z_min`), a bounded grid stores `n_z + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub rho_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub n_rho: usize,
    pub n_z: usize,
    pub d_rho: f64,
    pub d_z: f64,
    pub z_periodic: bool,
}

impl Grid2D {
    pub fn new(
        rho_max: f64,
        z_min: f64,
        z_max: f64,
        n_rho: usize,
        n_z: usize,
        z_periodic: bool,
    ) -> Result<Self> {
        if !(rho_max.is_finite() && rho_max > 0.0) {
            return Err(Error::InvalidGrid(format!("rho_max must be positive, got {rho_max}")));
        }
        if !(z_min.is_finite() && z_max.is_finite() && z_max > z_min) {
            return Err(Error::InvalidGrid(format!(
                "need z_min < z_max, got [{z_min}, {z_max}]"
            )));
        }
        if n_rho < 4 || n_z < 4 {
            return Err(Error::InvalidGrid(format!(
                "need at least 4 cells per direction, got n_rho = {n_rho}, n_z = {n_z}"
            )));
        }
        Ok(Self {
            rho_max,
            z_min,
            z_max,
            n_rho,
            n_z,
            d_rho: rho_max / n_rho as f64,
            d_z: (z_max - z_min) / n_z as f64,
            z_periodic,
        })
    }

    /// Number of stored radial nodes (axis and wall included).
    #[inline]
    pub fn nr(&self) -> usize {
        self.n_rho + 1
    }

    /// Number of stored axial nodes.
    #[inline]
    pub fn nz(&self) -> usize {
        if self.z_periodic {
            self.n_z
        } else {
            self.n_z + 1
        }
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.nr(), self.nz())
    }

    #[inline]
    pub fn rho(&self, i: usize) -> f64 {
        i as f64 * self.d_rho
    }

    #[inline]
    pub fn z(&self, j: usize) -> f64 {
        self.z_min + j as f64 * self.d_z
    }

    pub fn z_length(&self) -> f64 {
        self.z_max - self.z_min
    }

    /// Smallest spacing, used by stability bounds and error models.
    pub fn h_min(&self) -> f64 {
        self.d_rho.min(self.d_z)
    }

    /// Refined copy with `factor` times as many cells in each direction.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(
            self.rho_max,
            self.z_min,
            self.z_max,
            self.n_rho * factor,
            self.n_z * factor,
            self.z_periodic,
        )
    }

    /// Whether the axial interval `[a, b]` is covered by the sampled range.
    /// Periodic grids cover any interval no longer than one period.
    pub fn covers_z(&self, a: f64, b: f64) -> bool {
        let tol = 1e-12 * self.z_length().max(1.0);
        if self.z_periodic {
            b - a <= self.z_length() + tol
        } else {
            a >= self.z_min - tol && b <= self.z_max + tol
        }
    }

    /// Wraps `z` into `[z_min, z_max)` on periodic grids; identity otherwise.
    pub fn wrap_z(&self, z: f64) -> f64 {
        if self.z_periodic {
            let l = self.z_length();
            let mut w = (z - self.z_min) % l;
            if w < 0.0 {
                w += l;
            }
            self.z_min + w
        } else {
            z
        }
    }

    /// Maps a possibly out-of-range axial index to a stored index (periodic grids only).
    #[inline]
    pub fn wrap_index(&self, j: isize) -> usize {
        let n = self.nz() as isize;
        (((j % n) + n) % n) as usize
    }

    /// Index of the stored node nearest to `z`.
    pub fn nearest_z_index(&self, z: f64) -> usize {
        let z = self.wrap_z(z);
        let j = ((z - self.z_min) / self.d_z).round() as isize;
        if self.z_periodic {
            self.wrap_index(j)
        } else {
            j.clamp(0, self.n_z as isize) as usize
        }
    }

    pub fn same_geometry(&self, other: &Grid2D) -> bool {
        self.n_rho == other.n_rho
            && self.n_z == other.n_z
            && self.z_periodic == other.z_periodic
            && (self.rho_max - other.rho_max).abs() <= 1e-12 * self.rho_max
            && (self.z_min - other.z_min).abs() <= 1e-12 * self.z_length()
            && (self.z_max - other.z_max).abs() <= 1e-12 * self.z_length()
    }
}
