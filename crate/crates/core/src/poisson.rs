//! Direct solver for axisymmetric Poisson-type problems
//!
//! ```text
//!     ∂²_ρ u + s (1/ρ) ∂_ρ u + ∂²_z u = rhs,      s = ±1
//! ```
//!
//! on a [`Grid2D`]. The axial direction is diagonalised by the exact eigenbasis
//! of the 1D second-difference operator (Fourier for periodic ranges, sine for
//! Dirichlet ends, cosine for homogeneous Neumann ends); each axial mode is then
//! a tridiagonal system in ρ solved by the Thomas algorithm. The transforms are
//! dense matrix products, which is adequate for the grid sizes used here.
//!
//! `s = −1` is the Stokes streamfunction operator (axis value 0); `s = +1` is the
//! Laplacian of a scalar that is even in ρ.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fields::Grid2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialKind {
    /// `∂²_ρ − (1/ρ)∂_ρ`, `u = 0` on the axis.
    Stokes,
    /// `∂²_ρ + (1/ρ)∂_ρ`, `u` even across the axis.
    Laplace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallKind {
    /// Prescribed value at `ρ = rho_max`.
    Dirichlet,
    /// Prescribed `∂_ρ u` at `ρ = rho_max`.
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZKind {
    Periodic,
    /// Prescribed values at `z_min` and `z_max`.
    Dirichlet,
    /// `∂_z u = 0` at `z_min` and `z_max`.
    Neumann,
}

/// Boundary data. Missing entries mean homogeneous data.
#[derive(Debug, Clone, Default)]
pub struct Boundary {
    /// Wall value (Dirichlet) or wall flux `∂_ρ u` (Neumann), one entry per axial node.
    pub wall: Option<Vec<f64>>,
    /// Values on `z = z_min`, one entry per radial node (Dirichlet ends only).
    pub z_low: Option<Vec<f64>>,
    /// Values on `z = z_max`, one entry per radial node (Dirichlet ends only).
    pub z_high: Option<Vec<f64>>,
}

/// Diagnostics of one solve.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolveInfo {
    /// Constant removed from the source to make a pure-Neumann problem solvable.
    pub compatibility_shift: f64,
}

struct ZBasis {
    kind: ZKind,
    /// First stored axial node that is an unknown.
    offset: usize,
    /// Number of unknown axial nodes (= number of modes).
    m: usize,
    /// Analysis matrix, `m × m`, row = mode.
    forward: Vec<f64>,
    /// Synthesis matrix, `m × m`, row = node.
    inverse: Vec<f64>,
    eig: Vec<f64>,
}

impl ZBasis {
    fn new(grid: &Grid2D, kind: ZKind) -> Result<Self> {
        let h2 = grid.d_z * grid.d_z;
        match (kind, grid.z_periodic) {
            (ZKind::Periodic, false) | (ZKind::Dirichlet | ZKind::Neumann, true) => {
                return Err(Error::Poisson(format!(
                    "axial boundary kind {kind:?} incompatible with periodic = {}",
                    grid.z_periodic
                )))
            }
            _ => {}
        }
        let (offset, m) = match kind {
            ZKind::Periodic => (0, grid.n_z),
            ZKind::Dirichlet => (1, grid.n_z - 1),
            ZKind::Neumann => (0, grid.n_z + 1),
        };
        let mut forward = vec![0.0; m * m];
        let mut inverse = vec![0.0; m * m];
        let mut eig = vec![0.0; m];
        match kind {
            ZKind::Periodic => {
                let n = m as f64;
                // Real orthonormal Fourier basis: 1, cos/sin pairs, and the Nyquist mode.
                let mut col = 0;
                let mut push = |phi: &dyn Fn(usize) -> f64, lam: f64, col: &mut usize| {
                    for j in 0..m {
                        inverse[j * m + *col] = phi(j);
                        forward[*col * m + j] = phi(j);
                    }
                    eig[*col] = lam;
                    *col += 1;
                };
                push(&|_| 1.0 / n.sqrt(), 0.0, &mut col);
                for k in 1..m.div_ceil(2) {
                    let theta = 2.0 * PI * k as f64 / n;
                    let lam = -(2.0 - 2.0 * theta.cos()) / h2;
                    let c = (2.0 / n).sqrt();
                    push(&|j| c * (theta * j as f64).cos(), lam, &mut col);
                    push(&|j| c * (theta * j as f64).sin(), lam, &mut col);
                }
                if m % 2 == 0 {
                    push(
                        &|j| if j % 2 == 0 { 1.0 } else { -1.0 } / n.sqrt(),
                        -4.0 / h2,
                        &mut col,
                    );
                }
                debug_assert_eq!(col, m);
            }
            ZKind::Dirichlet => {
                let n = grid.n_z as f64;
                let c = (2.0 / n).sqrt();
                for k in 0..m {
                    let theta = PI * (k + 1) as f64 / n;
                    eig[k] = -(2.0 - 2.0 * theta.cos()) / h2;
                    for j in 0..m {
                        let v = c * (theta * (j + 1) as f64).sin();
                        forward[k * m + j] = v;
                        inverse[j * m + k] = v;
                    }
                }
            }
            ZKind::Neumann => {
                let n = grid.n_z as f64;
                for k in 0..m {
                    let theta = PI * k as f64 / n;
                    eig[k] = -(2.0 - 2.0 * theta.cos()) / h2;
                    let norm = if k == 0 || k == m - 1 { n } else { n / 2.0 };
                    for j in 0..m {
                        let c = (theta * j as f64).cos();
                        let w = if j == 0 || j == m - 1 { 0.5 } else { 1.0 };
                        forward[k * m + j] = w * c / norm;
                        inverse[j * m + k] = c;
                    }
                }
            }
        }
        Ok(Self {
            kind,
            offset,
            m,
            forward,
            inverse,
            eig,
        })
    }
}

/// Cached solver for one grid and one set of boundary kinds.
pub struct AxiPoisson {
    grid: Grid2D,
    radial: RadialKind,
    wall: WallKind,
    basis: ZBasis,
    /// Radial unknowns `i_lo..=i_hi`.
    i_lo: usize,
    i_hi: usize,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl AxiPoisson {
    pub fn new(grid: Grid2D, radial: RadialKind, wall: WallKind, z: ZKind) -> Result<Self> {
        if radial == RadialKind::Stokes && wall == WallKind::Neumann {
            return Err(Error::Poisson("Neumann wall is only supported for the Laplacian".into()));
        }
        let basis = ZBasis::new(&grid, z)?;
        let n = grid.n_rho;
        let i_lo = match radial {
            RadialKind::Stokes => 1,
            RadialKind::Laplace => 0,
        };
        let i_hi = match wall {
            WallKind::Dirichlet => n - 1,
            WallKind::Neumann => n,
        };
        let s = match radial {
            RadialKind::Stokes => -1.0,
            RadialKind::Laplace => 1.0,
        };
        let h = grid.d_rho;
        let ih2 = 1.0 / (h * h);
        let len = i_hi - i_lo + 1;
        let (mut lower, mut diag, mut upper) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        for (row, i) in (i_lo..=i_hi).enumerate() {
            if i == 0 {
                diag[row] = -4.0 * ih2;
                upper[row] = 4.0 * ih2;
            } else if i == n {
                lower[row] = 2.0 * ih2;
                diag[row] = -2.0 * ih2;
            } else {
                let drift = s / (2.0 * grid.rho(i) * h);
                lower[row] = ih2 - drift;
                diag[row] = -2.0 * ih2;
                upper[row] = ih2 + drift;
            }
        }
        Ok(Self {
            grid,
            radial,
            wall,
            basis,
            i_lo,
            i_hi,
            lower,
            diag,
            upper,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    fn drift_sign(&self) -> f64 {
        match self.radial {
            RadialKind::Stokes => -1.0,
            RadialKind::Laplace => 1.0,
        }
    }

    /// Solves for `u` given the source on every stored node. Source values on
    /// Dirichlet boundary nodes are ignored.
    pub fn solve(&self, rhs: &Array2<f64>, bc: &Boundary) -> Result<(Array2<f64>, SolveInfo)> {
        let g = &self.grid;
        if rhs.dim() != g.shape() {
            return Err(Error::ShapeMismatch {
                expected: g.shape(),
                found: rhs.dim(),
            });
        }
        let (nr, nz) = g.shape();
        let n = g.n_rho;
        let h = g.d_rho;
        let mut src = rhs.clone();
        let zero_r = vec![0.0; nr];
        let z_low = bc.z_low.as_deref().unwrap_or(&zero_r);
        let z_high = bc.z_high.as_deref().unwrap_or(&zero_r);
        let zero_z = vec![0.0; nz];
        let wall = bc.wall.as_deref().unwrap_or(&zero_z);
        if wall.len() != nz || z_low.len() != nr || z_high.len() != nr {
            return Err(Error::Poisson("boundary data has the wrong length".into()));
        }

        if self.basis.kind == ZKind::Dirichlet {
            let ih2 = 1.0 / (g.d_z * g.d_z);
            for i in 0..nr {
                src[[i, 1]] -= z_low[i] * ih2;
                src[[i, nz - 2]] -= z_high[i] * ih2;
            }
        }
        match self.wall {
            WallKind::Dirichlet => {
                let c = 1.0 / (h * h) + self.drift_sign() / (2.0 * g.rho(n - 1) * h);
                for j in 0..nz {
                    src[[n - 1, j]] -= c * wall[j];
                }
            }
            WallKind::Neumann => {
                let c = 2.0 / h + self.drift_sign() / g.rho(n);
                for j in 0..nz {
                    src[[n, j]] -= c * wall[j];
                }
            }
        }

        let m = self.basis.m;
        let off = self.basis.offset;
        let rows = self.i_hi - self.i_lo + 1;
        // Modal coefficients, laid out [mode][radial row].
        let mut hat = vec![0.0; m * rows];
        for (row, i) in (self.i_lo..=self.i_hi).enumerate() {
            let line: Vec<f64> = (0..m).map(|jj| src[[i, jj + off]]).collect();
            for k in 0..m {
                let f = &self.basis.forward[k * m..(k + 1) * m];
                hat[k * rows + row] = f.iter().zip(&line).map(|(a, b)| a * b).sum();
            }
        }

        let mut info = SolveInfo::default();
        let singular_possible = self.radial == RadialKind::Laplace && self.wall == WallKind::Neumann;
        for k in 0..m {
            let mu = self.basis.eig[k];
            let b = &mut hat[k * rows..(k + 1) * rows];
            if singular_possible && mu == 0.0 {
                info.compatibility_shift = self.project_compatible(b);
                let mut diag: Vec<f64> = self.diag.clone();
                let mut upper = self.upper.clone();
                diag[0] = 1.0;
                upper[0] = 0.0;
                b[0] = 0.0;
                thomas(&self.lower, &diag, &upper, b)?;
            } else {
                let diag: Vec<f64> = self.diag.iter().map(|d| d + mu).collect();
                thomas(&self.lower, &diag, &self.upper, b)?;
            }
        }

        let mut u = Array2::zeros((nr, nz));
        for (row, i) in (self.i_lo..=self.i_hi).enumerate() {
            for jj in 0..m {
                let v = &self.basis.inverse[jj * m..(jj + 1) * m];
                u[[i, jj + off]] = (0..m).map(|k| v[k] * hat[k * rows + row]).sum();
            }
        }
        if self.wall == WallKind::Dirichlet {
            for j in 0..nz {
                u[[n, j]] = wall[j];
            }
        }
        if self.basis.kind == ZKind::Dirichlet {
            for i in 0..nr {
                u[[i, 0]] = z_low[i];
                u[[i, nz - 1]] = z_high[i];
            }
        }
        Ok((u, info))
    }

    /// Removes the component of the zero-mode source outside the range of the
    /// singular radial operator; returns the constant that was subtracted.
    fn project_compatible(&self, b: &mut [f64]) -> f64 {
        let len = b.len();
        // Left null vector from the column recurrence of Aᵀw = 0.
        let mut w = vec![0.0; len];
        w[0] = 1.0;
        w[1] = -self.diag[0] * w[0] / self.lower[1];
        for j in 1..len - 1 {
            w[j + 1] = -(self.upper[j - 1] * w[j - 1] + self.diag[j] * w[j]) / self.lower[j + 1];
        }
        let wb: f64 = w.iter().zip(b.iter()).map(|(a, c)| a * c).sum();
        let w1: f64 = w.iter().sum();
        let shift = wb / w1;
        for v in b.iter_mut() {
            *v -= shift;
        }
        // Shift is per modal coefficient; convert to a nodal constant.
        let scale = match self.basis.kind {
            ZKind::Periodic => 1.0 / (self.basis.m as f64).sqrt(),
            _ => 1.0,
        };
        shift * scale
    }

    /// Applies the discrete operator (same stencils as the solve) at unknown nodes;
    /// boundary data enter through `u` itself. Used by tests and residual checks.
    pub fn apply(&self, u: &Array2<f64>, bc: &Boundary) -> Array2<f64> {
        let g = &self.grid;
        let (nr, nz) = g.shape();
        let n = g.n_rho;
        let h = g.d_rho;
        let ih2 = 1.0 / (h * h);
        let izh2 = 1.0 / (g.d_z * g.d_z);
        let s = self.drift_sign();
        let zero_z = vec![0.0; nz];
        let wall = bc.wall.as_deref().unwrap_or(&zero_z);
        let mut out = Array2::zeros((nr, nz));
        let get_z = |i: usize, j: isize| -> f64 {
            if g.z_periodic {
                u[[i, g.wrap_index(j)]]
            } else if j < 0 {
                u[[i, 1]]
            } else if j as usize >= nz {
                u[[i, nz - 2]]
            } else {
                u[[i, j as usize]]
            }
        };
        let (j_lo, j_hi) = match self.basis.kind {
            ZKind::Dirichlet => (1, nz - 2),
            _ => (0, nz - 1),
        };
        for i in self.i_lo..=self.i_hi {
            for j in j_lo..=j_hi {
                let jj = j as isize;
                let uzz = (get_z(i, jj + 1) - 2.0 * u[[i, j]] + get_z(i, jj - 1)) * izh2;
                let ur = if i == 0 {
                    4.0 * (u[[1, j]] - u[[0, j]]) * ih2
                } else if i == n {
                    let ghost = u[[n - 1, j]] + 2.0 * h * wall[j];
                    (ghost - 2.0 * u[[n, j]] + u[[n - 1, j]]) * ih2
                        + s * (ghost - u[[n - 1, j]]) / (2.0 * h * g.rho(n))
                } else {
                    (u[[i + 1, j]] - 2.0 * u[[i, j]] + u[[i - 1, j]]) * ih2
                        + s * (u[[i + 1, j]] - u[[i - 1, j]]) / (2.0 * h * g.rho(i))
                };
                out[[i, j]] = ur + uzz;
            }
        }
        out
    }
}

/// Thomas algorithm for `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = b[i]`; overwrites `b`.
pub fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], b: &mut [f64]) -> Result<()> {
    let n = b.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 || !beta.is_finite() {
        return Err(Error::Poisson("zero pivot in tridiagonal solve".into()));
    }
    b[0] /= beta;
    for i in 1..n {
        c[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i];
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::Poisson(format!("zero pivot at row {i}")));
        }
        b[i] = (b[i] - lower[i] * b[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        b[i] -= c[i + 1] * b[i + 1];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(a: &Array2<f64>) -> f64 {
        a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn thomas_solves_small_system() {
        let lower = [0.0, 1.0, 1.0];
        let diag = [4.0, 4.0, 4.0];
        let upper = [1.0, 1.0, 0.0];
        let mut b = [5.0, 6.0, 5.0];
        thomas(&lower, &diag, &upper, &mut b).unwrap();
        for v in b {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    fn check_residual(grid: Grid2D, radial: RadialKind, wall: WallKind, z: ZKind) {
        let p = AxiPoisson::new(grid, radial, wall, z).unwrap();
        let rhs = Array2::from_shape_fn(grid.shape(), |(i, j)| {
            let (r, zz) = (grid.rho(i), grid.z(j));
            (3.0 * zz).sin() * (1.0 - r * r) + r * zz.cos()
        });
        let bc = Boundary {
            wall: (wall == WallKind::Dirichlet).then(|| (0..grid.nz()).map(|j| grid.z(j).cos()).collect()),
            ..Default::default()
        };
        let (u, info) = p.solve(&rhs, &bc).unwrap();
        let au = p.apply(&u, &bc);
        let mut worst: f64 = 0.0;
        for i in p.i_lo..=p.i_hi {
            for j in 0..grid.nz() {
                if z == ZKind::Dirichlet && (j == 0 || j == grid.nz() - 1) {
                    continue;
                }
                let want = rhs[[i, j]] - info.compatibility_shift;
                worst = worst.max((au[[i, j]] - want).abs());
            }
        }
        assert!(worst < 1e-8 * max_abs(&rhs).max(1.0), "{radial:?} {wall:?} {z:?}: {worst}");
    }

    #[test]
    fn residual_vanishes_for_every_configuration() {
        let per = Grid2D::new(1.0, 0.0, 2.0 * PI, 24, 20, true).unwrap();
        let bnd = Grid2D::new(1.0, -1.0, 1.0, 24, 20, false).unwrap();
        check_residual(per, RadialKind::Stokes, WallKind::Dirichlet, ZKind::Periodic);
        check_residual(bnd, RadialKind::Stokes, WallKind::Dirichlet, ZKind::Dirichlet);
        check_residual(per, RadialKind::Laplace, WallKind::Dirichlet, ZKind::Periodic);
        check_residual(bnd, RadialKind::Laplace, WallKind::Dirichlet, ZKind::Dirichlet);
        check_residual(bnd, RadialKind::Laplace, WallKind::Neumann, ZKind::Neumann);
        check_residual(per, RadialKind::Laplace, WallKind::Neumann, ZKind::Periodic);
        let odd = Grid2D::new(1.0, 0.0, 2.0 * PI, 16, 15, true).unwrap();
        check_residual(odd, RadialKind::Laplace, WallKind::Neumann, ZKind::Periodic);
    }

    #[test]
    fn mismatched_axial_kind_is_rejected() {
        let per = Grid2D::new(1.0, 0.0, 1.0, 8, 8, true).unwrap();
        assert!(AxiPoisson::new(per, RadialKind::Stokes, WallKind::Dirichlet, ZKind::Dirichlet).is_err());
    }

    #[test]
    fn neumann_data_enters_through_the_ghost_node() {
        // u = ρ²/2 solves Δu = 2 with ∂_ρ u = rho_max at the wall.
        let g = Grid2D::new(1.0, -1.0, 1.0, 16, 16, false).unwrap();
        let p = AxiPoisson::new(g, RadialKind::Laplace, WallKind::Neumann, ZKind::Neumann).unwrap();
        let rhs = Array2::from_elem(g.shape(), 2.0);
        let bc = Boundary {
            wall: Some(vec![1.0; g.nz()]),
            ..Default::default()
        };
        let (u, info) = p.solve(&rhs, &bc).unwrap();
        assert!(info.compatibility_shift.abs() < 1e-10, "{}", info.compatibility_shift);
        let c = u[[0, 0]];
        for i in 0..g.nr() {
            for j in 0..g.nz() {
                assert!((u[[i, j]] - c - 0.5 * g.rho(i).powi(2)).abs() < 1e-10);
            }
        }
    }
}
