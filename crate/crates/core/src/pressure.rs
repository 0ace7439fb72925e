//! Pressure recovery `Δq = −div div(v⊗v)`, the local / harmonic splitting
//! `q = q₁ + q₂` around a ball, and a sampled BMO seminorm.
//!
//! In axisymmetric form, for a symmetric tensor `T` with components
//! `T_ρρ, T_φφ, T_ρz, T_zz` (the `φρ`, `φz` components do not contribute),
//!
//! ```text
//! div div T = (1/ρ)∂_ρ(∂_ρ(ρT_ρρ) − T_φφ) + (2/ρ)∂_ρ∂_z(ρT_ρz) + ∂²_z T_zz
//! ```
//!
//! Each factor is differenced on its own, centred in the interior, one-sided at
//! the wall and at bounded axial ends, and by parity on the axis. The nested
//! form makes rigid rotation exact: `T_φφ = Ω²ρ²` gives a source of exactly `2Ω²`.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fields::quadrature::{interval_weights, CylinderWeights};
use crate::fields::stencil::{d_rho, d_z, d_zz, laplacian_even};
use crate::fields::{AxiField, CylinderSection, Grid2D, Parity, ScalarField2D, ZEnds};
use crate::poisson::{AxiPoisson, Boundary, RadialKind, WallKind, ZKind};

/// Default enlargement of the computational box used for `q₁`.
pub const DEFAULT_BOX_FACTOR: usize = 2;

/// Nodes closer than this many grid spacings to the cutoff sphere are excluded
/// from the harmonicity residual (the source stencil reaches two nodes).
const HARMONIC_MARGIN: f64 = 3.0;

/// `q = q₁ + q₂`, with `q₁` the response to the cut-off source.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureSplit {
    pub q1: ScalarField2D,
    pub q2: ScalarField2D,
    pub cutoff_radius: f64,
    /// Enlargement factor of the box on which `q₁` was computed.
    pub box_factor: usize,
    /// `max |Δ_h q₂|` over nodes at least three spacings inside the ball.
    pub harmonicity_residual: f64,
}

/// `(1/ρ)∂_ρ p` for `p` even in ρ; the axis value is the limit `∂²_ρ p(0)`.
fn inv_rho_d_rho_even(p: &Array2<f64>, g: &Grid2D) -> Array2<f64> {
    let mut out = d_rho(p, g, Parity::Even);
    let ih2 = 1.0 / (g.d_rho * g.d_rho);
    for j in 0..g.nz() {
        out[[0, j]] = 2.0 * (p[[1, j]] - p[[0, j]]) * ih2;
        for i in 1..g.nr() {
            out[[i, j]] /= g.rho(i);
        }
    }
    out
}

/// `div div T` for an axisymmetric symmetric tensor.
pub fn div_div(
    t_rr: &Array2<f64>,
    t_pp: &Array2<f64>,
    t_rz: &Array2<f64>,
    t_zz: &Array2<f64>,
    g: &Grid2D,
) -> Array2<f64> {
    let shape = g.shape();
    let rho_t_rr = Array2::from_shape_fn(shape, |(i, j)| g.rho(i) * t_rr[[i, j]]);
    let p = d_rho(&rho_t_rr, g, Parity::Odd) - t_pp;
    let mut out = inv_rho_d_rho_even(&p, g);

    let rho_t_rz = Array2::from_shape_fn(shape, |(i, j)| g.rho(i) * t_rz[[i, j]]);
    let y = d_z(&rho_t_rz, g, ZEnds::OneSided);
    out.scaled_add(2.0, &inv_rho_d_rho_even(&y, g));

    out += &d_zz(t_zz, g, ZEnds::OneSided);
    out
}

/// `−div div(v⊗v)`, optionally multiplied by a nodal mask before differencing.
fn pressure_source(v: &AxiField, mask: Option<&Array2<f64>>) -> Array2<f64> {
    let g = &v.grid;
    let m = |i: usize, j: usize| mask.map_or(1.0, |a| a[[i, j]]);
    let shape = g.shape();
    let t_rr = Array2::from_shape_fn(shape, |(i, j)| m(i, j) * v.v_rho[[i, j]] * v.v_rho[[i, j]]);
    let t_pp = Array2::from_shape_fn(shape, |(i, j)| m(i, j) * v.v_phi[[i, j]] * v.v_phi[[i, j]]);
    let t_rz = Array2::from_shape_fn(shape, |(i, j)| m(i, j) * v.v_rho[[i, j]] * v.v_z[[i, j]]);
    let t_zz = Array2::from_shape_fn(shape, |(i, j)| m(i, j) * v.v_z[[i, j]] * v.v_z[[i, j]]);
    -div_div(&t_rr, &t_pp, &t_rz, &t_zz, g)
}

/// Mean of `q` over the unit cylinder about the middle of the axial range,
/// clipped to the sampled domain.
fn unit_cylinder_mean(q: &Array2<f64>, g: &Grid2D) -> f64 {
    let mid = 0.5 * (g.z_min + g.z_max);
    let wr = interval_weights(0.0, g.d_rho, g.nr(), 0.0, g.rho_max.min(1.0), None);
    let period = g.z_periodic.then_some(g.nz());
    let wz = interval_weights(
        g.z_min,
        g.d_z,
        g.nz(),
        (mid - 1.0).max(g.z_min),
        (mid + 1.0).min(g.z_max),
        period,
    );
    let (mut num, mut den) = (0.0, 0.0);
    for &(j, b) in &wz {
        for &(i, a) in &wr {
            let w = a * b * g.rho(i);
            num += w * q[[i, j]];
            den += w;
        }
    }
    num / den
}

/// Solves `Δq = −div div(v⊗v)` with wall flux `∂_ρ q = v_φ²/ρ` (the radial
/// momentum balance for `v_ρ = 0` at the wall), homogeneous Neumann data on
/// bounded axial ends, and zero mean over the unit cylinder.
pub fn solve_pressure(v: &AxiField) -> Result<ScalarField2D> {
    let g = v.grid;
    let z = if g.z_periodic { ZKind::Periodic } else { ZKind::Neumann };
    let solver = AxiPoisson::new(g, RadialKind::Laplace, WallKind::Neumann, z)?;
    let src = pressure_source(v, None);
    let n = g.n_rho;
    let flux: Vec<f64> = (0..g.nz()).map(|j| v.v_phi[[n, j]].powi(2) / g.rho_max).collect();
    let bc = Boundary {
        wall: Some(flux),
        ..Default::default()
    };
    let (mut q, _) = solver.solve(&src, &bc)?;
    if q.iter().any(|x| !x.is_finite()) {
        return Err(Error::Poisson("non-finite pressure".into()));
    }
    let mean = unit_cylinder_mean(&q, &g);
    q.mapv_inplace(|x| x - mean);
    ScalarField2D::new(g, v.t, q)
}

/// [`split_pressure_with`] on a box enlarged by [`DEFAULT_BOX_FACTOR`].
pub fn split_pressure(q: &ScalarField2D, v: &AxiField, cutoff_radius: f64) -> Result<PressureSplit> {
    split_pressure_with(q, v, cutoff_radius, DEFAULT_BOX_FACTOR)
}

/// Splits `q` using the ball `ρ² + z² < R²`. `q₁` solves
/// `Δq₁ = −div div(χ_B v⊗v)` on a box `box_factor` times larger in each
/// direction with `q₁ = 0` on its far boundary; `q₂ = q − q₁`.
pub fn split_pressure_with(
    q: &ScalarField2D,
    v: &AxiField,
    cutoff_radius: f64,
    box_factor: usize,
) -> Result<PressureSplit> {
    let g = q.grid;
    if !g.same_geometry(&v.grid) {
        return Err(Error::GeometryMismatch("pressure and velocity grids differ".into()));
    }
    let r = cutoff_radius;
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidArgument(format!("cutoff radius must be positive, got {r}")));
    }
    if !(r < g.rho_max && -r > g.z_min && r < g.z_max) {
        return Err(Error::OutOfDomain(format!(
            "cutoff ball of radius {r} about the origin is not strictly inside the grid"
        )));
    }
    if box_factor == 0 || ((box_factor - 1) * g.n_z) % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "box factor {box_factor} needs (factor − 1)·n_z even (n_z = {})",
            g.n_z
        )));
    }
    let off = (box_factor - 1) * g.n_z / 2;
    let len = g.z_length();
    let big = Grid2D::new(
        g.rho_max * box_factor as f64,
        g.z_min - off as f64 * g.d_z,
        g.z_min - off as f64 * g.d_z + len * box_factor as f64,
        g.n_rho * box_factor,
        g.n_z * box_factor,
        false,
    )?;

    // Velocity embedded in the big box; the mask is the ball's indicator.
    let mut vb = AxiField::zeros(big, v.t);
    let mut chi = Array2::zeros(big.shape());
    for i in 0..g.nr() {
        for j in 0..g.nz() {
            let (rr, zz) = (g.rho(i), g.z(j));
            if rr * rr + zz * zz < r * r {
                let jb = j + off;
                vb.v_rho[[i, jb]] = v.v_rho[[i, j]];
                vb.v_phi[[i, jb]] = v.v_phi[[i, j]];
                vb.v_z[[i, jb]] = v.v_z[[i, j]];
                chi[[i, jb]] = 1.0;
            }
        }
    }
    let src = pressure_source(&vb, Some(&chi));
    let solver = AxiPoisson::new(big, RadialKind::Laplace, WallKind::Dirichlet, ZKind::Dirichlet)?;
    let (q1_big, _) = solver.solve(&src, &Boundary::default())?;
    let q1 = Array2::from_shape_fn(g.shape(), |(i, j)| q1_big[[i, j + off]]);
    let q2 = &q.values - &q1;

    let ends = ZEnds::OneSided;
    let lap = laplacian_even(&q2, &g, ends);
    let inner = r - HARMONIC_MARGIN * g.d_rho.max(g.d_z);
    let mut residual: f64 = 0.0;
    for i in 0..g.nr() {
        for j in 0..g.nz() {
            let (rr, zz) = (g.rho(i), g.z(j));
            if (rr * rr + zz * zz).sqrt() <= inner {
                residual = residual.max(lap[[i, j]].abs());
            }
        }
    }
    Ok(PressureSplit {
        q1: ScalarField2D::new(g, q.t, q1)?,
        q2: ScalarField2D::new(g, q.t, q2)?,
        cutoff_radius: r,
        box_factor,
        harmonicity_residual: residual,
    })
}

/// `levels` radii `r_max, r_max/2, …`.
pub fn dyadic_radii(r_max: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|k| r_max / (1u64 << k) as f64).collect()
}

/// Max over radii and a lattice of axial centres (spacing `r/2`) of the mean
/// oscillation `(1/|𝒞|)∫_𝒞 |q − [q]_𝒞| dx` over cylinders `𝒞(b e₃, r)`.
pub fn bmo_seminorm(q: &ScalarField2D, radii: &[f64]) -> Result<f64> {
    let g = &q.grid;
    if radii.is_empty() {
        return Err(Error::InvalidArgument("empty radius list".into()));
    }
    let mut best: f64 = 0.0;
    for &r in radii {
        if !(r > 0.0 && r <= g.rho_max * (1.0 + 1e-12)) {
            return Err(Error::OutOfDomain(format!("radius {r} does not fit the grid")));
        }
        let (lo, hi) = if g.z_periodic {
            if 2.0 * r > g.z_length() * (1.0 + 1e-12) {
                return Err(Error::OutOfDomain(format!("radius {r} exceeds half the period")));
            }
            (g.z_min, g.z_max - 0.5 * r)
        } else {
            (g.z_min + r, g.z_max - r)
        };
        if hi < lo - 1e-12 * g.z_length() {
            return Err(Error::OutOfDomain(format!("radius {r} does not fit the axial range")));
        }
        let step = 0.5 * r;
        let count = ((hi - lo).max(0.0) / step + 1e-9).floor() as usize;
        // Centre the lattice in the admissible interval.
        let start = lo + 0.5 * ((hi - lo).max(0.0) - count as f64 * step);
        for k in 0..=count {
            let b = start + k as f64 * step;
            let w = CylinderWeights::new(g, CylinderSection { b, r }, false)?;
            let vol = w.volume();
            let mean = w.integrate(|i, j| q.values[[i, j]]) / vol;
            let osc = w.integrate(|i, j| (q.values[[i, j]] - mean).abs()) / vol;
            best = best.max(osc);
        }
    }
    Ok(best)
}
