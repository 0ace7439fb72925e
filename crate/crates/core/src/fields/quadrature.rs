//! Quadrature over axis-centred cylinders `𝒞(b e₃, r) = {ρ < r, |z − b| < r}`.
//!
//! Integrals are `2π ∫∫ g ρ dρ dz` of the piecewise-bilinear interpolant of the
//! nodal values of `g`, so interval ends that fall between nodes are handled by
//! linear interpolation and the rule stays second order for smooth integrands.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::Grid2D;
use crate::error::{Error, Result};

/// Spatial section `𝒞(b e₃, r)` of a parabolic cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderSection {
    pub b: f64,
    pub r: f64,
}

/// Space-time region `𝒞(b e₃, r) × ]t0 − r², t0[`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParabolicCylinder {
    pub b: f64,
    pub t0: f64,
    pub r: f64,
}

impl ParabolicCylinder {
    pub fn new(b: f64, t0: f64, r: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidArgument(format!("cylinder radius must be positive, got {r}")));
        }
        Ok(Self { b, t0, r })
    }

    pub fn section(&self) -> CylinderSection {
        CylinderSection { b: self.b, r: self.r }
    }

    pub fn t_start(&self) -> f64 {
        self.t0 - self.r * self.r
    }
}

/// Weights `w_k` with `∫_a^b g ≈ Σ w_k g(x_k)` for the piecewise-linear
/// interpolant on nodes `x_k = origin + k·h`. With `period = Some(n)` node
/// indices wrap modulo `n`.
pub fn interval_weights(
    origin: f64,
    h: f64,
    n_nodes: usize,
    a: f64,
    b: f64,
    period: Option<usize>,
) -> Vec<(usize, f64)> {
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    if b <= a {
        return Vec::new();
    }
    let eps = 1e-12;
    let k_lo = ((a - origin) / h + eps).floor() as isize;
    let k_hi = ((b - origin) / h - eps).ceil() as isize;
    for k in k_lo..k_hi {
        let x0 = origin + k as f64 * h;
        let x1 = x0 + h;
        let c = a.max(x0);
        let d = b.min(x1);
        if d <= c {
            continue;
        }
        let w0 = ((x1 - c).powi(2) - (x1 - d).powi(2)) / (2.0 * h);
        let w1 = ((d - x0).powi(2) - (c - x0).powi(2)) / (2.0 * h);
        let (i0, i1) = match period {
            Some(n) => {
                let n = n as isize;
                ((((k % n) + n) % n) as usize, ((((k + 1) % n) + n) % n) as usize)
            }
            None => {
                let (i0, i1) = (k.max(0) as usize, (k + 1) as usize);
                if k < 0 || i1 >= n_nodes {
                    continue;
                }
                (i0, i1)
            }
        };
        *acc.entry(i0).or_insert(0.0) += w0;
        *acc.entry(i1).or_insert(0.0) += w1;
    }
    acc.into_iter().filter(|(_, w)| *w != 0.0).collect()
}

/// Tensor-product weights over a cylinder section; radial weights carry `2πρ`.
#[derive(Debug, Clone)]
pub struct CylinderWeights {
    pub rho: Vec<(usize, f64)>,
    pub z: Vec<(usize, f64)>,
}

impl CylinderWeights {
    pub fn new(grid: &Grid2D, section: CylinderSection, truncate: bool) -> Result<Self> {
        let CylinderSection { b, r } = section;
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidArgument(format!("cylinder radius must be positive, got {r}")));
        }
        let tol = 1e-12 * grid.rho_max.max(1.0);
        let mut r_rho = r;
        if r > grid.rho_max + tol {
            if !truncate {
                return Err(Error::OutOfDomain(format!(
                    "cylinder radius {r} exceeds grid radius {}",
                    grid.rho_max
                )));
            }
            r_rho = grid.rho_max;
        }
        let (mut za, mut zb) = (b - r, b + r);
        if !grid.covers_z(za, zb) {
            if !truncate || grid.z_periodic {
                return Err(Error::OutOfDomain(format!(
                    "axial extent [{za}, {zb}] not covered by [{}, {}]",
                    grid.z_min, grid.z_max
                )));
            }
            za = za.max(grid.z_min);
            zb = zb.min(grid.z_max);
        }
        let rho = interval_weights(0.0, grid.d_rho, grid.nr(), 0.0, r_rho.min(grid.rho_max), None)
            .into_iter()
            .map(|(i, w)| (i, 2.0 * PI * grid.rho(i) * w))
            .collect();
        let period = grid.z_periodic.then_some(grid.nz());
        let z = interval_weights(grid.z_min, grid.d_z, grid.nz(), za, zb, period);
        Ok(Self { rho, z })
    }

    /// `Σ_i Σ_j w_i w_j g(i, j)`.
    #[inline]
    pub fn integrate(&self, mut g: impl FnMut(usize, usize) -> f64) -> f64 {
        let mut total = 0.0;
        for &(j, wz) in &self.z {
            let mut line = 0.0;
            for &(i, wr) in &self.rho {
                line += wr * g(i, j);
            }
            total += wz * line;
        }
        total
    }

    pub fn volume(&self) -> f64 {
        self.integrate(|_, _| 1.0)
    }

    /// Iterates the nodes carrying nonzero weight.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.z
            .iter()
            .flat_map(move |&(j, _)| self.rho.iter().map(move |&(i, _)| (i, j)))
    }
}

/// `∫_{𝒞} |field|^p dx` over an axis-centred cylinder section.
pub fn integrate_over_cylinder(
    field: &Array2<f64>,
    grid: &Grid2D,
    section: CylinderSection,
    p: f64,
    truncate: bool,
) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("exponent p must be ≥ 1, got {p}")));
    }
    if field.dim() != grid.shape() {
        return Err(Error::ShapeMismatch {
            expected: grid.shape(),
            found: field.dim(),
        });
    }
    let w = CylinderWeights::new(grid, section, truncate)?;
    Ok(w.integrate(|i, j| abs_pow(field[[i, j]], p)))
}

/// `|x|^p` with integer exponents evaluated by multiplication.
#[inline]
pub fn abs_pow(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if p == 1.0 {
        a
    } else if p == 2.0 {
        a * a
    } else if p == 3.0 {
        a * a * a
    } else {
        a.powf(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid2D {
        Grid2D::new(1.0, -1.0, 1.0, n, 2 * n, false).unwrap()
    }

    #[test]
    fn zero_field_integrates_to_zero() {
        let g = grid(16);
        let f = Array2::zeros(g.shape());
        let v = integrate_over_cylinder(&f, &g, CylinderSection { b: 0.0, r: 1.0 }, 2.0, false).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn unit_field_gives_cylinder_volume() {
        let g = grid(16);
        let f = Array2::from_elem(g.shape(), 1.0);
        let v = integrate_over_cylinder(&f, &g, CylinderSection { b: 0.0, r: 1.0 }, 2.0, false).unwrap();
        assert!((v - 2.0 * PI).abs() < 1e-12, "{v}");
    }

    #[test]
    fn rho_squared_integral_converges_at_second_order() {
        // ∫_𝒞(1) ρ² dx = 2π · ∫₀¹ ρ³ dρ · 2 = π.
        let mut errs = Vec::new();
        for n in [8, 16, 32, 64] {
            let g = grid(n);
            let f = Array2::from_shape_fn(g.shape(), |(i, _)| g.rho(i));
            let v = integrate_over_cylinder(&f, &g, CylinderSection { b: 0.0, r: 1.0 }, 2.0, false)
                .unwrap();
            errs.push((v - PI).abs());
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn unaligned_cylinder_is_second_order() {
        // ∫_𝒞(b, r) (1 + z²) dx for a cylinder whose ends fall between nodes.
        let (b, r) = (0.13, 0.37);
        let exact = PI * r * r * (2.0 * r + ((b + r).powi(3) - (b - r).powi(3)) / 3.0);
        let mut errs = Vec::new();
        for n in [16, 32, 64, 128] {
            let g = grid(n);
            let f = Array2::from_shape_fn(g.shape(), |(_, j)| 1.0 + g.z(j).powi(2));
            let v = integrate_over_cylinder(&f, &g, CylinderSection { b, r }, 1.0, false).unwrap();
            errs.push((v - exact).abs());
        }
        let order = (errs[0] / errs[3]).log2() / 3.0;
        assert!(order > 1.7, "order {order}, errs {errs:?}");
    }

    #[test]
    fn out_of_domain_is_an_error_unless_truncated() {
        let g = grid(8);
        let f = Array2::from_elem(g.shape(), 1.0);
        let s = CylinderSection { b: 0.5, r: 1.0 };
        assert!(matches!(
            integrate_over_cylinder(&f, &g, s, 1.0, false),
            Err(Error::OutOfDomain(_))
        ));
        let v = integrate_over_cylinder(&f, &g, s, 1.0, true).unwrap();
        assert!((v - PI * 1.5).abs() < 1e-12);
    }

    #[test]
    fn periodic_cylinder_may_wrap() {
        let g = Grid2D::new(1.0, 0.0, 2.0, 8, 16, true).unwrap();
        let f = Array2::from_elem(g.shape(), 1.0);
        let v = integrate_over_cylinder(&f, &g, CylinderSection { b: 0.05, r: 0.5 }, 1.0, false)
            .unwrap();
        assert!((v - PI * 0.25).abs() < 1e-12, "{v}");
    }

    #[test]
    fn rejects_small_exponent() {
        let g = grid(8);
        let f = Array2::from_elem(g.shape(), 1.0);
        assert!(integrate_over_cylinder(&f, &g, CylinderSection { b: 0.0, r: 0.5 }, 0.5, false).is_err());
    }
}
