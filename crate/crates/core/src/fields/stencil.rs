//! Second-order finite differences on a [`Grid2D`].
//!
//! Axis nodes use ghost values obtained by parity reflection `a(-ρ) = ±a(ρ)`.
//! The outer wall and the ends of a bounded axial range use one-sided
//! second-order formulas unless a reflection parity is supplied.

use ndarray::Array2;

use super::{Grid2D, ScalarField2D};
use crate::error::{Error, Result};

/// Behaviour of a quantity under reflection through a symmetry line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Treatment of the two ends of a bounded axial range (ignored on periodic grids).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZEnds {
    OneSided,
    Reflect(Parity),
}

/// `∂_ρ a`.
pub fn d_rho(a: &Array2<f64>, g: &Grid2D, axis: Parity) -> Array2<f64> {
    let (nr, nz) = a.dim();
    let n = nr - 1;
    let inv2h = 0.5 / g.d_rho;
    let mut out = Array2::zeros((nr, nz));
    for j in 0..nz {
        out[[0, j]] = match axis {
            Parity::Even => 0.0,
            Parity::Odd => 2.0 * a[[1, j]] * inv2h,
        };
        for i in 1..n {
            out[[i, j]] = (a[[i + 1, j]] - a[[i - 1, j]]) * inv2h;
        }
        out[[n, j]] = (3.0 * a[[n, j]] - 4.0 * a[[n - 1, j]] + a[[n - 2, j]]) * inv2h;
    }
    out
}

/// `∂²_ρ a`.
pub fn d_rho_rho(a: &Array2<f64>, g: &Grid2D, axis: Parity) -> Array2<f64> {
    let (nr, nz) = a.dim();
    let n = nr - 1;
    let ih2 = 1.0 / (g.d_rho * g.d_rho);
    let mut out = Array2::zeros((nr, nz));
    for j in 0..nz {
        let ghost = axis.sign() * a[[1, j]];
        out[[0, j]] = (a[[1, j]] - 2.0 * a[[0, j]] + ghost) * ih2;
        for i in 1..n {
            out[[i, j]] = (a[[i + 1, j]] - 2.0 * a[[i, j]] + a[[i - 1, j]]) * ih2;
        }
        out[[n, j]] =
            (2.0 * a[[n, j]] - 5.0 * a[[n - 1, j]] + 4.0 * a[[n - 2, j]] - a[[n - 3, j]]) * ih2;
    }
    out
}

/// `∂_z a`.
pub fn d_z(a: &Array2<f64>, g: &Grid2D, ends: ZEnds) -> Array2<f64> {
    let (nr, nz) = a.dim();
    let inv2h = 0.5 / g.d_z;
    let mut out = Array2::zeros((nr, nz));
    for i in 0..nr {
        if g.z_periodic {
            for j in 0..nz {
                let jp = if j + 1 == nz { 0 } else { j + 1 };
                let jm = if j == 0 { nz - 1 } else { j - 1 };
                out[[i, j]] = (a[[i, jp]] - a[[i, jm]]) * inv2h;
            }
            continue;
        }
        for j in 1..nz - 1 {
            out[[i, j]] = (a[[i, j + 1]] - a[[i, j - 1]]) * inv2h;
        }
        let m = nz - 1;
        match ends {
            ZEnds::OneSided => {
                out[[i, 0]] = (-3.0 * a[[i, 0]] + 4.0 * a[[i, 1]] - a[[i, 2]]) * inv2h;
                out[[i, m]] = (3.0 * a[[i, m]] - 4.0 * a[[i, m - 1]] + a[[i, m - 2]]) * inv2h;
            }
            ZEnds::Reflect(p) => {
                out[[i, 0]] = (a[[i, 1]] - p.sign() * a[[i, 1]]) * inv2h;
                out[[i, m]] = (p.sign() * a[[i, m - 1]] - a[[i, m - 1]]) * inv2h;
            }
        }
    }
    out
}

/// `∂²_z a`.
pub fn d_zz(a: &Array2<f64>, g: &Grid2D, ends: ZEnds) -> Array2<f64> {
    let (nr, nz) = a.dim();
    let ih2 = 1.0 / (g.d_z * g.d_z);
    let mut out = Array2::zeros((nr, nz));
    for i in 0..nr {
        if g.z_periodic {
            for j in 0..nz {
                let jp = if j + 1 == nz { 0 } else { j + 1 };
                let jm = if j == 0 { nz - 1 } else { j - 1 };
                out[[i, j]] = (a[[i, jp]] - 2.0 * a[[i, j]] + a[[i, jm]]) * ih2;
            }
            continue;
        }
        for j in 1..nz - 1 {
            out[[i, j]] = (a[[i, j + 1]] - 2.0 * a[[i, j]] + a[[i, j - 1]]) * ih2;
        }
        let m = nz - 1;
        match ends {
            ZEnds::OneSided => {
                out[[i, 0]] = (2.0 * a[[i, 0]] - 5.0 * a[[i, 1]] + 4.0 * a[[i, 2]] - a[[i, 3]]) * ih2;
                out[[i, m]] = (2.0 * a[[i, m]] - 5.0 * a[[i, m - 1]] + 4.0 * a[[i, m - 2]]
                    - a[[i, m - 3]])
                    * ih2;
            }
            ZEnds::Reflect(p) => {
                out[[i, 0]] = (a[[i, 1]] * (1.0 + p.sign()) - 2.0 * a[[i, 0]]) * ih2;
                out[[i, m]] = (a[[i, m - 1]] * (1.0 + p.sign()) - 2.0 * a[[i, m]]) * ih2;
            }
        }
    }
    out
}

/// `a / ρ` with the axis value replaced by the parity limit `∂_ρ a(0)` (odd `a`).
pub fn over_rho(a: &Array2<f64>, g: &Grid2D) -> Array2<f64> {
    let (nr, nz) = a.dim();
    let mut out = Array2::zeros((nr, nz));
    for j in 0..nz {
        out[[0, j]] = a[[1, j]] / g.d_rho;
        for i in 1..nr {
            out[[i, j]] = a[[i, j]] / g.rho(i);
        }
    }
    out
}

/// Axisymmetric Laplacian `∂²_ρ + (1/ρ)∂_ρ + ∂²_z` of a scalar even in ρ.
pub fn laplacian_even(a: &Array2<f64>, g: &Grid2D, ends: ZEnds) -> Array2<f64> {
    let (nr, nz) = a.dim();
    let n = nr - 1;
    let ih2 = 1.0 / (g.d_rho * g.d_rho);
    let inv2h = 0.5 / g.d_rho;
    let mut out = d_zz(a, g, ends);
    for j in 0..nz {
        out[[0, j]] += 4.0 * (a[[1, j]] - a[[0, j]]) * ih2;
        for i in 1..n {
            out[[i, j]] += (a[[i + 1, j]] - 2.0 * a[[i, j]] + a[[i - 1, j]]) * ih2
                + (a[[i + 1, j]] - a[[i - 1, j]]) * inv2h / g.rho(i);
        }
        let drr = (2.0 * a[[n, j]] - 5.0 * a[[n - 1, j]] + 4.0 * a[[n - 2, j]] - a[[n - 3, j]]) * ih2;
        let dr = (3.0 * a[[n, j]] - 4.0 * a[[n - 1, j]] + a[[n - 2, j]]) * inv2h;
        out[[n, j]] += drr + dr / g.rho(n);
    }
    out
}

/// Discrete divergence `(1/ρ)∂_ρ(ρ v_ρ) + ∂_z v_z`.
pub fn divergence(v_rho: &Array2<f64>, v_z: &Array2<f64>, g: &Grid2D, ends: ZEnds) -> Array2<f64> {
    let (nr, nz) = v_rho.dim();
    let n = nr - 1;
    let inv2h = 0.5 / g.d_rho;
    let mut out = d_z(v_z, g, ends);
    for j in 0..nz {
        out[[0, j]] += 2.0 * v_rho[[1, j]] / g.d_rho;
        for i in 1..n {
            let rp = g.rho(i + 1) * v_rho[[i + 1, j]];
            let rm = g.rho(i - 1) * v_rho[[i - 1, j]];
            out[[i, j]] += (rp - rm) * inv2h / g.rho(i);
        }
        let f = |k: usize| g.rho(k) * v_rho[[k, j]];
        out[[n, j]] += (3.0 * f(n) - 4.0 * f(n - 1) + f(n - 2)) * inv2h / g.rho(n);
    }
    out
}

/// Evaluates `Δf − (2/ρ)∂_ρ f = ∂²_ρ f − (1/ρ)∂_ρ f + ∂²_z f`, the diffusion
/// operator of the swirl variable `f = ρ v_φ`. The axis row is 0.
pub fn swirl_operator(f: &ScalarField2D) -> Result<ScalarField2D> {
    let g = f.grid;
    let scale = f.max_abs().max(1.0);
    let axis = (0..g.nz()).map(|j| f.values[[0, j]].abs()).fold(0.0, f64::max);
    if axis > 1e-12 * scale {
        return Err(Error::AxisRegularity(format!(
            "swirl variable must vanish on the axis, found |f(0, z)| = {axis:e}"
        )));
    }
    let a = &f.values;
    let mut out = d_zz(a, &g, ZEnds::OneSided);
    let (nr, nz) = a.dim();
    let n = nr - 1;
    let ih2 = 1.0 / (g.d_rho * g.d_rho);
    let inv2h = 0.5 / g.d_rho;
    for j in 0..nz {
        out[[0, j]] = 0.0;
        for i in 1..n {
            out[[i, j]] += (a[[i + 1, j]] - 2.0 * a[[i, j]] + a[[i - 1, j]]) * ih2
                - (a[[i + 1, j]] - a[[i - 1, j]]) * inv2h / g.rho(i);
        }
        let drr = (2.0 * a[[n, j]] - 5.0 * a[[n - 1, j]] + 4.0 * a[[n - 2, j]] - a[[n - 3, j]]) * ih2;
        let dr = (3.0 * a[[n, j]] - 4.0 * a[[n - 1, j]] + a[[n - 2, j]]) * inv2h;
        out[[n, j]] += drr - dr / g.rho(n);
    }
    Ok(ScalarField2D {
        grid: g,
        t: f.t,
        values: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid2D {
        Grid2D::new(1.0, -1.0, 1.0, n, 2 * n, false).unwrap()
    }

    #[test]
    fn rigid_rotation_is_annihilated() {
        let g = grid(16);
        let f = ScalarField2D::from_fn(g, 0.0, |r, _| r * r);
        let out = swirl_operator(&f).unwrap();
        assert!(out.max_abs() < 1e-10, "{}", out.max_abs());
    }

    #[test]
    fn rho_squared_z_is_annihilated() {
        // Δ(ρ²z) = 4z and (2/ρ)∂_ρ(ρ²z) = 4z.
        let g = grid(16);
        let f = ScalarField2D::from_fn(g, 0.0, |r, z| r * r * z);
        let out = swirl_operator(&f).unwrap();
        assert!(out.max_abs() < 1e-10, "{}", out.max_abs());
    }

    #[test]
    fn rho_fourth_gives_eight_rho_squared() {
        // Δρ⁴ = 16ρ², drift 8ρ²; the centred scheme is off by exactly -2h² at interior nodes.
        for n in [16, 32, 64] {
            let g = grid(n);
            let f = ScalarField2D::from_fn(g, 0.0, |r, _| r.powi(4));
            let out = swirl_operator(&f).unwrap();
            let h2 = g.d_rho * g.d_rho;
            for i in 1..g.n_rho {
                for j in 0..g.nz() {
                    let want = 8.0 * g.rho(i).powi(2);
                    assert!((out.values[[i, j]] - want).abs() <= 2.0 * h2 + 1e-9);
                }
            }
        }
    }

    #[test]
    fn nonzero_axis_value_is_rejected() {
        let g = grid(8);
        let f = ScalarField2D::from_fn(g, 0.0, |_, _| 1.0);
        assert!(matches!(swirl_operator(&f), Err(Error::AxisRegularity(_))));
    }

    #[test]
    fn rigid_rotation_error_bound_scales_with_h2() {
        let g = grid(32);
        let omega = 3.0;
        let f = ScalarField2D::from_fn(g, 0.0, |r, _| omega * r * r);
        let out = swirl_operator(&f).unwrap();
        assert!(out.max_abs() <= 10.0 * g.d_rho * g.d_rho);
    }

    #[test]
    fn laplacian_even_is_exact_on_quadratics() {
        let g = grid(8);
        let q = Array2::from_shape_fn(g.shape(), |(i, j)| {
            let (r, z) = (g.rho(i), g.z(j));
            0.5 * r * r + z * z
        });
        let lap = laplacian_even(&q, &g, ZEnds::OneSided);
        for v in lap.iter() {
            assert!((v - 4.0).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn divergence_of_stream_derived_field_vanishes_at_second_order() {
        // ψ = ρ²(1-ρ²) sin z → v_ρ = -ρ(1-ρ²)cos z, v_z = (2 - 4ρ²) sin z.
        let worst = |n: usize| {
            let g = Grid2D::new(1.0, 0.0, std::f64::consts::TAU, n, n, true).unwrap();
            let vr = Array2::from_shape_fn(g.shape(), |(i, j)| {
                let r = g.rho(i);
                -r * (1.0 - r * r) * g.z(j).cos()
            });
            let vz = Array2::from_shape_fn(g.shape(), |(i, j)| {
                let r = g.rho(i);
                (2.0 - 4.0 * r * r) * g.z(j).sin()
            });
            let div = divergence(&vr, &vz, &g, ZEnds::OneSided);
            div.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
        };
        let (coarse, fine) = (worst(32), worst(64));
        assert!(coarse < 0.02, "{coarse}");
        assert!(coarse / fine > 3.5, "{coarse} {fine}");
    }
}
