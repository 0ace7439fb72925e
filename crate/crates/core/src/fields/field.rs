use ndarray::Array2;

use super::Grid2D;
use crate::error::{Error, Result};

/// One scalar quantity sampled on a grid at one time. Used for the swirl
/// variable `f = ρ v_φ`, the pressure, the streamfunction and the azimuthal vorticity.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField2D {
    pub grid: Grid2D,
    pub t: f64,
    pub values: Array2<f64>,
}

impl ScalarField2D {
    pub fn zeros(grid: Grid2D, t: f64) -> Self {
        Self {
            grid,
            t,
            values: Array2::zeros(grid.shape()),
        }
    }

    pub fn new(grid: Grid2D, t: f64, values: Array2<f64>) -> Result<Self> {
        check_shape(&grid, &values)?;
        Ok(Self { grid, t, values })
    }

    /// Samples `f(ρ, z)` at every node.
    pub fn from_fn(grid: Grid2D, t: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn(grid.shape(), |(i, j)| f(grid.rho(i), grid.z(j)));
        Self { grid, t, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Axisymmetric velocity `v = v_ρ e_ρ + v_φ e_φ + v_z e_3` on a (ρ, z) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AxiField {
    pub grid: Grid2D,
    pub t: f64,
    pub v_rho: Array2<f64>,
    pub v_phi: Array2<f64>,
    pub v_z: Array2<f64>,
}

impl AxiField {
    pub fn zeros(grid: Grid2D, t: f64) -> Self {
        let z = Array2::zeros(grid.shape());
        Self {
            grid,
            t,
            v_rho: z.clone(),
            v_phi: z.clone(),
            v_z: z,
        }
    }

    pub fn new(
        grid: Grid2D,
        t: f64,
        v_rho: Array2<f64>,
        v_phi: Array2<f64>,
        v_z: Array2<f64>,
    ) -> Result<Self> {
        check_shape(&grid, &v_rho)?;
        check_shape(&grid, &v_phi)?;
        check_shape(&grid, &v_z)?;
        Ok(Self {
            grid,
            t,
            v_rho,
            v_phi,
            v_z,
        })
    }

    /// Samples an analytic velocity `(ρ, z) ↦ (v_ρ, v_φ, v_z)`.
    pub fn from_fn(grid: Grid2D, t: f64, f: impl Fn(f64, f64) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(grid, t);
        for i in 0..grid.nr() {
            for j in 0..grid.nz() {
                let [a, b, c] = f(grid.rho(i), grid.z(j));
                out.v_rho[[i, j]] = a;
                out.v_phi[[i, j]] = b;
                out.v_z[[i, j]] = c;
            }
        }
        out
    }

    /// Pointwise magnitude `|v|`.
    pub fn magnitude(&self) -> Array2<f64> {
        let mut m = Array2::zeros(self.grid.shape());
        ndarray::Zip::from(&mut m)
            .and(&self.v_rho)
            .and(&self.v_phi)
            .and(&self.v_z)
            .for_each(|m, &a, &b, &c| *m = (a * a + b * b + c * c).sqrt());
        m
    }

    /// Pointwise magnitude of the meridional part `|v̄| = (v_ρ² + v_z²)^{1/2}`.
    pub fn meridional_magnitude(&self) -> Array2<f64> {
        let mut m = Array2::zeros(self.grid.shape());
        ndarray::Zip::from(&mut m)
            .and(&self.v_rho)
            .and(&self.v_z)
            .for_each(|m, &a, &c| *m = (a * a + c * c).sqrt());
        m
    }

    /// `f = ρ v_φ`.
    pub fn swirl_variable(&self) -> ScalarField2D {
        let g = self.grid;
        let values = Array2::from_shape_fn(g.shape(), |(i, j)| g.rho(i) * self.v_phi[[i, j]]);
        ScalarField2D {
            grid: g,
            t: self.t,
            values,
        }
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitude().iter().fold(0.0_f64, |m, &v| m.max(v))
    }

    /// Largest violation of `v_ρ = v_φ = 0` on the axis.
    pub fn axis_defect(&self) -> f64 {
        (0..self.grid.nz())
            .map(|j| self.v_rho[[0, j]].abs().max(self.v_phi[[0, j]].abs()))
            .fold(0.0, f64::max)
    }
}

/// Splits `v` into its meridional part `v̄ = v_ρ e_ρ + v_z e_3` and its swirl `v̂ = v_φ e_φ`.
pub fn decompose(v: &AxiField) -> (AxiField, AxiField) {
    let zero = Array2::zeros(v.grid.shape());
    let meridional = AxiField {
        grid: v.grid,
        t: v.t,
        v_rho: v.v_rho.clone(),
        v_phi: zero.clone(),
        v_z: v.v_z.clone(),
    };
    let swirl = AxiField {
        grid: v.grid,
        t: v.t,
        v_rho: zero.clone(),
        v_phi: v.v_phi.clone(),
        v_z: zero,
    };
    (meridional, swirl)
}

/// Componentwise sum of two fields on the same grid.
pub fn recombine(a: &AxiField, b: &AxiField) -> Result<AxiField> {
    if !a.grid.same_geometry(&b.grid) {
        return Err(Error::GeometryMismatch("recombine: grids differ".into()));
    }
    Ok(AxiField {
        grid: a.grid,
        t: a.t,
        v_rho: &a.v_rho + &b.v_rho,
        v_phi: &a.v_phi + &b.v_phi,
        v_z: &a.v_z + &b.v_z,
    })
}

fn check_shape(grid: &Grid2D, a: &Array2<f64>) -> Result<()> {
    let found = a.dim();
    if found != grid.shape() {
        return Err(Error::ShapeMismatch {
            expected: grid.shape(),
            found,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Grid2D {
        Grid2D::new(1.0, -1.0, 1.0, 8, 16, false).unwrap()
    }

    #[test]
    fn decompose_zero_field() {
        let v = AxiField::zeros(grid(), 0.0);
        let (m, s) = decompose(&v);
        assert_eq!(m, v);
        assert_eq!(s, v);
    }

    #[test]
    fn decompose_separated_components() {
        let v = AxiField::from_fn(grid(), 0.0, |r, _| [0.0, r, 1.0]);
        let (m, s) = decompose(&v);
        assert!(m.v_phi.iter().all(|&x| x == 0.0));
        assert!(m.v_z.iter().all(|&x| x == 1.0));
        assert_eq!(s.v_phi, v.v_phi);
        assert!(s.v_rho.iter().chain(s.v_z.iter()).all(|&x| x == 0.0));
    }

    proptest! {
        #[test]
        fn decompose_then_recombine_is_exact(seed in proptest::collection::vec(-1e3f64..1e3, 9 * 17 * 3)) {
            let g = grid();
            let n = g.nr() * g.nz();
            let v = AxiField::new(
                g,
                0.5,
                Array2::from_shape_vec(g.shape(), seed[..n].to_vec()).unwrap(),
                Array2::from_shape_vec(g.shape(), seed[n..2 * n].to_vec()).unwrap(),
                Array2::from_shape_vec(g.shape(), seed[2 * n..].to_vec()).unwrap(),
            ).unwrap();
            let (m, s) = decompose(&v);
            let back = recombine(&m, &s).unwrap();
            prop_assert_eq!(back, v);
        }
    }

    #[test]
    fn shape_is_checked() {
        let g = grid();
        let bad = Array2::zeros((3, 3));
        assert!(ScalarField2D::new(g, 0.0, bad).is_err());
    }
}
