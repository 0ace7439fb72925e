use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::manufactured;
use crate::error::{Error, Result};
use crate::fields::Grid2D;

/// CFL safety factor applied to both the advective and the diffusive limit.
pub const CFL_SAFETY: f64 = 0.4;

/// Initial data for `(f, ω_φ)`; ψ is always recovered from ω_φ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    Zero,
    /// `v_φ = Ωρ`, i.e. `f = Ωρ²`, no meridional flow.
    RigidRotation { omega: f64 },
    /// Localised swirl ring of peak azimuthal speed ≈ `amplitude` at radius ≈ `core`,
    /// plus an optional meridional circulation of strength `meridional`.
    SwirlVortex {
        amplitude: f64,
        core: f64,
        z_center: f64,
        width: f64,
        meridional: f64,
    },
    /// Random superposition of wall-compatible modes (deterministic in `seed`).
    Random { seed: u64, amplitude: f64, modes: usize },
    /// Exact fields of [`manufactured`] at the start time.
    Manufactured,
}

/// Condition on the outer wall `ρ = rho_max`. ψ = 0 and ω_φ = 0 in all cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WallCondition {
    /// `f = 0`.
    StressFree,
    /// `f = Ω rho_max²`, the wall co-rotating with a rigid rotation.
    RotatingWall { omega: f64 },
}

impl WallCondition {
    pub fn swirl_value(&self, grid: &Grid2D) -> f64 {
        match *self {
            WallCondition::StressFree => 0.0,
            WallCondition::RotatingWall { omega } => omega * grid.rho_max * grid.rho_max,
        }
    }
}

/// Body forcing added to the right-hand sides of the swirl and vorticity equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Forcing {
    None,
    /// `F_f = rate · f`: drives the swirl amplitude up so peaks keep breaking records.
    RampedSwirl { rate: f64 },
    /// Residual forcing of the manufactured solution.
    Manufactured,
}

impl Forcing {
    pub fn acts_on_swirl(&self) -> bool {
        !matches!(self, Forcing::None)
    }

    /// Adds the forcing at time `t` to the tendencies.
    pub fn add(&self, grid: &Grid2D, t: f64, f: &Array2<f64>, df: &mut Array2<f64>, dw: &mut Array2<f64>) {
        match *self {
            Forcing::None => {}
            Forcing::RampedSwirl { rate } => {
                df.zip_mut_with(f, |d, &v| *d += rate * v);
            }
            Forcing::Manufactured => {
                for i in 1..grid.n_rho {
                    let r = grid.rho(i);
                    for j in 0..grid.nz() {
                        let z = grid.z(j);
                        df[[i, j]] += manufactured::swirl_forcing(r, z, t);
                        dw[[i, j]] += manufactured::vorticity_forcing(r, z, t);
                    }
                }
            }
        }
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub grid: Grid2D,
    pub initial: InitialCondition,
    pub dt: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub wall: WallCondition,
    pub forcing: Forcing,
    pub no_swirl: bool,
    /// Steps between emitted snapshots.
    pub snapshot_every: usize,
}

impl Scenario {
    pub fn new(grid: Grid2D, initial: InitialCondition, dt: f64, t_end: f64) -> Self {
        Self {
            grid,
            initial,
            dt,
            t_start: 0.0,
            t_end,
            wall: WallCondition::StressFree,
            forcing: Forcing::None,
            no_swirl: false,
            snapshot_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end > self.t_start) {
            return Err(Error::InvalidArgument("t_end must exceed t_start".into()));
        }
        if self.snapshot_every == 0 {
            return Err(Error::InvalidArgument("snapshot_every must be at least 1".into()));
        }
        let limit = diffusive_dt_limit(&self.grid);
        if self.dt > limit {
            return Err(Error::Stability(format!(
                "dt = {} exceeds the diffusive limit {limit}",
                self.dt
            )));
        }
        let manufactured_used = matches!(self.initial, InitialCondition::Manufactured)
            || matches!(self.forcing, Forcing::Manufactured);
        if manufactured_used {
            let g = &self.grid;
            if !(g.z_periodic && (g.rho_max - 1.0).abs() < 1e-12 && (g.z_length() - 2.0 * PI).abs() < 1e-12) {
                return Err(Error::InvalidArgument(
                    "the manufactured solution needs rho_max = 1 and a periodic z range of length 2π".into(),
                ));
            }
            if self.wall != WallCondition::StressFree {
                return Err(Error::InvalidArgument(
                    "the manufactured solution needs the stress-free wall".into(),
                ));
            }
        }
        if self.no_swirl && self.wall.swirl_value(&self.grid) != 0.0 {
            return Err(Error::InvalidArgument("no_swirl requires zero wall swirl".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> u64 {
        ((self.t_end - self.t_start) / self.dt).round() as u64
    }
}

/// Largest dt with `dt (1/dρ² + 1/dz²) ≤ CFL_SAFETY`.
pub fn diffusive_dt_limit(grid: &Grid2D) -> f64 {
    CFL_SAFETY / (1.0 / (grid.d_rho * grid.d_rho) + 1.0 / (grid.d_z * grid.d_z))
}

/// Largest dt with `dt · max|v| / h_min ≤ CFL_SAFETY`.
pub fn advective_dt_limit(grid: &Grid2D, max_speed: f64) -> f64 {
    if max_speed <= 0.0 {
        f64::INFINITY
    } else {
        CFL_SAFETY * grid.h_min() / max_speed
    }
}

/// Samples `(f, ω_φ)` for an initial condition.
pub fn initial_fields(grid: &Grid2D, ic: &InitialCondition, t: f64) -> (Array2<f64>, Array2<f64>) {
    let shape = grid.shape();
    let rmax = grid.rho_max;
    let l = grid.z_length();
    let wall_taper = |r: f64| (1.0 - (r / rmax).powi(2)).powi(2);
    match *ic {
        InitialCondition::Zero => (Array2::zeros(shape), Array2::zeros(shape)),
        InitialCondition::RigidRotation { omega } => (
            Array2::from_shape_fn(shape, |(i, _)| omega * grid.rho(i).powi(2)),
            Array2::zeros(shape),
        ),
        InitialCondition::SwirlVortex {
            amplitude,
            core,
            z_center,
            width,
            meridional,
        } => {
            // Periodic-safe Gaussian in z.
            let axial = |z: f64| {
                let d = if grid.z_periodic {
                    (PI * (z - z_center) / l).sin() * l / PI
                } else {
                    z - z_center
                };
                (-(d / width).powi(2)).exp()
            };
            let axial_odd = |z: f64| {
                if grid.z_periodic {
                    (2.0 * PI * (z - z_center) / l).sin()
                } else {
                    (2.0 * PI * (z - grid.z_min) / l).sin()
                }
            };
            // v_φ = A (ρ/c) e^{(1-(ρ/c)²)/2} peaks at ρ = c with value A before tapering.
            let f = Array2::from_shape_fn(shape, |(i, j)| {
                let r = grid.rho(i);
                let s = r / core;
                amplitude * r * s * (0.5 * (1.0 - s * s)).exp() * wall_taper(r) * axial(grid.z(j))
            });
            let w = Array2::from_shape_fn(shape, |(i, j)| {
                let r = grid.rho(i);
                let s = r / core;
                meridional * s * (-s * s).exp() * wall_taper(r) * axial_odd(grid.z(j))
            });
            (f, w)
        }
        InitialCondition::Random { seed, amplitude, modes } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let modes = modes.max(1);
            let mut f = Array2::zeros(shape);
            let mut w = Array2::zeros(shape);
            for m in 1..=modes {
                for n in 0..=modes {
                    let a: f64 = rng.gen_range(-1.0..1.0) * amplitude / ((m * (n + 1)) as f64).powi(2);
                    let b: f64 = rng.gen_range(-1.0..1.0) * amplitude / ((m * (n + 1)) as f64).powi(2);
                    let phase: f64 = rng.gen_range(0.0..2.0 * PI);
                    for i in 0..shape.0 {
                        let r = grid.rho(i);
                        let radial = (m as f64 * PI * r / rmax).sin();
                        for j in 0..shape.1 {
                            let zeta = (grid.z(j) - grid.z_min) / l;
                            let (cf, cw) = if grid.z_periodic {
                                let arg = 2.0 * PI * n as f64 * zeta + phase;
                                (arg.cos(), arg.sin())
                            } else {
                                let arg = PI * n as f64 * zeta;
                                (arg.cos(), (PI * (n + 1) as f64 * zeta).sin())
                            };
                            f[[i, j]] += a * r * radial * cf;
                            w[[i, j]] += b * radial * cw;
                        }
                    }
                }
            }
            (f, w)
        }
        InitialCondition::Manufactured => (
            Array2::from_shape_fn(shape, |(i, j)| manufactured::swirl(grid.rho(i), grid.z(j), t)),
            Array2::from_shape_fn(shape, |(i, j)| manufactured::vorticity(grid.rho(i), grid.z(j), t)),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_initial_data_is_deterministic_and_wall_compatible() {
        let g = Grid2D::new(1.0, -1.0, 1.0, 16, 16, false).unwrap();
        let ic = InitialCondition::Random { seed: 7, amplitude: 1.0, modes: 3 };
        let (f1, w1) = initial_fields(&g, &ic, 0.0);
        let (f2, w2) = initial_fields(&g, &ic, 0.0);
        assert_eq!(f1, f2);
        assert_eq!(w1, w2);
        for j in 0..g.nz() {
            assert!(f1[[0, j]].abs() < 1e-14 && f1[[g.n_rho, j]].abs() < 1e-12);
            assert!(w1[[0, j]].abs() < 1e-14 && w1[[g.n_rho, j]].abs() < 1e-12);
        }
        for i in 0..g.nr() {
            assert!(w1[[i, 0]].abs() < 1e-12 && w1[[i, g.n_z]].abs() < 1e-12);
        }
    }

    #[test]
    fn diffusive_limit_rejects_large_dt() {
        let g = Grid2D::new(1.0, -1.0, 1.0, 16, 16, false).unwrap();
        let mut s = Scenario::new(g, InitialCondition::Zero, 1.0, 2.0);
        assert!(matches!(s.validate(), Err(Error::Stability(_))));
        s.dt = diffusive_dt_limit(&g);
        s.validate().unwrap();
    }

    #[test]
    fn manufactured_requires_its_domain() {
        let g = Grid2D::new(1.0, -1.0, 1.0, 16, 16, false).unwrap();
        let s = Scenario::new(g, InitialCondition::Manufactured, 1e-4, 0.1);
        assert!(s.validate().is_err());
    }
}
