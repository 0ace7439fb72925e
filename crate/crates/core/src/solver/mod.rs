//! Time integration of axisymmetric Navier-Stokes flow (unit viscosity) in
//! swirl / azimuthal-vorticity / Stokes-streamfunction form:
//!
//! ```text
//! ∂_t f + v̄·∇f = ∂²_ρ f − (1/ρ)∂_ρ f + ∂²_z f                         (f = ρ v_φ)
//! ∂_t ω + v̄·∇ω − (v_ρ/ρ) ω = (Δ − 1/ρ²) ω + ∂_z(f²)/ρ³                   (ω = ω_φ)
//! ∂²_ρ ψ − (1/ρ)∂_ρ ψ + ∂²_z ψ = −ρ ω,   v_ρ = −(1/ρ)∂_z ψ,  v_z = (1/ρ)∂_ρ ψ
//! ```
//!
//! Space: second-order centred differences. Time: Heun's method (two forward
//! Euler stages averaged), so each stage of the swirl update is a convex
//! combination of neighbouring values whenever the stability bounds hold.
//!
//! Walls: `ψ = ω = 0` and `f` prescribed at `ρ = rho_max`. A bounded z-range is
//! closed by symmetry planes (f even, ψ and ω odd).

pub mod manufactured;
mod scenario;
mod trajectory;

use std::f64::consts::PI;

use ndarray::Array2;

pub use scenario::{
    advective_dt_limit, diffusive_dt_limit, initial_fields, Forcing, InitialCondition, Scenario,
    WallCondition, CFL_SAFETY,
};
pub use trajectory::{Snapshot, Termination, Trajectory};

use crate::error::{Error, Result};
use crate::fields::quadrature::interval_weights;
use crate::fields::{AxiField, Grid2D, ScalarField2D};
use crate::poisson::{AxiPoisson, Boundary, RadialKind, WallKind, ZKind};

/// Prognostic state. ψ is slaved to ω and kept for output.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub f: ScalarField2D,
    pub omega_phi: ScalarField2D,
    pub psi: ScalarField2D,
    pub t: f64,
    pub step_count: u64,
}

pub struct Solver {
    grid: Grid2D,
    wall: WallCondition,
    forcing: Forcing,
    no_swirl: bool,
    stream: AxiPoisson,
}

fn stream_solver(grid: Grid2D) -> Result<AxiPoisson> {
    let z = if grid.z_periodic { ZKind::Periodic } else { ZKind::Dirichlet };
    AxiPoisson::new(grid, RadialKind::Stokes, WallKind::Dirichlet, z)
}

impl Solver {
    pub fn new(grid: Grid2D, wall: WallCondition, forcing: Forcing, no_swirl: bool) -> Result<Self> {
        Ok(Self {
            grid,
            wall,
            forcing,
            no_swirl,
            stream: stream_solver(grid)?,
        })
    }

    pub fn for_scenario(sc: &Scenario) -> Result<Self> {
        sc.validate()?;
        Self::new(sc.grid, sc.wall, sc.forcing, sc.no_swirl)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn initial_state(&self, ic: &InitialCondition, t: f64) -> Result<SolverState> {
        let (mut f, mut w) = initial_fields(&self.grid, ic, t);
        if self.no_swirl {
            f.fill(0.0);
        }
        self.apply_boundary(&mut f, &mut w);
        self.assemble(f, w, t, 0)
    }

    /// Builds a state from `(f, ω)`, recovering ψ.
    pub fn assemble(&self, f: Array2<f64>, w: Array2<f64>, t: f64, step_count: u64) -> Result<SolverState> {
        let psi = self.streamfunction(&w)?;
        let g = self.grid;
        Ok(SolverState {
            f: ScalarField2D::new(g, t, f)?,
            omega_phi: ScalarField2D::new(g, t, w)?,
            psi: ScalarField2D::new(g, t, psi)?,
            t,
            step_count,
        })
    }

    fn apply_boundary(&self, f: &mut Array2<f64>, w: &mut Array2<f64>) {
        let g = &self.grid;
        let n = g.n_rho;
        let fw = self.wall.swirl_value(g);
        for j in 0..g.nz() {
            f[[0, j]] = 0.0;
            f[[n, j]] = fw;
            w[[0, j]] = 0.0;
            w[[n, j]] = 0.0;
        }
        if !g.z_periodic {
            let m = g.nz() - 1;
            for i in 0..g.nr() {
                w[[i, 0]] = 0.0;
                w[[i, m]] = 0.0;
            }
        }
    }

    /// ψ from ω with homogeneous data on the axis, the wall and the symmetry planes.
    pub fn streamfunction(&self, w: &Array2<f64>) -> Result<Array2<f64>> {
        let g = &self.grid;
        let rhs = Array2::from_shape_fn(g.shape(), |(i, j)| -g.rho(i) * w[[i, j]]);
        Ok(self.stream.solve(&rhs, &Boundary::default())?.0)
    }

    /// `(v_ρ, v_z)` from ψ.
    pub fn meridional_velocity(&self, psi: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        meridional_from_stream(&self.grid, psi)
    }

    pub fn velocity(&self, state: &SolverState) -> AxiField {
        let g = self.grid;
        let (v_rho, v_z) = self.meridional_velocity(&state.psi.values);
        let mut v_phi = Array2::zeros(g.shape());
        for i in 1..g.nr() {
            let r = g.rho(i);
            for j in 0..g.nz() {
                v_phi[[i, j]] = state.f.values[[i, j]] / r;
            }
        }
        AxiField {
            grid: g,
            t: state.t,
            v_rho,
            v_phi,
            v_z,
        }
    }

    /// Right-hand sides of the f and ω equations; also returns max |v̄|.
    fn tendencies(&self, f: &Array2<f64>, w: &Array2<f64>, t: f64) -> Result<(Array2<f64>, Array2<f64>, f64)> {
        let g = &self.grid;
        let psi = self.streamfunction(w)?;
        let (vr, vz) = self.meridional_velocity(&psi);
        let (nr, nz) = g.shape();
        let n = nr - 1;
        let h = g.d_rho;
        let dz = g.d_z;
        let ih2 = 1.0 / (h * h);
        let izh2 = 1.0 / (dz * dz);
        let inv2h = 0.5 / h;
        let inv2dz = 0.5 / dz;
        let mut df = Array2::zeros((nr, nz));
        let mut dw = Array2::zeros((nr, nz));
        let mut vmax: f64 = 0.0;
        for (a, b) in vr.iter().zip(vz.iter()) {
            vmax = vmax.max((a * a + b * b).sqrt());
        }
        let periodic = g.z_periodic;
        for j in 0..nz {
            // Neighbour indices and reflection signs (f even, ω odd across symmetry planes).
            let (jm, jp, sf_m, sf_p, sw_m, sw_p) = if periodic {
                (if j == 0 { nz - 1 } else { j - 1 }, if j + 1 == nz { 0 } else { j + 1 }, 1.0, 1.0, 1.0, 1.0)
            } else if j == 0 {
                (1, 1, 1.0, 1.0, -1.0, 1.0)
            } else if j == nz - 1 {
                (nz - 2, nz - 2, 1.0, 1.0, 1.0, -1.0)
            } else {
                (j - 1, j + 1, 1.0, 1.0, 1.0, 1.0)
            };
            let w_end = !periodic && (j == 0 || j == nz - 1);
            for i in 1..n {
                let r = g.rho(i);
                let inv_r = 1.0 / r;
                let (u, v) = (vr[[i, j]], vz[[i, j]]);

                let fc = f[[i, j]];
                let fm_z = sf_m * f[[i, jm]];
                let fp_z = sf_p * f[[i, jp]];
                let f_r = (f[[i + 1, j]] - f[[i - 1, j]]) * inv2h;
                let f_rr = (f[[i + 1, j]] - 2.0 * fc + f[[i - 1, j]]) * ih2;
                let f_z = (fp_z - fm_z) * inv2dz;
                let f_zz = (fp_z - 2.0 * fc + fm_z) * izh2;
                if !self.no_swirl {
                    df[[i, j]] = -u * f_r - v * f_z + f_rr - f_r * inv_r + f_zz;
                }

                if w_end {
                    continue;
                }
                let wc = w[[i, j]];
                let wm_z = sw_m * w[[i, jm]];
                let wp_z = sw_p * w[[i, jp]];
                let w_r = (w[[i + 1, j]] - w[[i - 1, j]]) * inv2h;
                let w_rr = (w[[i + 1, j]] - 2.0 * wc + w[[i - 1, j]]) * ih2;
                let w_z = (wp_z - wm_z) * inv2dz;
                let w_zz = (wp_z - 2.0 * wc + wm_z) * izh2;
                let f2_z = (fp_z * fp_z - fm_z * fm_z) * inv2dz;
                dw[[i, j]] = -u * w_r - v * w_z + u * wc * inv_r + w_rr + w_r * inv_r
                    - wc * inv_r * inv_r
                    + w_zz
                    + f2_z * inv_r * inv_r * inv_r;
            }
        }
        if self.no_swirl {
            let mut scratch = Array2::zeros((nr, nz));
            self.forcing.add(g, t, f, &mut scratch, &mut dw);
        } else {
            self.forcing.add(g, t, f, &mut df, &mut dw);
        }
        // Forcing never acts on boundary rows.
        for j in 0..nz {
            df[[0, j]] = 0.0;
            df[[n, j]] = 0.0;
            dw[[0, j]] = 0.0;
            dw[[n, j]] = 0.0;
        }
        if !periodic {
            for i in 0..nr {
                dw[[i, 0]] = 0.0;
                dw[[i, nz - 1]] = 0.0;
            }
        }
        Ok((df, dw, vmax))
    }

    /// Advances one Heun step of size `dt`.
    pub fn step(&self, state: &SolverState, dt: f64) -> Result<SolverState> {
        let g = &self.grid;
        let diff_limit = diffusive_dt_limit(g);
        if dt > diff_limit * (1.0 + 1e-12) {
            return Err(Error::Stability(format!("dt = {dt} exceeds diffusive limit {diff_limit}")));
        }
        let t = state.t;
        let f0 = &state.f.values;
        let w0 = &state.omega_phi.values;
        let (df0, dw0, vmax) = self.tendencies(f0, w0, t)?;
        let adv_limit = advective_dt_limit(g, vmax);
        if dt > adv_limit * (1.0 + 1e-12) {
            return Err(Error::Stability(format!(
                "dt = {dt} exceeds advective limit {adv_limit} (max |v̄| = {vmax})"
            )));
        }
        let mut f1 = f0 + &(&df0 * dt);
        let mut w1 = w0 + &(&dw0 * dt);
        self.apply_boundary(&mut f1, &mut w1);
        let (df1, dw1, _) = self.tendencies(&f1, &w1, t + dt)?;
        let mut f2 = (f0 + &f1 + &(&df1 * dt)) * 0.5;
        let mut w2 = (w0 + &w1 + &(&dw1 * dt)) * 0.5;
        self.apply_boundary(&mut f2, &mut w2);
        if self.no_swirl {
            f2.fill(0.0);
        }
        let finite = f2.iter().chain(w2.iter()).all(|x| x.is_finite());
        if !finite {
            return Err(Error::BlowUp {
                step: state.step_count + 1,
                t: t + dt,
                reason: "non-finite value in f or ω".into(),
                last_state: Box::new(state.clone()),
            });
        }
        let next = self.assemble(f2, w2, t + dt, state.step_count + 1)?;
        if next.psi.values.iter().any(|x| !x.is_finite()) {
            return Err(Error::BlowUp {
                step: state.step_count + 1,
                t: t + dt,
                reason: "non-finite streamfunction".into(),
                last_state: Box::new(state.clone()),
            });
        }
        Ok(next)
    }
}

/// `v_ρ = −(1/ρ)∂_z ψ`, `v_z = (1/ρ)∂_ρ ψ`, with the axis limits `v_ρ = 0`, `v_z = ∂²_ρ ψ`.
pub fn meridional_from_stream(g: &Grid2D, psi: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let (nr, nz) = g.shape();
    let n = nr - 1;
    let h = g.d_rho;
    let inv2dz = 0.5 / g.d_z;
    let mut vr = Array2::zeros((nr, nz));
    let mut vz = Array2::zeros((nr, nz));
    for j in 0..nz {
        let (jm, jp, sm, sp) = if g.z_periodic {
            (if j == 0 { nz - 1 } else { j - 1 }, if j + 1 == nz { 0 } else { j + 1 }, 1.0, 1.0)
        } else if j == 0 {
            (1, 1, -1.0, 1.0)
        } else if j == nz - 1 {
            (nz - 2, nz - 2, 1.0, -1.0)
        } else {
            (j - 1, j + 1, 1.0, 1.0)
        };
        vz[[0, j]] = 2.0 * (psi[[1, j]] - psi[[0, j]]) / (h * h);
        for i in 1..nr {
            let r = g.rho(i);
            vr[[i, j]] = -(sp * psi[[i, jp]] - sm * psi[[i, jm]]) * inv2dz / r;
            let dpsi = if i < n {
                (psi[[i + 1, j]] - psi[[i - 1, j]]) / (2.0 * h)
            } else {
                (3.0 * psi[[n, j]] - 4.0 * psi[[n - 1, j]] + psi[[n - 2, j]]) / (2.0 * h)
            };
            vz[[i, j]] = dpsi / r;
        }
    }
    (vr, vz)
}

/// Solves `∂²_ρψ − (1/ρ)∂_ρψ + ∂²_zψ = −ρ ω` with ψ = 0 on the axis, the wall and
/// (bounded z-ranges) the end planes.
pub fn solve_streamfunction(omega: &ScalarField2D) -> Result<ScalarField2D> {
    solve_streamfunction_with(omega, &Boundary::default())
}

/// As [`solve_streamfunction`] with prescribed wall / end-plane values of ψ.
pub fn solve_streamfunction_with(omega: &ScalarField2D, bc: &Boundary) -> Result<ScalarField2D> {
    let g = omega.grid;
    let scale = omega.max_abs().max(1.0);
    let axis = (0..g.nz()).map(|j| omega.values[[0, j]].abs()).fold(0.0, f64::max);
    if axis > 1e-12 * scale {
        return Err(Error::AxisRegularity(format!(
            "azimuthal vorticity must vanish on the axis, found {axis:e}"
        )));
    }
    let solver = stream_solver(g)?;
    let rhs = Array2::from_shape_fn(g.shape(), |(i, j)| -g.rho(i) * omega.values[[i, j]]);
    let (psi, _) = solver.solve(&rhs, bc)?;
    ScalarField2D::new(g, omega.t, psi)
}

/// Global kinetic energy `∫|v|² dx` over the sampled domain.
pub fn kinetic_energy(v: &AxiField) -> f64 {
    let g = &v.grid;
    let wr = interval_weights(0.0, g.d_rho, g.nr(), 0.0, g.rho_max, None);
    let period = g.z_periodic.then_some(g.nz());
    let wz = interval_weights(g.z_min, g.d_z, g.nz(), g.z_min, g.z_max, period);
    let mut e = 0.0;
    for &(j, b) in &wz {
        for &(i, a) in &wr {
            let s = v.v_rho[[i, j]].powi(2) + v.v_phi[[i, j]].powi(2) + v.v_z[[i, j]].powi(2);
            e += a * b * 2.0 * PI * g.rho(i) * s;
        }
    }
    e
}

/// Runs a scenario, emitting a snapshot (velocity and pressure) every
/// `snapshot_every` steps. A non-finite state ends the run early with
/// [`Termination::BlowUp`]; other step failures are returned with the step index.
pub fn run(scenario: &Scenario) -> Result<Trajectory> {
    let solver = Solver::for_scenario(scenario)?;
    let mut state = solver.initial_state(&scenario.initial, scenario.t_start)?;
    let n_steps = scenario.n_steps();
    let emit = |s: &SolverState| -> Result<Snapshot> {
        let v = solver.velocity(s);
        let q = crate::pressure::solve_pressure(&v)?;
        Ok(Snapshot { velocity: v, pressure: q })
    };
    let mut snaps = vec![emit(&state)?];
    let mut termination = Termination::Completed;
    for k in 1..=n_steps {
        match solver.step(&state, scenario.dt) {
            Ok(mut next) => {
                // Re-anchor time to the uniform lattice to keep snapshot spacing exact.
                next.t = scenario.t_start + k as f64 * scenario.dt;
                next.f.t = next.t;
                next.omega_phi.t = next.t;
                next.psi.t = next.t;
                state = next;
            }
            Err(Error::BlowUp { step, t, reason, .. }) => {
                termination = Termination::BlowUp { step, t, reason };
                break;
            }
            Err(e) => {
                return Err(Error::AtStep {
                    step: k,
                    source: Box::new(e),
                })
            }
        }
        if k as usize % scenario.snapshot_every == 0 {
            snaps.push(emit(&state).map_err(|e| Error::AtStep {
                step: k,
                source: Box::new(e),
            })?);
        }
    }
    let provenance = serde_json::to_string(scenario).unwrap_or_default();
    let mut traj = Trajectory::new(snaps, provenance)?;
    traj.termination = termination;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn periodic_grid(n: usize) -> Grid2D {
        Grid2D::new(1.0, -1.0, 1.0, n, 2 * n, true).unwrap()
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = periodic_grid(8);
        let s = Solver::new(g, WallCondition::StressFree, Forcing::None, false).unwrap();
        let st = s.initial_state(&InitialCondition::Zero, 0.0).unwrap();
        let next = s.step(&st, diffusive_dt_limit(&g)).unwrap();
        assert!(next.f.values.iter().all(|&x| x == 0.0));
        assert!(next.omega_phi.values.iter().all(|&x| x == 0.0));
        assert!(next.psi.values.iter().all(|&x| x == 0.0));
        assert_eq!(next.step_count, 1);
    }

    #[test]
    fn rigid_rotation_is_steady() {
        let g = Grid2D::new(1.0, -1.0, 1.0, 32, 32, false).unwrap();
        let omega = 2.0;
        let s = Solver::new(g, WallCondition::RotatingWall { omega }, Forcing::None, false).unwrap();
        let mut st = s.initial_state(&InitialCondition::RigidRotation { omega }, 0.0).unwrap();
        let dt = diffusive_dt_limit(&g);
        for _ in 0..20 {
            let next = s.step(&st, dt).unwrap();
            let change = (&next.f.values - &st.f.values).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let wchange = next.omega_phi.max_abs();
            assert!(change < 1e-10 && wchange < 1e-10, "{change} {wchange}");
            st = next;
        }
    }

    #[test]
    fn blow_up_reports_last_finite_state() {
        let g = periodic_grid(8);
        let s = Solver::new(g, WallCondition::StressFree, Forcing::RampedSwirl { rate: 1e308 }, false).unwrap();
        let st = s
            .initial_state(
                &InitialCondition::SwirlVortex { amplitude: 1.0, core: 0.3, z_center: 0.0, width: 0.3, meridional: 0.0 },
                0.0,
            )
            .unwrap();
        match s.step(&st, diffusive_dt_limit(&g)) {
            Err(Error::BlowUp { last_state, .. }) => assert_eq!(*last_state, st),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn stream_of_zero_vorticity_is_zero() {
        let g = periodic_grid(8);
        let psi = solve_streamfunction(&ScalarField2D::zeros(g, 0.0)).unwrap();
        assert!(psi.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn stream_rejects_axis_vorticity() {
        let g = periodic_grid(8);
        let w = ScalarField2D::from_fn(g, 0.0, |_, _| 1.0);
        assert!(matches!(solve_streamfunction(&w), Err(Error::AxisRegularity(_))));
    }

    #[test]
    fn stokes_operator_annihilates_rho_squared_z() {
        // ψ = ρ²z on the boundary, ω = 0 → ψ = ρ²z inside (the discrete operator is exact on it).
        let g = Grid2D::new(1.0, -1.0, 1.0, 16, 16, false).unwrap();
        let bc = Boundary {
            wall: Some((0..g.nz()).map(|j| g.z(j)).collect()),
            z_low: Some((0..g.nr()).map(|i| g.rho(i).powi(2) * g.z_min).collect()),
            z_high: Some((0..g.nr()).map(|i| g.rho(i).powi(2) * g.z_max).collect()),
        };
        let psi = solve_streamfunction_with(&ScalarField2D::zeros(g, 0.0), &bc).unwrap();
        for i in 0..g.nr() {
            for j in 0..g.nz() {
                let want = g.rho(i).powi(2) * g.z(j);
                assert!((psi.values[[i, j]] - want).abs() < 1e-12, "{i} {j}");
            }
        }
    }

    #[test]
    fn no_swirl_run_keeps_swirl_identically_zero() {
        let g = Grid2D::new(1.0, -1.0, 1.0, 8, 8, false).unwrap();
        let mut sc = Scenario::new(
            g,
            InitialCondition::Random { seed: 3, amplitude: 1.0, modes: 2 },
            diffusive_dt_limit(&g),
            10.0 * diffusive_dt_limit(&g),
        );
        sc.no_swirl = true;
        let traj = run(&sc).unwrap();
        for s in &traj.snapshots {
            assert!(s.velocity.v_phi.iter().all(|&x| x == 0.0));
        }
        assert!(traj.snapshots.last().unwrap().velocity.v_z.iter().any(|&x| x != 0.0));
    }

    #[test]
    fn zero_run_is_all_zero() {
        let g = periodic_grid(8);
        let sc = Scenario::new(g, InitialCondition::Zero, diffusive_dt_limit(&g), 5.0 * diffusive_dt_limit(&g));
        let traj = run(&sc).unwrap();
        assert_eq!(traj.len(), 6);
        for s in &traj.snapshots {
            assert_eq!(s.velocity.max_magnitude(), 0.0);
            assert_eq!(s.pressure.max_abs(), 0.0);
        }
    }
}
