use std::path::Path;

use ndarray::s;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{AxiField, Grid2D, ScalarField2D, SnapshotRecord};

/// One emitted time level: velocity and pressure.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub velocity: AxiField,
    pub pressure: ScalarField2D,
}

impl Snapshot {
    pub fn t(&self) -> f64 {
        self.velocity.t
    }
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    BlowUp { step: u64, t: f64, reason: String },
}

/// Time-ordered, uniformly spaced snapshots on one grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub dt: f64,
    pub provenance: String,
    pub termination: Termination,
}

impl Trajectory {
    /// Builds a trajectory, checking the time-ordering and spacing invariants.
    pub fn new(snapshots: Vec<Snapshot>, provenance: impl Into<String>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        let grid = snapshots[0].velocity.grid;
        for s in &snapshots {
            if !s.velocity.grid.same_geometry(&grid) || !s.pressure.grid.same_geometry(&grid) {
                return Err(Error::GeometryMismatch("snapshots on different grids".into()));
            }
        }
        let dt = if snapshots.len() > 1 {
            snapshots[1].t() - snapshots[0].t()
        } else {
            0.0
        };
        if snapshots.len() > 1 && !(dt > 0.0) {
            return Err(Error::InvalidArgument("snapshot times must increase".into()));
        }
        let t0 = snapshots[0].t();
        for (k, s) in snapshots.iter().enumerate() {
            let want = t0 + k as f64 * dt;
            if (s.t() - want).abs() > 1e-9 * dt.max(1e-300) + 1e-12 * want.abs() {
                return Err(Error::InvalidArgument(format!(
                    "snapshot {k} at t = {} breaks the uniform spacing (expected {want})",
                    s.t()
                )));
            }
        }
        Ok(Self {
            snapshots,
            dt,
            provenance: provenance.into(),
            termination: Termination::Completed,
        })
    }

    /// Samples analytic velocity and pressure at `n` uniformly spaced times in `[t_first, t_last]`.
    pub fn from_fn(
        grid: Grid2D,
        t_first: f64,
        t_last: f64,
        n: usize,
        velocity: impl Fn(f64, f64, f64) -> [f64; 3],
        pressure: impl Fn(f64, f64, f64) -> f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyTrajectory);
        }
        let dt = if n > 1 { (t_last - t_first) / (n - 1) as f64 } else { 0.0 };
        let snaps = (0..n)
            .map(|k| {
                let t = t_first + k as f64 * dt;
                Snapshot {
                    velocity: AxiField::from_fn(grid, t, |r, z| velocity(r, z, t)),
                    pressure: ScalarField2D::from_fn(grid, t, |r, z| pressure(r, z, t)),
                }
            })
            .collect();
        Self::new(snaps, "analytic")
    }

    pub fn grid(&self) -> Grid2D {
        self.snapshots[0].velocity.grid
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn t_first(&self) -> f64 {
        self.snapshots[0].t()
    }

    pub fn t_last(&self) -> f64 {
        self.snapshots.last().map(Snapshot::t).unwrap_or(f64::NAN)
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(Snapshot::t).collect()
    }

    /// Every second node in space and every second snapshot in time.
    /// Needs even cell counts; used for Richardson-style error estimates.
    pub fn coarsened(&self) -> Result<Self> {
        let g = self.grid();
        if g.n_rho % 2 != 0 || g.n_z % 2 != 0 {
            return Err(Error::InvalidGrid("coarsening needs even cell counts".into()));
        }
        let cg = Grid2D::new(g.rho_max, g.z_min, g.z_max, g.n_rho / 2, g.n_z / 2, g.z_periodic)?;
        let sub = |a: &ndarray::Array2<f64>| a.slice(s![..;2, ..;2]).to_owned();
        let snaps = self
            .snapshots
            .iter()
            .step_by(2)
            .map(|sn| Snapshot {
                velocity: AxiField {
                    grid: cg,
                    t: sn.velocity.t,
                    v_rho: sub(&sn.velocity.v_rho),
                    v_phi: sub(&sn.velocity.v_phi),
                    v_z: sub(&sn.velocity.v_z),
                },
                pressure: ScalarField2D {
                    grid: cg,
                    t: sn.pressure.t,
                    values: sub(&sn.pressure.values),
                },
            })
            .collect();
        let mut out = Self::new(snaps, format!("{} (coarsened)", self.provenance))?;
        out.termination = self.termination.clone();
        Ok(out)
    }

    /// Writes `snap_000000.axs`, `snap_000001.axs`, … into `dir`.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (k, s) in self.snapshots.iter().enumerate() {
            let rec = SnapshotRecord {
                velocity: s.velocity.clone(),
                pressure: Some(s.pressure.clone()),
                provenance: None,
            };
            rec.save(&dir.join(format!("snap_{k:06}.axs")))?;
        }
        Ok(())
    }

    /// Loads every `*.axs` file of `dir` in lexicographic order.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "axs"))
            .collect();
        paths.sort();
        let mut snaps = Vec::with_capacity(paths.len());
        for p in &paths {
            let rec = SnapshotRecord::load(p)?;
            let pressure = rec
                .pressure
                .unwrap_or_else(|| ScalarField2D::zeros(rec.velocity.grid, rec.velocity.t));
            snaps.push(Snapshot {
                velocity: rec.velocity,
                pressure,
            });
        }
        Self::new(snaps, format!("loaded from {}", dir.display()))
    }
}
