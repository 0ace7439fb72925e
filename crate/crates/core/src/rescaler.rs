//! Dynamic rescaling at amplitude records.
//!
//! A record at `(x_k, t_k)` with amplitude `M_k` defines `λ_k = 1/M_k` and the zoom
//!
//! ```text
//! u(y, s) = λ v(λ y′, z_k + λ y₃, t_k + λ² s)
//! p(y, s) = λ² q(λ y′, z_k + λ y₃, t_k + λ² s)
//! ```
//!
//! on `Q(a) = {|y′| ≤ a, |y₃| ≤ a} × [−a², 0]`. Only the axial coordinate is
//! shifted, so a zoom of an axisymmetric field is again axisymmetric.

use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::MixedNormSpec;
use crate::fields::{AxiField, Grid2D, ParabolicCylinder, ScalarField2D, SnapshotRecord, ZoomProvenance};
use crate::functionals::{ball_amplitude, compute_functionals_with, ladder_monotone, FunctionalReport};
use crate::solver::{Snapshot, Trajectory};

pub const DEFAULT_RECORD_RATIO: f64 = 1.1;

/// An amplitude record: `M_k = G(t_k) = |v(x_k, t_k)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakRecord {
    pub k: usize,
    /// Index of the snapshot holding the record.
    pub snapshot: usize,
    pub t_k: f64,
    pub rho_k: f64,
    pub z_k: f64,
    pub m_k: f64,
    /// Grid node of `x_k`.
    pub node: (usize, usize),
}

/// Amplitude records with the default ratio step.
pub fn detect_peaks(traj: &Trajectory, r1: f64) -> Result<Vec<PeakRecord>> {
    detect_peaks_with(traj, r1, DEFAULT_RECORD_RATIO)
}

/// The first snapshot is record 0; later snapshots become records when
/// `G(t) ≥ ratio · M_{k−1}`.
pub fn detect_peaks_with(traj: &Trajectory, r1: f64, ratio: f64) -> Result<Vec<PeakRecord>> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let g = traj.grid();
    if !(r1 > 0.0) || r1 > g.rho_max * (1.0 + 1e-12) || !g.covers_z(-r1, r1) {
        return Err(Error::OutOfDomain(format!("ball of radius {r1} does not fit the grid")));
    }
    if !(ratio > 1.0) {
        return Err(Error::InvalidArgument(format!("record ratio must exceed 1, got {ratio}")));
    }
    let amps: Vec<(f64, usize, usize)> = traj
        .snapshots
        .par_iter()
        .map(|s| ball_amplitude(&s.velocity, r1))
        .collect();
    let mut out: Vec<PeakRecord> = Vec::new();
    for (idx, &(m, i, j)) in amps.iter().enumerate() {
        let new = match out.last() {
            None => true,
            Some(last) => m >= ratio * last.m_k && m > last.m_k,
        };
        if new {
            out.push(PeakRecord {
                k: out.len(),
                snapshot: idx,
                t_k: traj.snapshots[idx].t(),
                rho_k: g.rho(i),
                z_k: g.z(j),
                m_k: m,
                node: (i, j),
            });
        }
    }
    Ok(out)
}

/// Which coordinates are shifted to the peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ZoomCentre {
    /// Shift `z` only; the peak sits at `y = (ρ_k/λ, 0)`.
    #[default]
    AxialShift,
    /// Shift the full point `x_k`. Stays axisymmetric only for peaks on the axis.
    Full,
}

/// Time levels of the zoomed window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZoomTime {
    /// `n + 1` uniform levels covering `[−a², 0]`; zooms of one source share geometry.
    Uniform(usize),
    /// Levels on every `stride`-th source snapshot, reaching back to `−a²` or beyond.
    Aligned(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoomOptions {
    pub n_rho: usize,
    /// Cells over `y₃ ∈ [−a, a]`.
    pub n_z: usize,
    pub time: ZoomTime,
    pub centre: ZoomCentre,
    /// Replaces `1/M_k`; only for exercising failure paths.
    pub lambda: Option<f64>,
}

impl Default for ZoomOptions {
    fn default() -> Self {
        Self {
            n_rho: 32,
            n_z: 64,
            time: ZoomTime::Uniform(16),
            centre: ZoomCentre::AxialShift,
            lambda: None,
        }
    }
}

/// A zoomed window `(u, p)` on `Q(a)` with its provenance.
#[derive(Debug, Clone)]
pub struct ZoomSnapshot {
    pub lambda_k: f64,
    pub peak: PeakRecord,
    pub a: f64,
    pub centre: ZoomCentre,
    /// Velocity `u` and pressure `p` at the levels `s ∈ [−a², 0]`.
    pub fields: Trajectory,
    /// Resampling error estimate per time level.
    pub level_tolerance: Vec<f64>,
    /// `λ |v(x_k, t_k)|` read at the source node.
    pub peak_value: f64,
}

impl ZoomSnapshot {
    pub fn u_field(&self) -> impl Iterator<Item = &AxiField> {
        self.fields.snapshots.iter().map(|s| &s.velocity)
    }

    pub fn p_field(&self) -> impl Iterator<Item = &ScalarField2D> {
        self.fields.snapshots.iter().map(|s| &s.pressure)
    }

    /// Radial coordinate of the peak in zoomed variables.
    pub fn y_k(&self) -> f64 {
        match self.centre {
            ZoomCentre::AxialShift => self.peak.rho_k / self.lambda_k,
            ZoomCentre::Full => 0.0,
        }
    }

    pub fn grid(&self) -> Grid2D {
        self.fields.grid()
    }

    pub fn interp_tolerance(&self) -> f64 {
        self.level_tolerance.iter().copied().fold(0.0, f64::max)
    }

    pub fn provenance(&self) -> ZoomProvenance {
        ZoomProvenance {
            k: self.peak.k as u64,
            lambda_k: self.lambda_k,
            t_k: self.peak.t_k,
            rho_k: self.peak.rho_k,
            z_k: self.peak.z_k,
            m_k: self.peak.m_k,
            a: self.a,
        }
    }

    /// Writes one record per level as `zoom_KKKK_LLLL.axs` into `dir`.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (l, s) in self.fields.snapshots.iter().enumerate() {
            let rec = SnapshotRecord {
                velocity: s.velocity.clone(),
                pressure: Some(s.pressure.clone()),
                provenance: Some(self.provenance()),
            };
            rec.save(&dir.join(format!("zoom_{:04}_{l:04}.axs", self.peak.k)))?;
        }
        Ok(())
    }
}

/// Four-point Lagrange stencil: first node index and weights. With `ghost`
/// the stencil may start at −1 (a reflected node across the axis).
fn cubic_stencil(x: f64, n: usize, ghost: bool) -> (isize, [f64; 4]) {
    let i0 = (x.floor() as isize).clamp(0, n as isize - 1);
    let lo = if ghost { -1 } else { 0 };
    let base = (i0 - 1).min(n as isize - 3).max(lo);
    (base, lagrange4(x - base as f64))
}

/// Weights of the cubic through nodes 0, 1, 2, 3 evaluated at `t`.
fn lagrange4(t: f64) -> [f64; 4] {
    [
        -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0,
        t * (t - 2.0) * (t - 3.0) / 2.0,
        -t * (t - 1.0) * (t - 3.0) / 2.0,
        t * (t - 1.0) * (t - 2.0) / 6.0,
    ]
}

fn linear_stencil(x: f64, n: usize) -> (isize, [f64; 2]) {
    let i0 = (x.floor() as isize).clamp(0, n as isize - 1);
    let t = x - i0 as f64;
    (i0, [1.0 - t, t])
}

/// Samples fields of one grid at arbitrary `(ρ, z)` inside it.
struct Sampler {
    g: Grid2D,
}

/// Stencil for one point: radial and axial node lists with weights.
struct Stencil<const N: usize> {
    ri: [usize; N],
    rs: [f64; N],
    rw: [f64; N],
    zj: [usize; N],
    zw: [f64; N],
}

impl Sampler {
    fn new(g: Grid2D) -> Result<Self> {
        if g.n_rho < 3 || g.n_z < 3 {
            return Err(Error::InvalidGrid("resampling needs at least 3 cells per direction".into()));
        }
        Ok(Self { g })
    }

    fn radial<const N: usize>(&self, base: isize, w: [f64; N]) -> ([usize; N], [f64; N], [f64; N]) {
        let mut ri = [0; N];
        let mut rs = [1.0; N];
        for m in 0..N {
            let i = base + m as isize;
            if i < 0 {
                ri[m] = (-i) as usize;
                rs[m] = -1.0;
            } else {
                ri[m] = i as usize;
            }
        }
        (ri, rs, w)
    }

    fn axial<const N: usize>(&self, base: isize) -> [usize; N] {
        let mut zj = [0; N];
        for (m, z) in zj.iter_mut().enumerate() {
            let j = base + m as isize;
            *z = if self.g.z_periodic { self.g.wrap_index(j) } else { j as usize };
        }
        zj
    }

    fn axial_coordinate(&self, z: f64) -> f64 {
        (self.g.wrap_z(z) - self.g.z_min) / self.g.d_z
    }

    fn cubic(&self, rho: f64, z: f64) -> Stencil<4> {
        let (rb, rw) = cubic_stencil(rho / self.g.d_rho, self.g.n_rho, true);
        let (ri, rs, rw) = self.radial(rb, rw);
        let x = self.axial_coordinate(z);
        let (zb, zw) = if self.g.z_periodic {
            let j0 = x.floor() as isize;
            (j0 - 1, lagrange4(x - (j0 - 1) as f64))
        } else {
            cubic_stencil(x, self.g.n_z, false)
        };
        Stencil {
            ri,
            rs,
            rw,
            zj: self.axial(zb),
            zw,
        }
    }

    fn linear(&self, rho: f64, z: f64) -> Stencil<2> {
        let (rb, rw) = linear_stencil(rho / self.g.d_rho, self.g.n_rho);
        let (ri, rs, rw) = self.radial(rb, rw);
        let x = self.axial_coordinate(z);
        let (zb, zw) = if self.g.z_periodic {
            let j0 = x.floor() as isize;
            (j0, [1.0 - (x - j0 as f64), x - j0 as f64])
        } else {
            linear_stencil(x, self.g.n_z)
        };
        Stencil {
            ri,
            rs,
            rw,
            zj: self.axial(zb),
            zw,
        }
    }
}

impl<const N: usize> Stencil<N> {
    /// `odd` selects the reflection sign across the axis.
    fn apply(&self, a: &Array2<f64>, odd: bool) -> f64 {
        let mut acc = 0.0;
        for m in 0..N {
            let sign = if odd { self.rs[m] } else { 1.0 };
            let mut row = 0.0;
            for n in 0..N {
                row += self.zw[n] * a[[self.ri[m], self.zj[n]]];
            }
            acc += sign * self.rw[m] * row;
        }
        acc
    }
}

/// `[v_ρ, v_φ, v_z, q]` at a point by bicubic interpolation.
fn sample_cubic(sn: &Snapshot, st: &Stencil<4>) -> [f64; 4] {
    let v = &sn.velocity;
    [
        st.apply(&v.v_rho, true),
        st.apply(&v.v_phi, true),
        st.apply(&v.v_z, false),
        st.apply(&sn.pressure.values, false),
    ]
}

fn sample_linear(sn: &Snapshot, st: &Stencil<2>) -> [f64; 3] {
    let v = &sn.velocity;
    [st.apply(&v.v_rho, true), st.apply(&v.v_phi, true), st.apply(&v.v_z, false)]
}

fn norm3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Bracketing snapshots of `t`: `(k, θ)` with `t = (1 − θ) t_k + θ t_{k+1}`.
fn time_bracket(traj: &Trajectory, t: f64) -> (usize, f64) {
    if traj.len() == 1 {
        return (0, 0.0);
    }
    let x = (t - traj.t_first()) / traj.dt;
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 {
        let k = (nearest.max(0.0) as usize).min(traj.len() - 1);
        return (k, 0.0);
    }
    let k = (x.floor().max(0.0) as usize).min(traj.len() - 2);
    (k, (x - k as f64).clamp(0.0, 1.0))
}

/// Zoom with λ = 1/M_k and default options.
pub fn zoom(traj: &Trajectory, peak: &PeakRecord, a: f64) -> Result<ZoomSnapshot> {
    zoom_with(traj, peak, a, &ZoomOptions::default())
}

pub fn zoom_with(traj: &Trajectory, peak: &PeakRecord, a: f64, opts: &ZoomOptions) -> Result<ZoomSnapshot> {
    if !(peak.m_k > 0.0) || !peak.m_k.is_finite() {
        return Err(Error::InvalidPeak(format!("M_k = {} must be positive and finite", peak.m_k)));
    }
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidArgument(format!("window radius must be positive, got {a}")));
    }
    if opts.n_rho < 3 || opts.n_z < 4 || opts.n_z % 2 != 0 {
        return Err(Error::InvalidArgument("zoom grid needs n_rho ≥ 3 and an even n_z ≥ 4".into()));
    }
    let g = traj.grid();
    let lambda = opts.lambda.unwrap_or(1.0 / peak.m_k);
    let (rho_c, z_c) = match opts.centre {
        ZoomCentre::AxialShift => (0.0, peak.z_k),
        ZoomCentre::Full => {
            if peak.rho_k != 0.0 {
                return Err(Error::InvalidPeak(format!(
                    "full centring at ρ_k = {} would break axisymmetry",
                    peak.rho_k
                )));
            }
            (0.0, peak.z_k)
        }
    };
    let y_k = (peak.rho_k - rho_c) / lambda;
    if y_k > a * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "window radius {a} is smaller than the peak offset y′_k = {y_k}"
        )));
    }
    if peak.snapshot >= traj.len() || (traj.snapshots[peak.snapshot].t() - peak.t_k).abs() > 1e-9 * traj.dt.max(1e-300)
    {
        return Err(Error::InvalidPeak("peak does not refer to a snapshot of this trajectory".into()));
    }

    // Time levels in s, earliest first.
    let levels: Vec<f64> = match opts.time {
        ZoomTime::Uniform(n) => {
            let n = n.max(1);
            (0..=n).map(|m| -a * a * (n - m) as f64 / n as f64).collect()
        }
        ZoomTime::Aligned(stride) => {
            if traj.len() < 2 {
                return Err(Error::InvalidArgument("aligned levels need at least two snapshots".into()));
            }
            let ds = stride.max(1) as f64 * traj.dt / (lambda * lambda);
            let n = ((a * a / ds) - 1e-9).ceil().max(1.0) as usize;
            (0..=n).map(|m| -((n - m) as f64) * ds).collect()
        }
    };
    let depth = -levels[0];

    // Maximal admissible window radius.
    let mut a_max = g.rho_max / lambda;
    if g.z_periodic {
        a_max = a_max.min(g.z_length() / (2.0 * lambda));
    } else {
        a_max = a_max.min((z_c - g.z_min).min(g.z_max - z_c) / lambda);
    }
    let back = (peak.t_k - traj.t_first()).max(0.0);
    a_max = a_max.min(back.sqrt() / lambda * a / depth.sqrt());
    if a > a_max * (1.0 + 1e-12) {
        return Err(Error::WindowEscapes {
            max_admissible_a: a_max,
            detail: format!("a = {a}, λ = {lambda}, t_k = {}, x_k = ({}, {})", peak.t_k, peak.rho_k, peak.z_k),
        });
    }

    let zg = Grid2D::new(a, -a, a, opts.n_rho, opts.n_z, false)?;
    let sampler = Sampler::new(g)?;
    let (pi, pj) = peak.node;
    let pv = &traj.snapshots[peak.snapshot].velocity;
    let peak_value = lambda * norm3([pv.v_rho[[pi, pj]], pv.v_phi[[pi, pj]], pv.v_z[[pi, pj]]]);

    let built: Vec<(Snapshot, f64)> = levels
        .par_iter()
        .map(|&s| {
            let t = peak.t_k + lambda * lambda * s;
            let (k, theta) = time_bracket(traj, t);
            let third = if theta > 0.0 {
                Some(if k + 2 < traj.len() { k + 2 } else { k.saturating_sub(1) })
            } else {
                None
            };
            let mut u = AxiField::zeros(zg, s);
            let mut p = ScalarField2D::zeros(zg, s);
            let mut tol: f64 = 0.0;
            for i in 0..zg.nr() {
                let rho = rho_c + lambda * zg.rho(i);
                for j in 0..zg.nz() {
                    let z = z_c + lambda * zg.z(j);
                    let c4 = sampler.cubic(rho, z);
                    let c2 = sampler.linear(rho, z);
                    let a0 = sample_cubic(&traj.snapshots[k], &c4);
                    let l0 = sample_linear(&traj.snapshots[k], &c2);
                    let mut val = a0;
                    let mut space_err = norm3([a0[0] - l0[0], a0[1] - l0[1], a0[2] - l0[2]]);
                    let mut time_err = 0.0;
                    if let Some(k3) = third {
                        let a1 = sample_cubic(&traj.snapshots[k + 1], &c4);
                        let l1 = sample_linear(&traj.snapshots[k + 1], &c2);
                        for c in 0..4 {
                            val[c] = (1.0 - theta) * a0[c] + theta * a1[c];
                        }
                        space_err = space_err.max(norm3([a1[0] - l1[0], a1[1] - l1[1], a1[2] - l1[2]]));
                        // Quadratic through the third snapshot measures the linear-in-time error.
                        let a2 = sample_cubic(&traj.snapshots[k3], &c4);
                        let x = theta;
                        let x2 = k3 as f64 - k as f64;
                        let mut d = [0.0; 3];
                        for c in 0..3 {
                            let quad = a0[c] * (x - 1.0) * (x - x2) / x2
                                + a1[c] * x * (x - x2) / (1.0 - x2)
                                + a2[c] * x * (x - 1.0) / (x2 * (x2 - 1.0));
                            d[c] = quad - val[c];
                        }
                        time_err = norm3(d);
                    }
                    tol = tol.max(lambda * (space_err + time_err));
                    u.v_rho[[i, j]] = lambda * val[0];
                    u.v_phi[[i, j]] = lambda * val[1];
                    u.v_z[[i, j]] = lambda * val[2];
                    p.values[[i, j]] = lambda * lambda * val[3];
                }
            }
            (Snapshot { velocity: u, pressure: p }, tol)
        })
        .collect();
    let (snaps, level_tolerance): (Vec<Snapshot>, Vec<f64>) = built.into_iter().unzip();
    let mut fields = Trajectory::new(snaps, format!("zoom k = {} of {}", peak.k, traj.provenance))?;
    fields.termination = traj.termination.clone();
    Ok(ZoomSnapshot {
        lambda_k: lambda,
        peak: *peak,
        a,
        centre: opts.centre,
        fields,
        level_tolerance,
        peak_value,
    })
}

/// Zooms every record whose window fits, concurrently. Records whose window
/// escapes are returned as errors in place.
pub fn zoom_records(
    traj: &Trajectory,
    peaks: &[PeakRecord],
    a: f64,
    opts: &ZoomOptions,
) -> Vec<Result<ZoomSnapshot>> {
    peaks.par_iter().map(|p| zoom_with(traj, p, a, opts)).collect()
}

/// Outcome of [`verify_zoom`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoomReport {
    pub k: usize,
    pub lambda_k: f64,
    pub a: f64,
    /// Functionals on `Q(0, r)` for `r = a, a/2, a/4`.
    pub ladder: Vec<FunctionalReport>,
    pub ladder_monotone: bool,
    /// `max_r (A + E + C + D)`.
    pub max_aecd: f64,
    /// `|u(y′_k, 0, 0)|` at the source node, before zoom-grid resampling.
    pub normalization_direct: f64,
    /// `|u(y′_k, 0, 0)|` read back from the zoomed grid.
    pub normalization: f64,
    pub normalization_ok: bool,
    pub sup_u: f64,
    pub bound_ok: bool,
    /// `sup |y′| |u|` over the window.
    pub decay_monitor: f64,
    pub tolerance: f64,
}

/// Tolerance on the normalization before resampling error is added.
pub const NORMALIZATION_TOL: f64 = 1e-6;

pub fn verify_zoom(snap: &ZoomSnapshot, mixed_specs: &[MixedNormSpec]) -> Result<ZoomReport> {
    let a = snap.a;
    let radii = [a, a / 2.0, a / 4.0];
    let ladder = radii
        .iter()
        .map(|&r| compute_functionals_with(&snap.fields, &ParabolicCylinder::new(0.0, 0.0, r)?, mixed_specs, false))
        .collect::<Result<Vec<_>>>()?;
    let max_aecd = ladder.iter().map(|f| f.a + f.e + f.c + f.d).fold(0.0, f64::max);

    let zg = snap.grid();
    let last = snap.fields.snapshots.last().expect("zoom has levels");
    let sampler = Sampler::new(zg)?;
    let y = snap.y_k().min(a);
    let c4 = sampler.cubic(y, 0.0);
    let c2 = sampler.linear(y, 0.0);
    let cu = sample_cubic(last, &c4);
    let li = sample_linear(last, &c2);
    let normalization = norm3([cu[0], cu[1], cu[2]]);
    let readback_err = norm3([cu[0] - li[0], cu[1] - li[1], cu[2] - li[2]]);
    let tolerance = snap.interp_tolerance() + readback_err + NORMALIZATION_TOL;

    let mut sup_u: f64 = 0.0;
    let mut decay: f64 = 0.0;
    for u in snap.u_field() {
        let mag = u.magnitude();
        for ((i, _), &m) in mag.indexed_iter() {
            sup_u = sup_u.max(m);
            decay = decay.max(zg.rho(i) * m);
        }
    }
    let normalization_ok = (snap.peak_value - 1.0).abs() <= NORMALIZATION_TOL && (normalization - 1.0).abs() <= tolerance;
    Ok(ZoomReport {
        k: snap.peak.k,
        lambda_k: snap.lambda_k,
        a,
        ladder_monotone: ladder_monotone(&ladder),
        ladder,
        max_aecd,
        normalization_direct: snap.peak_value,
        normalization,
        normalization_ok,
        sup_u,
        bound_ok: sup_u <= 1.0 + tolerance,
        decay_monitor: decay,
        tolerance,
    })
}

/// One functional compared across the zoom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportRow {
    pub r: f64,
    pub name: String,
    /// `F(0, r; u)`
    pub zoomed: f64,
    /// `F(z_k, λ r; v)`
    pub source: f64,
    pub tolerance: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportReport {
    pub k: usize,
    pub rows: Vec<TransportRow>,
    pub passes: bool,
}

fn functional_list(f: &FunctionalReport) -> Vec<(String, f64)> {
    let mut v = vec![
        ("A".to_string(), f.a),
        ("E".to_string(), f.e),
        ("C".to_string(), f.c),
        ("D".to_string(), f.d),
        ("H".to_string(), f.h),
    ];
    v.extend(f.m.iter().map(|m| (format!("M[{}]", m.label), m.value)));
    v
}

/// Checks `F(0, r; u) = F(z_k, λ r; v)` for each radius. The zoom is built on
/// levels aligned with the source snapshots, so only spatial resampling and
/// quadrature differ; the tolerance is the sum of the observed changes under
/// halving the zoom resolution and coarsening the source.
pub fn check_transport(
    traj: &Trajectory,
    peak: &PeakRecord,
    a: f64,
    radii: &[f64],
    mixed_specs: &[MixedNormSpec],
    opts: &ZoomOptions,
) -> Result<TransportReport> {
    if opts.centre != ZoomCentre::AxialShift {
        return Err(Error::InvalidArgument("transport check uses the axial-shift convention".into()));
    }
    let fine_opts = ZoomOptions {
        time: ZoomTime::Aligned(1),
        ..*opts
    };
    let coarse_opts = ZoomOptions {
        n_rho: opts.n_rho / 2,
        n_z: opts.n_z / 2,
        ..fine_opts
    };
    let fine = zoom_with(traj, peak, a, &fine_opts)?;
    let coarse = zoom_with(traj, peak, a, &coarse_opts)?;
    let src_coarse = traj.coarsened()?;
    let lambda = fine.lambda_k;
    let mut rows = Vec::new();
    for &r in radii {
        if !(r > 0.0) || r > a * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!("radius {r} outside (0, a]")));
        }
        let zc = ParabolicCylinder::new(0.0, 0.0, r)?;
        let sc = ParabolicCylinder::new(peak.z_k, peak.t_k, lambda * r)?;
        let fz = functional_list(&compute_functionals_with(&fine.fields, &zc, mixed_specs, false)?);
        let fzc = functional_list(&compute_functionals_with(&coarse.fields, &zc, mixed_specs, false)?);
        let fs = functional_list(&compute_functionals_with(traj, &sc, mixed_specs, false)?);
        let fsc = functional_list(&compute_functionals_with(&src_coarse, &sc, mixed_specs, false)?);
        for m in 0..fz.len() {
            let (zoomed, source) = (fz[m].1, fs[m].1);
            let tolerance =
                (zoomed - fzc[m].1).abs() + (source - fsc[m].1).abs() + 1e-10 * zoomed.abs().max(source.abs()) + 1e-300;
            rows.push(TransportRow {
                r,
                name: fz[m].0.clone(),
                zoomed,
                source,
                tolerance,
                passes: (zoomed - source).abs() <= tolerance,
            });
        }
    }
    let passes = rows.iter().all(|r| r.passes);
    Ok(TransportReport {
        k: peak.k,
        rows,
        passes,
    })
}

/// Discrete Hölder distance between two zooms of equal geometry on `Q(a/2)`:
/// `sup |D| + max_{P≠Q} |D(P) − D(Q)| / d(P, Q)^α` with `D = u_a − u_b` and the
/// parabolic distance `d = |Δy| + |Δs|^{1/2}`.
pub fn holder_distance(a: &ZoomSnapshot, b: &ZoomSnapshot, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("Hölder exponent must lie in (0, 1], got {alpha}")));
    }
    let (ga, gb) = (a.grid(), b.grid());
    let same_times = a.fields.len() == b.fields.len()
        && a.fields
            .times()
            .iter()
            .zip(b.fields.times())
            .all(|(x, y)| (x - y).abs() <= 1e-12 * a.a * a.a);
    if !ga.same_geometry(&gb) || !same_times {
        return Err(Error::GeometryMismatch("zoom windows differ".into()));
    }
    let half = a.a / 2.0;
    let slack = 1e-12 * a.a;
    let mut pts: Vec<([f64; 3], [f64; 3])> = Vec::new();
    for (sa, sb) in a.fields.snapshots.iter().zip(&b.fields.snapshots) {
        let s = sa.t();
        if s < -half * half - slack {
            continue;
        }
        let (u, v) = (&sa.velocity, &sb.velocity);
        for i in 0..ga.nr() {
            let rho = ga.rho(i);
            if rho > half + slack {
                break;
            }
            for j in 0..ga.nz() {
                let z = ga.z(j);
                if z.abs() > half + slack {
                    continue;
                }
                let d = [
                    u.v_rho[[i, j]] - v.v_rho[[i, j]],
                    u.v_phi[[i, j]] - v.v_phi[[i, j]],
                    u.v_z[[i, j]] - v.v_z[[i, j]],
                ];
                pts.push(([rho, z, s], d));
            }
        }
    }
    let sup = pts.iter().map(|(_, d)| norm3(*d)).fold(0.0, f64::max);
    let quotient = (0..pts.len())
        .into_par_iter()
        .map(|m| {
            let (p, dp) = pts[m];
            let mut best: f64 = 0.0;
            for (q, dq) in &pts[m + 1..] {
                let dist = (p[0] - q[0]).hypot(p[1] - q[1]) + (p[2] - q[2]).abs().sqrt();
                if dist > 0.0 {
                    let diff = norm3([dp[0] - dq[0], dp[1] - dq[1], dp[2] - dq[2]]);
                    best = best.max(diff / dist.powf(alpha));
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(sup + quotient)
}
