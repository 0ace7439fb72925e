//! Scale-invariant functionals over parabolic cylinders, Type I monitors, the
//! local energy inequality and the interpolation-inequality audit.
//!
//! For `Q = 𝒞(b e₃, r) × ]t₀ − r², t₀[`:
//!
//! ```text
//! A = max_t (1/r) ∫_𝒞 |v|²          E = (1/r)  ∫∫_Q |∇v|²
//! C = (1/r²) ∫∫_Q |v|³              D = (1/r²) ∫∫_Q |q|^{3/2}
//! H = (1/r³) ∫∫_Q |v|²              M_{s,l} = r^{-κ} ∫ (∫_𝒞 |v|^s)^{l/s} dt
//! ```
//!
//! The essential supremum in `A` is the maximum over snapshots inside the
//! window (plus the linearly interpolated window ends). Time integrals are
//! exact integrals of the piecewise-linear interpolant of per-snapshot values.

use std::fmt::Write as _;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{admissible_as3, exponent_report, to_f64, MixedNormSpec, Q};
use crate::fields::quadrature::{abs_pow, interval_weights, CylinderWeights};
use crate::fields::stencil::{d_rho, d_z, over_rho};
use crate::fields::{AxiField, Grid2D, ParabolicCylinder, Parity, ZEnds};
use crate::solver::Trajectory;

/// Suprema of the Type I quantities over the sampled region.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Monitors {
    /// `sup √(t₀ − t) |v̄|`
    pub sup_sqrt_t: f64,
    /// `sup ρ |v̄|`
    pub sup_xprime: f64,
    /// `sup ρ |v_φ|`
    pub sup_swirl: f64,
}

impl Monitors {
    fn merge(self, o: Monitors) -> Monitors {
        Monitors {
            sup_sqrt_t: self.sup_sqrt_t.max(o.sup_sqrt_t),
            sup_xprime: self.sup_xprime.max(o.sup_xprime),
            sup_swirl: self.sup_swirl.max(o.sup_swirl),
        }
    }
}

/// `M_{s,l}` with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedNormValue {
    /// `"s,l"` in exact rational form.
    pub label: String,
    pub s: f64,
    pub l: f64,
    pub kappa: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub cylinder: ParabolicCylinder,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "M")]
    pub m: Vec<MixedNormValue>,
    pub monitors: Monitors,
    /// Snapshots carrying nonzero time weight.
    pub snapshots_used: usize,
}

impl FunctionalReport {
    pub fn mixed(&self, spec: &MixedNormSpec) -> Option<f64> {
        let label = spec.label();
        self.m.iter().find(|m| m.label == label).map(|m| m.value)
    }

    /// Column names matching [`FunctionalReport::csv_row`].
    pub fn csv_header(&self) -> String {
        let mut h = String::from("b,t0,r,A,E,C,D,H");
        for m in &self.m {
            let _ = write!(h, ",M[{}]", m.label.replace(',', ";"));
        }
        h.push_str(",sup_sqrt_t,sup_xprime,sup_swirl");
        h
    }

    /// One CSV row, every float at 17 significant digits.
    pub fn csv_row(&self) -> String {
        let mut vals = vec![
            self.cylinder.b,
            self.cylinder.t0,
            self.cylinder.r,
            self.a,
            self.e,
            self.c,
            self.d,
            self.h,
        ];
        vals.extend(self.m.iter().map(|m| m.value));
        vals.extend([self.monitors.sup_sqrt_t, self.monitors.sup_xprime, self.monitors.sup_swirl]);
        vals.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",")
    }
}

/// `|∇v|²` in cylindrical coordinates, including the metric term
/// `(v_ρ² + v_φ²)/ρ²`; on the axis `v/ρ` is replaced by its limit `∂_ρ v`.
pub fn grad_sq(v: &AxiField) -> Array2<f64> {
    let g = &v.grid;
    let ends = ZEnds::OneSided;
    let mut out = Array2::zeros(g.shape());
    let add_sq = |out: &mut Array2<f64>, a: &Array2<f64>| out.zip_mut_with(a, |o, x| *o += x * x);
    add_sq(&mut out, &d_rho(&v.v_rho, g, Parity::Odd));
    add_sq(&mut out, &d_rho(&v.v_phi, g, Parity::Odd));
    add_sq(&mut out, &d_rho(&v.v_z, g, Parity::Even));
    add_sq(&mut out, &d_z(&v.v_rho, g, ends));
    add_sq(&mut out, &d_z(&v.v_phi, g, ends));
    add_sq(&mut out, &d_z(&v.v_z, g, ends));
    add_sq(&mut out, &over_rho(&v.v_rho, g));
    add_sq(&mut out, &over_rho(&v.v_phi, g));
    out
}

/// Time weights for `[a, b]` on the snapshot lattice of `traj`.
fn time_weights(traj: &Trajectory, a: f64, b: f64) -> Result<Vec<(usize, f64)>> {
    let (t_first, t_last) = (traj.t_first(), traj.t_last());
    let slack = 1e-9 * traj.dt.max(1e-300);
    if traj.len() < 2 || a < t_first - slack || b > t_last + slack {
        return Err(Error::OutOfDomain(format!(
            "time window [{a}, {b}] not inside the sampled range [{t_first}, {t_last}]"
        )));
    }
    let (a, b) = (a.max(t_first), b.min(t_last));
    Ok(interval_weights(t_first, traj.dt, traj.len(), a, b, None))
}

/// Linear interpolation of per-snapshot values at time `t`.
fn interpolate_in_time(traj: &Trajectory, t: f64, value: impl Fn(usize) -> f64) -> f64 {
    let s = ((t - traj.t_first()) / traj.dt).max(0.0);
    let k = (s.floor() as usize).min(traj.len() - 2);
    let th = (s - k as f64).clamp(0.0, 1.0);
    if th == 0.0 {
        value(k)
    } else if th == 1.0 {
        value(k + 1)
    } else {
        (1.0 - th) * value(k) + th * value(k + 1)
    }
}

#[derive(Debug, Clone, Default)]
struct SliceIntegrals {
    v2: f64,
    v3: f64,
    q32: f64,
    grad: f64,
    vs: Vec<f64>,
    monitors: Monitors,
}

fn slice_integrals(
    traj: &Trajectory,
    k: usize,
    w: &CylinderWeights,
    specs: &[(f64, MixedNormSpec)],
    t0: f64,
) -> SliceIntegrals {
    let snap = &traj.snapshots[k];
    let v = &snap.velocity;
    let q = &snap.pressure.values;
    let g = &v.grid;
    let mag = v.magnitude();
    let gs = grad_sq(v);
    let mut out = SliceIntegrals {
        v2: w.integrate(|i, j| mag[[i, j]] * mag[[i, j]]),
        v3: w.integrate(|i, j| abs_pow(mag[[i, j]], 3.0)),
        q32: w.integrate(|i, j| abs_pow(q[[i, j]], 1.5)),
        grad: w.integrate(|i, j| gs[[i, j]]),
        vs: specs.iter().map(|(s, _)| w.integrate(|i, j| abs_pow(mag[[i, j]], *s))).collect(),
        monitors: Monitors::default(),
    };
    let dt_sqrt = (t0 - snap.t()).max(0.0).sqrt();
    for (i, j) in w.nodes() {
        let vbar = v.v_rho[[i, j]].hypot(v.v_z[[i, j]]);
        let r = g.rho(i);
        out.monitors = out.monitors.merge(Monitors {
            sup_sqrt_t: dt_sqrt * vbar,
            sup_xprime: r * vbar,
            sup_swirl: r * v.v_phi[[i, j]].abs(),
        });
    }
    out
}

/// Evaluates all functionals on one cylinder. With `truncate` the spatial
/// section is clipped to the grid instead of failing.
pub fn compute_functionals_with(
    traj: &Trajectory,
    cyl: &ParabolicCylinder,
    mixed_specs: &[MixedNormSpec],
    truncate: bool,
) -> Result<FunctionalReport> {
    let grid = traj.grid();
    let r = cyl.r;
    let w = CylinderWeights::new(&grid, cyl.section(), truncate)?;
    let tw = time_weights(traj, cyl.t_start(), cyl.t0)?;
    let specs: Vec<(f64, MixedNormSpec)> = mixed_specs.iter().map(|m| (m.s_f64(), m.clone())).collect();

    // Snapshots inside the closed window contribute to the supremum in A.
    let slack = 1e-9 * traj.dt;
    let mut ks: Vec<usize> = tw.iter().map(|&(k, _)| k).collect();
    for (k, s) in traj.snapshots.iter().enumerate() {
        let t = s.t();
        if t >= cyl.t_start() - slack && t <= cyl.t0 + slack && !ks.contains(&k) {
            ks.push(k);
        }
    }
    ks.sort_unstable();
    let slices: Vec<(usize, SliceIntegrals)> = ks
        .par_iter()
        .map(|&k| (k, slice_integrals(traj, k, &w, &specs, cyl.t0)))
        .collect();
    let get = |k: usize| &slices[slices.binary_search_by_key(&k, |(kk, _)| *kk).unwrap()].1;

    let integrate = |f: &dyn Fn(&SliceIntegrals) -> f64| tw.iter().map(|&(k, wt)| wt * f(get(k))).sum::<f64>();
    let mut a_max: f64 = 0.0;
    for (k, s) in &slices {
        let t = traj.snapshots[*k].t();
        if t >= cyl.t_start() - slack && t <= cyl.t0 + slack {
            a_max = a_max.max(s.v2);
        }
    }
    // Interpolated window ends (only differ from nodes when unaligned).
    for te in [cyl.t_start(), cyl.t0] {
        let kk = (((te - traj.t_first()) / traj.dt).floor().max(0.0) as usize).min(traj.len() - 2);
        if slices.binary_search_by_key(&kk, |(x, _)| *x).is_ok()
            && slices.binary_search_by_key(&(kk + 1), |(x, _)| *x).is_ok()
        {
            a_max = a_max.max(interpolate_in_time(traj, te, |k| get(k).v2));
        }
    }

    let r2 = r * r;
    let m = specs
        .iter()
        .enumerate()
        .map(|(idx, (s, spec))| {
            let ratio = spec.l_f64() / s;
            let exact_one = spec.l == spec.s;
            let integral = integrate(&|x: &SliceIntegrals| {
                if exact_one {
                    x.vs[idx]
                } else {
                    x.vs[idx].powf(ratio)
                }
            });
            let kappa = spec.kappa_f64();
            let scale = if spec.kappa.is_integer() {
                r.powi(kappa as i32)
            } else {
                r.powf(kappa)
            };
            MixedNormValue {
                label: spec.label(),
                s: *s,
                l: spec.l_f64(),
                kappa,
                value: integral / scale,
            }
        })
        .collect();
    let mut monitors = Monitors::default();
    for (_, s) in &slices {
        monitors = monitors.merge(s.monitors);
    }
    Ok(FunctionalReport {
        cylinder: *cyl,
        a: a_max / r,
        e: integrate(&|x| x.grad) / r,
        c: integrate(&|x| x.v3) / r2,
        d: integrate(&|x| x.q32) / r2,
        h: integrate(&|x| x.v2) / (r2 * r),
        m,
        monitors,
        snapshots_used: tw.len(),
    })
}

/// [`compute_functionals_with`] without truncation: cylinders must fit the grid.
pub fn compute_functionals(
    traj: &Trajectory,
    cyl: &ParabolicCylinder,
    mixed_specs: &[MixedNormSpec],
) -> Result<FunctionalReport> {
    compute_functionals_with(traj, cyl, mixed_specs, false)
}

/// Reports on nested cylinders sharing `(b, t₀)`, largest radius first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ladder {
    pub reports: Vec<FunctionalReport>,
    /// `r·A, r·E, r²·C, r²·D` nondecreasing in r (nested-region monotonicity).
    pub monotone: bool,
}

pub fn compute_ladder(
    traj: &Trajectory,
    b: f64,
    t0: f64,
    radii: &[f64],
    mixed_specs: &[MixedNormSpec],
    truncate: bool,
) -> Result<Ladder> {
    let mut sorted = radii.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let reports = sorted
        .iter()
        .map(|&r| compute_functionals_with(traj, &ParabolicCylinder::new(b, t0, r)?, mixed_specs, truncate))
        .collect::<Result<Vec<_>>>()?;
    let monotone = ladder_monotone(&reports);
    Ok(Ladder { reports, monotone })
}

/// Checks nested-region monotonicity of the unnormalised integrals.
pub fn ladder_monotone(reports: &[FunctionalReport]) -> bool {
    let key = |f: &FunctionalReport| {
        let r = f.cylinder.r;
        [r * f.a, r * f.e, r * r * f.c, r * r * f.d]
    };
    let mut sorted: Vec<&FunctionalReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.cylinder.r.total_cmp(&b.cylinder.r));
    sorted.windows(2).all(|w| {
        let (lo, hi) = (key(w[0]), key(w[1]));
        lo.iter()
            .zip(hi.iter())
            .all(|(a, b)| *a <= *b * (1.0 + 1e-12) + 1e-300)
    })
}

/// Monitors over the whole trajectory plus the amplitude series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Type1Report {
    pub t0: f64,
    pub r1: f64,
    pub monitors: Monitors,
    pub times: Vec<f64>,
    /// `G(t) = max_{|x| ≤ r1} |v(x, t)|`
    pub g: Vec<f64>,
    /// Running maximum of `G`.
    pub m: Vec<f64>,
    /// Largest ε with `M(t) ≥ ε/√(t₀ − t)` at every snapshot with `t < t₀`.
    pub epsilon: f64,
}

/// `G(t)`: largest node amplitude in the closed ball of radius `r1` about the origin.
pub fn ball_amplitude(v: &AxiField, r1: f64) -> (f64, usize, usize) {
    let g = &v.grid;
    let mut best = (0.0, 0, 0);
    let mag = v.magnitude();
    for i in 0..g.nr() {
        let r = g.rho(i);
        if r > r1 * (1.0 + 1e-12) {
            break;
        }
        for j in 0..g.nz() {
            let z = g.z(j);
            if r * r + z * z <= r1 * r1 * (1.0 + 1e-12) && mag[[i, j]] > best.0 {
                best = (mag[[i, j]], i, j);
            }
        }
    }
    best
}

pub fn type1_monitors(traj: &Trajectory, t0: f64, r1: f64) -> Result<Type1Report> {
    if t0 < traj.t_last() - 1e-12 * traj.t_last().abs().max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "t0 = {t0} precedes the last snapshot at {}",
            traj.t_last()
        )));
    }
    let per: Vec<(Monitors, f64)> = traj
        .snapshots
        .par_iter()
        .map(|s| {
            let v = &s.velocity;
            let g = &v.grid;
            let dt_sqrt = (t0 - s.t()).max(0.0).sqrt();
            let mut m = Monitors::default();
            for i in 0..g.nr() {
                let r = g.rho(i);
                for j in 0..g.nz() {
                    let vbar = v.v_rho[[i, j]].hypot(v.v_z[[i, j]]);
                    m = m.merge(Monitors {
                        sup_sqrt_t: dt_sqrt * vbar,
                        sup_xprime: r * vbar,
                        sup_swirl: r * v.v_phi[[i, j]].abs(),
                    });
                }
            }
            (m, ball_amplitude(v, r1).0)
        })
        .collect();
    let mut monitors = Monitors::default();
    let mut g = Vec::with_capacity(per.len());
    for (m, gv) in &per {
        monitors = monitors.merge(*m);
        g.push(*gv);
    }
    let mut m = Vec::with_capacity(g.len());
    let mut run: f64 = 0.0;
    for &x in &g {
        run = run.max(x);
        m.push(run);
    }
    let times = traj.times();
    let epsilon = times
        .iter()
        .zip(&m)
        .filter(|(t, _)| **t < t0)
        .map(|(t, mv)| mv * (t0 - t).sqrt())
        .fold(f64::INFINITY, f64::min);
    Ok(Type1Report {
        t0,
        r1,
        monitors,
        times,
        g,
        m,
        epsilon: if epsilon.is_finite() { epsilon } else { 0.0 },
    })
}

/// `sup_{Q(r_in)} |f|` next to `‖f‖_{L^{10/3}(Q(r_out))}` for the swirl variable `f = ρ v_φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwirlBound {
    pub sup_inner: f64,
    pub norm_outer: f64,
    /// `sup_inner / norm_outer`; 0 when both vanish.
    pub ratio: f64,
}

pub fn swirl_sup_ratio(traj: &Trajectory, b: f64, t0: f64, r_inner: f64, r_outer: f64) -> Result<SwirlBound> {
    if !(r_inner > 0.0 && r_inner < r_outer) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < r_inner < r_outer, got {r_inner} and {r_outer}"
        )));
    }
    let grid = traj.grid();
    let outer = ParabolicCylinder::new(b, t0, r_outer)?;
    let w = CylinderWeights::new(&grid, outer.section(), false)?;
    let tw = time_weights(traj, outer.t_start(), t0)?;
    let p = 10.0 / 3.0;
    let integral: f64 = tw
        .par_iter()
        .map(|&(k, wt)| {
            let f = traj.snapshots[k].velocity.swirl_variable();
            wt * w.integrate(|i, j| abs_pow(f.values[[i, j]], p))
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    let slack = 1e-9 * traj.dt;
    let t_in = t0 - r_inner * r_inner;
    let mut sup: f64 = 0.0;
    for s in &traj.snapshots {
        if s.t() < t_in - slack || s.t() > t0 + slack {
            continue;
        }
        let f = s.velocity.swirl_variable();
        for i in 0..grid.nr() {
            if grid.rho(i) > r_inner * (1.0 + 1e-12) {
                break;
            }
            for j in 0..grid.nz() {
                if (grid.z(j) - b).abs() <= r_inner * (1.0 + 1e-12) {
                    sup = sup.max(f.values[[i, j]].abs());
                }
            }
        }
    }
    let norm_outer = integral.powf(1.0 / p);
    let ratio = if sup == 0.0 { 0.0 } else { sup / norm_outer };
    Ok(SwirlBound {
        sup_inner: sup,
        norm_outer,
        ratio,
    })
}

/// Cutoff `φ(x, t) = w(x)⁴ τ(t)` with `w = (1 − (ρ² + (z − b)²)/R²)₊` and
/// `τ` the C¹ smoothstep rising from 0 at `t_on` to 1 at `t_on + ramp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub b: f64,
    pub radius: f64,
    pub t_on: f64,
    pub ramp: f64,
}

impl Cutoff {
    fn tau(&self, t: f64) -> (f64, f64) {
        let s = (t - self.t_on) / self.ramp;
        if s <= 0.0 {
            (0.0, 0.0)
        } else if s >= 1.0 {
            (1.0, 0.0)
        } else {
            (s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s) / self.ramp)
        }
    }

    /// `(w⁴, ∂_t φ, Δφ, ∂_ρ φ, ∂_z φ)` at `(ρ, z, t)`; note the first entry omits τ.
    fn eval(&self, r: f64, z: f64, t: f64) -> [f64; 5] {
        let rr2 = self.radius * self.radius;
        let dz = z - self.b;
        let w = 1.0 - (r * r + dz * dz) / rr2;
        if w <= 0.0 {
            return [0.0; 5];
        }
        let (tau, dtau) = self.tau(t);
        let w2 = w * w;
        let w3 = w2 * w;
        let grad_w_sq = 4.0 * (r * r + dz * dz) / (rr2 * rr2);
        let lap = 12.0 * w2 * grad_w_sq + 4.0 * w3 * (-6.0 / rr2);
        let d_r = 4.0 * w3 * (-2.0 * r / rr2);
        let d_z = 4.0 * w3 * (-2.0 * dz / rr2);
        [w2 * w2, w2 * w2 * dtau, lap * tau, d_r * tau, d_z * tau]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyInequalityReport {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`, signed.
    pub slack: f64,
    /// Declared quadrature tolerance: `|slack_h − slack_2h|` plus a rounding floor.
    pub tolerance: f64,
    pub cutoff: Cutoff,
    pub passes: bool,
}

fn energy_terms(traj: &Trajectory, cutoff: &Cutoff, t: f64) -> Result<(f64, f64)> {
    let g: Grid2D = traj.grid();
    let wr = interval_weights(0.0, g.d_rho, g.nr(), 0.0, g.rho_max, None);
    let period = g.z_periodic.then_some(g.nz());
    let wz = interval_weights(g.z_min, g.d_z, g.nz(), g.z_min, g.z_max, period);
    let tw = time_weights(traj, traj.t_first(), t)?;
    // Per snapshot: (∫w⁴|v|², ∫φ|∇v|², ∫ rhs integrand), φ taken at the snapshot's time.
    let per = |k: usize| -> [f64; 3] {
        let snap = &traj.snapshots[k];
        let v = &snap.velocity;
        let q = &snap.pressure.values;
        let ts = snap.t();
        let (tau, _) = cutoff.tau(ts);
        let gs = grad_sq(v);
        let mut acc = [0.0; 3];
        for &(j, bz) in &wz {
            let z = g.z(j);
            for &(i, ar) in &wr {
                let r = g.rho(i);
                let [w4, dphi_t, lap, d_r, d_z] = cutoff.eval(r, z, ts);
                if w4 == 0.0 {
                    continue;
                }
                let wgt = ar * bz * 2.0 * std::f64::consts::PI * r;
                let (vr, vp, vz) = (v.v_rho[[i, j]], v.v_phi[[i, j]], v.v_z[[i, j]]);
                let v2 = vr * vr + vp * vp + vz * vz;
                acc[0] += wgt * w4 * v2;
                acc[1] += wgt * w4 * tau * gs[[i, j]];
                acc[2] += wgt * (v2 * (lap + dphi_t) + (vr * d_r + vz * d_z) * (v2 + 2.0 * q[[i, j]]));
            }
        }
        acc
    };
    let mut ks: Vec<usize> = tw.iter().map(|&(k, _)| k).collect();
    let s = ((t - traj.t_first()) / traj.dt).max(0.0);
    let k_lo = (s.floor() as usize).min(traj.len() - 2);
    for k in [k_lo, k_lo + 1] {
        if !ks.contains(&k) {
            ks.push(k);
        }
    }
    ks.sort_unstable();
    let vals: Vec<[f64; 3]> = ks.par_iter().map(|&k| per(k)).collect();
    let get = |k: usize| vals[ks.binary_search(&k).unwrap()];
    let dissipation: f64 = tw.iter().map(|&(k, w)| w * get(k)[1]).sum();
    let rhs: f64 = tw.iter().map(|&(k, w)| w * get(k)[2]).sum();
    let inst = cutoff.tau(t).0 * interpolate_in_time(traj, t, |k| get(k)[0]);
    Ok((inst + 2.0 * dissipation, rhs))
}

/// Evaluates the local energy inequality
/// `∫φ|v(t)|² + 2∫∫φ|∇v|² ≤ ∫∫ |v|²(Δφ + ∂_tφ) + v·∇φ(|v|² + 2q)`
/// from the first snapshot to `t`. The cutoff must vanish at the first snapshot
/// and its spatial support must stay strictly inside the grid.
pub fn check_energy_inequality(traj: &Trajectory, cutoff: &Cutoff, t: f64) -> Result<EnergyInequalityReport> {
    let g = traj.grid();
    if !(cutoff.radius > 0.0 && cutoff.ramp > 0.0) {
        return Err(Error::InvalidArgument("cutoff radius and ramp must be positive".into()));
    }
    if cutoff.t_on < traj.t_first() {
        return Err(Error::CutoffSupport(format!(
            "cutoff switches on at {} before the first snapshot {}",
            cutoff.t_on,
            traj.t_first()
        )));
    }
    let inside_z = g.z_periodic && 2.0 * cutoff.radius < g.z_length()
        || (cutoff.b - cutoff.radius > g.z_min && cutoff.b + cutoff.radius < g.z_max);
    if !(cutoff.radius < g.rho_max && inside_z) {
        return Err(Error::CutoffSupport(format!(
            "cutoff ball (b = {}, R = {}) is not strictly inside the grid",
            cutoff.b, cutoff.radius
        )));
    }
    let (lhs, rhs) = energy_terms(traj, cutoff, t)?;
    let slack = rhs - lhs;
    let scale = lhs.abs() + rhs.abs();
    let mut tolerance = 1e-10 * scale + 1e-14;
    if let Ok(coarse) = traj.coarsened() {
        if coarse.len() >= 2 && t <= coarse.t_last() + 1e-12 {
            let (l2, r2) = energy_terms(&coarse, cutoff, t)?;
            tolerance += ((r2 - l2) - slack).abs();
        }
    }
    Ok(EnergyInequalityReport {
        t,
        lhs,
        rhs,
        slack,
        tolerance,
        cutoff: *cutoff,
        passes: slack >= -tolerance,
    })
}

/// Empirical constant of the interpolation inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolationAudit {
    pub ratio: f64,
    pub m: f64,
    pub mu: f64,
}

/// `ratio = C / (A^μ M^{1/m} (E + H)^{(m−1)/m})`, 0 when `C = 0`.
pub fn interpolation_audit(report: &FunctionalReport, s: &Q, l: &Q) -> Result<InterpolationAudit> {
    if !admissible_as3(s, l) {
        return Err(Error::Inadmissible {
            s: s.to_string(),
            l: l.to_string(),
            reason: "3/s + 2/l − 3/2 < max{1/2 − 1/s, 1/s − 1/6}".into(),
        });
    }
    let ex = exponent_report(s, l)?;
    let (m, mu) = (to_f64(&ex.m), to_f64(&ex.mu));
    let mv = report
        .mixed(&ex.spec)
        .ok_or_else(|| Error::InvalidArgument(format!("report has no M for ({s}, {l})")))?;
    if report.c == 0.0 {
        return Ok(InterpolationAudit { ratio: 0.0, m, mu });
    }
    let den = report.a.powf(mu) * mv.powf(1.0 / m) * (report.e + report.h).powf((m - 1.0) / m);
    if !(den > 0.0 && den.is_finite()) {
        return Err(Error::Inconsistent(format!(
            "C = {} is positive but the right-hand side is {den}",
            report.c
        )));
    }
    Ok(InterpolationAudit { ratio: report.c / den, m, mu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::q;
    use std::f64::consts::PI;

    fn specs() -> Vec<MixedNormSpec> {
        vec![
            MixedNormSpec::new(q(7, 4), q(10, 1)).unwrap(),
            MixedNormSpec::new(q(3, 1), q(3, 1)).unwrap(),
        ]
    }

    fn grid(n: usize) -> Grid2D {
        Grid2D::new(1.0, -1.0, 1.0, n, 2 * n, false).unwrap()
    }

    #[test]
    fn zero_trajectory_gives_zero() {
        let traj = Trajectory::from_fn(grid(8), 0.0, 1.0, 5, |_, _, _| [0.0; 3], |_, _, _| 0.0).unwrap();
        let rep = compute_functionals(&traj, &ParabolicCylinder::new(0.0, 1.0, 1.0).unwrap(), &specs()).unwrap();
        assert_eq!([rep.a, rep.e, rep.c, rep.d, rep.h], [0.0; 5]);
        assert!(rep.m.iter().all(|m| m.value == 0.0));
        let audit = interpolation_audit(&rep, &q(7, 4), &q(10, 1)).unwrap();
        assert_eq!(audit.ratio, 0.0);
    }

    #[test]
    fn constant_axial_flow() {
        let traj = Trajectory::from_fn(grid(8), 0.0, 1.0, 5, |_, _, _| [0.0, 0.0, 1.0], |_, _, _| 0.0).unwrap();
        let rep = compute_functionals(&traj, &ParabolicCylinder::new(0.0, 1.0, 1.0).unwrap(), &specs()).unwrap();
        let vol = 2.0 * PI;
        for (name, v) in [("A", rep.a), ("C", rep.c), ("H", rep.h)] {
            assert!((v - vol).abs() < 1e-12, "{name} = {v}");
        }
        assert_eq!(rep.e, 0.0);
        assert_eq!(rep.d, 0.0);
        let m33 = rep.mixed(&specs()[1]).unwrap();
        assert_eq!(m33, rep.c);
        let audit = interpolation_audit(&rep, &q(3, 1), &q(3, 1)).unwrap();
        assert_eq!(audit.ratio, 1.0);
        assert_eq!((audit.m, audit.mu), (1.0, 0.0));
    }

    #[test]
    fn out_of_domain_cylinders_fail() {
        let traj = Trajectory::from_fn(grid(8), 0.0, 1.0, 5, |_, _, _| [0.0; 3], |_, _, _| 0.0).unwrap();
        let too_wide = ParabolicCylinder::new(0.0, 1.0, 1.5).unwrap();
        assert!(matches!(compute_functionals(&traj, &too_wide, &[]), Err(Error::OutOfDomain(_))));
        let too_late = ParabolicCylinder::new(0.0, 2.0, 0.5).unwrap();
        assert!(compute_functionals(&traj, &too_late, &[]).is_err());
        assert!(compute_functionals_with(&traj, &too_wide, &[], true).is_err()); // r² > window
    }

    #[test]
    fn gradient_of_rigid_rotation() {
        // v_φ = Ωρ: ∂_ρ v_φ = Ω and v_φ/ρ = Ω, so |∇v|² = 2Ω².
        let g = grid(8);
        let v = AxiField::from_fn(g, 0.0, |r, _| [0.0, 3.0 * r, 0.0]);
        for x in grad_sq(&v).iter() {
            assert!((x - 18.0).abs() < 1e-10);
        }
    }

    #[test]
    fn monitors_on_synthetic_fields() {
        let g = grid(8);
        let t0 = 1.0;
        let traj = Trajectory::from_fn(g, 0.0, 0.8, 5, |_, _, t| [0.0, 0.0, 1.0 / (t0 - t).sqrt()], |_, _, _| 0.0).unwrap();
        let rep = type1_monitors(&traj, t0, 0.5).unwrap();
        assert!((rep.monitors.sup_sqrt_t - 1.0).abs() < 1e-14);
        assert!(rep.m.windows(2).all(|w| w[1] >= w[0]));
        assert!(rep.epsilon > 0.0);

        let traj = Trajectory::from_fn(g, 0.0, 0.8, 5, |r, _, _| [0.0, if r > 0.0 { 1.0 / r } else { 0.0 }, 0.0], |_, _, _| 0.0)
            .unwrap();
        let rep = type1_monitors(&traj, t0, 0.5).unwrap();
        assert!((rep.monitors.sup_swirl - 1.0).abs() < 1e-14);

        let zero = Trajectory::from_fn(g, 0.0, 0.8, 5, |_, _, _| [0.0; 3], |_, _, _| 0.0).unwrap();
        let rep = type1_monitors(&zero, t0, 0.5).unwrap();
        assert_eq!(rep.monitors, Monitors::default());
        assert!(type1_monitors(&zero, 0.5, 0.5).is_err());
    }

    #[test]
    fn energy_inequality_zero_and_rigid() {
        let g = grid(16);
        let cutoff = Cutoff { b: 0.0, radius: 0.8, t_on: 0.0, ramp: 0.25 };
        let zero = Trajectory::from_fn(g, 0.0, 0.5, 9, |_, _, _| [0.0; 3], |_, _, _| 0.0).unwrap();
        let rep = check_energy_inequality(&zero, &cutoff, 0.5).unwrap();
        assert_eq!((rep.lhs, rep.rhs), (0.0, 0.0));
        let om = 2.0;
        let rigid = Trajectory::from_fn(g, 0.0, 0.5, 9, |r, _, _| [0.0, om * r, 0.0], |r, _, _| 0.5 * om * om * r * r).unwrap();
        for t in [0.125, 0.3, 0.5] {
            let rep = check_energy_inequality(&rigid, &cutoff, t).unwrap();
            assert!(rep.passes, "{rep:?}");
            // Equality case: the residual is pure discretisation error.
            assert!(rep.slack.abs() <= rep.tolerance, "{rep:?}");
        }
        let bad = Cutoff { b: 0.0, radius: 1.0, t_on: 0.0, ramp: 0.25 };
        assert!(matches!(check_energy_inequality(&rigid, &bad, 0.5), Err(Error::CutoffSupport(_))));
    }

    #[test]
    fn ladder_is_monotone_for_smooth_field() {
        let g = grid(16);
        let traj = Trajectory::from_fn(
            g,
            0.0,
            1.0,
            9,
            |r, z, t| [r * z, r * (1.0 + t), 1.0 - r * r + z],
            |r, z, _| r * r - z,
        )
        .unwrap();
        let l = compute_ladder(&traj, 0.0, 1.0, &[0.25, 1.0, 0.5], &specs(), false).unwrap();
        assert!(l.monotone);
        assert_eq!(l.reports[0].cylinder.r, 1.0);
        for r in &l.reports {
            assert_eq!(r.mixed(&specs()[1]).unwrap(), r.c);
        }
        let row = l.reports[0].csv_row();
        assert_eq!(row.split(',').count(), l.reports[0].csv_header().split(',').count());
    }

    #[test]
    fn audit_rejects_inadmissible() {
        let traj = Trajectory::from_fn(grid(8), 0.0, 1.0, 5, |_, _, _| [0.0, 0.0, 1.0], |_, _, _| 0.0).unwrap();
        let rep = compute_functionals(&traj, &ParabolicCylinder::new(0.0, 1.0, 1.0).unwrap(), &specs()).unwrap();
        // 3/20 + 2/20 − 3/2 < 1/2 − 1/20.
        assert!(interpolation_audit(&rep, &q(20, 1), &q(20, 1)).is_err());
    }
}
