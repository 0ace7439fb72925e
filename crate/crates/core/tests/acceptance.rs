//! Acceptance criteria for the primary component. Every test writes one
//! `PASS`/`FAIL` line straight to stderr so the verdicts show up in plain
//! `cargo test` output as well as under `--nocapture`.

use std::io::Write;
use std::time::{Duration, Instant};

use axiswirl::exponents::{
    certificate_iteration, exponent_report, feasible_e7, holder_system_solve, q, quarter_parameters,
    scan_feasible_region, MixedNormSpec, Q,
};
use axiswirl::fields::{Grid2D, ParabolicCylinder, ScalarField2D};
use axiswirl::functionals::{check_energy_inequality, compute_functionals, swirl_sup_ratio, Cutoff, FunctionalReport};
use axiswirl::pressure::solve_pressure;
use axiswirl::rescaler::{
    check_transport, detect_peaks, holder_distance, verify_zoom, zoom, ZoomOptions, ZoomSnapshot,
};
use axiswirl::solver::manufactured;
use axiswirl::solver::{
    advective_dt_limit, diffusive_dt_limit, run, solve_streamfunction, Forcing, InitialCondition, Scenario,
    Snapshot, Solver, Trajectory, WallCondition,
};

fn report(id: u32, name: &str, pass: bool, elapsed: Duration, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("[acceptance {id:>2}] {verdict} {name} ({:.2} s) {detail}\n", elapsed.as_secs_f64());
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

fn specs() -> Vec<MixedNormSpec> {
    [(q(7, 4), q(10, 1)), (q(4, 1), q(12, 7)), (q(3, 1), q(3, 1))]
        .into_iter()
        .map(|(s, l)| MixedNormSpec::new(s, l).unwrap())
        .collect()
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[test]
fn criterion_01_exponent_constants() {
    let start = Instant::now();
    let a = exponent_report(&q(7, 4), &q(10, 1)).unwrap();
    let b = exponent_report(&q(4, 1), &q(12, 7)).unwrap();
    let flagged = b.discrepancy.as_deref().is_some_and(|d| d.contains("3/14") && d.contains("3/5"));
    let elapsed = start.elapsed();
    let pass = a.m == q(58, 7)
        && a.mu == q(1, 58)
        && a.discrepancy.is_none()
        && b.m == q(10, 7)
        && b.mu == q(3, 5)
        && flagged
        && elapsed < Duration::from_secs(1);
    report(
        1,
        "exponent constants",
        pass,
        elapsed,
        &format!("m1 = {}, mu1 = {}, m2 = {}, flag = {:?}", a.m, a.mu, b.m, b.discrepancy),
    );
    assert!(pass);
}

#[test]
fn criterion_02_holder_system_oracle() {
    let start = Instant::now();
    let n = 64;
    let (mut solve_mismatch, mut feasible_mismatch, mut compared) = (0, 0, 0);
    for i in 1..=n {
        for j in 1..=n {
            let (x, y) = (q(i, n), q(j, n));
            let (s, l) = (x.recip(), y.recip());
            let closed = exponent_report(&s, &l).ok().map(|r| r.alphas());
            let solved = holder_system_solve(&s, &l, 3);
            if closed != solved {
                solve_mismatch += 1;
            }
            if let Some([a1, a2, a3]) = &solved {
                compared += 1;
                let zero = Q::from_integer(0.into());
                let by_alphas = *a1 >= zero && *a2 >= zero && *a3 > q(1, 3);
                if by_alphas != feasible_e7(&x, &y) {
                    feasible_mismatch += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = solve_mismatch == 0 && feasible_mismatch == 0 && compared > 0 && elapsed < Duration::from_secs(5);
    report(
        2,
        "Hölder-system oracle",
        pass,
        elapsed,
        &format!("{compared} nonsingular points, {solve_mismatch} solve mismatches, {feasible_mismatch} feasibility mismatches"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_feasible_l_below_two() {
    let start = Instant::now();
    let scan = scan_feasible_region(64).unwrap();
    let witness = exponent_report(&q(4, 1), &q(19, 10)).unwrap();
    let pass = scan.has_l_below_two() && witness.feasible_e7;
    report(
        3,
        "feasible point with l < 2",
        pass,
        start.elapsed(),
        &format!("{} feasible of {}, (4, 19/10) feasible = {}", scan.feasible_count(), scan.points.len(), witness.feasible_e7),
    );
    assert!(pass);
}

// Smooth, axis-regular test field with |v| and q bounded away from zero.
fn analytic_velocity(r: f64, z: f64, t: f64) -> [f64; 3] {
    [
        0.5 * r * (1.0 + 0.3 * z.sin()) * (0.5 * t).exp(),
        r * z.cos() * (1.0 + 0.2 * t),
        1.2 + 0.3 * (r * r + z).cos() * t.exp(),
    ]
}

fn analytic_pressure(r: f64, z: f64, t: f64) -> f64 {
    1.5 + 0.4 * (r * r - z + t).sin()
}

fn functional_values(f: &FunctionalReport) -> Vec<(String, f64)> {
    let mut out = vec![
        ("A".to_string(), f.a),
        ("E".to_string(), f.e),
        ("C".to_string(), f.c),
        ("D".to_string(), f.d),
        ("H".to_string(), f.h),
    ];
    out.extend(f.m.iter().map(|m| (format!("M[{}]", m.label), m.value)));
    out
}

#[test]
fn criterion_04_scaling_invariance() {
    let start = Instant::now();
    // Cylinder radii sit on grid nodes at every level for both grids.
    let r = 0.5;
    let specs = specs();
    let mut worst = f64::INFINITY;
    let mut details = Vec::new();
    for lambda in [0.5, 2.0] {
        let mut errors: Vec<Vec<(String, f64)>> = Vec::new();
        for n in [32, 64, 128] {
            let nt = n + 1;
            let gu = Grid2D::new(1.0, -1.0, 1.0, n, n, false).unwrap();
            let u = Trajectory::from_fn(
                gu,
                -r * r,
                0.0,
                nt,
                |y, w, s| analytic_velocity(lambda * y, lambda * w, lambda * lambda * s).map(|c| lambda * c),
                |y, w, s| lambda * lambda * analytic_pressure(lambda * y, lambda * w, lambda * lambda * s),
            )
            .unwrap();
            let e = 0.8 * lambda;
            let gv = Grid2D::new(e, -e, e, n, n, false).unwrap();
            let v = Trajectory::from_fn(gv, -(lambda * r).powi(2), 0.0, nt, analytic_velocity, analytic_pressure).unwrap();
            let fu = compute_functionals(&u, &ParabolicCylinder::new(0.0, 0.0, r).unwrap(), &specs).unwrap();
            let fv = compute_functionals(&v, &ParabolicCylinder::new(0.0, 0.0, lambda * r).unwrap(), &specs).unwrap();
            errors.push(
                functional_values(&fu)
                    .into_iter()
                    .zip(functional_values(&fv))
                    .map(|((name, a), (_, b))| (name, (a - b).abs()))
                    .collect(),
            );
        }
        for k in 0..errors[0].len() {
            let (name, e0) = &errors[0][k];
            let (e1, e2) = (errors[1][k].1, errors[2][k].1);
            let p = order(*e0, e1).min(order(e1, e2));
            worst = worst.min(p);
            details.push(format!("λ={lambda} {name}: {p:.2} ({e0:.2e},{e1:.2e},{e2:.2e})"));
        }
    }
    let elapsed = start.elapsed();
    let pass = worst >= 1.8 && elapsed < Duration::from_secs(120);
    report(
        4,
        "scaling invariance",
        pass,
        elapsed,
        &format!("min order {worst:.3} [{}]", details.join(", ")),
    );
    assert!(pass);
}

#[test]
fn criterion_05_swirl_maximum_principle() {
    let start = Instant::now();
    let grid = Grid2D::new(1.0, -1.0, 1.0, 32, 64, false).unwrap();
    let t_end = 0.6;
    let results: Vec<(f64, f64)> = (0..20u64)
        .map(|seed| {
            let solver = Solver::new(grid, WallCondition::StressFree, Forcing::None, false).unwrap();
            let ic = InitialCondition::Random { seed, amplitude: 1.0, modes: 4 };
            let mut state = solver.initial_state(&ic, 0.0).unwrap();
            let v0 = solver.velocity(&state);
            let limit = diffusive_dt_limit(&grid).min(advective_dt_limit(&grid, 2.0 * v0.max_magnitude()));
            let steps = (t_end / (0.9 * limit)).ceil() as usize;
            let dt = t_end / steps as f64;
            let mut snaps = vec![Snapshot { pressure: solve_pressure(&v0).unwrap(), velocity: v0 }];
            let mut worst_rise = f64::NEG_INFINITY;
            let mut prev = state.f.max_abs();
            for k in 1..=steps {
                state = solver.step(&state, dt).unwrap();
                state.t = k as f64 * dt;
                let now = state.f.max_abs();
                worst_rise = worst_rise.max(now - prev);
                prev = now;
                if k % 20 == 0 || k == steps {
                    let mut v = solver.velocity(&state);
                    v.t = state.t;
                    let mut p = solve_pressure(&v).unwrap();
                    p.t = state.t;
                    snaps.push(Snapshot { velocity: v, pressure: p });
                }
            }
            // Keep a uniform time lattice for the quadrature.
            if steps % 20 != 0 {
                snaps.pop();
            }
            let traj = Trajectory::new(snaps, format!("random seed {seed}")).unwrap();
            let bound = swirl_sup_ratio(&traj, 0.0, traj.t_last(), 0.5, 0.75).unwrap();
            (worst_rise, bound.ratio)
        })
        .collect();
    let elapsed = start.elapsed();
    let worst_rise = results.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let ratios: Vec<f64> = results.iter().map(|r| r.1).collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let pass = worst_rise <= 1e-8 && ratios.iter().all(|r| r.is_finite()) && elapsed < Duration::from_secs(300);
    report(
        5,
        "swirl maximum principle",
        pass,
        elapsed,
        &format!("20 runs, largest per-step rise of max|f| = {worst_rise:.3e}, sup/L^(10/3) ratio ≤ {max_ratio:.4}"),
    );
    assert!(pass);
}

fn energy_check(traj: &Trajectory, samples: usize) -> (bool, f64) {
    let t_on = traj.t_first();
    let cutoff = Cutoff { b: 0.0, radius: 0.5, t_on, ramp: (traj.t_last() - t_on) / 4.0 };
    let n = traj.len();
    let mut worst = f64::INFINITY;
    let mut ok = true;
    for m in 1..=samples {
        let k = ((m * (n - 1)) as f64 / samples as f64).round() as usize;
        let rep = check_energy_inequality(traj, &cutoff, traj.snapshots[k].t()).unwrap();
        ok &= rep.slack >= -rep.tolerance;
        worst = worst.min(rep.slack + rep.tolerance);
    }
    (ok, worst)
}

#[test]
fn criterion_06_local_energy_inequality() {
    let start = Instant::now();
    let grid = Grid2D::new(1.0, -1.0, 1.0, 32, 64, false).unwrap();
    let dt = 0.9 * diffusive_dt_limit(&grid);
    let mut vortex = Scenario::new(
        grid,
        InitialCondition::SwirlVortex { amplitude: 1.0, core: 0.3, z_center: 0.0, width: 0.3, meridional: 0.5 },
        dt,
        0.3,
    );
    vortex.snapshot_every = 10;
    let mut rigid = Scenario::new(grid, InitialCondition::RigidRotation { omega: 2.0 }, dt, 0.3);
    rigid.wall = WallCondition::RotatingWall { omega: 2.0 };
    rigid.snapshot_every = 10;
    let (ok_v, margin_v) = energy_check(&run(&vortex).unwrap(), 8);
    let (ok_r, margin_r) = energy_check(&run(&rigid).unwrap(), 8);
    let elapsed = start.elapsed();
    let pass = ok_v && ok_r && elapsed < Duration::from_secs(120);
    report(
        6,
        "local energy inequality",
        pass,
        elapsed,
        &format!("min slack + tolerance: vortex {margin_v:.3e}, rigid rotation {margin_r:.3e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_07_zoom_invariants() {
    let start = Instant::now();
    let grid = Grid2D::new(1.0, -1.0, 1.0, 32, 64, false).unwrap();
    let mut sc = Scenario::new(
        grid,
        InitialCondition::SwirlVortex { amplitude: 1.0, core: 0.3, z_center: 0.0, width: 0.3, meridional: 0.0 },
        0.9 * diffusive_dt_limit(&grid),
        0.5,
    );
    sc.forcing = Forcing::RampedSwirl { rate: 25.0 };
    sc.snapshot_every = 4;
    let traj = run(&sc).unwrap();
    let peaks = detect_peaks(&traj, 0.75).unwrap();
    let specs = vec![
        MixedNormSpec::new(q(7, 4), q(10, 1)).unwrap(),
        MixedNormSpec::new(q(3, 1), q(3, 1)).unwrap(),
    ];
    let (mut zoomed, mut failures) = (0, Vec::new());
    for p in &peaks {
        // The axial shift needs the peak inside the window.
        let a = 1.05 * p.rho_k * p.m_k;
        let Ok(z) = zoom(&traj, p, a) else { continue };
        zoomed += 1;
        let rep = verify_zoom(&z, &specs).unwrap();
        if !rep.normalization_ok || !rep.bound_ok {
            failures.push(format!("k={} normalization {} sup {}", p.k, rep.normalization, rep.sup_u));
        }
        let tr = check_transport(&traj, p, a, &[a, a / 2.0, a / 4.0], &specs, &ZoomOptions::default()).unwrap();
        for row in tr.rows.iter().filter(|r| !r.passes) {
            failures.push(format!("k={} r={:.3} {}: {:.6e} vs {:.6e}", p.k, row.r, row.name, row.zoomed, row.source));
        }
    }
    let elapsed = start.elapsed();
    let pass = zoomed >= 5 && failures.is_empty() && elapsed < Duration::from_secs(300);
    report(
        7,
        "zoom invariants",
        pass,
        elapsed,
        &format!("{} records, {zoomed} zoomed, failures: [{}]", peaks.len(), failures.join("; ")),
    );
    assert!(pass);
}

/// Self-similar profile `v = U(x/√−t)/√−t` plus a smooth perturbation that
/// fades under zooming, and a Gaussian pressure.
pub fn self_similar_trajectory() -> Trajectory {
    let g = Grid2D::new(1.0, -1.0, 1.0, 48, 96, false).unwrap();
    Trajectory::from_fn(
        g,
        -1.0,
        -0.04,
        481,
        |r, z, t| {
            let s = (-t).sqrt();
            let (xr, xz) = (r / s, z / s);
            let e = (-(xr * xr + xz * xz)).exp();
            [0.0, 0.5 * xr * e / s + 0.3 * r, e / s + 0.3 * z * z]
        },
        |r, z, t| (-(r * r + z * z) / (-t)).exp() / (-t),
    )
    .unwrap()
}

#[test]
fn criterion_08_self_similar_fixed_point() {
    let start = Instant::now();
    let traj = self_similar_trajectory();
    let peaks = detect_peaks(&traj, 0.5).unwrap();
    let zooms: Vec<ZoomSnapshot> = peaks.iter().filter_map(|p| zoom(&traj, p, 1.0).ok()).collect();
    let distances: Vec<f64> = zooms.windows(2).map(|w| holder_distance(&w[0], &w[1], 0.25).unwrap()).collect();
    let decreasing = distances.windows(2).all(|w| w[1] < w[0]);
    let pass = zooms.len() >= 3 && decreasing;
    let shown: Vec<String> = distances.iter().map(|d| format!("{d:.3e}")).collect();
    report(
        8,
        "self-similar fixed point",
        pass,
        start.elapsed(),
        &format!("{} zooms, distances [{}]", zooms.len(), shown.join(", ")),
    );
    assert!(pass);
}

#[test]
fn criterion_09_certificate_recursion() {
    let start = Instant::now();
    let mut worst_contraction: f64 = 0.0;
    let mut worst_bound_err: f64 = 0.0;
    let mut quarters = true;
    for c in [0.1, 1.0, 3.0, 50.0] {
        for margin in [0.1, 0.5, 0.9, 0.999] {
            let (theta, eps) = quarter_parameters(c, margin).unwrap();
            quarters &= c * theta < 0.25 && c * eps / (theta * theta) < 0.25;
            for (e0, additive) in [(0.0, 1.0), (10.0, 0.3), (1e3, 2.5)] {
                let tr = certificate_iteration(e0, (c, theta, eps), additive, 200).unwrap();
                worst_contraction = worst_contraction.max(tr.contraction);
                let expect = additive / (1.0 - tr.contraction);
                let bound = tr.bound.unwrap_or(f64::NAN);
                worst_bound_err = worst_bound_err.max((bound - expect).abs() / expect);
                // The tail must settle at the bound.
                let last = *tr.sequence.last().unwrap();
                worst_bound_err = worst_bound_err.max(((last - expect) / expect).abs());
            }
        }
    }
    let pass = quarters && worst_contraction <= 0.5 && worst_bound_err <= 1e-12;
    report(
        9,
        "certificate recursion",
        pass,
        start.elapsed(),
        &format!("max contraction {worst_contraction}, max relative bound error {worst_bound_err:.2e}"),
    );
    assert!(pass);
}

fn manufactured_swirl_error(n: usize, t_end: f64) -> f64 {
    let g = Grid2D::new(1.0, 0.0, 2.0 * std::f64::consts::PI, n, 2 * n, true).unwrap();
    let steps = (t_end / (0.9 * diffusive_dt_limit(&g))).ceil();
    let mut sc = Scenario::new(g, InitialCondition::Manufactured, t_end / steps, t_end);
    sc.forcing = Forcing::Manufactured;
    sc.snapshot_every = steps as usize;
    let traj = run(&sc).unwrap();
    let last = traj.snapshots.last().unwrap();
    let f = last.velocity.swirl_variable();
    let mut err: f64 = 0.0;
    for i in 0..g.nr() {
        for j in 0..g.nz() {
            err = err.max((f.values[[i, j]] - manufactured::swirl(g.rho(i), g.z(j), last.t())).abs());
        }
    }
    err
}

fn manufactured_poisson_error(n: usize) -> f64 {
    let g = Grid2D::new(1.0, 0.0, 2.0 * std::f64::consts::PI, n, 2 * n, true).unwrap();
    let omega = ScalarField2D::from_fn(g, 0.0, |r, z| manufactured::vorticity(r, z, 0.0));
    let psi = solve_streamfunction(&omega).unwrap();
    let mut err: f64 = 0.0;
    for i in 0..g.nr() {
        for j in 0..g.nz() {
            err = err.max((psi.values[[i, j]] - manufactured::streamfunction(g.rho(i), g.z(j), 0.0)).abs());
        }
    }
    err
}

#[test]
fn criterion_10_manufactured_convergence() {
    let start = Instant::now();
    let levels = [16, 32, 64];
    let swirl: Vec<f64> = levels.iter().map(|&n| manufactured_swirl_error(n, 0.1)).collect();
    let poisson: Vec<f64> = levels.iter().map(|&n| manufactured_poisson_error(n)).collect();
    let orders = |e: &[f64]| [order(e[0], e[1]), order(e[1], e[2])];
    let (os, op) = (orders(&swirl), orders(&poisson));
    let in_band = |o: &[f64; 2]| o.iter().all(|p| (1.8..=2.2).contains(p));
    let elapsed = start.elapsed();
    let pass = in_band(&os) && in_band(&op) && elapsed < Duration::from_secs(300);
    report(
        10,
        "manufactured-solution convergence",
        pass,
        elapsed,
        &format!(
            "swirl errors {} orders [{:.3}, {:.3}]; Poisson errors {} orders [{:.3}, {:.3}]",
            sci(&swirl),
            os[0],
            os[1],
            sci(&poisson),
            op[0],
            op[1]
        ),
    );
    assert!(pass);
}
