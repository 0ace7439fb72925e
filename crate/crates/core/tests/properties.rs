use axiswirl::exponents::{certificate_iteration, quarter_parameters, q, MixedNormSpec};
use axiswirl::fields::{AxiField, Grid2D};
use axiswirl::functionals::compute_ladder;
use axiswirl::pressure::solve_pressure;
use axiswirl::rescaler::detect_peaks;
use axiswirl::solver::{
    diffusive_dt_limit, kinetic_energy, run, Forcing, InitialCondition, Scenario, Solver, Trajectory, WallCondition,
};
use proptest::prelude::*;

fn bounded_grid() -> Grid2D {
    Grid2D::new(1.0, -1.0, 1.0, 16, 32, false).unwrap()
}

fn random_run(seed: u64, amplitude: f64) -> Trajectory {
    let g = bounded_grid();
    let mut sc = Scenario::new(
        g,
        InitialCondition::Random { seed, amplitude, modes: 4 },
        0.9 * diffusive_dt_limit(&g),
        0.3,
    );
    sc.snapshot_every = 8;
    run(&sc).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn meridional_flow_never_creates_swirl(meridional in 0.1f64..2.0, width in 0.15f64..0.5) {
        let g = bounded_grid();
        let solver = Solver::new(g, WallCondition::StressFree, Forcing::None, false).unwrap();
        let ic = InitialCondition::SwirlVortex { amplitude: 0.0, core: 0.3, z_center: 0.0, width, meridional };
        let mut s = solver.initial_state(&ic, 0.0).unwrap();
        prop_assert!(s.omega_phi.max_abs() > 0.0);
        for _ in 0..100 {
            s = solver.step(&s, 0.9 * diffusive_dt_limit(&g)).unwrap();
            prop_assert!(s.f.values.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn unforced_swirl_obeys_maximum_principle_and_energy_decays(seed in 0u64..10_000, amplitude in 0.1f64..2.0) {
        let g = bounded_grid();
        let solver = Solver::new(g, WallCondition::StressFree, Forcing::None, false).unwrap();
        let mut s = solver.initial_state(&InitialCondition::Random { seed, amplitude, modes: 4 }, 0.0).unwrap();
        let dt = 0.9 * diffusive_dt_limit(&g);
        let mut f_max = s.f.max_abs();
        let mut energy = kinetic_energy(&solver.velocity(&s));
        for _ in 0..150 {
            s = solver.step(&s, dt).unwrap();
            let now = s.f.max_abs();
            prop_assert!(now <= f_max + 1e-8, "max |f| rose from {f_max} to {now}");
            f_max = now;
            let e = kinetic_energy(&solver.velocity(&s));
            prop_assert!(e <= energy * (1.0 + 1e-9) + 1e-14, "energy rose from {energy} to {e}");
            energy = e;
        }
    }

    #[test]
    fn ladder_reports_are_consistent(seed in 0u64..10_000, amplitude in 0.1f64..1.5) {
        let traj = random_run(seed, amplitude);
        let specs = vec![
            MixedNormSpec::new(q(3, 1), q(3, 1)).unwrap(),
            MixedNormSpec::new(q(7, 4), q(10, 1)).unwrap(),
        ];
        let ladder = compute_ladder(&traj, 0.0, traj.t_last(), &[0.5, 0.25, 0.125], &specs, false).unwrap();
        prop_assert!(ladder.monotone);
        let first = &traj.snapshots[0].velocity;
        let k = first.swirl_variable().max_abs();
        for r in &ladder.reports {
            let m33 = r.mixed(&specs[0]).unwrap();
            prop_assert!((m33 - r.c).abs() <= 1e-12 * r.c.abs().max(1e-300), "M33 {m33} vs C {}", r.c);
            prop_assert!(r.monitors.sup_swirl <= k + 1e-8, "sup ρ|v_φ| {} exceeds initial {k}", r.monitors.sup_swirl);
        }
    }

    #[test]
    fn pressure_ignores_a_uniform_axial_drift(seed in 0u64..10_000, drift in 0.25f64..2.0) {
        let defect = |n: usize| {
            let g = Grid2D::new(1.0, 0.0, 2.0 * std::f64::consts::PI, n, 2 * n, true).unwrap();
            let solver = Solver::new(g, WallCondition::StressFree, Forcing::None, false).unwrap();
            let s = solver.initial_state(&InitialCondition::Random { seed, amplitude: 1.0, modes: 3 }, 0.0).unwrap();
            let v = solver.velocity(&s);
            let shifted = AxiField { v_z: &v.v_z + drift, ..v.clone() };
            let (p0, p1) = (solve_pressure(&v).unwrap(), solve_pressure(&shifted).unwrap());
            (&p0.values - &p1.values).iter().fold(0.0f64, |m, x| m.max(x.abs()))
        };
        let (coarse, fine) = (defect(16), defect(32));
        prop_assert!(fine <= coarse / 3.2 + 1e-13, "defect {coarse:e} -> {fine:e} is not second order");
    }
}

proptest! {
    #[test]
    fn quarter_conditions_give_half_contraction(
        c in 1e-3f64..1e3,
        margin in 1e-3f64..0.999,
        e0 in 0.0f64..1e6,
        additive in 0.0f64..1e3,
    ) {
        let (theta, eps) = quarter_parameters(c, margin).unwrap();
        prop_assert!(c * theta < 0.25 && c * eps / (theta * theta) < 0.25);
        let tr = certificate_iteration(e0, (c, theta, eps), additive, 64).unwrap();
        prop_assert!(tr.bounded && tr.contraction <= 0.5);
        prop_assert!(tr.sequence.iter().all(|&x| x >= 0.0));
        let bound = tr.bound.unwrap();
        prop_assert!((bound - additive / (1.0 - tr.contraction)).abs() <= 1e-12 * bound.max(1.0));
    }

    #[test]
    fn records_strictly_increase(rate in 0.5f64..4.0, phase in 0.0f64..1.0) {
        let g = Grid2D::new(1.0, -1.0, 1.0, 8, 16, false).unwrap();
        let traj = Trajectory::from_fn(
            g,
            0.0,
            1.0,
            41,
            |r, z, t| {
                let amp = (rate * t).exp() * (1.0 + 0.2 * (10.0 * t + phase).sin());
                [0.0, amp * r * (-(r * r + z * z)).exp(), 0.2]
            },
            |_, _, _| 0.0,
        )
        .unwrap();
        let peaks = detect_peaks(&traj, 0.5).unwrap();
        for w in peaks.windows(2) {
            prop_assert!(w[1].k == w[0].k + 1);
            prop_assert!(w[1].t_k > w[0].t_k);
            prop_assert!(w[1].m_k >= 1.1 * w[0].m_k);
        }
    }
}
