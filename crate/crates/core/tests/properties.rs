use aggdiff_core::diagnostics::{energy, second_moment_rate};
use aggdiff_core::particles::{run_ensemble, ParticleConfig};
use aggdiff_core::toy::integrate_toy;
use aggdiff_core::{
    fv, FvConfig, FvScheme, FvState, Grid, GridDensity, InitialDatum, InteractionKernel, ParticleEnsemble,
    PressureScaling, Rk23Options, ToyProblem,
};
use proptest::prelude::*;

fn tight() -> Rk23Options {
    Rk23Options {
        tol_abs: 1e-12,
        tol_rel: 1e-12,
        ..Rk23Options::default()
    }
}

#[test]
fn energy_decay_matches_dissipation() {
    let g = InteractionKernel::gaussian();
    let grid = Grid::new(-2.0, 2.0, 0.01).unwrap();
    let rho0 = InitialDatum::parabola(9.0 / 8.0, 9.0 / 4.0).build(&grid).unwrap();
    let mut cfg = FvConfig::new(0.5, 0.2);
    cfg.diagnostics_dt = Some(0.005);
    let run = fv::run(&rho0, &g, &cfg).unwrap();
    let rows = &run.diagnostics;
    let mut checked = 0;
    for w in rows.windows(3) {
        let rate = -(w[2].energy - w[0].energy) / (w[2].t - w[0].t);
        if w[1].dissipation > 1e-6 {
            assert!(
                (rate - w[1].dissipation).abs() <= 0.1 * w[1].dissipation,
                "t = {}: -dE/dt = {rate}, I = {}",
                w[1].t,
                w[1].dissipation
            );
            checked += 1;
        }
    }
    assert!(checked > 30);
}

#[test]
fn second_moment_rate_matches_initial_slope() {
    let g = InteractionKernel::gaussian();
    let grid = Grid::new(-2.0, 2.0, 0.01).unwrap();
    for (eps, a, b) in [(0.5, 9.0 / 8.0, 9.0 / 4.0), (2.0, 21.0 / 8.0, 49.0 / 4.0)] {
        let rho0 = InitialDatum::parabola(a, b).build(&grid).unwrap();
        let scheme = FvScheme::new(&g, eps, grid).unwrap();
        let mut state = FvState {
            time: 0.0,
            density: rho0.clone(),
        };
        for _ in 0..10 {
            let dt = scheme.stable_dt(state.density.values(), 0.4);
            state = scheme.ssp_rk3_step(&state, dt, 0.4).unwrap();
        }
        let slope = (state.density.moment(2) - rho0.moment(2)) / state.time;
        let rate = second_moment_rate(&rho0, &g, eps);
        assert!((slope - rate).abs() <= 0.05 * rate.abs(), "eps {eps}: slope {slope}, rate {rate}");
    }
}

#[test]
fn two_particles_follow_the_reduced_model() {
    let g = InteractionKernel::gaussian();
    for eps in [0.05, 0.1, 0.3] {
        let p = ToyProblem::new(eps, &g).unwrap();
        let outputs: Vec<f64> = (1..20).map(|k| k as f64).collect();
        for x0 in [0.2, 0.9, 1.6] {
            let (traj, _) = integrate_toy(&p, x0, 20.0, &outputs, &tight()).unwrap();
            let mut cfg = ParticleConfig::new(eps, 20.0);
            cfg.scaling = PressureScaling::Displayed;
            cfg.tolerances = tight();
            cfg.snapshot_times = outputs.clone();
            let start = ParticleEnsemble::new(vec![-x0, x0], 0.0).unwrap();
            let run = run_ensemble(&start, &g, &cfg).unwrap();
            assert_eq!(run.snapshots.len(), traj.positions.len());
            for (e, x) in run.snapshots.iter().zip(&traj.positions) {
                let q = e.positions();
                assert!((q[1] - x).abs() < 1e-8 && (q[0] + x).abs() < 1e-8, "eps {eps}, x0 {x0}");
            }
        }
    }
}

fn random_density(values: Vec<f64>, offset: usize) -> GridDensity {
    let grid = Grid::new(-2.0, 2.0, 0.05).unwrap();
    let mut v = vec![0.0; grid.len()];
    v[offset..offset + values.len()].copy_from_slice(&values);
    let rho = GridDensity::new(grid, v).unwrap();
    let m = rho.mass();
    rho.scaled(1.0 / m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fv_runs_keep_mass_positivity_and_energy_decay(
        values in proptest::collection::vec(0.0f64..2.0, 20),
        offset in 25usize..35,
        eps in 0.05f64..2.0,
    ) {
        prop_assume!(values.iter().sum::<f64>() > 0.5);
        let rho0 = random_density(values, offset);
        let g = InteractionKernel::gaussian();
        let mut cfg = FvConfig::new(eps, 0.5);
        cfg.diagnostics_dt = Some(0.05);
        cfg.snapshot_times = (0..=10).map(|k| 0.05 * k as f64).collect();
        let run = fv::run(&rho0, &g, &cfg).unwrap();
        for s in &run.snapshots {
            prop_assert!(s.density.values().iter().all(|v| *v >= 0.0));
        }
        for w in run.diagnostics.windows(2) {
            prop_assert!((w[1].mass - 1.0).abs() <= 1e-10);
            prop_assert!(w[1].energy <= w[0].energy + 1e-8);
            prop_assert!(w[1].dissipation >= 0.0);
        }
        let e = energy(&run.final_state.density, &g, eps);
        prop_assert!((e - run.diagnostics.last().unwrap().energy).abs() < 1e-12);
    }

    #[test]
    fn particles_stay_ordered_and_centred(
        gaps in proptest::collection::vec(0.02f64..0.3, 5..30),
        eps in 0.05f64..1.5,
    ) {
        let mut x = vec![0.0];
        for g in &gaps {
            x.push(x[x.len() - 1] + g);
        }
        let start = ParticleEnsemble::new(x, 0.0).unwrap();
        let centre = start.center_of_mass();
        let mut cfg = ParticleConfig::new(eps, 0.5);
        cfg.snapshot_times = vec![0.1, 0.2, 0.3, 0.4];
        let run = run_ensemble(&start, &InteractionKernel::gaussian(), &cfg).unwrap();
        for e in &run.snapshots {
            prop_assert!(e.min_gap() > 0.0);
        }
        // Pair forces are odd and the pressure terms telescope.
        prop_assert!((run.final_ensemble().center_of_mass() - centre).abs() < 1e-8);
    }
}
