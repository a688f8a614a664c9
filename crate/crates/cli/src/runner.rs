//! Runs one experiment and writes its artifacts.

use std::fs::{self, File};
use std::path::Path;

use aggdiff_core::diagnostics::{compute_steady_state, stability_hypotheses_check, w2_decay_fit};
use aggdiff_core::io::{self, format_real};
use aggdiff_core::particles::{self, reconstruct_density};
use aggdiff_core::{
    fv, wasserstein, DiagnosticsRow, FvConfig, GridDensity, InteractionKernel, SteadyState, WassersteinOrder,
};
use anyhow::{bail, Context};

use crate::config::{validate_config, ExperimentConfig, ReferenceChoice};

/// Final numbers of one solver's run.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverSummary {
    pub solver: &'static str,
    pub final_linf: f64,
    pub final_m2: f64,
    pub final_w2_to_ref: Option<f64>,
    pub decay_rate: Option<f64>,
    pub decay_r_squared: Option<f64>,
    pub hypotheses: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct RunOutcome {
    pub fv: Option<Vec<DiagnosticsRow>>,
    pub particles: Option<Vec<DiagnosticsRow>>,
    /// `(t, W2(particles, fv))` when both solvers ran.
    pub cross_w2: Vec<(f64, f64)>,
    pub summaries: Vec<SolverSummary>,
}

impl RunOutcome {
    /// Diagnostics of the finite-volume run, or of the particle run if that is all there is.
    pub fn primary(&self) -> Option<&[DiagnosticsRow]> {
        self.fv.as_deref().or(self.particles.as_deref())
    }
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * b.abs().max(1.0)
}

/// `0`, every multiple of `diagnostics_dt` and `t_end`.
fn diagnostics_times(cfg: &ExperimentConfig) -> Vec<f64> {
    let mut times = vec![0.0];
    if let Some(d) = cfg.diagnostics_dt {
        let count = (cfg.t_end / d).floor() as usize;
        times.extend((1..=count).map(|k| k as f64 * d).filter(|&t| t < cfg.t_end * (1.0 - 1e-12)));
    }
    times.push(cfg.t_end);
    times
}

fn merged(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|x, y| same_time(*x, *y));
    all
}

pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<RunOutcome> {
    let violations = validate_config(cfg);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
        bail!("invalid config:\n  {}", list.join("\n  "));
    }
    let kernel = cfg.kernel.build()?;
    let grid = cfg.grid()?;
    let rho0 = cfg.initial.datum().build(&grid)?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let steady = match cfg.reference {
        ReferenceChoice::None => None,
        ReferenceChoice::ComputedSteadyState => {
            let s = compute_steady_state(&kernel, cfg.epsilon, rho0.mass(), rho0.center_of_mass()?, &grid)?;
            write_steady(&out.join("steady"), cfg.epsilon, &s)?;
            Some(s)
        }
    };
    let reference = steady.as_ref().filter(|s| !s.trivial).map(|s| &s.density);
    let hypotheses = match steady.as_ref().filter(|s| !s.trivial) {
        Some(s) => stability_hypotheses_check(&rho0, s, &kernel).ok().map(|r| r.summary()),
        None => None,
    };

    let diag_times = diagnostics_times(cfg);
    let mut outcome = RunOutcome::default();
    let mut fv_states: Vec<(f64, GridDensity)> = Vec::new();

    if cfg.solver.runs_fv() {
        let dir = out.join("fv");
        fs::create_dir_all(&dir)?;
        let mut fc = FvConfig::new(cfg.epsilon, cfg.t_end);
        fc.cfl = cfg.cfl;
        fc.diagnostics_dt = cfg.diagnostics_dt;
        fc.reference = reference.cloned();
        fc.quantile_nodes = cfg.quantile_nodes;
        fc.snapshot_times = if cfg.solver.runs_particles() {
            merged(&cfg.snapshot_times, &diag_times)
        } else {
            cfg.snapshot_times.clone()
        };
        let run = fv::run(&rho0, &kernel, &fc).context("finite-volume run")?;
        for s in &run.snapshots {
            if cfg.snapshot_times.iter().any(|&t| same_time(t, s.time)) {
                io::write_density(&dir.join(io::snapshot_name(s.time)), &s.density)?;
            }
        }
        io::write_density(&dir.join("final.csv"), &run.final_state.density)?;
        io::write_diagnostics(&dir.join("diagnostics.csv"), &run.diagnostics)?;
        outcome.summaries.push(summarize("fv", &run.diagnostics, &hypotheses));
        fv_states = run.snapshots.into_iter().map(|s| (s.time, s.density)).collect();
        outcome.fv = Some(run.diagnostics);
    }

    if cfg.solver.runs_particles() {
        let dir = out.join("particles");
        fs::create_dir_all(&dir)?;
        let mut pc = cfg.particle_config();
        pc.snapshot_times = merged(&cfg.snapshot_times, &diag_times)
            .into_iter()
            .filter(|&t| t > 0.0 && !same_time(t, cfg.t_end))
            .collect();
        let run = particles::run_particles(&rho0, cfg.n, &kernel, &pc).context("particle run")?;
        let mut rows = Vec::new();
        let mut kept = Vec::new();
        for e in &run.snapshots {
            let t = e.time();
            let density = reconstruct_density(e);
            let on_grid = density.on_grid(&grid)?;
            if cfg.snapshot_times.iter().any(|&s| same_time(s, t)) {
                io::write_density(&dir.join(io::snapshot_name(t)), &on_grid)?;
                kept.push(e.clone());
            }
            if diag_times.iter().any(|&s| same_time(s, t)) {
                rows.push(particle_row(t, e, &on_grid, &kernel, cfg, reference)?);
            }
            if let Some((_, f)) = fv_states.iter().find(|(s, _)| same_time(*s, t)) {
                if diag_times.iter().any(|&s| same_time(s, t)) {
                    let w = wasserstein(
                        &density.cumulative(),
                        &f.cumulative(),
                        WassersteinOrder::Two,
                        cfg.quantile_nodes,
                    )?;
                    outcome.cross_w2.push((t, w));
                }
            }
        }
        kept.push(run.final_ensemble().clone());
        kept.dedup_by(|a, b| same_time(a.time(), b.time()));
        io::write_trajectory(&dir.join("trajectory.csv"), &kept)?;
        io::write_density(&dir.join("final.csv"), &reconstruct_density(run.final_ensemble()).on_grid(&grid)?)?;
        io::write_diagnostics(&dir.join("diagnostics.csv"), &rows)?;
        outcome.summaries.push(summarize("particles", &rows, &hypotheses));
        outcome.particles = Some(rows);
    }

    if !outcome.cross_w2.is_empty() {
        io::write_table(
            File::create(out.join("cross_w2.csv"))?,
            &["t", "w2_particles_fv"],
            outcome.cross_w2.iter().map(|&(t, w)| vec![Some(t), Some(w)]),
        )?;
    }
    write_summary(&out.join("summary.csv"), &outcome.summaries)?;
    Ok(outcome)
}

/// Grid diagnostics of the reconstruction, except that `m2` and `w2_to_ref`
/// are taken from the particles themselves.
fn particle_row(
    t: f64,
    ensemble: &aggdiff_core::ParticleEnsemble,
    on_grid: &GridDensity,
    kernel: &InteractionKernel,
    cfg: &ExperimentConfig,
    reference: Option<&GridDensity>,
) -> anyhow::Result<DiagnosticsRow> {
    let mut row = DiagnosticsRow::evaluate(t, on_grid, kernel, cfg.epsilon, None, cfg.quantile_nodes)?;
    row.m2 = ensemble.second_moment();
    if let Some(r) = reference {
        let cdf = reconstruct_density(ensemble).cumulative();
        row.w2_to_ref = Some(wasserstein(&cdf, &r.cumulative(), WassersteinOrder::Two, cfg.quantile_nodes)?);
    }
    Ok(row)
}

fn summarize(solver: &'static str, rows: &[DiagnosticsRow], hypotheses: &Option<String>) -> SolverSummary {
    let last = rows.last().expect("every run has a final row");
    let series: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.w2_to_ref.map(|w| (r.t, w))).collect();
    let fit = if series.is_empty() { None } else { w2_decay_fit(&series).ok() };
    SolverSummary {
        solver,
        final_linf: last.linf,
        final_m2: last.m2,
        final_w2_to_ref: last.w2_to_ref,
        decay_rate: fit.map(|f| f.rate),
        decay_r_squared: fit.map(|f| f.r_squared),
        hypotheses: hypotheses.clone(),
    }
}

pub const SUMMARY_HEADER: [&str; 7] = [
    "solver",
    "final_linf",
    "final_m2",
    "final_w2_to_ref",
    "decay_rate",
    "decay_r_squared",
    "hypotheses",
];

fn write_summary(path: &Path, rows: &[SolverSummary]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    let real = |v: Option<f64>| v.map(format_real).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.solver.to_owned(),
            format_real(r.final_linf),
            format_real(r.final_m2),
            real(r.final_w2_to_ref),
            real(r.decay_rate),
            real(r.decay_r_squared),
            r.hypotheses.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `steady.csv` and its `meta.csv` sidecar.
pub fn write_steady(dir: &Path, epsilon: f64, steady: &SteadyState) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    io::write_density(&dir.join("steady.csv"), &steady.density)?;
    io::write_steady_meta(&dir.join("meta.csv"), epsilon, steady)?;
    Ok(())
}
