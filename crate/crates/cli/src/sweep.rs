//! One-parameter sweeps producing a phase table.

use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use aggdiff_core::io::format_real;
use aggdiff_core::toy::{classify_basin, integrate_toy, Basin};
use aggdiff_core::{Rk23Options, ToyProblem};
use anyhow::bail;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, InitialSpec};
use crate::runner::{run_experiment, RunOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Epsilon,
    /// Half-width of a uniform-box initial datum.
    R,
    /// Width of the oscillating initial datum.
    Delta,
    /// Start of the two-particle model.
    X0,
}

impl FromStr for SweepParam {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        Ok(match s {
            "epsilon" => Self::Epsilon,
            "R" | "r" => Self::R,
            "delta" => Self::Delta,
            "X0" | "x0" => Self::X0,
            _ => bail!("unknown sweep parameter `{s}` (expected epsilon, R, delta or X0)"),
        })
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Epsilon => "epsilon",
            Self::R => "R",
            Self::Delta => "delta",
            Self::X0 => "X0",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    Steady,
    Decaying,
    Undetermined,
    ConvergesToA,
    Diverges,
    OnSeparatrix,
    Failed,
}

impl Classification {
    pub fn label(self) -> &'static str {
        match self {
            Self::Steady => "steady",
            Self::Decaying => "decaying",
            Self::Undetermined => "undetermined",
            Self::ConvergesToA => "converges_to_a",
            Self::Diverges => "diverges",
            Self::OnSeparatrix => "on_separatrix",
            Self::Failed => "failed",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub classification: Classification,
    /// `linf` of the final density, or the final position for `X0` sweeps.
    pub final_value: Option<f64>,
    pub final_m2: Option<f64>,
    pub final_w2_to_ref: Option<f64>,
    pub error: Option<String>,
}

/// `steady` if the final distance to the reference is below `1e-3`,
/// `decaying` if the sup norm fell below a tenth of its initial value while
/// the second moment never decreased, `undetermined` otherwise.
pub fn classify_run(outcome: &RunOutcome) -> Classification {
    let Some(rows) = outcome.primary() else {
        return Classification::Undetermined;
    };
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    if last.w2_to_ref.is_some_and(|w| w < 1e-3) {
        return Classification::Steady;
    }
    let m2_increasing = rows.windows(2).all(|w| w[1].m2 >= w[0].m2) && last.m2 > first.m2;
    if last.linf < 0.1 * first.linf && m2_increasing {
        Classification::Decaying
    } else {
        Classification::Undetermined
    }
}

/// The config of the run for one swept value, writing into its own directory.
pub fn config_for(base: &ExperimentConfig, param: SweepParam, value: f64, index: usize) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = base.clone();
    cfg.output_dir = base.output_dir.join(format!("{param}_{index}"));
    match (param, &mut cfg.initial) {
        (SweepParam::Epsilon, _) => cfg.epsilon = value,
        (SweepParam::R, InitialSpec::UniformBox { radius, .. }) => *radius = value,
        (SweepParam::Delta, InitialSpec::OscillatingGaussian { delta, .. }) => *delta = value,
        (SweepParam::X0, _) => {}
        (p, _) => bail!("sweeping {p} needs a matching initial datum"),
    }
    Ok(cfg)
}

fn toy_row(base: &ExperimentConfig, x0: f64) -> anyhow::Result<SweepRow> {
    let problem = ToyProblem::new(base.epsilon, &base.kernel.build()?)?;
    let classification = match classify_basin(&problem, x0)? {
        Basin::ConvergesToA => Classification::ConvergesToA,
        Basin::Diverges => Classification::Diverges,
        Basin::OnSeparatrix => Classification::OnSeparatrix,
    };
    let opts = Rk23Options {
        tol_abs: base.tol,
        tol_rel: base.tol,
        ..Rk23Options::default()
    };
    let (traj, _) = integrate_toy(&problem, x0, base.t_end, &[], &opts)?;
    Ok(SweepRow {
        value: x0,
        classification,
        final_value: Some(traj.final_position()),
        final_m2: None,
        final_w2_to_ref: None,
        error: None,
    })
}

fn pde_row(base: &ExperimentConfig, param: SweepParam, value: f64, index: usize) -> anyhow::Result<SweepRow> {
    let cfg = config_for(base, param, value, index)?;
    let outcome = run_experiment(&cfg)?;
    let last = outcome.primary().and_then(<[_]>::last);
    Ok(SweepRow {
        value,
        classification: classify_run(&outcome),
        final_value: last.map(|r| r.linf),
        final_m2: last.map(|r| r.m2),
        final_w2_to_ref: last.and_then(|r| r.w2_to_ref),
        error: None,
    })
}

/// Worker count from `AGGDIFF_THREADS`, if set.
pub fn thread_limit() -> anyhow::Result<Option<usize>> {
    match std::env::var("AGGDIFF_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => bail!("AGGDIFF_THREADS must be a positive integer, got `{v}`"),
        },
        Err(_) => Ok(None),
    }
}

/// One run per value on a worker pool of `threads` (all cores when `None`).
/// Failed runs are recorded and do not stop the sweep.
pub fn sweep(
    base: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    threads: Option<usize>,
) -> anyhow::Result<Vec<SweepRow>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    let rows = pool.install(|| {
        values
            .par_iter()
            .enumerate()
            .map(|(k, &v)| {
                let result = match param {
                    SweepParam::X0 => toy_row(base, v),
                    _ => pde_row(base, param, v, k),
                };
                result.unwrap_or_else(|e| SweepRow {
                    value: v,
                    classification: Classification::Failed,
                    final_value: None,
                    final_m2: None,
                    final_w2_to_ref: None,
                    error: Some(format!("{e:#}")),
                })
            })
            .collect()
    });
    Ok(rows)
}

pub fn write_phase_table(path: &Path, param: SweepParam, rows: &[SweepRow]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    let final_name = if param == SweepParam::X0 { "final_x" } else { "final_linf" };
    w.write_record([&param.to_string(), "classification", final_name, "final_m2", "final_w2_to_ref", "error"])?;
    let real = |v: Option<f64>| v.map(format_real).unwrap_or_default();
    for r in rows {
        w.write_record([
            format_real(r.value),
            r.classification.label().to_owned(),
            real(r.final_value),
            real(r.final_m2),
            real(r.final_w2_to_ref),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
