use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hard_instances::copies;
use crate::mdp::{effective_horizon, Mdp};
use crate::quantum_sim::median;
use crate::rng::derive_seed;

use super::{fit_power_law, meets_guarantee, ExperimentConfig, GroundTruth, ScalingFit, SolverConfig};

pub const MIN_POINTS: usize = 3;
pub const MIN_SEEDS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Target error; fitted against `1/ε`.
    Eps,
    /// Discount; fitted against `Γ = 1/(1−γ)`.
    Gamma,
    /// Actions of the hard instance.
    NumActions,
    /// Source/sink pairs of the hard instance.
    Copies,
}

impl SweepAxis {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "eps" => Ok(SweepAxis::Eps),
            "gamma" => Ok(SweepAxis::Gamma),
            "num_actions" => Ok(SweepAxis::NumActions),
            "copies" => Ok(SweepAxis::Copies),
            other => Err(Error::param(
                "axis",
                format!("unknown axis {other:?}; expected eps, gamma, num_actions or copies"),
            )),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Eps => "eps",
            SweepAxis::Gamma => "gamma",
            SweepAxis::NumActions => "num_actions",
            SweepAxis::Copies => "copies",
        }
    }

    /// The abscissa of the log–log fit for an axis value.
    pub fn abscissa(self, value: f64) -> f64 {
        match self {
            SweepAxis::Eps => 1.0 / value,
            SweepAxis::Gamma => effective_horizon(value),
            SweepAxis::NumActions | SweepAxis::Copies => value,
        }
    }
}

/// One CSV row: a single seeded run at one axis value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub seed: u64,
    pub classical_samples: u64,
    pub quantum_oracle_calls: u64,
    pub success: bool,
}

impl SweepRow {
    pub fn total_queries(&self) -> u64 {
        self.classical_samples + self.quantum_oracle_calls
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub fit: ScalingFit,
}

impl SweepOutcome {
    pub fn success_rate(&self) -> f64 {
        self.rows.iter().filter(|r| r.success).count() as f64 / self.rows.len() as f64
    }
}

struct Point {
    value: f64,
    mdp: Mdp<f64>,
    solver: SolverConfig,
    eps: f64,
    truth: GroundTruth,
}

fn integral(axis: SweepAxis, value: f64) -> Result<usize> {
    if value >= 1.0 && value.fract() == 0.0 {
        Ok(value as usize)
    } else {
        Err(Error::param("values", format!("{} needs positive integers, got {value}", axis.name())))
    }
}

fn build_point(config: &ExperimentConfig, axis: SweepAxis, value: f64) -> Result<Point> {
    let mut solver = config.solver.clone();
    let mut spec = config.instance.hard_instance.clone();
    let needs_hard = || Error::Config(format!("sweep over {} needs a hard_instance", axis.name()));
    let mdp = match axis {
        SweepAxis::Eps => {
            solver.eps = Some(value);
            solver.eps_over_sqrt_horizon = None;
            config.build_mdp()?
        }
        SweepAxis::Gamma => match spec.as_mut() {
            Some(spec) => {
                spec.gamma = value;
                copies(spec)?
            }
            None => config.build_mdp()?.with_discount(value)?,
        },
        SweepAxis::NumActions => {
            let spec = spec.as_mut().ok_or_else(needs_hard)?;
            spec.num_actions = integral(axis, value)?;
            copies(spec)?
        }
        SweepAxis::Copies => {
            let spec = spec.as_mut().ok_or_else(needs_hard)?;
            spec.copies = integral(axis, value)?;
            copies(spec)?
        }
    };
    let eps = solver.eps_for(effective_horizon(mdp.discount()))?;
    let truth = GroundTruth::of(&mdp)?;
    Ok(Point {
        value,
        mdp,
        solver,
        eps,
        truth,
    })
}

/// Runs `seeds` seeded solves at every axis value and fits the median total
/// query count against the axis abscissa. Run `i` at every point uses the
/// same child seed, derived from the config seed.
pub fn run_sweep(config: &ExperimentConfig, axis: SweepAxis, values: &[f64], seeds: usize) -> Result<SweepOutcome> {
    if values.len() < MIN_POINTS {
        return Err(Error::param("values", format!("need at least {MIN_POINTS} axis points, got {}", values.len())));
    }
    if seeds < MIN_SEEDS {
        return Err(Error::param("seeds", format!("need at least {MIN_SEEDS} per point, got {seeds}")));
    }
    let points = values
        .iter()
        .map(|&v| build_point(config, axis, v).map_err(|e| e.context(format!("{} = {v}", axis.name()))))
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| (0..seeds as u64).map(move |i| (p, i)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(p, i)| {
            let point = &points[p];
            let seed = derive_seed(config.seed, &[i]);
            let report = super::run_solver(&point.mdp, &point.solver, &config.estimator, seed)
                .map_err(|e| e.context(format!("{} = {}, seed {seed}", axis.name(), point.value)))?;
            Ok(SweepRow {
                axis_value: point.value,
                seed,
                classical_samples: report.ledger.classical_samples(),
                quantum_oracle_calls: report.ledger.quantum_oracle_calls(),
                success: meets_guarantee(&point.mdp, &point.truth, &report, point.eps)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let fit_points: Vec<(f64, f64)> = rows
        .chunks(seeds)
        .zip(&points)
        .map(|(chunk, point)| {
            let mut totals: Vec<f64> = chunk.iter().map(|r| r.total_queries() as f64).collect();
            (axis.abscissa(point.value), median(&mut totals))
        })
        .collect();
    let fit = fit_power_law(axis.name(), &fit_points)?;
    Ok(SweepOutcome { rows, fit })
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    if rows.is_empty() {
        writer.write_record(["axis_value", "seed", "classical_samples", "quantum_oracle_calls", "success"])?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    let expected = ["axis_value", "seed", "classical_samples", "quantum_oracle_calls", "success"];
    if header.iter().ne(expected) {
        return Err(Error::Config(format!("sweep csv header {header:?} differs from {expected:?}")));
    }
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}
