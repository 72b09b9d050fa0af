use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qmdp::experiments::{run_suite, run_sweep, write_json, write_sweep_csv, ExperimentConfig, Suite, SweepAxis};
use qmdp::oracle::{build_quantum_oracle, DyadicMdp};
use qmdp::{Error, Mdp, Result};

#[derive(Parser)]
#[command(name = "qmdp", version, about = "Quantum value-iteration simulator and query-complexity harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured solver once and write its report.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep one parameter, write per-run rows and the log-log fit.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// eps, gamma, num_actions or copies
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Seeds per point; defaults to the config's `runs`.
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        out_csv: PathBuf,
        #[arg(long)]
        out_fit: PathBuf,
    },
    /// Run an invariant suite and print per-check counts.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Quantize an MDP to m-bit dyadic rows and build its quantum oracle table.
    OracleBuild {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

fn solve(config_path: &Path, out: &Path) -> Result<()> {
    let mut config = ExperimentConfig::load(config_path)?;
    let snapshots_path = config.output.snapshots_csv.clone();
    if snapshots_path.is_some() {
        config.solver.record_snapshots = true;
    }
    let mdp = config.build_mdp()?;
    let mut report = config.solve(&mdp, config.seed)?;
    report.timestamp = Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    std::fs::write(out, report.to_json()?).map_err(|e| Error::io(out, e))?;
    if let Some(path) = snapshots_path {
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        report.write_snapshots_csv(file)?;
    }
    println!(
        "{}: v_hat = {:?}, pi_hat = {:?}, quantum calls {}, classical samples {}",
        report.solver,
        report.v_hat,
        report.pi_hat.0,
        report.ledger.quantum_oracle_calls(),
        report.ledger.classical_samples()
    );
    Ok(())
}

fn sweep(
    config_path: &Path,
    axis: &str,
    values: &[f64],
    seeds: Option<usize>,
    out_csv: &Path,
    out_fit: &Path,
) -> Result<()> {
    let config = ExperimentConfig::load(config_path)?;
    let axis = SweepAxis::parse(axis)?;
    let outcome = run_sweep(&config, axis, values, seeds.unwrap_or(config.runs))?;
    let file = std::fs::File::create(out_csv).map_err(|e| Error::io(out_csv, e))?;
    write_sweep_csv(&outcome.rows, file)?;
    write_json(out_fit, &outcome.fit)?;
    for (x, y) in &outcome.fit.points {
        println!("{:>12.6} {:>16.1}", x, y);
    }
    println!(
        "slope {:.4} (r^2 {:.4}), success rate {:.3}",
        outcome.fit.slope,
        outcome.fit.r_squared,
        outcome.success_rate()
    );
    Ok(())
}

fn verify(suite: &str, trials: Option<usize>, seed: u64) -> Result<bool> {
    let checks = run_suite(Suite::parse(suite)?, trials, seed)?;
    for check in &checks {
        println!("{check}");
    }
    Ok(checks.iter().all(|c| c.ok()))
}

fn oracle_build(mdp_path: &Path, m: u32, out: &Path) -> Result<()> {
    let mdp = Mdp::<f64>::load(mdp_path)?;
    let dyadic = DyadicMdp::quantize(&mdp, m)?;
    let oracle = build_quantum_oracle(&dyadic)?;
    if !oracle.is_normalized() {
        return Err(Error::Internal("oracle amplitudes are not normalized".into()));
    }
    dyadic.to_file()?.write(out)?;
    println!(
        "{} x {} rows at m = {m}, max quantization error {:.3e}",
        dyadic.num_states, dyadic.num_actions, dyadic.max_quantization_error
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve { config, out } => solve(&config, &out).map(|_| true),
        Command::Sweep {
            config,
            axis,
            values,
            seeds,
            out_csv,
            out_fit,
        } => sweep(&config, &axis, &values, seeds, &out_csv, &out_fit).map(|_| true),
        Command::Verify { suite, trials, seed } => verify(&suite, trials, seed),
        Command::OracleBuild { mdp, m, out } => oracle_build(&mdp, m, &out).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_internal() { 3 } else { 2 })
        }
    }
}
