//! Command-line front end: subcommands for the driving and
//! classification experiments, the calibration-bound verifier, dataset
//! generation, and gradient checking. Exit codes: 0 success, 1 runtime
//! failure, 2 invalid configuration or usage.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use deferlab::cli::{self, load_config, run_grad_check, RunConfig, RunOutput, RunSummary};
use deferlab::Result;

#[derive(Parser)]
#[command(
    name = "deferlab",
    version,
    about = "Learning-to-defer experiments: human models, rejector-classifiers, and bound checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct RunOpts {
    /// JSON run configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Replace the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; falls back to $DEFERLAB_OUT, then ./deferlab-out.
    #[arg(long, env = "DEFERLAB_OUT", value_name = "DIR")]
    out: Option<PathBuf>,
    /// Number of driving repetitions.
    #[arg(long)]
    repetitions: Option<usize>,
    /// Override any config field by dotted path, e.g.
    /// --set train.epochs=20 --set driving.params.independent_mean=50.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment selected by the config or --experiment.
    Run {
        /// Experiment to run: driving | classification | bound.
        #[arg(long)]
        experiment: Option<String>,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Generate a driving dataset JSON without training anything.
    GenDriving {
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run the autonomous-vehicle deferral experiment.
    RunDriving {
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run the synthetic-expert classification experiment.
    RunClassification {
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Verify the calibration misclassification bound over the grid.
    Bound {
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Check analytic gradients against central finite differences.
    GradCheck {
        /// Random (network, example) pairs per loss.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn build_config(opts: &RunOpts, experiment: Option<&str>) -> Result<RunConfig> {
    // Dedicated flags are applied after --set entries, so they win.
    let mut sets = opts.set.clone();
    if let Some(e) = experiment {
        sets.push(format!("experiment={e}"));
    }
    if let Some(seed) = opts.seed {
        sets.push(format!("seeds=[{seed}]"));
    }
    if let Some(reps) = opts.repetitions {
        sets.push(format!("repetitions={reps}"));
    }
    load_config(opts.config.as_deref(), &sets)
}

fn out_dir(opts: &RunOpts, config: &RunConfig) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("deferlab-out"))
}

fn print_summary(output: &RunOutput) {
    match &output.summary {
        RunSummary::Driving(report) => {
            for (name, mean) in &report.overall {
                println!("{name}: mean test-trip duration {mean:.3} min");
            }
            if let Some(t) = &report.finetune_vs_none {
                println!(
                    "paired t-test none vs finetune: mean gap {:.3} min, t = {:.3}, p = {:.3e}",
                    t.mean_diff, t.t_statistic, t.p_value
                );
            }
        }
        RunSummary::Classification(rows) => {
            println!("run_id,system_accuracy,deference_rate,human_model_accuracy");
            for r in rows {
                println!(
                    "{},{:.4},{:.4},{:.4}",
                    r.run_id,
                    r.metrics.system_accuracy,
                    r.metrics.deference_rate,
                    r.metrics.human_model_accuracy
                );
            }
        }
        RunSummary::Bound(cells) => {
            println!("p_h,p_m,epsilon,noise_kind,bound,empirical,ci_halfwidth,status");
            for c in cells {
                let s = &c.scenario;
                println!(
                    "{},{},{},{},{:.6},{:.6},{:.6},{}",
                    s.human_confidence,
                    s.machine_confidence,
                    s.epsilon,
                    s.noise,
                    c.bound,
                    c.empirical,
                    c.ci_halfwidth,
                    if c.pass { "pass" } else { "FAIL" }
                );
            }
            let failures = cells.iter().filter(|c| !c.pass).count();
            println!("{} cells, {} failures", cells.len(), failures);
        }
    }
    println!("results: {}", output.results_csv.display());
    println!("manifest: {}", output.manifest.display());
}

fn run_named(
    opts: &RunOpts,
    experiment: Option<&str>,
) -> std::result::Result<(), (u8, deferlab::Error)> {
    let config = build_config(opts, experiment).map_err(|e| (2, e))?;
    let dir = out_dir(opts, &config);
    let output = cli::run(&config, &dir).map_err(|e| (1, e))?;
    print_summary(&output);
    if let RunSummary::Bound(cells) = &output.summary {
        if cells.iter().any(|c| !c.pass) {
            return Err((
                1,
                deferlab::Error::InvalidArgument("bound violated on the grid".into()),
            ));
        }
    }
    Ok(())
}

fn execute(cmd: Cmd) -> std::result::Result<(), (u8, deferlab::Error)> {
    match cmd {
        Cmd::Run { experiment, opts } => run_named(&opts, experiment.as_deref()),
        Cmd::RunDriving { opts } => run_named(&opts, Some("driving")),
        Cmd::RunClassification { opts } => run_named(&opts, Some("classification")),
        Cmd::Bound { opts } => run_named(&opts, Some("bound")),
        Cmd::GenDriving { opts } => {
            let config = build_config(&opts, Some("driving")).map_err(|e| (2, e))?;
            let dir = out_dir(&opts, &config);
            let path = cli::generate_driving_artifact(&config, &dir).map_err(|e| (1, e))?;
            println!("dataset: {}", path.display());
            Ok(())
        }
        Cmd::GradCheck { samples, seed } => {
            let report = run_grad_check(samples, seed).map_err(|e| (1, e))?;
            for (loss, err) in &report.per_loss {
                println!(
                    "{loss}: max relative gradient error {err:.3e} over {} samples ({})",
                    report.samples,
                    if *err < report.tolerance {
                        "pass"
                    } else {
                        "FAIL"
                    }
                );
            }
            if report.pass() {
                Ok(())
            } else {
                Err((
                    1,
                    deferlab::Error::InvalidArgument(format!(
                        "gradient check exceeded tolerance {}",
                        report.tolerance
                    )),
                ))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, err)) => {
            eprintln!("error: {err}");
            ExitCode::from(code)
        }
    }
}
