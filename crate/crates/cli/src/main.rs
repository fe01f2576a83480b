//! Config-driven experiment runner. Exit code 0 means every bound check of
//! every run passed; 1 flags a bound violation, 2 a config/output problem,
//! 3 a numerical failure inside a run.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use config::{ExperimentConfig, RunPlan};
use oco_core::{
    execute_run, generate_sequence, ProblemDocument, ProjectionSettings, RunOutcome,
};

#[derive(Debug, Parser)]
#[command(name = "oco", about = "Run tracking experiments from a JSON config")]
struct Args {
    /// Path to the experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed override.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::init();
    let args = Args::parse();
    match run(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("bound checks failed; see summary.json");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Output(msg)) => {
            eprintln!("output error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical { run, msg }) => {
            eprintln!("numerical failure in run {run}: {msg}");
            ExitCode::from(3)
        }
    }
}

enum Failure {
    Config(String),
    Output(String),
    Numerical { run: String, msg: String },
}

fn classify_core_error(run: &str, err: oco_core::Error) -> Failure {
    match err {
        oco_core::Error::Invalid(msg) => Failure::Config(msg),
        other => Failure::Numerical {
            run: run.to_string(),
            msg: other.to_string(),
        },
    }
}

fn run(args: Args) -> Result<bool, Failure> {
    let raw = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
    let mut cfg: ExperimentConfig =
        serde_json::from_str(&raw).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.display().to_string();
    }

    let plans = cfg
        .plan_runs()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let out_dir = Path::new(&cfg.out_dir);
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Failure::Output(format!("{}: {e}", out_dir.display())))?;

    let settings = ProjectionSettings {
        tol: cfg.projection_tol,
        max_iter: cfg.projection_max_iter,
    };

    let mut run_blocks = Vec::new();
    let mut all_ok = true;
    for plan in &plans {
        let (outcome, block) = execute_plan(plan, &settings, out_dir)?;
        all_ok &= outcome.bounds.all_ok();
        run_blocks.push(block);
        println!(
            "run {}: c = {:.6}, c_empirical = {}, R_d = {:.6}, P_g = {:.6}, V = {:.6}, bounds {}",
            plan.id,
            outcome.contraction.c,
            outcome
                .metrics
                .c_empirical
                .map_or("n/a".to_string(), |c| format!("{c:.6}")),
            outcome.metrics.r_d,
            outcome.metrics.p_g,
            outcome.metrics.path_length,
            if outcome.bounds.all_ok() { "ok" } else { "FAILED" }
        );
    }

    let summary = json!({
        "config": cfg,
        "runs": run_blocks,
        "all_bounds_ok": all_ok,
    });
    let summary_path = out_dir.join("summary.json");
    let pretty = serde_json::to_string_pretty(&summary)
        .map_err(|e| Failure::Output(e.to_string()))?;
    std::fs::write(&summary_path, pretty)
        .map_err(|e| Failure::Output(format!("{}: {e}", summary_path.display())))?;
    Ok(all_ok)
}

fn execute_plan(
    plan: &RunPlan,
    settings: &ProjectionSettings,
    out_dir: &Path,
) -> Result<(RunOutcome, serde_json::Value), Failure> {
    let seq =
        generate_sequence(&plan.spec).map_err(|e| classify_core_error(&plan.id, e))?;
    // past config validation every core failure is numerical
    let outcome = execute_run(&seq, settings).map_err(|e| Failure::Numerical {
        run: plan.id.clone(),
        msg: e.to_string(),
    })?;

    let csv_name = format!("run_{}.csv", plan.id);
    let transcript_name = format!("run_{}_transcript.csv", plan.id);
    std::fs::write(out_dir.join(&csv_name), output::round_csv(&seq, &outcome))
        .map_err(|e| Failure::Output(e.to_string()))?;
    std::fs::write(
        out_dir.join(&transcript_name),
        output::transcript_csv(&outcome),
    )
    .map_err(|e| Failure::Output(e.to_string()))?;

    let digest = ProblemDocument::from_sequence(&seq).digest();
    let block = json!({
        "id": plan.id,
        "seed": plan.seed,
        "overrides": plan.overrides,
        "sequence_digest": digest,
        "constants": seq.constants,
        "contraction": outcome.contraction,
        "metrics": {
            "r_d": outcome.metrics.r_d,
            "p_g": outcome.metrics.p_g,
            "p_g_prime": outcome.metrics.p_g_prime,
            "path_length": outcome.metrics.path_length,
            "c_empirical": outcome.metrics.c_empirical,
        },
        "case_histogram": outcome.log.case_histogram(),
        "bounds": outcome.bounds,
        "round_csv": csv_name,
        "transcript_csv": transcript_name,
    });
    Ok((outcome, block))
}
