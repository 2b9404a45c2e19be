//! `visolve` command-line interface.
//!
//! Exit status: 0 on success, 1 on configuration or input errors, 2 when every
//! run of an experiment diverged.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use visolve::diagnostics::{
    bound_curve, check_quasi_sharpness, estimate_linear_growth, find_monotonicity_violation, BoundConstants,
    PropertyReport, Sampler,
};
use visolve::experiments::{
    preset_config, run_experiment, write_bound_csv, write_outputs, ExecOptions, ExperimentConfig, OperatorSpec,
    PresetOverrides, RunSummary,
};
use visolve::{FeasibleSet, Theorem};

#[derive(Parser)]
#[command(name = "visolve", version, about = "Stochastic Popov and projection methods for variational inequalities")]
struct Cli {
    /// Run seeds sequentially.
    #[arg(long, global = true)]
    deterministic_order: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML or JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of seeds.
        #[arg(long)]
        seeds: Option<usize>,
        /// Number of iterations K.
        #[arg(long)]
        iters: Option<u64>,
    },
    /// Run a built-in preset: fig2-a, fig2-b, fig2-c, fig3, finite-sum, example-p.
    Reproduce {
        preset: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Exponent for example-p.
        #[arg(long)]
        p: Option<f64>,
        /// Smallest eigenvalue of the diagonal blocks.
        #[arg(long)]
        mu_a: Option<f64>,
        /// Switching threshold for both methods.
        #[arg(long)]
        k0: Option<u64>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        iters: Option<u64>,
        #[arg(long)]
        base_seed: Option<u64>,
    },
    /// Check sharpness, growth and monotonicity of an operator by sampling.
    Check {
        /// `example1`, or a config file whose operator section is used.
        operator: String,
        /// Exponent for example1; also the sharpness exponent unless `--sharp-p` is given.
        #[arg(long)]
        p: Option<f64>,
        /// Sharpness exponent (default: the operator's declared p).
        #[arg(long)]
        sharp_p: Option<f64>,
        /// Sharpness modulus (default: the operator's declared mu).
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Seed for drawing a random operator instance and the samples.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate a rate bound for K = 2..=k-max and print `theorem,K,bound` CSV.
    Bounds {
        theorem: Theorem,
        /// TOML or JSON file with the constants (mu, C, D, L, sigma_sq, M_U, M_1, M, p, r_1, dist_sq_u1).
        #[arg(long)]
        constants: PathBuf,
        #[arg(long)]
        k_max: u64,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Outcome {
    Done,
    AllDiverged,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::AllDiverged) => {
            eprintln!("error: every run diverged");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    let mut exec = ExecOptions::from_env()?;
    exec.deterministic_order = cli.deterministic_order;
    match cli.command {
        Command::Run {
            config,
            out,
            seeds,
            iters,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(n) = seeds {
                cfg.n_seeds = n;
            }
            if let Some(k) = iters {
                cfg.iterations = k;
            }
            let dir = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
            execute(&cfg, &exec, &dir)
        }
        Command::Reproduce {
            preset,
            out,
            p,
            mu_a,
            k0,
            seeds,
            iters,
            base_seed,
        } => {
            let overrides = PresetOverrides {
                p,
                mu_a,
                k0,
                iterations: iters,
                n_seeds: seeds,
                base_seed,
            };
            let cfg = preset_config(&preset, &overrides)?;
            execute(&cfg, &exec, &out)
        }
        Command::Check {
            operator,
            p,
            sharp_p,
            mu,
            samples,
            seed,
        } => check(&operator, p, sharp_p, mu, samples, seed),
        Command::Bounds {
            theorem,
            constants,
            k_max,
            out,
        } => {
            let c = BoundConstants::from_path(&constants)?;
            let curve = bound_curve(theorem, &c, k_max)?;
            match out {
                Some(path) => write_bound_csv(&curve, fs::File::create(&path)?)?,
                None => write_bound_csv(&curve, std::io::stdout().lock())?,
            }
            Ok(Outcome::Done)
        }
    }
}

fn execute(cfg: &ExperimentConfig, exec: &ExecOptions, dir: &Path) -> Result<Outcome> {
    cfg.validate()?;
    let output = run_experiment(cfg, exec)?;
    let paths = write_outputs(&output, dir)?;
    print_summary(&output.summary);
    println!("wrote {}", paths.runs.display());
    println!("wrote {}", paths.summary.display());
    println!("wrote {}", paths.meta.display());
    Ok(if output.summary.all_diverged() {
        Outcome::AllDiverged
    } else {
        Outcome::Done
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6e}"))
}

fn print_summary(s: &RunSummary) {
    println!(
        "{}: K = {}, seeds = {}, kappa_F = {}, sigma^2 = {}, wall time {:.2}s",
        s.name,
        s.iterations,
        s.n_seeds,
        fmt_opt(s.kappa_f),
        fmt_opt(s.sigma_sq),
        s.wall_time_secs
    );
    for m in &s.methods {
        println!(
            "  {:<10} completed {:>3}, diverged {:>3}, final mean dist^2 {}, time to threshold {}",
            m.method.name(),
            m.completed,
            m.diverged_seeds.len(),
            fmt_opt(m.final_mean),
            m.time_to_threshold.map_or_else(|| "not reached".to_string(), |k| k.to_string()),
        );
    }
}

fn check(operator: &str, p: Option<f64>, sharp_p: Option<f64>, mu: Option<f64>, samples: usize, seed: u64) -> Result<Outcome> {
    let spec = if operator == "example1" {
        OperatorSpec::Example1 {
            p: p.context("example1 needs --p")?,
            noise_var: 0.0,
        }
    } else {
        let path = Path::new(operator);
        if !path.exists() {
            bail!("unknown operator `{operator}` (expected `example1` or a config file)");
        }
        ExperimentConfig::from_path(path)?.operator
    };
    let op = spec.build_seeded(seed)?;
    let set = FeasibleSet::whole_space(op.dim())?;
    let sampler = Sampler::default_for(&op).with_seed(seed);
    let declared = op.declared();
    let sharp_p = sharp_p.or(declared.p).context("no sharpness exponent: pass --sharp-p")?;
    let mu = mu.or(declared.mu).context("no sharpness modulus: pass --mu")?;

    println!("operator: {}", op.label());
    report(&check_quasi_sharpness(&op, &set, sharp_p, mu, &sampler, samples)?);
    let growth = estimate_linear_growth(&op, &sampler, samples)?;
    println!("  fitted envelope: C_hat = {:.6e}, D_hat = {:.6e}", growth.c_hat, growth.d_hat);
    report(&growth.report);
    report(&find_monotonicity_violation(&op, &sampler, samples)?);
    Ok(Outcome::Done)
}

fn report(r: &PropertyReport) {
    let verdict = if r.is_violated() { "violated" } else { "certified-at-samples" };
    println!(
        "{}: {} ({} samples, max violation {:.3e}) claim: {}",
        r.property, verdict, r.n_samples, r.max_violation, r.claim
    );
    if r.is_violated() {
        let pts: Vec<String> = r.witness.iter().map(|w| format!("{w:?}")).collect();
        println!("  witness: {}", pts.join(" "));
    }
}
