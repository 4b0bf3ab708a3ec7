//! Command-line front end: operator-level distance and dichotomy checks,
//! delay-system verdicts, the reaction-diffusion model checks, perturbation
//! sweeps, the domain witness, and the regression battery.
//!
//! Every command prints a short human summary to stdout; `--json` (and
//! `--csv` for sweeps) additionally writes machine-readable output in a
//! canonical byte-stable form. Exit codes: 0 success, 2 not hyperbolic or
//! regression mismatch, 3 inconclusive or internally inconsistent
//! computation, 4 bad input.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use yosida_lab::delay::{
    assemble_generator, dichotomy_of_delay_system, generator_yosida_distance, scalar_delay_roots,
    StripConfig,
};
use yosida_lab::dichotomy::check_hyperbolic;
use yosida_lab::harness::{
    canonical_report, demo_domain_noninclusion, parse_config, regression_suite, run_sweep,
    sweep_csv, ModelFile, SweepFile,
};
use yosida_lab::linops::load_matrix;
use yosida_lab::models::{
    functional_bound_check, relative_bound_check, PerturbationConfig, PerturbationFamily,
    ReactionDiffusionConfig, SpatialDisc,
};
use yosida_lab::yosida::{yosida_distance, MuGridConfig};
use yosida_lab::{Error, Result};

#[derive(Parser)]
#[command(name = "yosida-lab", version, about = "Yosida-distance perturbation checks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Yosida distance between two operators given as matrix files.
    Ydist {
        /// Left operator (.json schema or whitespace text).
        #[arg(long)]
        a: PathBuf,
        /// Right operator.
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Exponential dichotomy check for a generator matrix.
    Dicho {
        /// Generator (.json schema or whitespace text).
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Delay-system commands driven by a model config file.
    Delay {
        #[command(subcommand)]
        sub: DelayCmd,
    },
    /// Reaction-diffusion model commands.
    Model {
        #[command(subcommand)]
        sub: ModelCmd,
    },
    /// Perturbation sweep with persistence accounting.
    Sweep {
        /// Sweep config (.toml or .json).
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Splicing-residual witness that generator domains differ across
    /// delay functionals.
    DemoDomain {
        #[arg(long)]
        b0: f64,
        #[arg(long)]
        b1: f64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Deterministic regression battery against a blessed baseline.
    Regress {
        #[arg(long)]
        baseline_dir: PathBuf,
        /// Record the baseline instead of comparing.
        #[arg(long)]
        bless: bool,
    },
}

#[derive(Subcommand)]
enum DelayCmd {
    /// Characteristic roots per sine mode (modal configs only).
    Roots {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Dichotomy verdict for the configured system.
    Dicho {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Yosida distances between the unperturbed and perturbed generators.
    Ydist {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ModelCmd {
    /// Assemble the configured system and report its shape.
    Build {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Relative bound of the perturbation against the base operator
    /// (difference path).
    CheckRelative {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Weighted-norm bound of the delay-functional perturbation.
    CheckFunctional {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn write_report<T: Serialize>(path: &Option<PathBuf>, report: &T) -> Result<()> {
    if let Some(p) = path {
        std::fs::write(p, canonical_report(report)?)
            .map_err(|e| Error::bad_input(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn model_parts(
    path: &PathBuf,
) -> Result<(
    ReactionDiffusionConfig,
    PerturbationConfig,
    PerturbationFamily,
    usize,
    u64,
)> {
    parse_config::<ModelFile>(path)?.into_parts()
}

fn spatial_name(cfg: &ReactionDiffusionConfig) -> &'static str {
    match cfg.spatial_disc {
        SpatialDisc::Modal => "modal",
        SpatialDisc::FiniteDifference { .. } => "finite_difference",
    }
}

fn cmd_ydist(a: &PathBuf, b: &PathBuf, json: &Option<PathBuf>) -> Result<u8> {
    let a = load_matrix(a)?;
    let b = load_matrix(b)?;
    let estimate = yosida_distance(&a, &b, &MuGridConfig::default())?;
    write_report(json, &estimate)?;
    println!(
        "d_Y = {:.12e}  (||A - B|| = {:.12e})",
        estimate.value,
        (&a - &b).norm2()
    );
    if estimate.converged {
        println!(
            "settled: tail slope {:.3e}, spread {:.3e}",
            estimate.tail_slope, estimate.tail_spread
        );
        Ok(0)
    } else {
        println!(
            "NOT settled: tail slope {:.3e}, spread {:.3e}",
            estimate.tail_slope, estimate.tail_spread
        );
        Ok(3)
    }
}

fn print_dichotomy(report: &yosida_lab::dichotomy::DichotomyReport) -> u8 {
    if report.hyperbolic {
        println!(
            "hyperbolic: gap {:.6e}, alpha {:.6e}, N {:.6e}",
            report.gap,
            report.alpha.expect("hyperbolic report carries alpha"),
            report.n_constant.expect("hyperbolic report carries N"),
        );
        0
    } else {
        println!("not hyperbolic: circle gap {:.6e}", report.gap);
        2
    }
}

fn cmd_dicho(g: &PathBuf, json: &Option<PathBuf>) -> Result<u8> {
    let g = load_matrix(g)?;
    let report = check_hyperbolic(&g)?;
    write_report(json, &report)?;
    Ok(print_dichotomy(&report))
}

fn diagonal_entry(m: &yosida_lab::linops::OperatorMatrix, k: usize) -> Complex64 {
    m.matrix()[(k, k)]
}

fn cmd_delay_roots(config: &PathBuf, json: &Option<PathBuf>) -> Result<u8> {
    let (cfg, pert, family, _, _) = model_parts(config)?;
    let labels = cfg.mode_labels().ok_or_else(|| {
        Error::bad_input("the root scan is per sine mode; use the modal path (n_modes)")
    })?;
    let sys = cfg.build_perturbed(&pert, family)?;
    let mut modes = Vec::new();
    for (k, n) in labels.iter().enumerate() {
        let alpha = diagonal_entry(&sys.a, k);
        let mut atoms = vec![(-sys.r, diagonal_entry(&sys.b_point, k))];
        for (theta, w) in &sys.b_kernel {
            atoms.push((*theta, diagonal_entry(w, k)));
        }
        let budget: f64 = atoms.iter().map(|(_, w)| w.norm()).sum();
        let strip = StripConfig::scalar(alpha, budget, sys.r);
        let mut roots = scalar_delay_roots(alpha, &atoms, &strip)?;
        roots.sort_by(|x, y| y.lambda.re.total_cmp(&x.lambda.re));
        println!("mode {n}: {} roots in the strip", roots.len());
        for root in &roots {
            println!(
                "  {:+.12e} {:+.12e}i  (residual {:.2e})",
                root.lambda.re, root.lambda.im, root.residual
            );
        }
        modes.push(json!({
            "n": n,
            "roots": roots
                .iter()
                .map(|rt| json!({
                    "re": rt.lambda.re,
                    "im": rt.lambda.im,
                    "residual": rt.residual,
                }))
                .collect::<Vec<_>>(),
        }));
    }
    write_report(json, &json!({ "modes": modes }))?;
    Ok(0)
}

fn cmd_delay_dicho(config: &PathBuf, json: &Option<PathBuf>) -> Result<u8> {
    let (cfg, pert, family, n, _) = model_parts(config)?;
    let labels = cfg.mode_labels();
    let sys = cfg.build_perturbed(&pert, family)?;
    let report = dichotomy_of_delay_system(&sys, labels.as_deref(), n)?;
    write_report(json, &report)?;
    Ok(print_dichotomy(&report))
}

fn cmd_delay_ydist(config: &PathBuf, json: &Option<PathBuf>) -> Result<u8> {
    let (cfg, pert, family, n, _) = model_parts(config)?;
    let base = assemble_generator(&cfg.build_unperturbed(), n)?;
    let perturbed = assemble_generator(&cfg.build_perturbed(&pert, family)?, n)?;
    let report = generator_yosida_distance(&base, &perturbed)?;
    write_report(json, &report)?;
    println!(
        "dY_G = {:.12e}, dY_A = {:.12e}, dY_B = {:.12e}",
        report.dy_g, report.dy_a, report.dy_b
    );
    println!(
        "dY_G <= 2 dY_B + dY_A: {} (tolerance {:.3e})",
        if report.bound_holds { "holds" } else { "VIOLATED" },
        report.tol
    );
    Ok(if report.bound_holds { 0 } else { 1 })
}

fn cmd_model_build(config: &PathBuf, json: &Option<PathBuf>) -> Result<u8> {
    let (cfg, pert, family, n, _) = model_parts(config)?;
    let sys = cfg.build_perturbed(&pert, family)?;
    let gen = assemble_generator(&sys, n)?;
    println!(
        "{} path: state dim {}, delay {}, kernel atoms {}",
        spatial_name(&cfg),
        sys.state_dim(),
        sys.r,
        sys.b_kernel.len()
    );
    println!(
        "collocation order {}: generator dim {}, functional norm {:.6e}",
        gen.order(),
        gen.dim(),
        sys.functional_norm()
    );
    write_report(
        json,
        &json!({
            "spatial": spatial_name(&cfg),
            "state_dim": sys.state_dim(),
            "r": sys.r,
            "kernel_atoms": sys.b_kernel.len(),
            "order": gen.order(),
            "generator_dim": gen.dim(),
            "functional_norm": sys.functional_norm(),
        }),
    )?;
    Ok(0)
}

fn cmd_check_relative(config: &PathBuf, seed: Option<u64>, json: &Option<PathBuf>) -> Result<u8> {
    let (cfg, pert, _, _, file_seed) = model_parts(config)?;
    let report = relative_bound_check(&cfg, &pert, seed.unwrap_or(file_seed))?;
    write_report(json, &report)?;
    let max_ratio = report
        .lhs_samples
        .iter()
        .zip(&report.rhs_samples)
        .map(|(l, r)| l / r)
        .fold(0.0_f64, f64::max);
    println!(
        "relative bound over {} samples: max lhs/rhs = {:.6e}",
        report.lhs_samples.len(),
        max_ratio
    );
    println!(
        "proof form: {}; displayed form: {}",
        if report.holds { "holds" } else { "VIOLATED" },
        if report.displayed_form_holds {
            "holds"
        } else {
            "violated (expected for rough data)"
        }
    );
    Ok(if report.holds { 0 } else { 1 })
}

fn cmd_check_functional(config: &PathBuf, json: &Option<PathBuf>) -> Result<u8> {
    let (cfg, pert, _, _, _) = model_parts(config)?;
    let report = functional_bound_check(&cfg, &pert)?;
    write_report(json, &report)?;
    println!(
        "weighted functional distance {:.6e} vs bound {:.6e}: {}",
        report.dy_value,
        report.bound,
        if report.holds { "holds" } else { "VIOLATED" }
    );
    Ok(if report.holds { 0 } else { 1 })
}

fn cmd_sweep(
    config: &PathBuf,
    seed: Option<u64>,
    csv: &Option<PathBuf>,
    json: &Option<PathBuf>,
) -> Result<u8> {
    let mut spec = parse_config::<SweepFile>(config)?.into_spec()?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let result = run_sweep(&spec)?;
    println!(
        "{} sweep, {} rows, base persistence margin {:.6e}",
        result.knob.label(),
        result.rows.len(),
        result.base_margin
    );
    for row in &result.rows {
        println!(
            "  {:10.4e}: dY_G {:10.4e}, gap {:10.4e}, {}",
            row.knob_value,
            row.dy_g,
            row.gap,
            if row.hyperbolic { "hyperbolic" } else { "NOT hyperbolic" }
        );
    }
    match result.breakpoint {
        Some(bp) => println!("hyperbolicity lost at knob value {bp:.6e}"),
        None => println!("hyperbolic across the whole sweep"),
    }
    println!(
        "{} rows below the margin, all verified hyperbolic",
        result.margin_rows_checked
    );
    if let Some(p) = csv {
        std::fs::write(p, sweep_csv(&result))
            .map_err(|e| Error::bad_input(format!("{}: {e}", p.display())))?;
    }
    write_report(json, &result)?;
    Ok(0)
}

fn cmd_demo_domain(b0: f64, b1: f64, json: &Option<PathBuf>) -> Result<u8> {
    let report = demo_domain_noninclusion(b0, b1)?;
    write_report(json, &report)?;
    println!(
        "phase function spliced for b = {}: residual {:.3e}",
        report.b0, report.residual0
    );
    println!(
        "same function against b = {}: residual {:.3e}",
        report.b1, report.residual1
    );
    Ok(0)
}

fn cmd_regress(baseline_dir: &PathBuf, bless: bool) -> Result<u8> {
    let summary = regression_suite(baseline_dir, bless)?;
    if summary.blessed {
        println!(
            "recorded {} baselines in {}",
            summary.computations,
            baseline_dir.display()
        );
        return Ok(0);
    }
    if summary.mismatches.is_empty() {
        println!(
            "{} computations, {} fields match the baseline",
            summary.computations, summary.fields_checked
        );
        Ok(0)
    } else {
        println!(
            "{} mismatches across {} checked fields:",
            summary.mismatches.len(),
            summary.fields_checked
        );
        for line in &summary.mismatches {
            println!("  {line}");
        }
        Ok(2)
    }
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.cmd {
        Cmd::Ydist { a, b, json } => cmd_ydist(a, b, json),
        Cmd::Dicho { g, json } => cmd_dicho(g, json),
        Cmd::Delay { sub } => match sub {
            DelayCmd::Roots { config, json } => cmd_delay_roots(config, json),
            DelayCmd::Dicho { config, json } => cmd_delay_dicho(config, json),
            DelayCmd::Ydist { config, json } => cmd_delay_ydist(config, json),
        },
        Cmd::Model { sub } => match sub {
            ModelCmd::Build { config, json } => cmd_model_build(config, json),
            ModelCmd::CheckRelative { config, seed, json } => {
                cmd_check_relative(config, *seed, json)
            }
            ModelCmd::CheckFunctional { config, json } => cmd_check_functional(config, json),
        },
        Cmd::Sweep {
            config,
            seed,
            csv,
            json,
        } => cmd_sweep(config, *seed, csv, json),
        Cmd::DemoDomain { b0, b1, json } => cmd_demo_domain(*b0, *b1, json),
        Cmd::Regress { baseline_dir, bless } => cmd_regress(baseline_dir, *bless),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
