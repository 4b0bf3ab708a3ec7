//! Deterministic regression battery: twelve fixed computations spanning the
//! library, serialized canonically and compared field by field against a
//! blessed baseline directory.

use std::path::Path;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::delay::{
    assemble_generator, dichotomy_of_delay_system, generator_yosida_distance, DelaySystem,
};
use crate::dichotomy::check_hyperbolic;
use crate::error::{Error, Result};
use crate::harness::{canonical_json, demo_domain_noninclusion, run_sweep, SweepKnob, SweepSpec};
use crate::linops::{semigroup_bound, spectral_norm, OperatorMatrix};
use crate::models::{
    functional_bound_check, relative_bound_check, Eps3, PerturbationConfig, PerturbationFamily,
    ReactionDiffusionConfig, SpatialDisc,
};
use crate::yosida::{
    class_p_constant, semigroup_difference_bound, verify_bounded_perturbation_bound,
    yosida_distance, ClassPConfig, MuGridConfig,
};

/// Keys compared with absolute tolerance: spectral coordinates and rates
/// whose natural scale is near zero.
const ABSOLUTE_KEYS: [&str; 3] = ["re", "im", "alpha"];
const ABSOLUTE_TOL: f64 = 1e-8;
const RELATIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct RegressionSummary {
    pub computations: usize,
    pub fields_checked: usize,
    pub mismatches: Vec<String>,
    pub blessed: bool,
}

fn seeded_matrix(seed: u64, dim: usize) -> DMatrix<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

fn unit_direction(seed: u64, dim: usize) -> DMatrix<Complex64> {
    let raw = seeded_matrix(seed, dim);
    let norm = spectral_norm(&raw);
    raw / Complex64::new(norm, 0.0)
}

fn stable_operator(seed: u64, dim: usize, abscissa_target: f64) -> Result<OperatorMatrix> {
    let raw = OperatorMatrix::new(seeded_matrix(seed, dim), "seeded operator")?;
    let shift = raw.spectral_abscissa()? - abscissa_target;
    OperatorMatrix::new(
        raw.matrix() - DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(shift, 0.0),
        "stable operator",
    )
}

fn to_value<T: Serialize>(report: &T) -> Result<Value> {
    serde_json::to_value(report).map_err(|e| Error::bad_input(format!("serialization: {e}")))
}

fn bounded_pair_distance() -> Result<Value> {
    let a = OperatorMatrix::new(seeded_matrix(41, 4), "left operator")?;
    let b = OperatorMatrix::new(
        a.matrix() + unit_direction(42, 4) * Complex64::new(0.1, 0.0),
        "right operator",
    )?;
    let estimate = yosida_distance(&a, &b, &MuGridConfig::default())?;
    Ok(json!({
        "value": estimate.value,
        "norm_difference": (&a - &b).norm2(),
        "converged": estimate.converged,
    }))
}

fn perturbation_bound() -> Result<Value> {
    let a = stable_operator(43, 5, -0.5)?;
    let bound = semigroup_bound(&a, 6.0, 96)?;
    let c = OperatorMatrix::new(
        unit_direction(44, 5) * Complex64::new(0.05, 0.0),
        "bounded perturbation",
    )?;
    let report = verify_bounded_perturbation_bound(&a, &c, &bound, &MuGridConfig::default())?;
    Ok(json!({
        "lhs": report.lhs,
        "rhs": report.rhs,
        "m": bound.m,
        "holds": report.holds,
    }))
}

fn integrable_class_bound() -> Result<Value> {
    let a = OperatorMatrix::diagonal_real(&[-1.0, -1.0, -1.0]);
    let c = OperatorMatrix::diagonal_real(&[0.25, 0.25, 0.25]);
    let report = class_p_constant(&a, &c, &ClassPConfig::default(), &MuGridConfig::default())?;
    to_value(&report)
}

fn semigroup_difference() -> Result<Value> {
    let a = stable_operator(45, 4, -0.6)?;
    let b = OperatorMatrix::new(
        a.matrix() + unit_direction(46, 4) * Complex64::new(0.02, 0.0),
        "right operator",
    )?;
    let ba = semigroup_bound(&a, 4.0, 96)?;
    let bb = semigroup_bound(&b, 4.0, 96)?;
    let report = semigroup_difference_bound(
        &a,
        &b,
        &[0.25, 0.5, 1.0, 2.0],
        ba.m.max(bb.m),
        ba.omega.max(bb.omega),
        &MuGridConfig::default(),
    )?;
    to_value(&report)
}

fn saddle_dichotomy() -> Result<Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let raw = DMatrix::<f64>::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
    let q = raw.qr().q().map(|x| Complex64::new(x, 0.0));
    let d = OperatorMatrix::diagonal_real(&[-1.0, -2.0, 0.5, 1.5]);
    let g = OperatorMatrix::new(&q * d.matrix() * q.transpose(), "saddle generator")?;
    let report = check_hyperbolic(&g)?;
    Ok(json!({
        "gap": report.gap,
        "N": report.n_constant,
        "alpha": report.alpha,
    }))
}

fn delay_rightmost_root() -> Result<Value> {
    let sys = DelaySystem::new(
        OperatorMatrix::zeros(1),
        1.0,
        OperatorMatrix::diagonal_real(&[0.5]),
        Vec::new(),
    )?;
    let gen = assemble_generator(&sys, 20)?;
    let top = gen
        .g
        .eigenvalues()?
        .iter()
        .copied()
        .max_by(|x, y| x.re.total_cmp(&y.re))
        .expect("collocation spectrum is nonempty");
    Ok(json!({ "re": top.re, "im": top.im }))
}

fn generator_distance() -> Result<Value> {
    let cfg = ReactionDiffusionConfig::new(1.0, 0.5, 1.0, 3, SpatialDisc::Modal)?;
    let base = assemble_generator(&cfg.build_unperturbed(), 10)?;
    let pert = PerturbationConfig::new(0.0, 0.0, Eps3::Constant(0.05), Vec::new(), 0.0)?;
    let other = assemble_generator(
        &cfg.build_perturbed(&pert, PerturbationFamily::DriftPotentialKernel)?,
        10,
    )?;
    let report = generator_yosida_distance(&base, &other)?;
    to_value(&report)
}

fn sufficient_grid() -> Result<Value> {
    let mut rows = Vec::new();
    for &a in &[0.5, 1.0, 2.0] {
        for &r in &[0.5, 1.0, 2.0] {
            for pick in 0..3 {
                let b = match pick {
                    0 => 0.1,
                    1 => 0.5 / r,
                    _ => 0.9 / r,
                };
                let cfg = ReactionDiffusionConfig::new(a, b, r, 4, SpatialDisc::Modal)?;
                let report = dichotomy_of_delay_system(&cfg.build_unperturbed(), None, 10)?;
                rows.push(json!({
                    "a": a,
                    "b": b,
                    "r": r,
                    "gap": report.gap,
                    "hyperbolic": report.hyperbolic,
                }));
            }
        }
    }
    Ok(json!({ "rows": rows }))
}

fn domain_witness() -> Result<Value> {
    to_value(&demo_domain_noninclusion(0.3, 0.5)?)
}

fn relative_bound() -> Result<Value> {
    let cfg = ReactionDiffusionConfig::new(1.0, 0.5, 1.0, 1, SpatialDisc::FiniteDifference {
        m: 32,
    })?;
    let samples: Vec<f64> = (0..32).map(|j| 0.1 * ((j as f64) * 0.37).sin()).collect();
    let pert = PerturbationConfig::new(
        0.1,
        0.3,
        Eps3::Samples(samples),
        vec![(-0.25, 0.1), (-0.75, 0.05)],
        0.0,
    )?;
    let report = relative_bound_check(&cfg, &pert, 2024)?;
    let max_ratio = report
        .lhs_samples
        .iter()
        .zip(&report.rhs_samples)
        .map(|(l, r)| l / r)
        .fold(0.0_f64, f64::max);
    Ok(json!({
        "max_ratio": max_ratio,
        "holds": report.holds,
        "displayed_form_holds": report.displayed_form_holds,
    }))
}

fn functional_bound() -> Result<Value> {
    let cfg = ReactionDiffusionConfig::new(1.0, 0.5, 1.0, 4, SpatialDisc::Modal)?;
    let pert =
        PerturbationConfig::new(0.0, 0.0, Eps3::Constant(0.0), vec![(-0.5, 0.12)], 0.08)?;
    to_value(&functional_bound_check(&cfg, &pert)?)
}

fn eps3_sweep() -> Result<Value> {
    let base = ReactionDiffusionConfig::new(1.0, 0.5, 1.0, 3, SpatialDisc::Modal)?;
    let spec = SweepSpec::new(
        base,
        SweepKnob::Eps3Sup,
        vec![0.0, 0.001, 0.01, 0.05, 0.1],
        8,
        7,
    )?;
    to_value(&run_sweep(&spec)?)
}

/// The twelve computations in fixed order. Computed once per process; every
/// entry is fully determined by hard-coded seeds and parameters.
pub fn battery() -> Result<Vec<(&'static str, Value)>> {
    static CACHE: OnceLock<Result<Vec<(&'static str, Value)>>> = OnceLock::new();
    CACHE
        .get_or_init(|| {
            Ok(vec![
                ("bounded_pair_distance", bounded_pair_distance()?),
                ("perturbation_bound", perturbation_bound()?),
                ("integrable_class_bound", integrable_class_bound()?),
                ("semigroup_difference", semigroup_difference()?),
                ("saddle_dichotomy", saddle_dichotomy()?),
                ("delay_rightmost_root", delay_rightmost_root()?),
                ("generator_distance", generator_distance()?),
                ("sufficient_grid", sufficient_grid()?),
                ("domain_witness", domain_witness()?),
                ("relative_bound", relative_bound()?),
                ("functional_bound", functional_bound()?),
                ("eps3_sweep", eps3_sweep()?),
            ])
        })
        .clone()
}

fn float_matches(leaf: Option<&str>, baseline: f64, fresh: f64) -> bool {
    if leaf.is_some_and(|k| ABSOLUTE_KEYS.contains(&k)) {
        (baseline - fresh).abs() <= ABSOLUTE_TOL
    } else {
        (baseline - fresh).abs() <= RELATIVE_TOL * (1.0 + baseline.abs())
    }
}

fn compare_value(
    path: &str,
    leaf: Option<&str>,
    baseline: &Value,
    fresh: &Value,
    fields: &mut usize,
    mismatches: &mut Vec<String>,
) {
    match (baseline, fresh) {
        (Value::Object(b), Value::Object(f)) => {
            for (key, bv) in b {
                match f.get(key) {
                    Some(fv) => compare_value(
                        &format!("{path}.{key}"),
                        Some(key),
                        bv,
                        fv,
                        fields,
                        mismatches,
                    ),
                    None => mismatches.push(format!("{path}.{key}: missing from this run")),
                }
            }
            for key in f.keys() {
                if !b.contains_key(key) {
                    mismatches.push(format!("{path}.{key}: not in the baseline"));
                }
            }
        }
        (Value::Array(b), Value::Array(f)) => {
            if b.len() != f.len() {
                mismatches.push(format!("{path}: length {} vs {}", b.len(), f.len()));
                return;
            }
            for (k, (bv, fv)) in b.iter().zip(f).enumerate() {
                compare_value(&format!("{path}[{k}]"), leaf, bv, fv, fields, mismatches);
            }
        }
        (Value::Number(b), Value::Number(f)) => {
            *fields += 1;
            let matches = if !b.is_f64() && !f.is_f64() {
                b == f
            } else {
                match (b.as_f64(), f.as_f64()) {
                    (Some(bx), Some(fx)) => float_matches(leaf, bx, fx),
                    _ => false,
                }
            };
            if !matches {
                mismatches.push(format!("{path}: {b} vs {f}"));
            }
        }
        (Value::Bool(b), Value::Bool(f)) => {
            *fields += 1;
            if b != f {
                mismatches.push(format!("{path}: {b} vs {f}"));
            }
        }
        (Value::String(b), Value::String(f)) => {
            *fields += 1;
            if b != f {
                mismatches.push(format!("{path}: {b:?} vs {f:?}"));
            }
        }
        (Value::Null, Value::Null) => *fields += 1,
        (b, f) => mismatches.push(format!("{path}: type changed, {b} vs {f}")),
    }
}

/// Runs the battery and either blesses `baseline_dir` with canonical JSON
/// files (one per computation) or compares against the files already there.
/// Comparison never writes; a missing baseline is an error telling the
/// caller to bless first.
pub fn regression_suite(baseline_dir: &Path, bless: bool) -> Result<RegressionSummary> {
    let battery = battery()?;
    if bless {
        std::fs::create_dir_all(baseline_dir)
            .map_err(|e| Error::bad_input(format!("{}: {e}", baseline_dir.display())))?;
        for (name, value) in &battery {
            let path = baseline_dir.join(format!("{name}.json"));
            std::fs::write(&path, canonical_json(value) + "\n")
                .map_err(|e| Error::bad_input(format!("{}: {e}", path.display())))?;
        }
        return Ok(RegressionSummary {
            computations: battery.len(),
            fields_checked: 0,
            mismatches: Vec::new(),
            blessed: true,
        });
    }
    let mut fields_checked = 0;
    let mut mismatches = Vec::new();
    for (name, value) in &battery {
        let path = baseline_dir.join(format!("{name}.json"));
        let text = std::fs::read_to_string(&path).map_err(|e| {
            Error::bad_input(format!(
                "{}: {e}; record a baseline with --bless first",
                path.display()
            ))
        })?;
        let baseline: Value = serde_json::from_str(&text)
            .map_err(|e| Error::bad_input(format!("{}: {e}", path.display())))?;
        compare_value(name, None, &baseline, value, &mut fields_checked, &mut mismatches);
    }
    Ok(RegressionSummary {
        computations: battery.len(),
        fields_checked,
        mismatches,
        blessed: false,
    })
}
