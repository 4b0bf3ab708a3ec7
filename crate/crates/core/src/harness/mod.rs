//! Experiment orchestration: perturbation sweeps with persistence
//! accounting, the generator-domain witness, deterministic JSON and CSV
//! emission, configuration file schemas, and the regression battery.

pub mod regress;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::delay::{assemble_generator, generator_yosida_distance, DelaySystem};
use crate::dichotomy::persistence_margin;
use crate::error::{Error, Result};
use crate::linops::{matrix_exp, spectral_norm, OperatorMatrix};
use crate::models::{
    Eps3, PerturbationConfig, PerturbationFamily, ReactionDiffusionConfig, SpatialDisc,
};

pub use regress::{regression_suite, RegressionSummary};

/// Which scalar strength a sweep moves. The serialized names are part of the
/// config-file contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepKnob {
    /// Diffusion scaling of the drift family.
    #[serde(rename = "eps1")]
    Eps1,
    /// Constant potential shift.
    #[serde(rename = "eps3_sup")]
    Eps3Sup,
    /// Delayed-gradient strength.
    #[serde(rename = "eps5")]
    Eps5,
    /// Kernel variation, realized as one identity atom at theta = -r/2 with
    /// the knob value as weight.
    #[serde(rename = "var_eps4")]
    VarEps4,
    /// Feedback increase b -> b + value.
    #[serde(rename = "b_shift")]
    BShift,
    /// Dense state-operator shift of the given spectral norm along a seeded
    /// fixed direction.
    #[serde(rename = "A_shift_norm")]
    AShiftNorm,
}

impl SweepKnob {
    pub fn label(self) -> &'static str {
        match self {
            SweepKnob::Eps1 => "eps1",
            SweepKnob::Eps3Sup => "eps3_sup",
            SweepKnob::Eps5 => "eps5",
            SweepKnob::VarEps4 => "var_eps4",
            SweepKnob::BShift => "b_shift",
            SweepKnob::AShiftNorm => "A_shift_norm",
        }
    }
}

/// A perturbation sweep: the base equation, the knob, its grid of strengths,
/// the collocation order, and the seed for any random directions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: ReactionDiffusionConfig,
    pub knob: SweepKnob,
    /// Strictly increasing, all nonnegative.
    pub values: Vec<f64>,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
}

impl SweepSpec {
    pub fn new(
        base: ReactionDiffusionConfig,
        knob: SweepKnob,
        values: Vec<f64>,
        n: usize,
        seed: u64,
    ) -> Result<Self> {
        let spec = SweepSpec {
            base,
            knob,
            values,
            n,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::bad_input("sweep needs at least one knob value"));
        }
        for (k, v) in self.values.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::bad_input(format!(
                    "knob value {v} must be finite and nonnegative"
                )));
            }
            if k > 0 && self.values[k - 1] >= *v {
                return Err(Error::bad_input(format!(
                    "knob values must increase strictly ({} then {v})",
                    self.values[k - 1]
                )));
            }
        }
        Ok(())
    }
}

/// One sweep row. `t1_shift` is the time-one flow distance to the base,
/// recorded for the persistence accounting; the stable CSV columns are the
/// other six fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub knob_value: f64,
    #[serde(rename = "dY_A")]
    pub dy_a: f64,
    #[serde(rename = "dY_B")]
    pub dy_b: f64,
    #[serde(rename = "dY_G")]
    pub dy_g: f64,
    pub gap: f64,
    pub hyperbolic: bool,
    pub t1_shift: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub knob: SweepKnob,
    pub seed: u64,
    /// Largest time-one perturbation provably preserving hyperbolicity.
    pub base_margin: f64,
    /// Ordered by knob value.
    pub rows: Vec<SweepRow>,
    /// First knob value losing hyperbolicity, if any.
    pub breakpoint: Option<f64>,
    /// Rows with t1_shift below the margin; each was verified hyperbolic.
    pub margin_rows_checked: usize,
}

/// Worker pool honoring the YOSIDA_LAB_THREADS cap (unset or 0 means the
/// library default).
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let cap = thread_cap(std::env::var("YOSIDA_LAB_THREADS").ok().as_deref())?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cap)
        .build()
        .map_err(|e| Error::bad_input(format!("thread pool: {e}")))
}

fn thread_cap(raw: Option<&str>) -> Result<usize> {
    match raw {
        None => Ok(0),
        Some(text) => text
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::bad_input(format!("YOSIDA_LAB_THREADS {text:?}: {e}"))),
    }
}

/// Unit-spectral-norm direction for the dense state shift, fixed per seed so
/// the sweep moves along one ray.
fn shift_direction(seed: u64, dim: usize) -> DMatrix<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let norm = spectral_norm(&raw);
    raw / Complex64::new(norm, 0.0)
}

fn knob_system(spec: &SweepSpec, value: f64) -> Result<DelaySystem> {
    let zero = Eps3::Constant(0.0);
    match spec.knob {
        SweepKnob::Eps1 => spec.base.build_perturbed(
            &PerturbationConfig::new(value, 0.0, zero, Vec::new(), 0.0)?,
            PerturbationFamily::DriftPotentialKernel,
        ),
        SweepKnob::Eps3Sup => spec.base.build_perturbed(
            &PerturbationConfig::new(0.0, 0.0, Eps3::Constant(value), Vec::new(), 0.0)?,
            PerturbationFamily::DriftPotentialKernel,
        ),
        SweepKnob::Eps5 => spec.base.build_perturbed(
            &PerturbationConfig::new(0.0, 0.0, zero, Vec::new(), value)?,
            PerturbationFamily::DelayedGradientKernel,
        ),
        SweepKnob::VarEps4 => spec.base.build_perturbed(
            &PerturbationConfig::new(
                0.0,
                0.0,
                zero,
                vec![(-spec.base.r / 2.0, value)],
                0.0,
            )?,
            PerturbationFamily::DriftPotentialKernel,
        ),
        SweepKnob::BShift => {
            let mut cfg = spec.base.clone();
            cfg.b += value;
            Ok(cfg.build_unperturbed())
        }
        SweepKnob::AShiftNorm => {
            let sys = spec.base.build_unperturbed();
            if value == 0.0 {
                return Ok(sys);
            }
            let dir = shift_direction(spec.seed, sys.state_dim());
            let shifted = OperatorMatrix::new(
                sys.a.matrix() + dir * Complex64::new(value, 0.0),
                "state operator",
            )?;
            DelaySystem::new(shifted, sys.r, sys.b_point, sys.b_kernel)
        }
    }
}

/// Runs the sweep: per knob value, the perturbed system's Yosida distances to
/// the base, its dichotomy verdict and gap, and its time-one flow distance.
/// The base must be hyperbolic. Any row whose time-one shift stays below the
/// base persistence margin must come out hyperbolic; a violation would mean
/// the dichotomy machinery contradicted its own certificate and aborts the
/// sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let base_sys = spec.base.build_unperturbed();
    let base_gen = assemble_generator(&base_sys, spec.n)?;
    let base_report = crate::delay::dichotomy_of_delay_system(&base_sys, None, spec.n)?;
    if !base_report.hyperbolic {
        return Err(Error::BaseNotHyperbolic);
    }
    let base_margin = persistence_margin(&base_gen.g)?;
    let t1_base = matrix_exp(&base_gen.g, 1.0)?;

    let pool = thread_pool()?;
    let rows: Result<Vec<SweepRow>> = pool.install(|| {
        spec.values
            .par_iter()
            .map(|&value| {
                let sys = knob_system(spec, value)?;
                let gen = assemble_generator(&sys, spec.n)?;
                let distances = generator_yosida_distance(&base_gen, &gen)?;
                let verdict = crate::delay::dichotomy_of_delay_system(&sys, None, spec.n)?;
                let t1_shift =
                    spectral_norm(&(matrix_exp(&gen.g, 1.0)?.matrix() - t1_base.matrix()));
                Ok(SweepRow {
                    knob_value: value,
                    dy_a: distances.dy_a,
                    dy_b: distances.dy_b,
                    dy_g: distances.dy_g,
                    gap: verdict.gap,
                    hyperbolic: verdict.hyperbolic,
                    t1_shift,
                })
            })
            .collect()
    });
    let rows = rows?;

    let breakpoint = rows.iter().find(|r| !r.hyperbolic).map(|r| r.knob_value);
    let mut margin_rows_checked = 0;
    for row in &rows {
        if row.t1_shift < base_margin {
            margin_rows_checked += 1;
            if !row.hyperbolic {
                return Err(Error::DiscretizationInconsistency {
                    detail: format!(
                        "knob {} = {}: time-one shift {:.3e} below margin {:.3e} \
                         yet reported non-hyperbolic",
                        spec.knob.label(),
                        row.knob_value,
                        row.t1_shift,
                        base_margin
                    ),
                });
            }
        }
    }
    Ok(SweepResult {
        knob: spec.knob,
        seed: spec.seed,
        base_margin,
        rows,
        breakpoint,
        margin_rows_checked,
    })
}

/// Stable plot-ready CSV for a sweep: fixed header, one row per knob value,
/// floats at 17 significant digits.
pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::from("knob_value,dY_A,dY_B,dY_G,gap,hyperbolic\n");
    for row in &result.rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            row.knob_value, row.dy_a, row.dy_b, row.dy_g, row.gap, row.hyperbolic
        ));
    }
    out
}

/// Splicing residuals of one mesh function against two scalar delay
/// functionals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainWitnessReport {
    pub b0: f64,
    pub b1: f64,
    pub residual0: f64,
    pub residual1: f64,
}

/// Witness that generator domains of delay systems with different
/// functionals differ: phi(t) = 1 + (1 + t) b0 satisfies the domain
/// condition phi'(0) = b phi(-1) exactly for the coefficient b0 (residual at
/// rounding level), and misses it by |b0 - b1| for b1.
pub fn demo_domain_noninclusion(b0: f64, b1: f64) -> Result<DomainWitnessReport> {
    if !b0.is_finite() || !b1.is_finite() {
        return Err(Error::bad_input(format!(
            "coefficients ({b0}, {b1}) must be finite"
        )));
    }
    let order = 16;
    let residual = |b: f64| -> Result<f64> {
        let sys = DelaySystem::new(
            OperatorMatrix::zeros(1),
            1.0,
            OperatorMatrix::diagonal_real(&[b]),
            Vec::new(),
        )?;
        let gen = assemble_generator(&sys, order)?;
        let phi = DVector::from_iterator(
            gen.mesh.len(),
            gen.mesh
                .iter()
                .map(|&t| Complex64::new(1.0 + (1.0 + t) * b0, 0.0)),
        );
        gen.splicing_residual(&phi)
    };
    Ok(DomainWitnessReport {
        b0,
        b1,
        residual0: residual(b0)?,
        residual1: residual(b1)?,
    })
}

/// Canonical JSON: object keys in sorted order (serde_json's default map)
/// and every float printed as {:.16e}, so equal values give equal bytes.
pub fn canonical_json(value: &serde_json::Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &serde_json::Value, out: &mut String) {
    match value {
        serde_json::Value::Null => out.push_str("null"),
        serde_json::Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                let f = n.as_f64().expect("JSON number is i64, u64, or f64");
                out.push_str(&format!("{f:.16e}"));
            }
        }
        serde_json::Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("strings always serialize"));
        }
        serde_json::Value::Array(items) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        serde_json::Value::Object(map) => {
            out.push('{');
            for (k, (key, item)) in map.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("strings always serialize"));
                out.push(':');
                write_canonical(item, out);
            }
            out.push('}');
        }
    }
}

/// Serializes a report to canonical JSON with a trailing newline.
pub fn canonical_report<T: Serialize>(report: &T) -> Result<String> {
    let value = serde_json::to_value(report)
        .map_err(|e| Error::bad_input(format!("report serialization: {e}")))?;
    Ok(canonical_json(&value) + "\n")
}

/// Reads a TOML (.toml extension) or JSON (anything else) config file.
pub fn parse_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::bad_input(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| Error::bad_input(format!("{}: {e}", path.display())))
    } else {
        serde_json::from_str(&text)
            .map_err(|e| Error::bad_input(format!("{}: {e}", path.display())))
    }
}

fn default_order() -> usize {
    12
}

/// Flat model description accepted by the command line: base equation,
/// spatial path (exactly one of `n_modes` or `m`), optional perturbation
/// strengths, the family, and run parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub a: f64,
    pub b: f64,
    pub r: f64,
    #[serde(default)]
    pub n_modes: Option<usize>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub eps1: f64,
    #[serde(default)]
    pub eps2: f64,
    #[serde(default)]
    pub eps3_const: Option<f64>,
    #[serde(default)]
    pub eps3_samples: Option<Vec<f64>>,
    #[serde(default)]
    pub eps4_atoms: Vec<(f64, f64)>,
    #[serde(default)]
    pub eps5: f64,
    /// Defaults to the drift family, or the gradient family when eps5 is
    /// set.
    #[serde(default)]
    pub family: Option<PerturbationFamily>,
    #[serde(default = "default_order", rename = "N")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ModelFile {
    pub fn into_parts(
        self,
    ) -> Result<(
        ReactionDiffusionConfig,
        PerturbationConfig,
        PerturbationFamily,
        usize,
        u64,
    )> {
        let spatial = match (self.n_modes, self.m) {
            (Some(n_modes), None) => (n_modes, SpatialDisc::Modal),
            (None, Some(m)) => (1, SpatialDisc::FiniteDifference { m }),
            (Some(_), Some(_)) => {
                return Err(Error::bad_input("give n_modes or m, not both"));
            }
            (None, None) => {
                return Err(Error::bad_input(
                    "give n_modes (modal path) or m (difference path)",
                ));
            }
        };
        let cfg = ReactionDiffusionConfig::new(self.a, self.b, self.r, spatial.0, spatial.1)?;
        let eps3 = match (self.eps3_const, self.eps3_samples) {
            (Some(_), Some(_)) => {
                return Err(Error::bad_input("give eps3_const or eps3_samples, not both"));
            }
            (Some(c), None) => Eps3::Constant(c),
            (None, Some(s)) => Eps3::Samples(s),
            (None, None) => Eps3::Constant(0.0),
        };
        let pert = PerturbationConfig::new(self.eps1, self.eps2, eps3, self.eps4_atoms, self.eps5)?;
        let family = self.family.unwrap_or(if self.eps5 != 0.0 {
            PerturbationFamily::DelayedGradientKernel
        } else {
            PerturbationFamily::DriftPotentialKernel
        });
        Ok((cfg, pert, family, self.n, self.seed))
    }
}

/// Flat sweep description for the command line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepFile {
    pub a: f64,
    pub b: f64,
    pub r: f64,
    #[serde(default)]
    pub n_modes: Option<usize>,
    #[serde(default)]
    pub m: Option<usize>,
    pub knob: SweepKnob,
    pub values: Vec<f64>,
    #[serde(default = "default_order", rename = "N")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SweepFile {
    pub fn into_spec(self) -> Result<SweepSpec> {
        let spatial = match (self.n_modes, self.m) {
            (Some(n_modes), None) => (n_modes, SpatialDisc::Modal),
            (None, Some(m)) => (1, SpatialDisc::FiniteDifference { m }),
            (Some(_), Some(_)) => {
                return Err(Error::bad_input("give n_modes or m, not both"));
            }
            (None, None) => {
                return Err(Error::bad_input(
                    "give n_modes (modal path) or m (difference path)",
                ));
            }
        };
        let base = ReactionDiffusionConfig::new(self.a, self.b, self.r, spatial.0, spatial.1)?;
        SweepSpec::new(base, self.knob, self.values, self.n, self.seed)
    }
}
