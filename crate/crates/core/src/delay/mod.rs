//! Delay equations u'(t) = A u(t) + B u_t on the collocated phase space:
//! generator assembly, characteristic roots, the resolvent factorization,
//! dichotomy verdicts for delay systems, and the generator-level distance
//! bound d_Y(G0, G1) <= 2 ||B0 - B1|| + d_Y(A0, A1).

pub mod charroots;
pub mod cheb;
pub mod generator;
pub mod resolvent_fj;

pub use charroots::{axis_free, char_roots_rd, scalar_delay_roots, CharRoot, StripConfig};
pub use generator::{assemble_generator, DelaySystem, DiscretizedGenerator, DIMENSION_CAP};
pub use resolvent_fj::resolvent_via_f_j;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dichotomy::{check_hyperbolic, DichotomyReport};
use crate::error::{Error, Result};
use crate::linops::OperatorMatrix;
use crate::yosida::{yosida_distance, MuGridConfig};

/// Characteristic roots this close to the imaginary axis void hyperbolicity
/// in the root-scan verdict.
pub const AXIS_TOL: f64 = 1e-8;

/// Dead band for the discretized-vs-analytic cross-check. A conflict is
/// raised only when both sides are confident: the discretized gap must exceed
/// CONFIDENT_GAP before an axis root may contradict it, and every scanned
/// root must keep |Re| above CONFIDENT_AXIS before an on-circle discretized
/// eigenvalue may contradict them. Inside the band the verdicts may
/// legitimately straddle the threshold by discretization error.
const CONFIDENT_GAP: f64 = 1e-5;
const CONFIDENT_AXIS: f64 = 1e-4;

enum Path {
    /// A, B_point and every kernel weight are exactly diagonal: the system
    /// splits into scalar equations in the standard basis.
    Diagonal(Vec<DelaySystem>),
    /// A is normal and the functional coefficients are exact scalar
    /// multiples of the identity: the eigenbasis of A splits the system.
    Unitary(DMatrix<Complex64>, Vec<DelaySystem>),
    Dense,
}

fn exact_diagonal(m: &DMatrix<Complex64>) -> Option<Vec<Complex64>> {
    let zero = Complex64::new(0.0, 0.0);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j && m[(i, j)] != zero {
                return None;
            }
        }
    }
    Some((0..m.nrows()).map(|i| m[(i, i)]).collect())
}

fn exact_scalar(m: &DMatrix<Complex64>) -> Option<Complex64> {
    let diag = exact_diagonal(m)?;
    let first = diag[0];
    diag.iter().all(|z| *z == first).then_some(first)
}

fn is_normal(m: &DMatrix<Complex64>) -> bool {
    let aah = m * m.adjoint();
    let aha = m.adjoint() * m;
    (aah - aha).norm() <= 1e-12 * (1.0 + m.norm() * m.norm())
}

fn scalar_subsystem(
    sys: &DelaySystem,
    a_k: Complex64,
    b_k: Complex64,
    atoms_k: &[(f64, Complex64)],
) -> Result<DelaySystem> {
    DelaySystem::new(
        OperatorMatrix::from_complex(1, &[a_k])?,
        sys.r,
        OperatorMatrix::from_complex(1, &[b_k])?,
        atoms_k
            .iter()
            .map(|(theta, w)| Ok((*theta, OperatorMatrix::from_complex(1, &[*w])?)))
            .collect::<Result<Vec<_>>>()?,
    )
}

fn classify(sys: &DelaySystem) -> Result<Path> {
    let a_diag = exact_diagonal(sys.a.matrix());
    let b_diag = exact_diagonal(sys.b_point.matrix());
    let kernel_diags: Option<Vec<Vec<Complex64>>> = sys
        .b_kernel
        .iter()
        .map(|(_, w)| exact_diagonal(w.matrix()))
        .collect();
    if let (Some(a_diag), Some(b_diag), Some(kernel_diags)) = (&a_diag, &b_diag, &kernel_diags) {
        let mut scalars = Vec::with_capacity(sys.state_dim());
        for k in 0..sys.state_dim() {
            let atoms: Vec<(f64, Complex64)> = sys
                .b_kernel
                .iter()
                .zip(kernel_diags)
                .map(|((theta, _), diag)| (*theta, diag[k]))
                .collect();
            scalars.push(scalar_subsystem(sys, a_diag[k], b_diag[k], &atoms)?);
        }
        return Ok(Path::Diagonal(scalars));
    }

    let b_scalar = exact_scalar(sys.b_point.matrix());
    let kernel_scalars: Option<Vec<Complex64>> = sys
        .b_kernel
        .iter()
        .map(|(_, w)| exact_scalar(w.matrix()))
        .collect();
    if let (Some(b_scalar), Some(kernel_scalars)) = (b_scalar, kernel_scalars) {
        if is_normal(sys.a.matrix()) {
            let schur = sys.a.schur()?;
            let atoms: Vec<(f64, Complex64)> = sys
                .b_kernel
                .iter()
                .zip(&kernel_scalars)
                .map(|((theta, _), w)| (*theta, *w))
                .collect();
            let mut scalars = Vec::with_capacity(sys.state_dim());
            for k in 0..sys.state_dim() {
                scalars.push(scalar_subsystem(sys, schur.t[(k, k)], b_scalar, &atoms)?);
            }
            return Ok(Path::Unitary(schur.q.clone(), scalars));
        }
    }
    Ok(Path::Dense)
}

/// Scans characteristic roots in a thin strip around the imaginary axis and
/// demands agreement with the discretized verdict, up to the dead band.
fn cross_validate(
    mode_index: usize,
    labels: Option<&[u32]>,
    scalar_sys: &DelaySystem,
    report: &DichotomyReport,
) -> Result<()> {
    let alpha = scalar_sys.a.matrix()[(0, 0)];
    let mut atoms: Vec<(f64, Complex64)> =
        vec![(-scalar_sys.r, scalar_sys.b_point.matrix()[(0, 0)])];
    for (theta, w) in &scalar_sys.b_kernel {
        atoms.push((*theta, w.matrix()[(0, 0)]));
    }
    let budget: f64 = atoms.iter().map(|(_, w)| w.norm()).sum();
    let strip = StripConfig {
        sigma_min: -0.5,
        sigma_max: 0.5,
        omega_max: alpha.norm() + budget + 1.0,
    };
    let roots = scalar_delay_roots(alpha, &atoms, &strip)?;
    let near_axis = roots.iter().any(|rt| rt.lambda.re.abs() <= AXIS_TOL);
    let clear_of_axis = roots.iter().all(|rt| rt.lambda.re.abs() > CONFIDENT_AXIS);
    let mode = match labels {
        Some(ns) => format!("mode {} (n = {})", mode_index, ns[mode_index]),
        None => format!("mode {mode_index}"),
    };
    if report.hyperbolic && report.gap > CONFIDENT_GAP && near_axis {
        let res: Vec<String> = roots
            .iter()
            .map(|rt| format!("{:.3e}", rt.lambda.re))
            .collect();
        return Err(Error::DiscretizationInconsistency {
            detail: format!(
                "{mode}: discretized circle gap {:.3e} claims hyperbolic, but the \
                 characteristic scan finds real parts [{}]",
                report.gap,
                res.join(", ")
            ),
        });
    }
    if !report.hyperbolic && clear_of_axis {
        let nearest = roots
            .iter()
            .map(|rt| rt.lambda.re.abs())
            .fold(f64::INFINITY, f64::min);
        return Err(Error::DiscretizationInconsistency {
            detail: format!(
                "{mode}: discretized spectrum touches the unit circle (gap {:.3e}), \
                 but every characteristic root keeps |Re| >= {nearest:.3e}",
                report.gap
            ),
        });
    }
    Ok(())
}

/// P for the decoupled system: sum over modes of P_k placed on the mode's
/// state direction. `basis` column k is that direction; None means the
/// standard basis.
fn assemble_projection(
    reports: &[DichotomyReport],
    basis: Option<&DMatrix<Complex64>>,
    n_state: usize,
    n_nodes: usize,
) -> Result<OperatorMatrix> {
    let dim = n_state * n_nodes;
    let mut p = DMatrix::<Complex64>::zeros(dim, dim);
    for (k, rep) in reports.iter().enumerate() {
        let pk = rep
            .projection
            .as_ref()
            .expect("merged path only reaches here when every mode is hyperbolic")
            .matrix();
        match basis {
            None => {
                for i in 0..n_nodes {
                    for j in 0..n_nodes {
                        p[(i * n_state + k, j * n_state + k)] = pk[(i, j)];
                    }
                }
            }
            Some(q) => {
                let qk = q.column(k);
                for i in 0..n_nodes {
                    for j in 0..n_nodes {
                        let c = pk[(i, j)];
                        if c != Complex64::new(0.0, 0.0) {
                            for s in 0..n_state {
                                for t in 0..n_state {
                                    p[(i * n_state + s, j * n_state + t)] +=
                                        c * qk[s] * qk[t].conj();
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    OperatorMatrix::new(p, "dichotomy projection")
}

fn merged_verdict(
    sys: &DelaySystem,
    scalars: &[DelaySystem],
    basis: Option<&DMatrix<Complex64>>,
    labels: Option<&[u32]>,
    n: usize,
) -> Result<DichotomyReport> {
    let mut reports = Vec::with_capacity(scalars.len());
    for (k, scalar_sys) in scalars.iter().enumerate() {
        let gen = assemble_generator(scalar_sys, n)?;
        let report = check_hyperbolic(&gen.g)?;
        cross_validate(k, labels, scalar_sys, &report)?;
        reports.push(report);
    }
    let gap = reports.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min);
    if reports.iter().any(|r| !r.hyperbolic) {
        return Ok(DichotomyReport {
            hyperbolic: false,
            gap,
            projection: None,
            n_constant: None,
            alpha: None,
            t_grid_checked: Vec::new(),
        });
    }
    // Unitary decoupling: the flow is the direct sum of the mode flows, so
    // each merged constant is the worst mode's.
    let alpha = reports
        .iter()
        .map(|r| r.alpha.expect("hyperbolic mode carries alpha"))
        .fold(f64::INFINITY, f64::min);
    let n_constant = reports
        .iter()
        .map(|r| r.n_constant.expect("hyperbolic mode carries N"))
        .fold(1.0_f64, f64::max);
    let projection = assemble_projection(&reports, basis, sys.state_dim(), n + 1)?;
    Ok(DichotomyReport {
        hyperbolic: true,
        gap,
        projection: Some(projection),
        n_constant: Some(n_constant),
        alpha: Some(alpha),
        t_grid_checked: reports[0].t_grid_checked.clone(),
    })
}

/// Dichotomy verdict for a delay system. Diagonal systems (and normal-A
/// systems with scalar delay coefficients) are split into scalar equations,
/// each checked separately and cross-validated against a characteristic-root
/// scan of the axis; the constants then merge as the worst mode's. Coupled
/// systems are checked on the fully assembled generator.
///
/// `modes` optionally labels the diagonal entries (spatial mode numbers) for
/// reporting; it requires the diagonal form.
pub fn dichotomy_of_delay_system(
    sys: &DelaySystem,
    modes: Option<&[u32]>,
    n: usize,
) -> Result<DichotomyReport> {
    let dim = sys.state_dim() * (n + 1);
    if dim > DIMENSION_CAP {
        return Err(Error::TooLarge {
            dim,
            cap: DIMENSION_CAP,
        });
    }
    if let Some(labels) = modes {
        if labels.len() != sys.state_dim() {
            return Err(Error::bad_input(format!(
                "{} mode labels for state dimension {}",
                labels.len(),
                sys.state_dim()
            )));
        }
    }
    match classify(sys)? {
        Path::Diagonal(scalars) => merged_verdict(sys, &scalars, None, modes, n),
        Path::Unitary(q, scalars) => {
            if modes.is_some() {
                return Err(Error::bad_input(
                    "mode labels require an exactly diagonal system",
                ));
            }
            merged_verdict(sys, &scalars, Some(&q), None, n)
        }
        Path::Dense => {
            if modes.is_some() {
                return Err(Error::bad_input(
                    "mode labels require an exactly diagonal system",
                ));
            }
            let gen = assemble_generator(sys, n)?;
            check_hyperbolic(&gen.g)
        }
    }
}

/// Both generator-level Yosida distances and the functional distance, with
/// the perturbation bound dY_G <= 2 dY_B + dY_A checked at tolerance
/// 1e-3 (1 + dY_A + dY_B).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorDistanceReport {
    pub dy_g: f64,
    pub dy_a: f64,
    /// ||B0_point - B1_point|| plus kernel atom differences, atoms matched
    /// by exact node; unmatched atoms count at full weight.
    pub dy_b: f64,
    pub tol: f64,
    pub bound_holds: bool,
}

fn functional_distance(s0: &DelaySystem, s1: &DelaySystem) -> f64 {
    let mut total = (&s0.b_point - &s1.b_point).norm2();
    for (theta, w0) in &s0.b_kernel {
        match s1.b_kernel.iter().find(|(t, _)| t == theta) {
            Some((_, w1)) => total += (w0 - w1).norm2(),
            None => total += w0.norm2(),
        }
    }
    for (theta, w1) in &s1.b_kernel {
        if !s0.b_kernel.iter().any(|(t, _)| t == theta) {
            total += w1.norm2();
        }
    }
    total
}

fn settled_distance(a: &OperatorMatrix, b: &OperatorMatrix, what: &str) -> Result<f64> {
    let estimate = yosida_distance(a, b, &MuGridConfig::default())?;
    if !estimate.converged {
        return Err(Error::InconclusiveVerification {
            detail: format!(
                "{what} distance tail not settled: slope {:.3e}, spread {:.3e}",
                estimate.tail_slope, estimate.tail_spread
            ),
        });
    }
    Ok(estimate.value)
}

/// Compares two discretized generators on a shared mesh: dY_G against the
/// bound 2 dY_B + dY_A.
pub fn generator_yosida_distance(
    gen0: &DiscretizedGenerator,
    gen1: &DiscretizedGenerator,
) -> Result<GeneratorDistanceReport> {
    if gen0.system.state_dim() != gen1.system.state_dim() {
        return Err(Error::MeshMismatch {
            detail: format!(
                "state dimensions {} vs {}",
                gen0.system.state_dim(),
                gen1.system.state_dim()
            ),
        });
    }
    if gen0.system.r != gen1.system.r {
        return Err(Error::MeshMismatch {
            detail: format!("delays {} vs {}", gen0.system.r, gen1.system.r),
        });
    }
    if gen0.mesh != gen1.mesh {
        return Err(Error::MeshMismatch {
            detail: format!(
                "collocation meshes differ ({} vs {} nodes)",
                gen0.mesh.len(),
                gen1.mesh.len()
            ),
        });
    }
    let dy_a = settled_distance(&gen0.system.a, &gen1.system.a, "state operator")?;
    let dy_b = functional_distance(&gen0.system, &gen1.system);
    let dy_g = settled_distance(&gen0.g, &gen1.g, "generator")?;
    let tol = 1e-3 * (1.0 + dy_a + dy_b);
    Ok(GeneratorDistanceReport {
        dy_g,
        dy_a,
        dy_b,
        tol,
        bound_holds: dy_g <= 2.0 * dy_b + dy_a + tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_system(a: f64, b: f64, r: f64, modes: &[u32]) -> DelaySystem {
        let a_diag: Vec<f64> = modes.iter().map(|n| -((n * n) as f64) - a).collect();
        let b_diag = vec![-b; modes.len()];
        DelaySystem::new(
            OperatorMatrix::diagonal_real(&a_diag),
            r,
            OperatorMatrix::diagonal_real(&b_diag),
            Vec::new(),
        )
        .unwrap()
    }

    fn scalar_system(a: f64, b: f64, r: f64) -> DelaySystem {
        DelaySystem::new(
            OperatorMatrix::from_real(1, &[a]).unwrap(),
            r,
            OperatorMatrix::from_real(1, &[b]).unwrap(),
            Vec::new(),
        )
        .unwrap()
    }

    #[test]
    fn stable_modal_family_is_hyperbolic_with_identity_projection() {
        let modes: Vec<u32> = (1..=10).collect();
        let sys = diag_system(1.0, 0.5, 1.0, &modes);
        let report = dichotomy_of_delay_system(&sys, Some(&modes), 16).unwrap();
        assert!(report.hyperbolic);
        assert!(report.gap > 0.05, "gap {}", report.gap);
        assert!(report.alpha.unwrap() > 0.0);
        let p = report.projection.unwrap();
        let eye = DMatrix::<Complex64>::identity(p.dim(), p.dim());
        assert!((p.matrix() - eye).norm() < 1e-8, "projection not identity");
    }

    #[test]
    fn delay_free_axis_eigenvalue_defeats_hyperbolicity() {
        // a = -1, n = 1 makes the modal drift -n^2 - a = 0 with no feedback.
        let sys = diag_system(-1.0, 0.0, 1.0, &[1]);
        let report = dichotomy_of_delay_system(&sys, Some(&[1]), 12).unwrap();
        assert!(!report.hyperbolic);
        assert!(report.gap < 1e-10);
        assert!(report.projection.is_none());
        assert!(report.t_grid_checked.is_empty());
    }

    #[test]
    fn positive_feedback_splits_one_unstable_direction() {
        // x'(t) = x(t-1): rightmost root 0.5671 (positive), the rest stable.
        let sys = scalar_system(0.0, 1.0, 1.0);
        let report = dichotomy_of_delay_system(&sys, None, 20).unwrap();
        assert!(report.hyperbolic);
        let p = report.projection.as_ref().unwrap();
        let trace: Complex64 = (0..p.dim()).map(|i| p.matrix()[(i, i)]).sum();
        assert!(
            (trace.re - (p.dim() as f64 - 1.0)).abs() < 1e-6,
            "trace {trace}"
        );
        // alpha is capped by the unstable root's expansion rate.
        let alpha = report.alpha.unwrap();
        assert!((alpha - 0.567143290409784).abs() < 1e-3, "alpha {alpha}");
    }

    #[test]
    fn normal_coupling_decouples_and_matches_the_dense_verdict() {
        let sys = DelaySystem::new(
            OperatorMatrix::from_real(2, &[-2.0, 1.0, 1.0, -2.0]).unwrap(),
            1.0,
            OperatorMatrix::identity(2).scaled_re(-0.5),
            Vec::new(),
        )
        .unwrap();
        let split = dichotomy_of_delay_system(&sys, None, 12).unwrap();
        let dense = check_hyperbolic(&assemble_generator(&sys, 12).unwrap().g).unwrap();
        assert_eq!(split.hyperbolic, dense.hyperbolic);
        assert!((split.gap - dense.gap).abs() < 1e-9);
        assert!((split.alpha.unwrap() - dense.alpha.unwrap()).abs() < 1e-9);
        // The merged certificate may be looser, never tighter than needed.
        assert!(split.n_constant.unwrap() >= dense.n_constant.unwrap() - 1e-9);
        let dp = (split.projection.unwrap().matrix()
            - dense.projection.unwrap().matrix())
        .norm();
        assert!(dp < 1e-6, "projection deviation {dp}");
    }

    #[test]
    fn coupled_nonnormal_system_takes_the_dense_path() {
        let sys = DelaySystem::new(
            OperatorMatrix::from_real(2, &[-1.0, 0.3, 0.0, -2.0]).unwrap(),
            1.0,
            OperatorMatrix::from_real(2, &[-0.05, 0.02, 0.0, -0.05]).unwrap(),
            Vec::new(),
        )
        .unwrap();
        let report = dichotomy_of_delay_system(&sys, None, 10).unwrap();
        assert!(report.hyperbolic);
        let p = report.projection.unwrap();
        let trace: Complex64 = (0..p.dim()).map(|i| p.matrix()[(i, i)]).sum();
        assert!((trace.re - p.dim() as f64).abs() < 1e-6, "all stable");
    }

    #[test]
    fn mode_labels_must_fit_the_system() {
        let sys = diag_system(1.0, 0.5, 1.0, &[1, 2]);
        assert!(dichotomy_of_delay_system(&sys, Some(&[1]), 8).is_err());
        let coupled = DelaySystem::new(
            OperatorMatrix::from_real(2, &[-2.0, 1.0, 1.0, -2.0]).unwrap(),
            1.0,
            OperatorMatrix::identity(2).scaled_re(-0.5),
            Vec::new(),
        )
        .unwrap();
        assert!(dichotomy_of_delay_system(&coupled, Some(&[1, 2]), 8).is_err());
    }

    #[test]
    fn oversized_discretization_is_rejected() {
        let sys = diag_system(1.0, 0.5, 1.0, &(1..=200).collect::<Vec<u32>>());
        assert!(matches!(
            dichotomy_of_delay_system(&sys, None, 24),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn identical_generators_have_zero_distances() {
        let gen = assemble_generator(&scalar_system(-1.0, 0.5, 1.0), 12).unwrap();
        let report = generator_yosida_distance(&gen, &gen).unwrap();
        assert!(report.dy_g < 1e-12);
        assert!(report.dy_a < 1e-12);
        assert_eq!(report.dy_b, 0.0);
        assert!(report.bound_holds);
    }

    #[test]
    fn point_coefficient_shift_obeys_the_two_sided_bound() {
        let gen0 = assemble_generator(&scalar_system(-1.0, 0.5, 1.0), 16).unwrap();
        let gen1 = assemble_generator(&scalar_system(-1.0, 0.55, 1.0), 16).unwrap();
        let report = generator_yosida_distance(&gen0, &gen1).unwrap();
        assert!((report.dy_b - 0.05).abs() < 1e-12);
        assert!(report.dy_a < 1e-12);
        // The difference lives in the splicing row's point-evaluation column,
        // so dY_G is exactly the coefficient shift; the bound allows twice.
        assert!((report.dy_g - 0.05).abs() < 1e-6, "dy_g {}", report.dy_g);
        assert!(report.bound_holds);
    }

    #[test]
    fn state_operator_shift_obeys_the_bound() {
        let gen0 = assemble_generator(&scalar_system(-1.0, 0.5, 1.0), 16).unwrap();
        let gen1 = assemble_generator(&scalar_system(-0.98, 0.5, 1.0), 16).unwrap();
        let report = generator_yosida_distance(&gen0, &gen1).unwrap();
        assert!((report.dy_a - 0.02).abs() < 1e-6);
        assert_eq!(report.dy_b, 0.0);
        assert!((report.dy_g - 0.02).abs() < 1e-6, "dy_g {}", report.dy_g);
        assert!(report.bound_holds);
    }

    #[test]
    fn kernel_atoms_match_by_exact_node() {
        let w = |v: f64| OperatorMatrix::from_real(1, &[v]).unwrap();
        let base = scalar_system(-1.0, 0.5, 1.0);
        let sys0 = DelaySystem::new(
            base.a.clone(),
            1.0,
            base.b_point.clone(),
            vec![(-0.5, w(0.1))],
        )
        .unwrap();
        let sys1 = DelaySystem::new(
            base.a.clone(),
            1.0,
            base.b_point.clone(),
            vec![(-0.5, w(0.15)), (-0.25, w(0.05))],
        )
        .unwrap();
        let gen0 = assemble_generator(&sys0, 12).unwrap();
        let gen1 = assemble_generator(&sys1, 12).unwrap();
        let report = generator_yosida_distance(&gen0, &gen1).unwrap();
        assert!((report.dy_b - 0.1).abs() < 1e-12, "dy_b {}", report.dy_b);
        assert!(report.bound_holds);
    }

    #[test]
    fn mismatched_meshes_are_rejected() {
        let gen0 = assemble_generator(&scalar_system(-1.0, 0.5, 1.0), 8).unwrap();
        let gen1 = assemble_generator(&scalar_system(-1.0, 0.5, 1.0), 12).unwrap();
        assert!(matches!(
            generator_yosida_distance(&gen0, &gen1),
            Err(Error::MeshMismatch { .. })
        ));
        let gen2 = assemble_generator(&scalar_system(-1.0, 0.5, 2.0), 8).unwrap();
        assert!(matches!(
            generator_yosida_distance(&gen0, &gen2),
            Err(Error::MeshMismatch { .. })
        ));
    }
}
