//! Reaction-diffusion systems with one discrete delay on (0, pi), Dirichlet
//! ends: w_t = w_xx - a w - b w(., t - r). Two spatial realizations (exact
//! sine modes, or second differences on an interior grid) produce
//! [`DelaySystem`] values for the dichotomy and distance machinery, together
//! with two perturbation families, the relative operator bound for the state
//! perturbation, and the weighted-norm bound for the functional perturbation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::delay::DelaySystem;
use crate::error::{Error, Result};
use crate::linops::{fractional_power, spectral_norm, OperatorMatrix};

/// Fewest interior grid points accepted on the difference path.
pub const MIN_DIFFERENCE_POINTS: usize = 8;
/// Vectors sampled by [`relative_bound_check`].
pub const RELATIVE_BOUND_SAMPLES: usize = 200;
/// Multiplicative headroom granted to the functional bound for the
/// discretization of the embedding constants.
pub const FUNCTIONAL_HEADROOM: f64 = 0.05;
/// Constant of the first-derivative interpolation inequality
/// ||y'|| <= 18 ||y|| + (1/2) ||y''|| on the Dirichlet interval; it prices
/// the drift term against the diffusion.
const FIRST_DERIVATIVE_CONSTANT: f64 = 18.0;
/// Additive slack for the sampled inequalities.
const CHECK_SLACK: f64 = 1e-9;

/// Spatial realization of the interval operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialDisc {
    /// Exact eigenmode representation: the second derivative acts as
    /// diag(-n^2) on the first `n_modes` sine modes.
    Modal,
    /// Second differences on m interior points, Dirichlet rows eliminated.
    FiniteDifference { m: usize },
}

/// Configuration of the unperturbed equation. `a`, `b`, `r` are the reaction,
/// delayed-feedback, and delay constants; `n_modes` is the modal truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionDiffusionConfig {
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub n_modes: usize,
    pub spatial_disc: SpatialDisc,
}

/// Delay-independent sufficient condition for hyperbolicity of the
/// unperturbed system: b < 1/r or a + 1 > b. One-sided; a `false` decides
/// nothing.
pub fn stability_sufficient(a: f64, b: f64, r: f64) -> bool {
    b < 1.0 / r || a + 1.0 > b
}

/// Multiplicative potential on (0, pi): a constant, or point samples on the
/// interior difference grid. The recorded sup norm is taken over samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eps3 {
    Constant(f64),
    Samples(Vec<f64>),
}

impl Eps3 {
    pub fn sup(&self) -> f64 {
        match self {
            Eps3::Constant(c) => c.abs(),
            Eps3::Samples(s) => s.iter().fold(0.0, |acc, v| acc.max(v.abs())),
        }
    }
}

/// Perturbation strengths. `eps1` scales the diffusion, `eps2` adds a drift
/// (first space derivative), `eps3` shifts the potential, `eps4_atoms` is a
/// finite-atom delay kernel, `eps5` adds a delayed gradient. The scalar
/// strengths are magnitudes (nonnegative); atom weights may carry sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: Eps3,
    /// (theta_j, weight_j) pairs with distinct theta_j in [-r, 0].
    pub eps4_atoms: Vec<(f64, f64)>,
    pub eps5: f64,
}

impl PerturbationConfig {
    pub fn new(
        eps1: f64,
        eps2: f64,
        eps3: Eps3,
        eps4_atoms: Vec<(f64, f64)>,
        eps5: f64,
    ) -> Result<Self> {
        for (name, v) in [("eps1", eps1), ("eps2", eps2), ("eps5", eps5)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidPerturbation {
                    reason: format!("{name} = {v} must be finite and nonnegative"),
                });
            }
        }
        match &eps3 {
            Eps3::Constant(c) if !c.is_finite() => {
                return Err(Error::InvalidPerturbation {
                    reason: format!("eps3 constant {c} is not finite"),
                });
            }
            Eps3::Samples(s) if s.is_empty() => {
                return Err(Error::InvalidPerturbation {
                    reason: "eps3 sample list is empty".into(),
                });
            }
            Eps3::Samples(s) if s.iter().any(|v| !v.is_finite()) => {
                return Err(Error::InvalidPerturbation {
                    reason: "eps3 samples contain a non-finite value".into(),
                });
            }
            _ => {}
        }
        for (k, (theta, w)) in eps4_atoms.iter().enumerate() {
            if !theta.is_finite() || !w.is_finite() {
                return Err(Error::InvalidPerturbation {
                    reason: format!("kernel atom {k} = ({theta}, {w}) is not finite"),
                });
            }
            // Two atoms at one node would make the recorded variation
            // overcount the measure's actual jump there.
            if eps4_atoms[..k].iter().any(|(t, _)| t == theta) {
                return Err(Error::InvalidPerturbation {
                    reason: format!("duplicate kernel atom node {theta}"),
                });
            }
        }
        Ok(PerturbationConfig {
            eps1,
            eps2,
            eps3,
            eps4_atoms,
            eps5,
        })
    }

    pub fn zero() -> Self {
        PerturbationConfig {
            eps1: 0.0,
            eps2: 0.0,
            eps3: Eps3::Constant(0.0),
            eps4_atoms: Vec::new(),
            eps5: 0.0,
        }
    }

    /// Total variation of the kernel part: the sum of atom magnitudes.
    pub fn var_eps4(&self) -> f64 {
        self.eps4_atoms.iter().map(|(_, w)| w.abs()).sum()
    }
}

/// Which perturbed family to build: drift + potential + delay kernel (uses
/// eps1, eps2, eps3, eps4), or the delayed-gradient variant (eps1, eps3,
/// eps4, eps5; no drift term).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationFamily {
    DriftPotentialKernel,
    DelayedGradientKernel,
}

impl ReactionDiffusionConfig {
    pub fn new(
        a: f64,
        b: f64,
        r: f64,
        n_modes: usize,
        spatial_disc: SpatialDisc,
    ) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b), ("r", r)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::bad_input(format!(
                    "{name} = {v} must be finite and positive"
                )));
            }
        }
        if n_modes == 0 {
            return Err(Error::bad_input("n_modes must be at least 1"));
        }
        if let SpatialDisc::FiniteDifference { m } = spatial_disc {
            if m < MIN_DIFFERENCE_POINTS {
                return Err(Error::bad_input(format!(
                    "{m} difference points, need at least {MIN_DIFFERENCE_POINTS}"
                )));
            }
        }
        Ok(ReactionDiffusionConfig {
            a,
            b,
            r,
            n_modes,
            spatial_disc,
        })
    }

    pub fn state_dim(&self) -> usize {
        match self.spatial_disc {
            SpatialDisc::Modal => self.n_modes,
            SpatialDisc::FiniteDifference { m } => m,
        }
    }

    /// Mode numbers 1..=n_modes on the modal path, where the state matrix is
    /// diagonal and entries label spatial modes; none on the difference path.
    pub fn mode_labels(&self) -> Option<Vec<u32>> {
        match self.spatial_disc {
            SpatialDisc::Modal => Some((1..=self.n_modes as u32).collect()),
            SpatialDisc::FiniteDifference { .. } => None,
        }
    }

    fn grid_step(m: usize) -> f64 {
        PI / (m as f64 + 1.0)
    }

    /// State block (1 + eps1) Delta - eps2 * gradient term - (a + eps3).
    /// The modal path stays diagonal, so it only admits eps2 = 0 and a
    /// constant potential.
    fn state_matrix(&self, eps1: f64, eps2: f64, eps3: &Eps3) -> Result<OperatorMatrix> {
        match self.spatial_disc {
            SpatialDisc::Modal => {
                if eps2 != 0.0 {
                    return Err(Error::InvalidPerturbation {
                        reason: "a drift term couples the sine modes; use the \
                                 finite-difference path"
                            .into(),
                    });
                }
                let c = match eps3 {
                    Eps3::Constant(c) => *c,
                    Eps3::Samples(_) => {
                        return Err(Error::InvalidPerturbation {
                            reason: "a varying potential couples the sine modes; use \
                                     the finite-difference path or a constant eps3"
                                .into(),
                        });
                    }
                };
                let entries: Vec<f64> = (1..=self.n_modes)
                    .map(|n| {
                        let nf = n as f64;
                        -(1.0 + eps1) * nf * nf - self.a - c
                    })
                    .collect();
                Ok(OperatorMatrix::diagonal_real(&entries).with_label("state operator"))
            }
            SpatialDisc::FiniteDifference { m } => {
                let pot: Vec<f64> = match eps3 {
                    Eps3::Constant(c) => vec![*c; m],
                    Eps3::Samples(s) => {
                        if s.len() != m {
                            return Err(Error::InvalidPerturbation {
                                reason: format!(
                                    "eps3 carries {} samples for {m} grid points",
                                    s.len()
                                ),
                            });
                        }
                        s.clone()
                    }
                };
                let h = Self::grid_step(m);
                let diff = (1.0 + eps1) / (h * h);
                let drift = eps2 / (2.0 * h);
                let mut mat = DMatrix::<Complex64>::zeros(m, m);
                for j in 0..m {
                    mat[(j, j)] = Complex64::new(-2.0 * diff - self.a - pot[j], 0.0);
                    if j + 1 < m {
                        mat[(j, j + 1)] = Complex64::new(diff + drift, 0.0);
                        mat[(j + 1, j)] = Complex64::new(diff - drift, 0.0);
                    }
                }
                OperatorMatrix::new(mat, "state operator")
            }
        }
    }

    /// First space derivative: the mode multiplier diag(n) (the norm of d/dx
    /// on the n-th sine mode), or the centered difference with Dirichlet
    /// ends.
    fn gradient_matrix(&self) -> DMatrix<Complex64> {
        match self.spatial_disc {
            SpatialDisc::Modal => DMatrix::from_fn(self.n_modes, self.n_modes, |i, j| {
                if i == j {
                    Complex64::new((i + 1) as f64, 0.0)
                } else {
                    Complex64::default()
                }
            }),
            SpatialDisc::FiniteDifference { m } => {
                let scale = 1.0 / (2.0 * Self::grid_step(m));
                DMatrix::from_fn(m, m, |i, j| {
                    if j == i + 1 {
                        Complex64::new(scale, 0.0)
                    } else if i == j + 1 {
                        Complex64::new(-scale, 0.0)
                    } else {
                        Complex64::default()
                    }
                })
            }
        }
    }

    /// Kernel atoms of the functional perturbation as matrices: each eps4
    /// atom scales the identity, and for the gradient family eps5 composes
    /// the spatial derivative with evaluation at theta = -r (merged into an
    /// existing atom at -r, if any).
    fn functional_atoms(
        &self,
        pert: &PerturbationConfig,
        with_gradient: bool,
    ) -> Vec<(f64, DMatrix<Complex64>)> {
        let d = self.state_dim();
        let mut atoms: Vec<(f64, DMatrix<Complex64>)> = pert
            .eps4_atoms
            .iter()
            .map(|&(theta, w)| {
                (
                    theta,
                    DMatrix::from_diagonal_element(d, d, Complex64::new(w, 0.0)),
                )
            })
            .collect();
        if with_gradient && pert.eps5 != 0.0 {
            let g = self.gradient_matrix() * Complex64::new(pert.eps5, 0.0);
            if let Some(entry) = atoms.iter_mut().find(|(t, _)| *t == -self.r) {
                entry.1 += g;
            } else {
                atoms.push((-self.r, g));
            }
        }
        atoms
    }

    /// The unperturbed system: state block Delta - aI, point coefficient -bI
    /// at theta = -r (the sign realizing the delayed feedback -b w(., t-r)),
    /// empty kernel.
    pub fn build_unperturbed(&self) -> DelaySystem {
        self.build_perturbed(&PerturbationConfig::zero(), PerturbationFamily::DriftPotentialKernel)
            .expect("a validated configuration assembles under the zero perturbation")
    }

    /// The perturbed system for the chosen family. Fields foreign to the
    /// family must be zero, and the modal path additionally needs eps2 = 0
    /// and a constant potential.
    pub fn build_perturbed(
        &self,
        pert: &PerturbationConfig,
        family: PerturbationFamily,
    ) -> Result<DelaySystem> {
        match family {
            PerturbationFamily::DelayedGradientKernel if pert.eps2 != 0.0 => {
                return Err(Error::InvalidPerturbation {
                    reason: "the delayed-gradient family has no drift term; eps2 must be 0"
                        .into(),
                });
            }
            PerturbationFamily::DriftPotentialKernel if pert.eps5 != 0.0 => {
                return Err(Error::InvalidPerturbation {
                    reason: "the drift family has no delayed gradient; eps5 must be 0".into(),
                });
            }
            _ => {}
        }
        let a = self.state_matrix(pert.eps1, pert.eps2, &pert.eps3)?;
        let d = self.state_dim();
        let b_point = OperatorMatrix::new(
            DMatrix::from_diagonal_element(d, d, Complex64::new(-self.b, 0.0)),
            "point delay coefficient",
        )?;
        let with_gradient = family == PerturbationFamily::DelayedGradientKernel;
        let b_kernel = self
            .functional_atoms(pert, with_gradient)
            .into_iter()
            .map(|(theta, mat)| Ok((theta, OperatorMatrix::new(mat, "kernel atom")?)))
            .collect::<Result<Vec<_>>>()?;
        DelaySystem::new(a, self.r, b_point, b_kernel)
    }
}

/// Sampled check of the relative operator bound
/// ||A1 y|| <= (eps1 + eps2/2) ||A0 y|| + (18 eps2 + sup|eps3|) ||y||,
/// where A1 is the as-built state perturbation. `displayed_form_holds`
/// reports the same samples against the shorter form without the 18 eps2
/// term, which the drift does not always admit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelativeBoundReport {
    pub lhs_samples: Vec<f64>,
    pub rhs_samples: Vec<f64>,
    pub holds: bool,
    pub displayed_form_holds: bool,
    pub seed: u64,
}

/// Evaluates the relative bound on seeded sample vectors. Needs the actual
/// derivative matrices, so the configuration must use the difference path.
pub fn relative_bound_check(
    cfg: &ReactionDiffusionConfig,
    pert: &PerturbationConfig,
    seed: u64,
) -> Result<RelativeBoundReport> {
    let m = match cfg.spatial_disc {
        SpatialDisc::FiniteDifference { m } => m,
        SpatialDisc::Modal => {
            return Err(Error::bad_input(
                "the relative bound needs the difference matrices; use the \
                 finite-difference path",
            ));
        }
    };
    let a0 = cfg.state_matrix(0.0, 0.0, &Eps3::Constant(0.0))?;
    let full = cfg.state_matrix(pert.eps1, pert.eps2, &pert.eps3)?;
    let a1 = &full - &a0;
    let c1 = pert.eps1 + pert.eps2 / 2.0;
    let c0 = FIRST_DERIVATIVE_CONSTANT * pert.eps2 + pert.eps3.sup();
    let c0_displayed = pert.eps3.sup();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lhs_samples = Vec::with_capacity(RELATIVE_BOUND_SAMPLES);
    let mut rhs_samples = Vec::with_capacity(RELATIVE_BOUND_SAMPLES);
    let mut holds = true;
    let mut displayed_form_holds = true;
    for _ in 0..RELATIVE_BOUND_SAMPLES {
        let y = DVector::from_fn(m, |_, _| Complex64::new(rng.random_range(-1.0..1.0), 0.0));
        let norm_y = y.norm();
        let norm_a0y = (a0.matrix() * &y).norm();
        let lhs = (a1.matrix() * &y).norm();
        let rhs = c1 * norm_a0y + c0 * norm_y;
        holds &= lhs <= rhs + CHECK_SLACK;
        displayed_form_holds &= lhs <= c1 * norm_a0y + c0_displayed * norm_y + CHECK_SLACK;
        lhs_samples.push(lhs);
        rhs_samples.push(rhs);
    }
    Ok(RelativeBoundReport {
        lhs_samples,
        rhs_samples,
        holds,
        displayed_form_holds,
        seed,
    })
}

/// Weighted-norm size of the functional perturbation against
/// eps5 + Var(eps4). The domain carries ||x||_{1/2} = ||S x|| with
/// S = (-A0)^{1/2}, so each atom is measured as ||M S^{-1}|| and distinct
/// nodes add up.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionalBoundReport {
    pub dy_value: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Measures the delay-functional perturbation in the square-root weighted
/// norm and compares it with eps5 + Var(eps4), with headroom for the
/// discretized embedding constants. Gradient-family configurations only
/// (eps2 must be 0).
pub fn functional_bound_check(
    cfg: &ReactionDiffusionConfig,
    pert: &PerturbationConfig,
) -> Result<FunctionalBoundReport> {
    if pert.eps2 != 0.0 {
        return Err(Error::InvalidPerturbation {
            reason: "the delayed-gradient family has no drift term; eps2 must be 0".into(),
        });
    }
    let a0 = cfg.state_matrix(0.0, 0.0, &Eps3::Constant(0.0))?;
    let s = fractional_power(&a0.scaled_re(-1.0), 0.5)?;
    let dim = s.dim();
    let s_inv = s
        .matrix()
        .clone()
        .try_inverse()
        .ok_or(Error::SpectrumFailure { dim })?;
    let dy_value = cfg
        .functional_atoms(pert, true)
        .into_iter()
        .map(|(_, mat)| spectral_norm(&(mat * &s_inv)))
        .sum();
    let bound = pert.eps5 + pert.var_eps4();
    Ok(FunctionalBoundReport {
        dy_value,
        bound,
        holds: dy_value <= bound * (1.0 + FUNCTIONAL_HEADROOM) + CHECK_SLACK,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::{axis_free, char_roots_rd, dichotomy_of_delay_system, StripConfig, AXIS_TOL};

    fn modal_cfg(a: f64, b: f64, r: f64, n_modes: usize) -> ReactionDiffusionConfig {
        ReactionDiffusionConfig::new(a, b, r, n_modes, SpatialDisc::Modal).unwrap()
    }

    fn fd_cfg(a: f64, b: f64, r: f64, m: usize) -> ReactionDiffusionConfig {
        ReactionDiffusionConfig::new(a, b, r, 1, SpatialDisc::FiniteDifference { m }).unwrap()
    }

    #[test]
    fn single_mode_matrix() {
        let sys = modal_cfg(1.0, 0.5, 1.0, 1).build_unperturbed();
        assert_eq!(sys.a.dim(), 1);
        assert_eq!(sys.a.matrix()[(0, 0)], Complex64::new(-2.0, 0.0));
        assert_eq!(sys.b_point.matrix()[(0, 0)], Complex64::new(-0.5, 0.0));
        assert!(sys.b_kernel.is_empty());
        assert_eq!(sys.r, 1.0);
    }

    #[test]
    fn three_mode_diagonal() {
        let sys = modal_cfg(0.5, 0.2, 1.0, 3).build_unperturbed();
        let expected = [-1.5, -4.5, -9.5];
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { expected[i] } else { 0.0 };
                assert_eq!(sys.a.matrix()[(i, j)], Complex64::new(want, 0.0));
            }
        }
    }

    #[test]
    fn difference_eigenvalues_track_the_modes() {
        let m = 64;
        let a = 0.8;
        let cfg = fd_cfg(a, 0.5, 1.0, m);
        let sys = cfg.build_unperturbed();
        let mut eigs: Vec<f64> = sys
            .a
            .eigenvalues()
            .unwrap()
            .iter()
            .map(|z| z.re)
            .collect();
        eigs.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let h = PI / (m as f64 + 1.0);
        for (k, eig) in eigs.iter().enumerate() {
            let angle = (k as f64 + 1.0) * PI / (m as f64 + 1.0);
            let exact_fd = -(2.0 / (h * h)) * (1.0 - angle.cos()) - a;
            assert!(
                (eig - exact_fd).abs() <= 1e-8 * (1.0 + exact_fd.abs()),
                "eigenvalue {k}: {eig} vs difference formula {exact_fd}"
            );
        }
        // The low end approximates the true modes -n^2 - a.
        for n in 1..=3u32 {
            let truth = -((n * n) as f64) - a;
            let got = eigs[n as usize - 1];
            assert!(
                ((got - truth) / truth).abs() <= 1e-2,
                "mode {n}: {got} vs {truth}"
            );
        }
    }

    #[test]
    fn zero_perturbation_builds_the_same_system() {
        for cfg in [modal_cfg(1.0, 0.5, 1.0, 4), fd_cfg(1.0, 0.5, 1.0, 16)] {
            let base = cfg.build_unperturbed();
            for family in [
                PerturbationFamily::DriftPotentialKernel,
                PerturbationFamily::DelayedGradientKernel,
            ] {
                let rebuilt = cfg.build_perturbed(&PerturbationConfig::zero(), family).unwrap();
                assert_eq!(rebuilt, base);
            }
        }
    }

    #[test]
    fn modal_diffusion_scaling_and_potential_shift() {
        let cfg = modal_cfg(0.5, 0.2, 1.0, 3);
        let pert = PerturbationConfig::new(
            0.1,
            0.0,
            Eps3::Constant(0.2),
            Vec::new(),
            0.0,
        )
        .unwrap();
        let sys = cfg
            .build_perturbed(&pert, PerturbationFamily::DriftPotentialKernel)
            .unwrap();
        for n in 1..=3usize {
            let nf = n as f64;
            let want = -(1.0 + 0.1) * nf * nf - 0.5 - 0.2;
            let got = sys.a.matrix()[(n - 1, n - 1)].re;
            assert!((got - want).abs() <= 1e-12, "mode {n}: {got} vs {want}");
        }
    }

    #[test]
    fn kernel_atom_bookkeeping() {
        let cfg = modal_cfg(1.0, 0.5, 2.0, 2);
        let pert =
            PerturbationConfig::new(0.0, 0.0, Eps3::Constant(0.0), vec![(-1.0, 0.05)], 0.0)
                .unwrap();
        assert_eq!(pert.var_eps4(), 0.05);
        let sys = cfg
            .build_perturbed(&pert, PerturbationFamily::DriftPotentialKernel)
            .unwrap();
        assert_eq!(sys.b_kernel.len(), 1);
        assert_eq!(sys.b_kernel[0].0, -1.0);
        assert_eq!(sys.b_kernel[0].1.matrix()[(0, 0)], Complex64::new(0.05, 0.0));
        assert_eq!(sys.b_kernel[0].1.matrix()[(0, 1)], Complex64::default());
    }

    #[test]
    fn family_field_mismatches_are_rejected() {
        let cfg = fd_cfg(1.0, 0.5, 1.0, 16);
        let drifty =
            PerturbationConfig::new(0.0, 0.1, Eps3::Constant(0.0), Vec::new(), 0.0).unwrap();
        let graddy =
            PerturbationConfig::new(0.0, 0.0, Eps3::Constant(0.0), Vec::new(), 0.1).unwrap();
        assert!(matches!(
            cfg.build_perturbed(&drifty, PerturbationFamily::DelayedGradientKernel),
            Err(Error::InvalidPerturbation { .. })
        ));
        assert!(matches!(
            cfg.build_perturbed(&graddy, PerturbationFamily::DriftPotentialKernel),
            Err(Error::InvalidPerturbation { .. })
        ));

        let modal = modal_cfg(1.0, 0.5, 1.0, 3);
        assert!(matches!(
            modal.build_perturbed(&drifty, PerturbationFamily::DriftPotentialKernel),
            Err(Error::InvalidPerturbation { .. })
        ));
        let sampled = PerturbationConfig::new(
            0.0,
            0.0,
            Eps3::Samples(vec![0.1, -0.1]),
            Vec::new(),
            0.0,
        )
        .unwrap();
        assert!(matches!(
            modal.build_perturbed(&sampled, PerturbationFamily::DriftPotentialKernel),
            Err(Error::InvalidPerturbation { .. })
        ));
        // Sample count must match the difference grid.
        assert!(matches!(
            cfg.build_perturbed(&sampled, PerturbationFamily::DriftPotentialKernel),
            Err(Error::InvalidPerturbation { .. })
        ));
    }

    #[test]
    fn bad_strength_values_are_rejected() {
        assert!(PerturbationConfig::new(-0.1, 0.0, Eps3::Constant(0.0), Vec::new(), 0.0).is_err());
        assert!(PerturbationConfig::new(0.0, f64::NAN, Eps3::Constant(0.0), Vec::new(), 0.0)
            .is_err());
        assert!(PerturbationConfig::new(0.0, 0.0, Eps3::Samples(Vec::new()), Vec::new(), 0.0)
            .is_err());
        assert!(PerturbationConfig::new(
            0.0,
            0.0,
            Eps3::Constant(0.0),
            vec![(-0.5, 0.1), (-0.5, 0.2)],
            0.0
        )
        .is_err());
    }

    #[test]
    fn gradient_lands_at_the_far_node_and_merges() {
        let cfg = modal_cfg(1.0, 0.5, 2.0, 3);
        let pert = PerturbationConfig::new(
            0.0,
            0.0,
            Eps3::Constant(0.0),
            vec![(-2.0, 0.1)],
            0.2,
        )
        .unwrap();
        let sys = cfg
            .build_perturbed(&pert, PerturbationFamily::DelayedGradientKernel)
            .unwrap();
        assert_eq!(sys.b_kernel.len(), 1, "gradient merges into the -r atom");
        assert_eq!(sys.b_kernel[0].0, -2.0);
        for n in 1..=3usize {
            let want = 0.1 + 0.2 * n as f64;
            let got = sys.b_kernel[0].1.matrix()[(n - 1, n - 1)].re;
            assert!((got - want).abs() <= 1e-15);
        }

        let alone = PerturbationConfig::new(0.0, 0.0, Eps3::Constant(0.0), Vec::new(), 0.2)
            .unwrap();
        let sys = cfg
            .build_perturbed(&alone, PerturbationFamily::DelayedGradientKernel)
            .unwrap();
        assert_eq!(sys.b_kernel.len(), 1);
        assert_eq!(sys.b_kernel[0].0, -2.0);
    }

    #[test]
    fn constant_potential_is_tight() {
        let cfg = fd_cfg(1.0, 0.5, 1.0, 32);
        let pert =
            PerturbationConfig::new(0.0, 0.0, Eps3::Constant(0.7), Vec::new(), 0.0).unwrap();
        let report = relative_bound_check(&cfg, &pert, 11).unwrap();
        assert!(report.holds);
        assert!(report.displayed_form_holds, "no drift: both forms agree");
        for (lhs, rhs) in report.lhs_samples.iter().zip(&report.rhs_samples) {
            // A1 = -0.7 I exactly, so both sides are 0.7 ||y||.
            assert!((lhs - rhs).abs() <= 1e-9, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn second_derivative_rides_the_base_operator() {
        let cfg = fd_cfg(0.5, 0.5, 1.0, 32);
        let pert =
            PerturbationConfig::new(0.1, 0.0, Eps3::Constant(0.0), Vec::new(), 0.0).unwrap();
        let report = relative_bound_check(&cfg, &pert, 7).unwrap();
        assert!(report.holds);
        // The diffusion part alone: ||eps1 Delta y|| <= eps1 ||A0 y|| since
        // Delta and A0 = Delta - aI share the eigenbasis and a > 0 only
        // deepens each eigenvalue.
        let base = cfg.build_unperturbed();
        let perturbed = cfg
            .build_perturbed(&pert, PerturbationFamily::DriftPotentialKernel)
            .unwrap();
        let a1 = &perturbed.a - &base.a;
        let y = DVector::from_fn(32, |j, _| Complex64::new((j as f64 * 0.7).sin() + 0.3, 0.0));
        let lhs = (a1.matrix() * &y).norm();
        let rhs = 0.1 * (base.a.matrix() * &y).norm();
        assert!(lhs <= rhs + 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn mixed_random_strengths_obey_the_proof_form() {
        let m = 48;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let samples: Vec<f64> = (0..m).map(|_| rng.random_range(-0.3..0.3)).collect();
        let cfg = fd_cfg(0.7, 0.5, 1.0, m);
        let pert = PerturbationConfig::new(0.05, 0.2, Eps3::Samples(samples), Vec::new(), 0.0)
            .unwrap();
        let report = relative_bound_check(&cfg, &pert, 5).unwrap();
        assert!(report.holds);
        assert_eq!(report.lhs_samples.len(), RELATIVE_BOUND_SAMPLES);
        assert_eq!(report.seed, 5);
    }

    #[test]
    fn displayed_form_can_fail_on_the_lowest_mode() {
        // Pure drift on the softest mode: || eps2 D y || is about eps2 ||y||,
        // while (eps2/2) ||A0 y|| is about (eps2/2)(1 + a) ||y||, short for
        // a < 1. The 18 eps2 ||y|| term restores the bound with a large
        // margin, which is exactly why the checked inequality carries it.
        let m = 64;
        let a = 0.5;
        let eps2 = 0.3;
        let cfg = fd_cfg(a, 0.5, 1.0, m);
        let pert =
            PerturbationConfig::new(0.0, eps2, Eps3::Constant(0.0), Vec::new(), 0.0).unwrap();
        let base = cfg.build_unperturbed();
        let perturbed = cfg
            .build_perturbed(&pert, PerturbationFamily::DriftPotentialKernel)
            .unwrap();
        let a1 = &perturbed.a - &base.a;
        let h = PI / (m as f64 + 1.0);
        let y = DVector::from_fn(m, |j, _| {
            Complex64::new(((j as f64 + 1.0) * h).sin(), 0.0)
        });
        let lhs = (a1.matrix() * &y).norm();
        let displayed = eps2 / 2.0 * (base.a.matrix() * &y).norm();
        let proof = displayed + FIRST_DERIVATIVE_CONSTANT * eps2 * y.norm();
        assert!(lhs > displayed + 1e-3, "{lhs} vs displayed {displayed}");
        assert!(lhs <= proof, "{lhs} vs proof form {proof}");
        // The sampled report over random vectors still passes the checked
        // form.
        assert!(relative_bound_check(&cfg, &pert, 3).unwrap().holds);
    }

    #[test]
    fn functional_zero_is_zero() {
        let cfg = modal_cfg(1.0, 0.5, 1.0, 4);
        let report = functional_bound_check(&cfg, &PerturbationConfig::zero()).unwrap();
        assert_eq!(report.dy_value, 0.0);
        assert_eq!(report.bound, 0.0);
        assert!(report.holds);
    }

    #[test]
    fn single_atom_weighted_norm_is_exact() {
        // One identity atom through S^{-1} = diag(1/sqrt(n^2 + a)): norm
        // attained at the softest mode.
        let a = 1.0;
        let cfg = modal_cfg(a, 0.5, 1.0, 4);
        let pert =
            PerturbationConfig::new(0.0, 0.0, Eps3::Constant(0.0), vec![(-0.5, 0.1)], 0.0)
                .unwrap();
        let report = functional_bound_check(&cfg, &pert).unwrap();
        let want = 0.1 / (1.0 + a).sqrt();
        assert!((report.dy_value - want).abs() <= 1e-10);
        assert_eq!(report.bound, 0.1);
        assert!(report.holds);
    }

    #[test]
    fn gradient_and_kernel_distances_add_up() {
        let a = 0.5;
        let cfg = modal_cfg(a, 0.5, 1.0, 6);
        let pert = PerturbationConfig::new(
            0.0,
            0.0,
            Eps3::Constant(0.0),
            vec![(-0.5, 0.012), (-0.25, 0.008)],
            0.05,
        )
        .unwrap();
        let report = functional_bound_check(&cfg, &pert).unwrap();
        // Gradient block: max_n eps5 n / sqrt(n^2 + a); atoms: w / sqrt(1+a).
        let grad = (1..=6u32)
            .map(|n| 0.05 * n as f64 / ((n * n) as f64 + a).sqrt())
            .fold(0.0_f64, f64::max);
        let want = grad + (0.012 + 0.008) / (1.0 + a).sqrt();
        assert!((report.dy_value - want).abs() <= 1e-9, "{}", report.dy_value);
        assert!((report.bound - 0.07).abs() <= 1e-15);
        assert!(report.holds);
    }

    #[test]
    fn difference_path_functional_bound_holds_without_headroom() {
        let cfg = fd_cfg(1.0, 0.5, 1.0, 32);
        let pert = PerturbationConfig::new(
            0.0,
            0.0,
            Eps3::Constant(0.0),
            vec![(-0.3, 0.04)],
            0.05,
        )
        .unwrap();
        let report = functional_bound_check(&cfg, &pert).unwrap();
        assert!(report.holds);
        // Both factors sit strictly below 1, so even the raw bound holds.
        assert!(report.dy_value <= report.bound, "{}", report.dy_value);
    }

    #[test]
    fn functional_check_rejects_drift() {
        let cfg = modal_cfg(1.0, 0.5, 1.0, 4);
        let pert =
            PerturbationConfig::new(0.0, 0.1, Eps3::Constant(0.0), Vec::new(), 0.0).unwrap();
        assert!(matches!(
            functional_bound_check(&cfg, &pert),
            Err(Error::InvalidPerturbation { .. })
        ));
    }

    #[test]
    fn sufficiency_helper_truth_table() {
        assert!(stability_sufficient(1.0, 0.5, 1.0));
        assert!(stability_sufficient(1.0, 1.8, 0.5));
        assert!(stability_sufficient(2.0, 2.5, 2.0), "a + 1 > b branch");
        assert!(!stability_sufficient(0.5, 3.0, 2.0));
        assert!(!stability_sufficient(0.2, 3.5, 1.0));
    }

    #[test]
    fn sufficient_region_is_hyperbolic() {
        for r in [0.5, 1.0, 2.0] {
            let b = 0.9 / r;
            let cfg = modal_cfg(1.0, b, r, 10);
            assert!(stability_sufficient(1.0, b, r));
            let labels = cfg.mode_labels().unwrap();
            let report =
                dichotomy_of_delay_system(&cfg.build_unperturbed(), Some(&labels), 12).unwrap();
            assert!(report.hyperbolic, "r = {r}");
            assert!(report.gap > 0.0);
            let p = report.projection.unwrap();
            let trace: Complex64 = (0..p.dim()).map(|i| p.matrix()[(i, i)]).sum();
            assert!(
                (trace.re - p.dim() as f64).abs() <= 1e-6,
                "all modes stable, so the projection is the identity"
            );
        }
    }

    #[test]
    fn modal_and_difference_paths_agree() {
        let configs = [
            (0.5, 0.9 / 0.5, 0.5),
            (0.5, 0.9 / 2.0, 2.0),
            (2.0, 0.9 / 0.5, 0.5),
            (2.0, 0.9 / 2.0, 2.0),
            // Unstable but hyperbolic: the softest mode has crossed.
            (0.5, 3.0, 2.0),
        ];
        for (a, b, r) in configs {
            let modal = modal_cfg(a, b, r, 5);
            let fd = fd_cfg(a, b, r, 128);
            let labels = modal.mode_labels().unwrap();
            let report_m =
                dichotomy_of_delay_system(&modal.build_unperturbed(), Some(&labels), 8).unwrap();
            let report_f = dichotomy_of_delay_system(&fd.build_unperturbed(), None, 8).unwrap();
            assert_eq!(
                report_m.hyperbolic, report_f.hyperbolic,
                "verdicts split at (a, b, r) = ({a}, {b}, {r})"
            );
            assert!(report_m.hyperbolic, "grid avoids exact crossings");
        }
    }

    #[test]
    fn verdict_matches_the_root_scan_on_a_grid() {
        // 20 (a, b) points at r = 1, two modes. Oracle: the generator is
        // hyperbolic iff no characteristic root touches the axis, and the
        // projection rank counts the roots that crossed. The largest b in
        // each row is tuned so every root keeps |Re| > 0.13: a root pair
        // hugging the axis puts a pole of R(z, T(1)) next to the unit
        // circle, where the contour projection legitimately refuses.
        let r = 1.0;
        let n_cheb = 12;
        for &(a, b_row) in &[
            (0.2, [0.3, 1.1, 1.9, 4.2]),
            (0.7, [0.3, 1.1, 1.9, 4.5]),
            (1.2, [0.3, 1.1, 1.9, 4.5]),
            (1.7, [0.3, 1.1, 1.9, 5.0]),
            (2.2, [0.3, 1.1, 1.9, 5.5]),
        ] {
            for &b in &b_row {
                let cfg = modal_cfg(a, b, r, 2);
                let mut clear = true;
                let mut unstable = 0usize;
                for n in 1..=2u32 {
                    let roots =
                        char_roots_rd(a, b, r, n, &StripConfig::reaction_diffusion(a, b, r, n))
                            .unwrap();
                    clear &= axis_free(&roots, AXIS_TOL);
                    unstable += roots.iter().filter(|rt| rt.lambda.re > AXIS_TOL).count();
                }
                let labels = cfg.mode_labels().unwrap();
                let report =
                    dichotomy_of_delay_system(&cfg.build_unperturbed(), Some(&labels), n_cheb)
                        .unwrap();
                assert_eq!(
                    report.hyperbolic, clear,
                    "verdict vs roots at (a, b) = ({a}, {b})"
                );
                let p = report.projection.unwrap();
                let trace: Complex64 = (0..p.dim()).map(|i| p.matrix()[(i, i)]).sum();
                let want = (p.dim() - unstable) as f64;
                assert!(
                    (trace.re - want).abs() <= 1e-6,
                    "projection rank vs crossed roots at (a, b) = ({a}, {b}): \
                     trace {} vs {want}",
                    trace.re
                );
            }
        }
    }

    #[test]
    fn configs_round_trip_through_json() {
        let cfg = fd_cfg(1.0, 0.5, 2.0, 16);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ReactionDiffusionConfig>(&text).unwrap(), cfg);
        let pert = PerturbationConfig::new(
            0.05,
            0.1,
            Eps3::Samples(vec![0.1, -0.2]),
            vec![(-1.0, 0.05)],
            0.0,
        )
        .unwrap();
        let text = serde_json::to_string(&pert).unwrap();
        assert_eq!(serde_json::from_str::<PerturbationConfig>(&text).unwrap(), pert);
    }
}
