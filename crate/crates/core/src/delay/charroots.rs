//! Characteristic roots of scalar delay equations inside a strip, by
//! argument-principle box subdivision with Newton polishing. The engine is
//! generic over the characteristic function; wrappers cover the
//! reaction-diffusion form lambda + a + b e^{-lambda r} = -n^2 and general
//! scalar equations lambda = alpha + sum_j w_j e^{lambda theta_j}.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residual every reported root must meet.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-10;
/// Roots closer than this are merged.
const DEDUP_DISTANCE: f64 = 1e-6;
/// Boxes with smaller diameter stop subdividing and trust Newton.
const MIN_BOX: f64 = 1e-6;
/// Relative contour inflation applied when a sample lands on a root.
const PERTURB_STEP: f64 = 1e-6;
const PERTURB_ATTEMPTS: usize = 3;
/// Phase-tracking refinement depth per contour segment.
const MAX_REFINE_DEPTH: usize = 48;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharRoot {
    pub lambda: Complex64,
    /// Spatial mode index for reaction-diffusion roots; absent for general
    /// scalar equations.
    pub mode_n: Option<u32>,
    /// |characteristic function at lambda|.
    pub residual: f64,
}

/// Search strip {Re in [sigma_min, sigma_max], |Im| <= omega_max}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StripConfig {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub omega_max: f64,
}

impl StripConfig {
    /// Default strip for the reaction-diffusion characteristic equation:
    /// generously covers the rightmost root chains of mode n.
    pub fn reaction_diffusion(a: f64, b: f64, r: f64, n: u32) -> Self {
        StripConfig {
            sigma_min: -((n * n) as f64 + a + b + 10.0),
            sigma_max: b + 1.0,
            omega_max: 2.0 * std::f64::consts::PI / r * 10.0,
        }
    }

    /// Default strip for lambda = alpha + sum_j w_j e^{lambda theta_j}:
    /// covers every root with moderately negative real part, and all axis
    /// roots (|Im| of an axis root is at most |alpha| + sum |w|).
    pub fn scalar(alpha: Complex64, atom_budget: f64, r: f64) -> Self {
        let reach = alpha.norm() + atom_budget;
        StripConfig {
            sigma_min: -(reach + 10.0),
            sigma_max: reach + 1.0,
            omega_max: (2.0 * std::f64::consts::PI / r * 10.0).max(reach + 1.0),
        }
    }
}

/// All roots in the strip of lambda + a + b e^{-lambda r} + n^2, sorted by
/// descending real part.
pub fn char_roots_rd(
    a: f64,
    b: f64,
    r: f64,
    n: u32,
    strip: &StripConfig,
) -> Result<Vec<CharRoot>> {
    if !(r > 0.0) {
        return Err(Error::bad_input(format!("delay {r} must be positive")));
    }
    let shift = a + (n * n) as f64;
    let f = move |z: Complex64| z + shift + b * (-z * r).exp();
    let fp = move |z: Complex64| Complex64::new(1.0, 0.0) - b * r * (-z * r).exp();
    // Away from roots arg(f) drifts at most like the dominant term: rate r
    // where the exponential wins, 1/|z| where the linear part wins.
    let roots = roots_in_strip(&f, &fp, strip, 1.5 * r.max(1.0))?;
    Ok(roots
        .into_iter()
        .map(|lambda| CharRoot {
            lambda,
            mode_n: Some(n),
            residual: f(lambda).norm(),
        })
        .collect())
}

/// All roots in the strip of lambda = alpha + sum_j w_j e^{lambda theta_j},
/// the characteristic equation of x'(t) = alpha x(t) + sum_j w_j x(t +
/// theta_j), sorted by descending real part.
pub fn scalar_delay_roots(
    alpha: Complex64,
    atoms: &[(f64, Complex64)],
    strip: &StripConfig,
) -> Result<Vec<CharRoot>> {
    for (theta, _) in atoms {
        if !theta.is_finite() || *theta > 0.0 {
            return Err(Error::bad_input(format!(
                "delay offset {theta} must be finite and nonpositive"
            )));
        }
    }
    let atoms = atoms.to_vec();
    let reach = atoms
        .iter()
        .map(|(theta, _)| theta.abs())
        .fold(0.0, f64::max);
    let f = {
        let atoms = atoms.clone();
        move |z: Complex64| {
            let mut v = z - alpha;
            for (theta, w) in &atoms {
                v -= w * (z * *theta).exp();
            }
            v
        }
    };
    let fp = move |z: Complex64| {
        let mut v = Complex64::new(1.0, 0.0);
        for (theta, w) in &atoms {
            v -= w * *theta * (z * *theta).exp();
        }
        v
    };
    let roots = roots_in_strip(&f, &fp, strip, 1.5 * reach.max(1.0))?;
    Ok(roots
        .into_iter()
        .map(|lambda| CharRoot {
            lambda,
            mode_n: None,
            residual: f(lambda).norm(),
        })
        .collect())
}

/// True when every root stays clear of the imaginary axis.
pub fn axis_free(roots: &[CharRoot], tol: f64) -> bool {
    roots.iter().all(|root| root.lambda.re.abs() > tol)
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    re_lo: f64,
    re_hi: f64,
    im_lo: f64,
    im_hi: f64,
}

impl Rect {
    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_lo, self.im_lo),
            Complex64::new(self.re_hi, self.im_lo),
            Complex64::new(self.re_hi, self.im_hi),
            Complex64::new(self.re_lo, self.im_hi),
        ]
    }

    fn center(&self) -> Complex64 {
        Complex64::new(
            0.5 * (self.re_lo + self.re_hi),
            0.5 * (self.im_lo + self.im_hi),
        )
    }

    fn diameter(&self) -> f64 {
        (self.re_hi - self.re_lo).hypot(self.im_hi - self.im_lo)
    }

    fn inflated(&self, delta: f64) -> Rect {
        Rect {
            re_lo: self.re_lo - delta,
            re_hi: self.re_hi + delta,
            im_lo: self.im_lo - delta,
            im_hi: self.im_hi + delta,
        }
    }

    fn contains(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.re_lo - slack
            && z.re <= self.re_hi + slack
            && z.im >= self.im_lo - slack
            && z.im <= self.im_hi + slack
    }

    fn split(&self) -> (Rect, Rect) {
        if self.re_hi - self.re_lo >= self.im_hi - self.im_lo {
            let mid = 0.5 * (self.re_lo + self.re_hi);
            (
                Rect { re_hi: mid, ..*self },
                Rect { re_lo: mid, ..*self },
            )
        } else {
            let mid = 0.5 * (self.im_lo + self.im_hi);
            (
                Rect { im_hi: mid, ..*self },
                Rect { im_lo: mid, ..*self },
            )
        }
    }
}

/// Signals that the phase walk stepped onto (or unresolvably near) a root.
struct ContourHit;

fn phase_along_segment(
    f: &impl Fn(Complex64) -> Complex64,
    z0: Complex64,
    z1: Complex64,
    f0: Complex64,
    f1: Complex64,
    depth: usize,
) -> std::result::Result<f64, ContourHit> {
    let tiny = 1e-300;
    if f0.norm() < tiny || f1.norm() < tiny || !f0.is_finite() || !f1.is_finite() {
        return Err(ContourHit);
    }
    let delta = (f1 / f0).arg();
    if delta.abs() <= std::f64::consts::FRAC_PI_2 {
        return Ok(delta);
    }
    if depth == 0 {
        return Err(ContourHit);
    }
    let zm = 0.5 * (z0 + z1);
    let fm = f(zm);
    Ok(phase_along_segment(f, z0, zm, f0, fm, depth - 1)?
        + phase_along_segment(f, zm, z1, fm, f1, depth - 1)?)
}

/// Winding number of f around the rectangle boundary, or a contour hit.
///
/// `phase_scale` bounds |d arg f / dz| away from roots; edges are seeded so
/// no seed segment can hide a full phase turn, which the adaptive refinement
/// (limited to the principal branch) could not detect after the fact.
fn winding_number(
    f: &impl Fn(Complex64) -> Complex64,
    rect: &Rect,
    phase_scale: f64,
) -> std::result::Result<i64, ContourHit> {
    let corners = rect.corners();
    let mut total = 0.0;
    for e in 0..4 {
        let z0 = corners[e];
        let z1 = corners[(e + 1) % 4];
        let len = (z1 - z0).norm();
        let seeds = ((len * phase_scale / std::f64::consts::FRAC_PI_2).ceil() as usize)
            .clamp(16, 8192);
        let mut prev_z = z0;
        let mut prev_f = f(z0);
        for s in 1..=seeds {
            let z = z0 + (z1 - z0) * (s as f64 / seeds as f64);
            let fz = f(z);
            total += phase_along_segment(f, prev_z, z, prev_f, fz, MAX_REFINE_DEPTH)?;
            prev_z = z;
            prev_f = fz;
        }
    }
    let turns = total / (2.0 * std::f64::consts::PI);
    let rounded = turns.round();
    if (turns - rounded).abs() > 0.25 {
        return Err(ContourHit);
    }
    Ok(rounded as i64)
}

/// Winding with the contour-through-root retry: inflate the box slightly and
/// recount, a bounded number of times. Returns the effective box used.
fn winding_with_retry(
    f: &impl Fn(Complex64) -> Complex64,
    rect: &Rect,
    phase_scale: f64,
) -> Result<(i64, Rect)> {
    let scale = 1.0 + rect.corners().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut current = *rect;
    for attempt in 0..=PERTURB_ATTEMPTS {
        match winding_number(f, &current, phase_scale) {
            Ok(w) => return Ok((w, current)),
            Err(ContourHit) => {
                current = current.inflated(PERTURB_STEP * scale * (attempt + 1) as f64);
            }
        }
    }
    Err(Error::ContourFailure {
        detail: format!(
            "contour repeatedly passed through a root near the box \
             [{}, {}] x [{}, {}]",
            rect.re_lo, rect.re_hi, rect.im_lo, rect.im_hi
        ),
    })
}

fn newton_polish(
    f: &impl Fn(Complex64) -> Complex64,
    fp: &impl Fn(Complex64) -> Complex64,
    start: Complex64,
) -> Option<Complex64> {
    let mut z = start;
    let mut best = (start, f64::INFINITY);
    for _ in 0..80 {
        let fz = f(z);
        if !fz.is_finite() {
            break;
        }
        let fnorm = fz.norm();
        if fnorm < best.1 {
            best = (z, fnorm);
        }
        // Well below the reporting contract; near a simple root the
        // evaluation noise is smaller still at desk scale.
        if fnorm <= 1e-12 {
            break;
        }
        let d = fp(z);
        if d.norm() < 1e-300 {
            break;
        }
        let step = fz / d;
        z -= step;
        if step.norm() <= 1e-17 * (1.0 + z.norm()) {
            let fz = f(z);
            if fz.is_finite() && fz.norm() < best.1 {
                best = (z, fz.norm());
            }
            break;
        }
    }
    (best.1 <= 1e-12).then_some(best.0)
}

/// All roots inside the strip, deduplicated and sorted by descending real
/// part (imaginary part ascending breaks ties). The total found must match
/// the outer winding count.
fn roots_in_strip(
    f: &impl Fn(Complex64) -> Complex64,
    fp: &impl Fn(Complex64) -> Complex64,
    strip: &StripConfig,
    phase_scale: f64,
) -> Result<Vec<Complex64>> {
    if !(strip.sigma_min < strip.sigma_max) || !(strip.omega_max > 0.0) {
        return Err(Error::bad_input("empty search strip"));
    }
    let outer = Rect {
        re_lo: strip.sigma_min,
        re_hi: strip.sigma_max,
        im_lo: -strip.omega_max,
        im_hi: strip.omega_max,
    };
    let (expected, outer_used) = winding_with_retry(f, &outer, phase_scale)?;
    let mut candidates: Vec<Complex64> = Vec::new();
    let mut stack = vec![outer_used];
    while let Some(rect) = stack.pop() {
        let (count, rect_used) = winding_with_retry(f, &rect, phase_scale)?;
        if count == 0 {
            continue;
        }
        if count == 1 || rect_used.diameter() <= MIN_BOX {
            if let Some(root) = newton_polish(f, fp, rect_used.center()) {
                if rect_used.contains(root, 1e-3) || rect_used.diameter() <= MIN_BOX {
                    candidates.push(root);
                    continue;
                }
            }
            if rect_used.diameter() <= MIN_BOX {
                return Err(Error::ContourFailure {
                    detail: "Newton refused to converge inside a minimal box".into(),
                });
            }
        }
        let (left, right) = rect_used.split();
        stack.push(left);
        stack.push(right);
    }

    candidates.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let mut roots: Vec<Complex64> = Vec::new();
    for c in candidates {
        if !outer_used.contains(c, 1e-9) {
            continue;
        }
        if roots.iter().all(|r| (r - c).norm() > DEDUP_DISTANCE) {
            roots.push(c);
        }
    }
    if roots.len() as i64 != expected {
        return Err(Error::ContourFailure {
            detail: format!(
                "found {} distinct roots but the strip winding predicts {}",
                roots.len(),
                expected
            ),
        });
    }
    for root in &roots {
        if f(*root).norm() > ROOT_RESIDUAL_TOL {
            return Err(Error::ContourFailure {
                detail: format!("root {root} kept residual {}", f(*root).norm()),
            });
        }
    }
    roots.sort_by(|x, y| y.re.total_cmp(&x.re).then(x.im.total_cmp(&y.im)));
    Ok(roots)
}
