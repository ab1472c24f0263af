//! Friedrichs mollifier and regularization nets `m_eps` for singular masses.
//!
//! The singular cases are regularized pointwise: `delta(x - x0)` becomes
//! `psi_eps(x - x0)` and the formal square `delta^2` becomes `psi_eps^2`, where
//! `psi_eps(x) = psi(x / eps) / eps`. Bounded masses are convolved with the
//! sampled kernel on the grid.

use std::sync::OnceLock;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{KgError, Result};
use crate::fit::power_law_fit;
use crate::grid::Grid1D;

/// Below this many grid points per kernel half-width the mollifier is
/// considered unresolved.
pub const MIN_POINTS_PER_HALF_WIDTH: f64 = 5.0;

fn bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (1.0 / (x * x - 1.0)).exp()
    } else {
        0.0
    }
}

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Normalization `c` with `c * integral_{-1}^{1} exp(1/(x^2-1)) dx = 1`.
/// Computed once by adaptive quadrature.
pub fn mollifier_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| 1.0 / adaptive_simpson(&bump, -1.0, 1.0, 1e-15))
}

/// Unit-mass bump `c exp(1/(x^2-1))` on `|x| < 1`, zero elsewhere.
pub fn mollifier(x: f64) -> f64 {
    mollifier_constant() * bump(x)
}

/// Scaled mollifier `psi(x / eps) / eps`.
pub fn scaled_mollifier(x: f64, eps: f64) -> f64 {
    mollifier(x / eps) / eps
}

/// Closed-form or tabulated bounded mass profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundedProfile {
    Constant {
        value: f64,
    },
    /// `height * exp(1 - 1/(1 - r^2))` with `r = (x - center)/half_width`;
    /// smooth, compactly supported, peak equal to `height`.
    Hump {
        center: f64,
        half_width: f64,
        height: f64,
    },
    /// `height` on `[left, right)`, zero elsewhere.
    Step {
        left: f64,
        right: f64,
        height: f64,
    },
    /// One value per grid node.
    Table {
        samples: Vec<f64>,
    },
}

impl BoundedProfile {
    pub fn sample(&self, grid: &Grid1D) -> Result<Vec<f64>> {
        let samples = match self {
            BoundedProfile::Constant { value } => vec![*value; grid.len()],
            BoundedProfile::Hump {
                center,
                half_width,
                height,
            } => {
                if *half_width <= 0.0 || half_width.is_nan() {
                    return Err(KgError::InvalidMass(format!(
                        "hump half_width must be positive, got {half_width}"
                    )));
                }
                grid.points()
                    .iter()
                    .map(|x| {
                        let r = (x - center) / half_width;
                        if r.abs() < 1.0 {
                            height * (1.0 - 1.0 / (1.0 - r * r)).exp()
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            BoundedProfile::Step {
                left,
                right,
                height,
            } => grid
                .points()
                .iter()
                .map(|x| {
                    if (*left..*right).contains(x) {
                        *height
                    } else {
                        0.0
                    }
                })
                .collect(),
            BoundedProfile::Table { samples } => {
                grid.check_len(samples)?;
                samples.clone()
            }
        };
        if let Some(bad) = samples.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(KgError::InvalidMass(format!(
                "bounded mass samples must be finite and non-negative, found {bad}"
            )));
        }
        Ok(samples)
    }
}

/// Symbolic mass coefficient `m(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum MassSpec {
    Zero,
    Delta { x0: f64 },
    DeltaSquared { x0: f64 },
    Bounded(BoundedProfile),
}

impl MassSpec {
    /// Moderateness order `N0` with `||m_eps||_inf <= C eps^-N0`.
    pub fn nominal_order(&self) -> f64 {
        match self {
            MassSpec::Zero | MassSpec::Bounded(_) => 0.0,
            MassSpec::Delta { .. } => 1.0,
            MassSpec::DeltaSquared { .. } => 2.0,
        }
    }

    pub fn is_singular(&self) -> bool {
        matches!(self, MassSpec::Delta { .. } | MassSpec::DeltaSquared { .. })
    }

    pub fn location(&self) -> Option<f64> {
        match self {
            MassSpec::Delta { x0 } | MassSpec::DeltaSquared { x0 } => Some(*x0),
            _ => None,
        }
    }
}

/// Sampled mass coefficient. `eps` is `None` for an unmollified classical
/// coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedMass {
    eps: Option<f64>,
    samples: Vec<f64>,
    sup_norm: f64,
}

impl RegularizedMass {
    fn from_samples(eps: Option<f64>, mut samples: Vec<f64>) -> Self {
        for s in samples.iter_mut() {
            if *s < 0.0 {
                *s = 0.0;
            }
        }
        let sup_norm = samples.iter().fold(0.0_f64, |m, &s| m.max(s));
        Self {
            eps,
            samples,
            sup_norm,
        }
    }

    pub fn zero(grid: &Grid1D) -> Self {
        Self::from_samples(None, vec![0.0; grid.len()])
    }

    /// Classical coefficient sampled without mollification.
    pub fn unmollified(profile: &BoundedProfile, grid: &Grid1D) -> Result<Self> {
        Ok(Self::from_samples(None, profile.sample(grid)?))
    }

    pub fn eps(&self) -> Option<f64> {
        self.eps
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn is_zero(&self) -> bool {
        self.sup_norm == 0.0
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(KgError::InvalidEpsilon(eps));
    }
    Ok(())
}

/// Builds `m_eps` on `grid`.
pub fn regularize(spec: &MassSpec, eps: f64, grid: &Grid1D) -> Result<RegularizedMass> {
    check_eps(eps)?;
    if eps < MIN_POINTS_PER_HALF_WIDTH * grid.dx() {
        warn!(
            "eps = {eps} resolves the mollifier with only {:.2} points per half-width",
            eps / grid.dx()
        );
    }
    let samples = match spec {
        MassSpec::Zero => vec![0.0; grid.len()],
        MassSpec::Delta { x0 } | MassSpec::DeltaSquared { x0 } => {
            if !(*x0 - eps > 0.0 && *x0 + eps < grid.length()) {
                return Err(KgError::InvalidMass(format!(
                    "x0 = {x0} must lie at least eps = {eps} inside (0, {})",
                    grid.length()
                )));
            }
            let squared = matches!(spec, MassSpec::DeltaSquared { .. });
            grid.points()
                .iter()
                .map(|x| {
                    let v = scaled_mollifier(x - x0, eps);
                    if squared {
                        v * v
                    } else {
                        v
                    }
                })
                .collect()
        }
        MassSpec::Bounded(profile) => convolve_periodic(&profile.sample(grid)?, eps, grid),
    };
    Ok(RegularizedMass::from_samples(Some(eps), samples))
}

/// Periodic discrete convolution with the sampled kernel. The kernel weights
/// are normalized to unit discrete sum, so constants are reproduced.
fn convolve_periodic(samples: &[f64], eps: f64, grid: &Grid1D) -> Vec<f64> {
    let n = grid.len();
    let half = (eps / grid.dx()).ceil() as usize;
    let half = half.min(n / 2 - 1);
    let raw: Vec<f64> = (0..=half)
        .map(|k| mollifier(k as f64 * grid.dx() / eps))
        .collect();
    let total: f64 = raw[0] + 2.0 * raw[1..].iter().sum::<f64>();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    (0..n)
        .map(|i| {
            let mut acc = weights[0] * samples[i];
            for (k, w) in weights.iter().enumerate().skip(1) {
                if *w == 0.0 {
                    continue;
                }
                acc += w * (samples[(i + k) % n] + samples[(i + n - k) % n]);
            }
            acc
        })
        .collect()
}

/// Sup norms along an eps ladder and the fitted moderateness exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeratenessReport {
    pub eps: Vec<f64>,
    pub sup_norms: Vec<f64>,
    /// Log-log slope of `sup_norm` against `1/eps`.
    pub exponent: f64,
    pub residual: f64,
}

pub fn check_eps_ladder(eps_list: &[f64]) -> Result<()> {
    if eps_list.len() < 3 {
        return Err(KgError::InvalidArgument(format!(
            "eps ladder needs at least 3 values, got {}",
            eps_list.len()
        )));
    }
    for &e in eps_list {
        check_eps(e)?;
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(KgError::InvalidArgument(
            "eps ladder must be strictly decreasing".into(),
        ));
    }
    Ok(())
}

pub fn moderateness_exponent(
    spec: &MassSpec,
    eps_list: &[f64],
    grid: &Grid1D,
) -> Result<ModeratenessReport> {
    check_eps_ladder(eps_list)?;
    let sup_norms = eps_list
        .iter()
        .map(|&e| regularize(spec, e, grid).map(|m| m.sup_norm()))
        .collect::<Result<Vec<_>>>()?;
    let (exponent, residual) = if sup_norms.iter().all(|&s| s == 0.0) {
        (0.0, 0.0)
    } else {
        let inv: Vec<f64> = eps_list.iter().map(|e| 1.0 / e).collect();
        let fit = power_law_fit(&inv, &sup_norms)?;
        (fit.exponent, fit.residual)
    };
    Ok(ModeratenessReport {
        eps: eps_list.to_vec(),
        sup_norms,
        exponent,
        residual,
    })
}

/// How a negligible (or deliberately non-negligible) perturbation of a
/// regularized mass is built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Perturbation {
    /// `m_eps * (1 + exp(-1/eps))`: smaller than every power of eps.
    Exponential,
    /// `m_eps + eps^p * sup_norm * b` with `b = m_eps / sup_norm`: only of
    /// order `p`.
    RelativePower { p: f64 },
}

pub fn negligible_perturbation(
    base: &RegularizedMass,
    mode: Perturbation,
) -> Result<RegularizedMass> {
    let eps = base.eps.ok_or_else(|| {
        KgError::InvalidMass("perturbation needs a regularized mass with eps".into())
    })?;
    let factor = match mode {
        Perturbation::Exponential => 1.0 + (-1.0 / eps).exp(),
        Perturbation::RelativePower { p } => {
            if !(p > 0.0 && p.is_finite()) {
                return Err(KgError::InvalidArgument(format!(
                    "perturbation power must be positive, got {p}"
                )));
            }
            1.0 + eps.powf(p)
        }
    };
    let samples = base.samples.iter().map(|m| m * factor).collect();
    Ok(RegularizedMass::from_samples(Some(eps), samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard_grid() -> Grid1D {
        Grid1D::new(100.0, 10_000).unwrap()
    }

    /// Composite trapezoid on a fine grid; exponentially accurate for the
    /// smooth compactly supported bump.
    fn trapezoid_oracle(f: impl Fn(f64) -> f64, n: usize) -> f64 {
        let h = 2.0 / n as f64;
        (0..=n).map(|j| f(-1.0 + j as f64 * h)).sum::<f64>() * h
    }

    #[test]
    fn constant_matches_reported_value() {
        let c = mollifier_constant();
        assert!((c - 2.2523).abs() < 5e-5, "c = {c}");
        let mass = trapezoid_oracle(mollifier, 20_000);
        assert!((mass - 1.0).abs() < 1e-8, "mass = {mass}");
    }

    #[test]
    fn mollifier_values() {
        assert_eq!(mollifier(1.5), 0.0);
        assert_eq!(mollifier(1.0), 0.0);
        assert_eq!(mollifier(-1.0), 0.0);
        let c = 1.0 / trapezoid_oracle(bump, 20_000);
        assert!((mollifier(0.0) - c * (-1.0_f64).exp()).abs() < 1e-12);
        assert!((mollifier(0.0) - 0.8286).abs() < 1e-4);
    }

    #[test]
    fn zero_case() {
        let m = regularize(&MassSpec::Zero, 0.05, &standard_grid()).unwrap();
        assert!(m.samples().iter().all(|&v| v == 0.0));
        assert_eq!(m.sup_norm(), 0.0);
    }

    #[test]
    fn delta_sup_norms() {
        let g = standard_grid();
        let peak = mollifier(0.0);
        let d = regularize(&MassSpec::Delta { x0: 40.0 }, 0.05, &g).unwrap();
        assert!((d.sup_norm() - peak / 0.05).abs() < 1e-12);
        assert!((d.sup_norm() - 16.57).abs() < 0.01);
        assert_eq!(d.samples()[4000], d.sup_norm());
        let d2 = regularize(&MassSpec::DeltaSquared { x0: 40.0 }, 0.05, &g).unwrap();
        assert!((d2.sup_norm() - (peak / 0.05).powi(2)).abs() < 1e-9);
        assert!((d2.sup_norm() - 274.7).abs() < 0.2);
    }

    #[test]
    fn delta_mass_and_scaling() {
        let g = standard_grid();
        // At exactly 10 points per half-width the rectangle rule is off by
        // 1.6e-4; from 12 points on it is below 1e-4.
        for &(eps, tol) in &[(0.1, 2e-4), (0.12, 1e-4), (0.2, 1e-4), (0.5, 1e-4)] {
            let m = regularize(&MassSpec::Delta { x0: 40.0 }, eps, &g).unwrap();
            let total: f64 = m.samples().iter().sum::<f64>() * g.dx();
            assert!((total - 1.0).abs() < tol, "eps {eps}: {total}");
        }
        let a = regularize(&MassSpec::Delta { x0: 40.0 }, 0.1, &g).unwrap();
        let b = regularize(&MassSpec::Delta { x0: 40.0 }, 0.05, &g).unwrap();
        assert!((b.sup_norm() / a.sup_norm() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_eps_and_wrapping_support() {
        let g = standard_grid();
        let spec = MassSpec::Delta { x0: 40.0 };
        assert_eq!(
            regularize(&spec, 0.0, &g),
            Err(KgError::InvalidEpsilon(0.0))
        );
        assert!(regularize(&spec, 1.5, &g).is_err());
        assert!(regularize(&MassSpec::Delta { x0: 0.03 }, 0.05, &g).is_err());
        assert!(regularize(&MassSpec::DeltaSquared { x0: 99.97 }, 0.05, &g).is_err());
    }

    #[test]
    fn bounded_constant_is_preserved() {
        let g = Grid1D::new(10.0, 1000).unwrap();
        let spec = MassSpec::Bounded(BoundedProfile::Constant { value: 1.0 });
        let m = regularize(&spec, 0.3, &g).unwrap();
        assert!(m.samples().iter().all(|v| (v - 1.0).abs() < 1e-14));
        let step = MassSpec::Bounded(BoundedProfile::Step {
            left: 3.0,
            right: 4.0,
            height: 2.0,
        });
        let m = regularize(&step, 0.2, &g).unwrap();
        assert!(m
            .samples()
            .iter()
            .all(|&v| (0.0..=2.0 + 1e-12).contains(&v)));
    }

    #[test]
    fn bounded_rejects_negative_samples() {
        let g = Grid1D::new(1.0, 4).unwrap();
        let spec = MassSpec::Bounded(BoundedProfile::Table {
            samples: vec![1.0, -0.5, 0.0, 0.0],
        });
        assert!(matches!(
            regularize(&spec, 0.5, &g),
            Err(KgError::InvalidMass(_))
        ));
    }

    #[test]
    fn moderateness_orders() {
        let g = standard_grid();
        let eps = [0.1, 0.05, 0.025, 0.0125];
        let r = moderateness_exponent(&MassSpec::Delta { x0: 40.0 }, &eps, &g).unwrap();
        assert!((r.exponent - 1.0).abs() < 0.05);
        let r = moderateness_exponent(&MassSpec::DeltaSquared { x0: 40.0 }, &eps, &g).unwrap();
        assert!((r.exponent - 2.0).abs() < 0.05);
        let r = moderateness_exponent(
            &MassSpec::Bounded(BoundedProfile::Constant { value: 1.0 }),
            &eps,
            &g,
        )
        .unwrap();
        assert!(r.exponent.abs() < 0.05);
        assert!(moderateness_exponent(&MassSpec::Zero, &[0.1, 0.05], &g).is_err());
        assert!(moderateness_exponent(&MassSpec::Zero, &[0.1, 0.2, 0.05], &g).is_err());
    }

    #[test]
    fn synthetic_net_recovers_exponent() {
        let eps = [0.5, 0.2, 0.1, 0.03];
        let inv: Vec<f64> = eps.iter().map(|e| 1.0 / e).collect();
        let vals: Vec<f64> = eps.iter().map(|e: &f64| 2.5 * e.powf(-1.37)).collect();
        let fit = power_law_fit(&inv, &vals).unwrap();
        assert!((fit.exponent - 1.37).abs() < 1e-10);
    }

    #[test]
    fn exponential_perturbation() {
        let g = standard_grid();
        let base = regularize(&MassSpec::Delta { x0: 40.0 }, 0.05, &g).unwrap();
        let pert = negligible_perturbation(&base, Perturbation::Exponential).unwrap();
        let diff = base
            .samples()
            .iter()
            .zip(pert.samples())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let expected = (-20.0_f64).exp() * base.sup_norm();
        assert!((diff - expected).abs() < 1e-3 * expected);
        assert!(((-20.0_f64).exp() - 2.06e-9).abs() < 1e-11);

        let zero = regularize(&MassSpec::Zero, 0.05, &g).unwrap();
        let pz = negligible_perturbation(&zero, Perturbation::Exponential).unwrap();
        assert!(pz.is_zero());
        assert!(negligible_perturbation(&base, Perturbation::RelativePower { p: 0.0 }).is_err());
        assert!(
            negligible_perturbation(&RegularizedMass::zero(&g), Perturbation::Exponential).is_err()
        );
    }

    #[test]
    fn exponential_factor_beats_every_power() {
        // e^{-1/eps} / eps^k must shrink along the ladder for k <= 8.
        let ladder = [0.1, 0.05, 0.025];
        for k in 1..=8 {
            let ratios: Vec<f64> = ladder
                .iter()
                .map(|e: &f64| (-1.0 / e).exp() / e.powi(k))
                .collect();
            assert!(ratios.windows(2).all(|w| w[1] < w[0]), "k = {k}");
        }
    }
}
