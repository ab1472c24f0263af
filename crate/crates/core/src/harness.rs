//! Epsilon-net experiments for very weak solutions and the wall-effect study.
//!
//! Each experiment runs the regularized problem along a finite ladder of
//! `eps` values and stores the raw numbers together with the criterion that
//! judges them. Verdicts are recomputed from the stored numbers only.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{MassCase, SimulationConfig, Tolerances};
use crate::energy::{l2_norm, mass_centroid, reflection_coefficient, EnergyMeter, ScatterRecord};
use crate::error::{KgError, Result};
use crate::fit::{pairwise_exponent, power_law_fit, PowerFit};
use crate::grid::Grid1D;
use crate::mass::{
    check_eps_ladder, negligible_perturbation, regularize, BoundedProfile, MassSpec, Perturbation,
    RegularizedMass,
};
use crate::propagation::{
    evolve, evolve_observed, initial_bump, FieldState, SchemeId, BUMP_CENTER,
};

/// Snapshot times of the wall-effect figure.
pub const FIGURE1_TIMES: [f64; 6] = [0.0, 8.8, 10.2, 10.6, 11.0, 12.0];
pub const FIGURE1_EPS: f64 = 0.05;
pub const FIGURE1_BARRIER: f64 = 40.0;
/// Time step of the implicit scheme at the published resolution.
pub const FIGURE1_DT: f64 = 0.2;
/// Time step for the spectral scheme and for theory experiments.
pub const REFERENCE_DT: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L2,
    Triple,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonNetPlan {
    pub eps: Vec<f64>,
    pub base: SimulationConfig,
    pub norm: NormKind,
}

impl EpsilonNetPlan {
    pub fn new(eps: Vec<f64>, base: SimulationConfig, norm: NormKind) -> Result<Self> {
        check_eps_ladder(&eps)?;
        base.validate()
            .map_err(|e| KgError::InvalidArgument(e.to_string()))?;
        let grid = base.grid()?;
        // Every eps must be runnable on the shared grid.
        for &e in &eps {
            base.regularized_mass(e, &grid)?;
        }
        Ok(Self { eps, base, norm })
    }
}

/// How a report's numbers are judged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Criterion {
    /// Growth exponent of `norms` against `1/eps` at most `max_exponent`.
    GrowthBound { max_exponent: f64 },
    /// Relative differences decay faster than `eps^max_order` between
    /// consecutive measurable points, are non-increasing, and anything below
    /// `noise_floor` counts as zero.
    Negligible { max_order: u32, noise_floor: f64 },
    /// Decay exponent of the differences within `p +- margin`.
    PowerDecay { p: f64, margin: f64 },
    /// Differences non-increasing, last one below `final_rel` of the
    /// reference norm, and fitted order at least `min_order` when given.
    Converges {
        min_order: Option<f64>,
        final_rel: f64,
    },
}

/// Judgement derived from stored numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub fit: Option<PowerFit>,
    pub verdict: bool,
}

impl Criterion {
    pub fn assess(
        &self,
        eps: &[f64],
        norms: &[f64],
        differences: &[f64],
        reference_norm: Option<f64>,
    ) -> Assessment {
        match *self {
            Criterion::GrowthBound { max_exponent } => {
                let inv: Vec<f64> = eps.iter().map(|e| 1.0 / e).collect();
                let fit = if norms.windows(2).all(|w| w[0] == w[1]) && norms[0] > 0.0 {
                    Some(PowerFit {
                        exponent: 0.0,
                        prefactor: norms[0],
                        residual: 0.0,
                    })
                } else {
                    power_law_fit(&inv, norms).ok()
                };
                let verdict = fit.is_some_and(|f| f.exponent <= max_exponent);
                Assessment { fit, verdict }
            }
            Criterion::Negligible {
                max_order,
                noise_floor,
            } => {
                let rel: Vec<f64> = differences
                    .iter()
                    .zip(norms)
                    .map(|(d, n)| if *n > 0.0 { d / n } else { *d })
                    .collect();
                let floored: Vec<f64> = rel
                    .iter()
                    .map(|&r| if r <= noise_floor { 0.0 } else { r })
                    .collect();
                let monotone = floored.windows(2).all(|w| w[1] <= w[0]);
                let measurable: Vec<(f64, f64)> = eps
                    .iter()
                    .zip(&floored)
                    .filter(|(_, r)| **r > 0.0)
                    .map(|(e, r)| (*e, *r))
                    .collect();
                let fast = measurable
                    .windows(2)
                    .all(|w| pairwise_exponent(w[0].0, w[0].1, w[1].0, w[1].1) > max_order as f64);
                let fit = if measurable.len() >= 2 {
                    let (e, r): (Vec<f64>, Vec<f64>) = measurable.into_iter().unzip();
                    power_law_fit(&e, &r).ok()
                } else {
                    None
                };
                Assessment {
                    fit,
                    verdict: monotone && fast,
                }
            }
            Criterion::PowerDecay { p, margin } => {
                let fit = power_law_fit(eps, differences).ok();
                let verdict = fit.is_some_and(|f| (f.exponent - p).abs() <= margin);
                Assessment { fit, verdict }
            }
            Criterion::Converges {
                min_order,
                final_rel,
            } => {
                let monotone = differences.windows(2).all(|w| w[1] <= w[0]);
                let scale = reference_norm.unwrap_or(1.0);
                let last = differences.last().copied().unwrap_or(f64::INFINITY);
                let small = last <= final_rel * scale;
                if differences.iter().all(|&d| d == 0.0) {
                    return Assessment {
                        fit: None,
                        verdict: true,
                    };
                }
                let fit = power_law_fit(eps, differences).ok();
                let order_ok = match min_order {
                    None => true,
                    Some(q) => fit.is_some_and(|f| f.exponent >= q),
                };
                Assessment {
                    fit,
                    verdict: monotone && small && order_ok,
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Existence,
    Uniqueness { perturbation: Perturbation },
    Consistency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub experiment: Experiment,
    pub norm: NormKind,
    pub eps: Vec<f64>,
    /// Existence: `sup_t` of the norm of `u_eps`. Otherwise the norm of
    /// `u_eps(T)`.
    pub norms: Vec<f64>,
    /// Existence: `||u_eps_i - u_eps_{i+1}||(T)` for consecutive ladder
    /// entries. Uniqueness: `||u_eps - u~_eps||(T)`. Consistency:
    /// `||u - u_eps||(T)`.
    pub differences: Vec<f64>,
    /// Consistency only: norm of the classical reference solution at `T`.
    pub reference_norm: Option<f64>,
    pub criterion: Criterion,
    pub fit: Option<PowerFit>,
    pub verdict: bool,
}

impl ConvergenceReport {
    fn build(
        experiment: Experiment,
        norm: NormKind,
        eps: Vec<f64>,
        norms: Vec<f64>,
        differences: Vec<f64>,
        reference_norm: Option<f64>,
        criterion: Criterion,
    ) -> Self {
        let a = criterion.assess(&eps, &norms, &differences, reference_norm);
        Self {
            experiment,
            norm,
            eps,
            norms,
            differences,
            reference_norm,
            criterion,
            fit: a.fit,
            verdict: a.verdict,
        }
    }

    /// Re-derives fit and verdict from the stored numbers.
    pub fn reassess(&self) -> Assessment {
        self.criterion.assess(
            &self.eps,
            &self.norms,
            &self.differences,
            self.reference_norm,
        )
    }

    /// Largest relative difference `differences[i] / norms[i]`.
    pub fn relative_differences(&self) -> Vec<f64> {
        self.differences
            .iter()
            .zip(&self.norms)
            .map(|(d, n)| if *n > 0.0 { d / n } else { *d })
            .collect()
    }
}

fn norm_of(
    state: &FieldState,
    kind: NormKind,
    meter: &mut EnergyMeter,
    grid: &Grid1D,
) -> Result<f64> {
    match kind {
        NormKind::L2 => l2_norm(&state.u, grid),
        NormKind::Triple => meter.triple_norm(state),
    }
}

fn difference(a: &FieldState, b: &FieldState) -> FieldState {
    FieldState {
        t: a.t,
        u: a.u.iter().zip(&b.u).map(|(x, y)| x - y).collect(),
        v: a.v.iter().zip(&b.v).map(|(x, y)| x - y).collect(),
    }
}

/// Final state of one run of `config` with mass `mass`.
fn final_state(
    config: &SimulationConfig,
    grid: &Grid1D,
    mass: &RegularizedMass,
) -> Result<FieldState> {
    let s0 = initial_bump(grid)?;
    let ev = evolve(
        &s0,
        mass,
        config.scheme,
        config.dt,
        config.t_final,
        config.alpha,
        grid,
        &[config.t_final],
    )?;
    Ok(ev.snapshots.into_iter().next().expect("one snapshot"))
}

/// Boundedness of the net: fitted growth of `sup_t ||u_eps(t)||` in `1/eps`
/// must not exceed `N0/2 + margin`.
pub fn existence_experiment(plan: &EpsilonNetPlan) -> Result<ConvergenceReport> {
    let cfg = &plan.base;
    let grid = cfg.grid()?;
    let spec = cfg.mass_spec();
    let runs: Vec<(f64, FieldState)> = plan
        .eps
        .par_iter()
        .map(|&eps| {
            let mass = regularize(&spec, eps, &grid)?;
            let mut meter = EnergyMeter::new(&grid, cfg.alpha)?;
            let mut sup = 0.0_f64;
            let mut err = None;
            let s0 = initial_bump(&grid)?;
            let ev = evolve_observed(
                &s0,
                &mass,
                cfg.scheme,
                cfg.dt,
                cfg.t_final,
                cfg.alpha,
                &grid,
                &[cfg.t_final],
                |s| match norm_of(s, plan.norm, &mut meter, &grid) {
                    Ok(v) => sup = sup.max(v),
                    Err(e) => err = Some(e),
                },
            )?;
            if let Some(e) = err {
                return Err(e);
            }
            Ok((sup, ev.snapshots.into_iter().next().expect("one snapshot")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut meter = EnergyMeter::new(&grid, cfg.alpha)?;
    let norms = runs.iter().map(|(s, _)| *s).collect();
    let differences = runs
        .windows(2)
        .map(|w| norm_of(&difference(&w[0].1, &w[1].1), plan.norm, &mut meter, &grid))
        .collect::<Result<Vec<_>>>()?;
    let criterion = Criterion::GrowthBound {
        max_exponent: spec.nominal_order() / 2.0 + cfg.tolerances.exponent_margin,
    };
    Ok(ConvergenceReport::build(
        Experiment::Existence,
        plan.norm,
        plan.eps.clone(),
        norms,
        differences,
        None,
        criterion,
    ))
}

/// Sensitivity of `u_eps(T)` to a perturbation of `m_eps`.
pub fn uniqueness_experiment(
    plan: &EpsilonNetPlan,
    perturbation: Perturbation,
) -> Result<ConvergenceReport> {
    let cfg = &plan.base;
    let grid = cfg.grid()?;
    let spec = cfg.mass_spec();
    let pairs: Vec<(f64, f64)> = plan
        .eps
        .par_iter()
        .map(|&eps| {
            let mass = regularize(&spec, eps, &grid)?;
            let perturbed = if mass.is_zero() {
                mass.clone()
            } else {
                negligible_perturbation(&mass, perturbation)?
            };
            let a = final_state(cfg, &grid, &mass)?;
            let b = final_state(cfg, &grid, &perturbed)?;
            let mut meter = EnergyMeter::new(&grid, cfg.alpha)?;
            Ok((
                norm_of(&a, plan.norm, &mut meter, &grid)?,
                norm_of(&difference(&a, &b), plan.norm, &mut meter, &grid)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (norms, differences): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let tol: &Tolerances = &cfg.tolerances;
    let criterion = match perturbation {
        Perturbation::Exponential => Criterion::Negligible {
            max_order: tol.negligible_max_order,
            noise_floor: tol.noise_floor,
        },
        Perturbation::RelativePower { p } => Criterion::PowerDecay {
            p,
            margin: tol.power_margin,
        },
    };
    Ok(ConvergenceReport::build(
        Experiment::Uniqueness { perturbation },
        plan.norm,
        plan.eps.clone(),
        norms,
        differences,
        None,
        criterion,
    ))
}

/// Convergence of `u_eps` to the classical solution for a bounded mass. The
/// reference uses the unmollified samples on the same grid and scheme.
pub fn consistency_experiment(
    profile: &BoundedProfile,
    plan: &EpsilonNetPlan,
) -> Result<ConvergenceReport> {
    let cfg = &plan.base;
    let grid = cfg.grid()?;
    let spec = MassSpec::Bounded(profile.clone());
    let reference_mass = RegularizedMass::unmollified(profile, &grid)?;
    let reference = final_state(cfg, &grid, &reference_mass)?;
    let pairs: Vec<(f64, f64)> = plan
        .eps
        .par_iter()
        .map(|&eps| {
            let mass = regularize(&spec, eps, &grid)?;
            let u = final_state(cfg, &grid, &mass)?;
            let mut meter = EnergyMeter::new(&grid, cfg.alpha)?;
            Ok((
                norm_of(&u, plan.norm, &mut meter, &grid)?,
                norm_of(&difference(&reference, &u), plan.norm, &mut meter, &grid)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (norms, differences): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let mut meter = EnergyMeter::new(&grid, cfg.alpha)?;
    let reference_norm = norm_of(&reference, plan.norm, &mut meter, &grid)?;
    let criterion = Criterion::Converges {
        min_order: cfg.tolerances.consistency_min_order,
        final_rel: cfg.tolerances.consistency_final_rel,
    };
    Ok(ConvergenceReport::build(
        Experiment::Consistency,
        plan.norm,
        plan.eps.clone(),
        norms,
        differences,
        Some(reference_norm),
        criterion,
    ))
}

/// Default base configuration for the theory experiments: the bump problem on
/// `[0, 100)` with the spectral scheme at the reference step, `T = 12`.
pub fn theory_config(mass_case: MassCase, eps: f64) -> SimulationConfig {
    SimulationConfig {
        alpha: 1.0,
        length: 100.0,
        n: 10_000,
        dt: REFERENCE_DT,
        t_final: 12.0,
        scheme: SchemeId::SpectralStrang,
        mass_case,
        x0: FIGURE1_BARRIER,
        bounded_profile: None,
        epsilon: eps,
        epsilons: None,
        snapshot_times: vec![12.0],
        barrier_x: None,
        tolerances: Tolerances::default(),
        output_dir: None,
    }
}

/// Configuration reproducing the wall-effect figure for one case.
pub fn figure1_config(case: MassCase, eps: f64, scheme: SchemeId) -> SimulationConfig {
    let mut cfg = theory_config(case, eps);
    cfg.scheme = scheme;
    cfg.dt = match scheme {
        SchemeId::ImplicitFd => FIGURE1_DT,
        SchemeId::SpectralStrang => REFERENCE_DT,
    };
    cfg.snapshot_times = FIGURE1_TIMES.to_vec();
    cfg.barrier_x = Some(FIGURE1_BARRIER);
    cfg
}

#[derive(Debug, Clone, PartialEq)]
pub struct WallSnapshot {
    pub t: f64,
    pub state: FieldState,
    pub scatter: ScatterRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WallEffect {
    pub config: SimulationConfig,
    pub snapshots: Vec<WallSnapshot>,
    /// `(t, centroid of u^2 on x < 50)` at every step: position of the
    /// left-moving half of the initial bump.
    pub centroid_trace: Vec<(f64, f64)>,
}

impl WallEffect {
    pub fn reflection_at(&self, t: f64) -> Option<f64> {
        self.snapshots
            .iter()
            .find(|s| same_time(s.t, t))
            .map(|s| s.scatter.reflection)
    }

    /// Centroid velocity sign at `t`, from the step that follows it.
    pub fn centroid_drift(&self, t: f64) -> Option<f64> {
        let i = self
            .centroid_trace
            .iter()
            .position(|(s, _)| same_time(*s, t))?;
        let next = self.centroid_trace.get(i + 1)?;
        Some(next.1 - self.centroid_trace[i].1)
    }

    /// The left-moving bump travels left at `t_before` and right at `t_after`.
    pub fn reverses_between(&self, t_before: f64, t_after: f64) -> bool {
        matches!(
            (self.centroid_drift(t_before), self.centroid_drift(t_after)),
            (Some(a), Some(b)) if a < 0.0 && b > 0.0
        )
    }
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * b.abs().max(1.0)
}

/// Runs one case of the wall-effect study.
pub fn wall_effect_experiment(case: MassCase, eps: f64, scheme: SchemeId) -> Result<WallEffect> {
    if case == MassCase::Bounded {
        return Err(KgError::InvalidArgument(
            "wall-effect cases are zero, delta and delta_squared".into(),
        ));
    }
    run_wall_effect(figure1_config(case, eps, scheme))
}

/// Wall-effect run for an arbitrary (validated) configuration.
pub fn run_wall_effect(config: SimulationConfig) -> Result<WallEffect> {
    config
        .validate()
        .map_err(|e| KgError::InvalidArgument(e.to_string()))?;
    let grid = config.grid()?;
    let mass = config.regularized_mass(config.epsilon, &grid)?;
    let s0 = initial_bump(&grid)?;
    let mut centroid_trace = Vec::new();
    let ev = evolve_observed(
        &s0,
        &mass,
        config.scheme,
        config.dt,
        config.t_final,
        config.alpha,
        &grid,
        &config.snapshot_times,
        |s| {
            if let Some(c) = mass_centroid(s, 0.0, BUMP_CENTER, &grid) {
                centroid_trace.push((s.t, c));
            }
        },
    )?;
    let snapshots = ev
        .snapshots
        .into_iter()
        .map(|state| {
            let scatter = reflection_coefficient(&state, config.barrier(), &grid)?;
            Ok(WallSnapshot {
                t: state.t,
                state,
                scatter,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WallEffect {
        config,
        snapshots,
        centroid_trace,
    })
}
