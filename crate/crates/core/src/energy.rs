//! Norms, the conserved energy, and barrier scattering diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{KgError, Result};
use crate::grid::{spectral_half_norm, Fourier, Grid1D};
use crate::mass::RegularizedMass;
use crate::propagation::FieldState;

/// `E = ||v||^2 + ||(-Delta)^(alpha/2) u||^2 + ||m^(1/2) u||^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub t: f64,
    pub kinetic: f64,
    pub elastic: f64,
    pub potential: f64,
    pub total: f64,
}

/// Split of `||u||^2` at a barrier. `reflection` is the fraction on the
/// incident side `x >= barrier` (where the initial bump sits).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterRecord {
    pub t: f64,
    pub barrier: f64,
    pub left_mass: f64,
    pub right_mass: f64,
    pub reflection: f64,
}

/// Rectangle rule, which is the trapezoid rule on a periodic grid.
pub fn l2_norm(samples: &[f64], grid: &Grid1D) -> Result<f64> {
    grid.check_len(samples)?;
    Ok(sum_sq(samples, grid).sqrt())
}

fn sum_sq(samples: &[f64], grid: &Grid1D) -> f64 {
    samples.iter().map(|x| x * x).sum::<f64>() * grid.dx()
}

/// Evaluates energies repeatedly on one grid with a planned transform.
pub struct EnergyMeter {
    grid: Grid1D,
    alpha: f64,
    fourier: Fourier,
}

impl EnergyMeter {
    pub fn new(grid: &Grid1D, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(KgError::InvalidAlpha(alpha));
        }
        Ok(Self {
            grid: grid.clone(),
            alpha,
            fourier: Fourier::new(grid),
        })
    }

    pub fn measure(&mut self, state: &FieldState, mass: &RegularizedMass) -> Result<EnergyRecord> {
        let g = &self.grid;
        g.check_len(&state.u)?;
        g.check_len(&state.v)?;
        g.check_len(mass.samples())?;
        let kinetic = sum_sq(&state.v, g);
        let spectrum = self.fourier.forward(&state.u);
        let elastic = spectral_half_norm(&spectrum, self.alpha, g).powi(2);
        let potential = state
            .u
            .iter()
            .zip(mass.samples())
            .map(|(u, m)| m * u * u)
            .sum::<f64>()
            * g.dx();
        Ok(EnergyRecord {
            t: state.t,
            kinetic,
            elastic,
            potential,
            total: kinetic + elastic + potential,
        })
    }

    pub fn triple_norm(&mut self, state: &FieldState) -> Result<f64> {
        let g = &self.grid;
        g.check_len(&state.u)?;
        g.check_len(&state.v)?;
        let spectrum = self.fourier.forward(&state.u);
        let half = spectral_half_norm(&spectrum, self.alpha, g);
        Ok(sum_sq(&state.u, g).sqrt() + half + sum_sq(&state.v, g).sqrt())
    }
}

pub fn energy(
    state: &FieldState,
    mass: &RegularizedMass,
    alpha: f64,
    grid: &Grid1D,
) -> Result<EnergyRecord> {
    EnergyMeter::new(grid, alpha)?.measure(state, mass)
}

/// `||u||_{H^alpha} + ||v||_{L2}` with `||u||_{H^alpha} = ||u|| + ||(-Delta)^(alpha/2) u||`.
pub fn triple_norm(state: &FieldState, alpha: f64, grid: &Grid1D) -> Result<f64> {
    EnergyMeter::new(grid, alpha)?.triple_norm(state)
}

pub fn reflection_coefficient(
    state: &FieldState,
    barrier_x: f64,
    grid: &Grid1D,
) -> Result<ScatterRecord> {
    grid.check_len(&state.u)?;
    if !(barrier_x > 0.0 && barrier_x < grid.length()) {
        return Err(KgError::InvalidArgument(format!(
            "barrier {barrier_x} outside the domain (0, {})",
            grid.length()
        )));
    }
    let (mut left, mut right) = (0.0, 0.0);
    for (j, u) in state.u.iter().enumerate() {
        if grid.x(j) < barrier_x {
            left += u * u;
        } else {
            right += u * u;
        }
    }
    left *= grid.dx();
    right *= grid.dx();
    let total = left + right;
    Ok(ScatterRecord {
        t: state.t,
        barrier: barrier_x,
        left_mass: left,
        right_mass: right,
        reflection: if total > 0.0 { right / total } else { 0.0 },
    })
}

/// Centroid of `u^2` restricted to `[lo, hi)`; `None` if that window is empty.
pub fn mass_centroid(state: &FieldState, lo: f64, hi: f64, grid: &Grid1D) -> Option<f64> {
    let (mut w, mut wx) = (0.0, 0.0);
    for (j, u) in state.u.iter().enumerate() {
        let x = grid.x(j);
        if x >= lo && x < hi {
            w += u * u;
            wx += x * u * u;
        }
    }
    (w > 0.0).then(|| wx / w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::initial_bump;
    use std::f64::consts::PI;

    #[test]
    fn l2_examples() {
        let g = Grid1D::new(100.0, 1000).unwrap();
        assert_eq!(l2_norm(&vec![0.0; 1000], &g).unwrap(), 0.0);
        assert!((l2_norm(&vec![1.0; 1000], &g).unwrap() - 10.0).abs() < 1e-12);
        let g = Grid1D::new(2.0 * PI, 64).unwrap();
        let u: Vec<f64> = g.points().iter().map(|x| (3.0 * x).cos()).collect();
        assert!((l2_norm(&u, &g).unwrap() - PI.sqrt()).abs() < 1e-13);
        assert!(l2_norm(&u[..10], &g).is_err());
    }

    #[test]
    fn energy_of_single_mode() {
        let g = Grid1D::new(2.0 * PI, 64).unwrap();
        let k = 3.0_f64;
        let u: Vec<f64> = g.points().iter().map(|x| (k * x).cos()).collect();
        let s = FieldState::new(0.0, u, vec![0.0; 64], &g).unwrap();
        let m = RegularizedMass::zero(&g);
        for &alpha in &[0.5, 1.0, 1.5] {
            let e = energy(&s, &m, alpha, &g).unwrap();
            let expected = k.powf(2.0 * alpha) * PI;
            assert!((e.total - expected).abs() < 1e-12 * expected);
            assert_eq!(e.total, e.kinetic + e.elastic + e.potential);
            let tn = triple_norm(&s, alpha, &g).unwrap();
            assert!((tn - PI.sqrt() * (1.0 + k.powf(alpha))).abs() < 1e-12);
        }
        let z = energy(&FieldState::zeros(&g), &m, 1.0, &g).unwrap();
        assert_eq!(z.total, 0.0);
        assert_eq!(triple_norm(&FieldState::zeros(&g), 1.0, &g).unwrap(), 0.0);
    }

    #[test]
    fn triple_norm_is_homogeneous() {
        let g = Grid1D::new(100.0, 2000).unwrap();
        let s = initial_bump(&g).unwrap();
        let a = triple_norm(&s, 0.8, &g).unwrap();
        let b = triple_norm(&s.scaled(2.0), 0.8, &g).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12 * a);
    }

    #[test]
    fn initial_bump_is_fully_on_incident_side() {
        let g = Grid1D::new(100.0, 10_000).unwrap();
        let s = initial_bump(&g).unwrap();
        let r = reflection_coefficient(&s, 40.0, &g).unwrap();
        assert_eq!(r.reflection, 1.0);
        assert_eq!(r.left_mass, 0.0);
        let norm = l2_norm(&s.u, &g).unwrap();
        assert!(((r.left_mass + r.right_mass) - norm * norm).abs() < 1e-12 * norm * norm);
        assert!(reflection_coefficient(&s, 120.0, &g).is_err());
        assert!(reflection_coefficient(&s, 0.0, &g).is_err());
        let c = mass_centroid(&s, 0.0, 100.0, &g).unwrap();
        assert!((c - 50.0).abs() < 1e-9);
        assert_eq!(mass_centroid(&s, 0.0, 40.0, &g), None);
    }
}
