//! Time evolution of `u_tt + (-Delta)^alpha u + m_eps(x) u = 0`.
//!
//! Two schemes are provided:
//! * [`SchemeId::SpectralStrang`]: exact free propagator for half a step,
//!   exact mass sub-flow (`v -= dt * m u`) for a full step, free half step
//!   again. Works for any `alpha > 0`.
//! * [`SchemeId::ImplicitFd`]: three-level implicit finite differences for
//!   `alpha = 1`, `(u+ - 2u + u-)/dt^2 = (D2 - M)(u+ + u-)/2` with a periodic
//!   second-difference `D2`, solved with a cyclic tridiagonal sweep.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KgError, Result};
use crate::grid::{Fourier, Grid1D};
use crate::mass::RegularizedMass;
use crate::tridiag::CyclicTridiagonal;

/// Relative tolerance for deciding that a snapshot time sits on a step.
const STEP_ALIGN_TOL: f64 = 1e-9;

/// Displacement and velocity on the grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FieldState {
    pub fn new(t: f64, u: Vec<f64>, v: Vec<f64>, grid: &Grid1D) -> Result<Self> {
        grid.check_len(&u)?;
        grid.check_len(&v)?;
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(KgError::InvalidArgument(
                "field state has non-finite entries".into(),
            ));
        }
        Ok(Self { t, u, v })
    }

    pub fn zeros(grid: &Grid1D) -> Self {
        Self {
            t: 0.0,
            u: vec![0.0; grid.len()],
            v: vec![0.0; grid.len()],
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            t: self.t,
            u: self.u.iter().map(|x| c * x).collect(),
            v: self.v.iter().map(|x| c * x).collect(),
        }
    }

    /// `(u, -v)`: the same configuration evolving backwards.
    pub fn reversed(&self) -> Self {
        Self {
            t: self.t,
            u: self.u.clone(),
            v: self.v.iter().map(|x| -x).collect(),
        }
    }

    fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeId {
    SpectralStrang,
    ImplicitFd,
}

impl SchemeId {
    pub fn name(self) -> &'static str {
        match self {
            SchemeId::SpectralStrang => "spectral_strang",
            SchemeId::ImplicitFd => "implicit_fd",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Center of the initial bump and its half-width.
pub const BUMP_CENTER: f64 = 50.0;
pub const BUMP_HALF_WIDTH: f64 = 0.5;

/// `u0(x) = exp(1/((x-50)^2 - 0.25))` on `|x - 50| < 0.5`, `u1 = 0`.
pub fn initial_bump(grid: &Grid1D) -> Result<FieldState> {
    if grid.length() <= BUMP_CENTER + BUMP_HALF_WIDTH {
        return Err(KgError::InvalidGrid(format!(
            "domain [0, {}) does not contain the bump support [49.5, 50.5]",
            grid.length()
        )));
    }
    let hw2 = BUMP_HALF_WIDTH * BUMP_HALF_WIDTH;
    let u = grid
        .points()
        .iter()
        .map(|x| {
            let r2 = (x - BUMP_CENTER).powi(2);
            if r2 < hw2 {
                (1.0 / (r2 - hw2)).exp()
            } else {
                0.0
            }
        })
        .collect();
    Ok(FieldState {
        t: 0.0,
        u,
        v: vec![0.0; grid.len()],
    })
}

/// Exact free flow over a fixed time `h`, applied mode-wise:
/// `u^ <- cos(h w) u^ + sin(h w)/w v^`, `v^ <- -w sin(h w) u^ + cos(h w) v^`
/// with `w = |xi|^alpha` (and `sin(h w)/w -> h` at `w = 0`).
///
/// `u` and `v` are packed into one complex transform `z = u + i v`.
pub struct FreePropagator {
    fourier: Fourier,
    cos: Vec<f64>,
    sinc: Vec<f64>,
    wsin: Vec<f64>,
    buf: Vec<Complex64>,
    out: Vec<Complex64>,
}

impl FreePropagator {
    pub fn new(grid: &Grid1D, alpha: f64, h: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(KgError::InvalidAlpha(alpha));
        }
        let n = grid.len();
        let mut cos = Vec::with_capacity(n);
        let mut sinc = Vec::with_capacity(n);
        let mut wsin = Vec::with_capacity(n);
        for xi in grid.wavenumbers() {
            let w = xi.abs().powf(alpha);
            let (s, c) = (h * w).sin_cos();
            cos.push(c);
            sinc.push(if w == 0.0 { h } else { s / w });
            wsin.push(w * s);
        }
        Ok(Self {
            fourier: Fourier::new(grid),
            cos,
            sinc,
            wsin,
            buf: vec![Complex64::new(0.0, 0.0); n],
            out: vec![Complex64::new(0.0, 0.0); n],
        })
    }

    pub fn apply(&mut self, u: &mut [f64], v: &mut [f64]) {
        let n = u.len();
        for ((z, &a), &b) in self.buf.iter_mut().zip(u.iter()).zip(v.iter()) {
            *z = Complex64::new(a, b);
        }
        self.fourier.forward_in_place(&mut self.buf);
        for k in 0..n {
            let zk = self.buf[k];
            let zm = self.buf[(n - k) % n].conj();
            let uh = 0.5 * (zk + zm);
            let vh = Complex64::new(0.0, -0.5) * (zk - zm);
            let un = self.cos[k] * uh + self.sinc[k] * vh;
            let vn = self.cos[k] * vh - self.wsin[k] * uh;
            self.out[k] = un + Complex64::new(0.0, 1.0) * vn;
        }
        self.fourier.inverse_in_place(&mut self.out);
        for ((a, b), z) in u.iter_mut().zip(v.iter_mut()).zip(&self.out) {
            *a = z.re;
            *b = z.im;
        }
    }
}

/// Exact solution of the free problem (`m = 0`) at time `state0.t + t`.
pub fn free_propagate(
    state0: &FieldState,
    t: f64,
    alpha: f64,
    grid: &Grid1D,
) -> Result<FieldState> {
    if t.is_nan() || t < 0.0 {
        return Err(KgError::InvalidArgument(format!(
            "propagation time must be >= 0, got {t}"
        )));
    }
    grid.check_len(&state0.u)?;
    grid.check_len(&state0.v)?;
    let mut prop = FreePropagator::new(grid, alpha, t)?;
    let mut out = state0.clone();
    prop.apply(&mut out.u, &mut out.v);
    out.t += t;
    Ok(out)
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(KgError::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    Ok(())
}

fn check_mass(mass: &RegularizedMass, grid: &Grid1D) -> Result<()> {
    grid.check_len(mass.samples())
}

/// Strang splitting stepper. Owns its FFT plans and scratch.
pub struct StrangStepper {
    half: FreePropagator,
    mass: Vec<f64>,
    dt: f64,
    state: FieldState,
}

impl StrangStepper {
    pub fn new(
        state0: &FieldState,
        mass: &RegularizedMass,
        dt: f64,
        alpha: f64,
        grid: &Grid1D,
    ) -> Result<Self> {
        check_dt(dt)?;
        check_mass(mass, grid)?;
        grid.check_len(&state0.u)?;
        grid.check_len(&state0.v)?;
        // Linear stability of the kick: dt * sqrt(max m) < 2.
        if dt * mass.sup_norm().sqrt() >= 2.0 {
            return Err(KgError::UnsupportedScheme {
                scheme: "spectral_strang",
                reason: format!(
                    "dt = {dt} with sup m = {:.4}: need dt * sqrt(sup m) < 2",
                    mass.sup_norm()
                ),
            });
        }
        Ok(Self {
            half: FreePropagator::new(grid, alpha, 0.5 * dt)?,
            mass: mass.samples().to_vec(),
            dt,
            state: state0.clone(),
        })
    }

    pub fn step(&mut self) {
        let FieldState { u, v, t } = &mut self.state;
        self.half.apply(u, v);
        for ((vi, ui), m) in v.iter_mut().zip(u.iter()).zip(&self.mass) {
            *vi -= self.dt * m * ui;
        }
        self.half.apply(u, v);
        *t += self.dt;
    }

    pub fn state(&self) -> &FieldState {
        &self.state
    }
}

/// One Strang step from `state`.
pub fn step_spectral_strang(
    state: &FieldState,
    mass: &RegularizedMass,
    dt: f64,
    alpha: f64,
    grid: &Grid1D,
) -> Result<FieldState> {
    let mut stepper = StrangStepper::new(state, mass, dt, alpha, grid)?;
    stepper.step();
    Ok(stepper.state.clone())
}

/// Three-level implicit stepper for `alpha = 1`.
///
/// With `A = I + dt^2/2 (M - D2)` the update is `u+ = 2 A^-1 u - u-`. The first
/// level comes from applying the same scheme with the fictitious
/// `u(-dt) = u(dt) - 2 dt v0`, giving `u(dt) = A^-1 u0 + dt v0`. Velocities are
/// reconstructed by central differences, so the stepper keeps one level ahead.
pub struct ImplicitFdStepper {
    solver: CyclicTridiagonal,
    dt: f64,
    level: usize,
    t0: f64,
    v0: Vec<f64>,
    prev: Vec<f64>,
    now: Vec<f64>,
    next: Vec<f64>,
}

impl ImplicitFdStepper {
    pub fn new(
        state0: &FieldState,
        mass: &RegularizedMass,
        dt: f64,
        alpha: f64,
        grid: &Grid1D,
    ) -> Result<Self> {
        if alpha != 1.0 {
            return Err(KgError::UnsupportedScheme {
                scheme: "implicit_fd",
                reason: format!("alpha = {alpha} (only alpha = 1)"),
            });
        }
        check_dt(dt)?;
        check_mass(mass, grid)?;
        grid.check_len(&state0.u)?;
        grid.check_len(&state0.v)?;
        let c = 0.5 * dt * dt / (grid.dx() * grid.dx());
        let diag: Vec<f64> = mass
            .samples()
            .iter()
            .map(|m| 1.0 + 2.0 * c + 0.5 * dt * dt * m)
            .collect();
        let solver = CyclicTridiagonal::new(&diag, -c)?;
        let mut next = state0.u.clone();
        solver.solve_in_place(&mut next);
        for (x, v) in next.iter_mut().zip(&state0.v) {
            *x += dt * v;
        }
        Ok(Self {
            solver,
            dt,
            level: 0,
            t0: state0.t,
            v0: state0.v.clone(),
            prev: Vec::new(),
            now: state0.u.clone(),
            next,
        })
    }

    fn advance_next(&mut self) {
        // prev <- now <- next, next <- 2 A^-1 now - prev
        std::mem::swap(&mut self.prev, &mut self.now);
        std::mem::swap(&mut self.now, &mut self.next);
        if self.next.len() != self.now.len() {
            self.next = vec![0.0; self.now.len()];
        }
        self.next.copy_from_slice(&self.now);
        self.solver.solve_in_place(&mut self.next);
        for (x, p) in self.next.iter_mut().zip(&self.prev) {
            *x = 2.0 * *x - p;
        }
    }

    pub fn step(&mut self) {
        self.advance_next();
        self.level += 1;
    }

    /// Time reversal: continues forward in `t` with the velocity negated, so
    /// subsequent steps retrace the trajectory.
    pub fn reverse(&mut self) {
        if self.level == 0 {
            self.v0.iter_mut().for_each(|v| *v = -*v);
            let mut next = self.now.clone();
            self.solver.solve_in_place(&mut next);
            for (x, v) in next.iter_mut().zip(&self.v0) {
                *x += self.dt * v;
            }
            self.next = next;
        } else {
            std::mem::swap(&mut self.prev, &mut self.next);
        }
    }

    fn time_since_start(&self) -> f64 {
        self.level as f64 * self.dt
    }

    pub fn state(&self) -> FieldState {
        let v = if self.level == 0 {
            self.v0.clone()
        } else {
            let inv = 0.5 / self.dt;
            self.next
                .iter()
                .zip(&self.prev)
                .map(|(a, b)| (a - b) * inv)
                .collect()
        };
        FieldState {
            t: self.t0 + self.time_since_start(),
            u: self.now.clone(),
            v,
        }
    }
}

/// One implicit step (bootstrap step) from `state`, `alpha = 1`.
pub fn step_implicit_fd(
    state: &FieldState,
    mass: &RegularizedMass,
    dt: f64,
    grid: &Grid1D,
) -> Result<FieldState> {
    let mut stepper = ImplicitFdStepper::new(state, mass, dt, 1.0, grid)?;
    stepper.step();
    Ok(stepper.state())
}

enum Stepper {
    Strang(Box<StrangStepper>),
    Fd(Box<ImplicitFdStepper>),
}

impl Stepper {
    fn new(
        scheme: SchemeId,
        state0: &FieldState,
        mass: &RegularizedMass,
        dt: f64,
        alpha: f64,
        grid: &Grid1D,
    ) -> Result<Self> {
        Ok(match scheme {
            SchemeId::SpectralStrang => {
                Stepper::Strang(Box::new(StrangStepper::new(state0, mass, dt, alpha, grid)?))
            }
            SchemeId::ImplicitFd => Stepper::Fd(Box::new(ImplicitFdStepper::new(
                state0, mass, dt, alpha, grid,
            )?)),
        })
    }

    fn step(&mut self) {
        match self {
            Stepper::Strang(s) => s.step(),
            Stepper::Fd(s) => s.step(),
        }
    }

    fn state(&self) -> FieldState {
        match self {
            Stepper::Strang(s) => s.state().clone(),
            Stepper::Fd(s) => s.state(),
        }
    }
}

/// Step count and snapshot placement for a run to `t_final`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimePlan {
    pub dt_requested: f64,
    pub dt: f64,
    pub steps: usize,
    pub snapshot_steps: Vec<usize>,
    /// `|step time - requested time|` for each snapshot; `<= dt/2`.
    pub offsets: Vec<f64>,
}

impl TimePlan {
    /// The step is reduced to the largest `t_final / k <= dt` that places every
    /// snapshot on a step boundary; if none exists within `4x` the nominal
    /// step count, snapshots snap to the nearest step.
    pub fn new(dt: f64, t_final: f64, snapshot_times: &[f64]) -> Result<Self> {
        check_dt(dt)?;
        if !(t_final.is_finite() && t_final >= 0.0) {
            return Err(KgError::InvalidArgument(format!(
                "final time must be >= 0, got {t_final}"
            )));
        }
        if snapshot_times.is_empty() {
            return Err(KgError::InvalidArgument("snapshot list is empty".into()));
        }
        if snapshot_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(KgError::InvalidArgument(
                "snapshot times must be sorted".into(),
            ));
        }
        if snapshot_times.iter().any(|&s| !(s >= 0.0 && s <= t_final)) {
            return Err(KgError::InvalidArgument(format!(
                "snapshot times must lie in [0, {t_final}]"
            )));
        }
        if t_final == 0.0 {
            return Ok(Self {
                dt_requested: dt,
                dt,
                steps: 0,
                snapshot_steps: vec![0; snapshot_times.len()],
                offsets: vec![0.0; snapshot_times.len()],
            });
        }
        let nominal = ((t_final / dt) * (1.0 - STEP_ALIGN_TOL)).ceil().max(1.0) as usize;
        let aligned = |steps: usize| -> Option<Vec<usize>> {
            let h = t_final / steps as f64;
            snapshot_times
                .iter()
                .map(|&s| {
                    let q = s / h;
                    let r = q.round();
                    ((q - r).abs() <= STEP_ALIGN_TOL * q.max(1.0)).then_some(r as usize)
                })
                .collect()
        };
        let (steps, snapshot_steps) = (nominal..=4 * nominal)
            .find_map(|k| aligned(k).map(|idx| (k, idx)))
            .unwrap_or_else(|| {
                let h = t_final / nominal as f64;
                let idx = snapshot_times
                    .iter()
                    .map(|&s| ((s / h).round() as usize).min(nominal))
                    .collect();
                (nominal, idx)
            });
        let h = t_final / steps as f64;
        let offsets = snapshot_times
            .iter()
            .zip(&snapshot_steps)
            .map(|(&s, &i)| {
                let d = (step_time(i, steps, t_final) - s).abs();
                // Aligned snapshots report zero offset.
                if d <= STEP_ALIGN_TOL * h {
                    0.0
                } else {
                    d
                }
            })
            .collect();
        Ok(Self {
            dt_requested: dt,
            dt: h,
            steps,
            snapshot_steps,
            offsets,
        })
    }

    pub fn step_time(&self, i: usize, t_final: f64) -> f64 {
        step_time(i, self.steps, t_final)
    }
}

fn step_time(i: usize, steps: usize, t_final: f64) -> f64 {
    if steps == 0 {
        0.0
    } else {
        i as f64 * t_final / steps as f64
    }
}

/// Snapshots of one run plus the time plan actually used.
#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub scheme: SchemeId,
    pub plan: TimePlan,
    pub requested_times: Vec<f64>,
    pub snapshots: Vec<FieldState>,
}

/// Evolves `state0` to `t_final` and returns the states at `snapshot_times`.
#[allow(clippy::too_many_arguments)]
pub fn evolve(
    state0: &FieldState,
    mass: &RegularizedMass,
    scheme: SchemeId,
    dt: f64,
    t_final: f64,
    alpha: f64,
    grid: &Grid1D,
    snapshot_times: &[f64],
) -> Result<Evolution> {
    evolve_observed(
        state0,
        mass,
        scheme,
        dt,
        t_final,
        alpha,
        grid,
        snapshot_times,
        |_| {},
    )
}

/// As [`evolve`], calling `observer` with the state at every step
/// (including the initial one).
#[allow(clippy::too_many_arguments)]
pub fn evolve_observed<F: FnMut(&FieldState)>(
    state0: &FieldState,
    mass: &RegularizedMass,
    scheme: SchemeId,
    dt: f64,
    t_final: f64,
    alpha: f64,
    grid: &Grid1D,
    snapshot_times: &[f64],
    mut observer: F,
) -> Result<Evolution> {
    let plan = TimePlan::new(dt, t_final, snapshot_times)?;
    let mut start = state0.clone();
    start.t = 0.0;
    let mut stepper = Stepper::new(scheme, &start, mass, plan.dt, alpha, grid)?;
    let mut snapshots = Vec::with_capacity(snapshot_times.len());
    let mut next_snap = 0;
    for i in 0..=plan.steps {
        if i > 0 {
            stepper.step();
        }
        let mut state = stepper.state();
        state.t = plan.step_time(i, t_final);
        if !state.is_finite() {
            return Err(KgError::InvalidArgument(format!(
                "{scheme} produced non-finite values at t = {}",
                state.t
            )));
        }
        observer(&state);
        while next_snap < plan.snapshot_steps.len() && plan.snapshot_steps[next_snap] == i {
            snapshots.push(state.clone());
            next_snap += 1;
        }
    }
    Ok(Evolution {
        scheme,
        plan,
        requested_times: snapshot_times.to_vec(),
        snapshots,
    })
}
