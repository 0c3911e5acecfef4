//! Flow integration, the time-2π stroboscopic map and its Jacobian.
//!
//! The default scheme is the adaptive Dormand–Prince 8(5,3) pair. Strobe
//! iterates always land on `t0 + 2πk` exactly: the final step of every
//! period is clamped to the endpoint, never interpolated.

pub(crate) mod dop853;

use std::f64::consts::TAU;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::models::{ModelSpec, PhaseState};

use dop853::{Failure, Outcome, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Method {
    /// Adaptive Dormand–Prince 8(5,3).
    Dop853,
    /// Classic RK4 with a fixed number of steps per 2π of time.
    Rk4 { steps_per_period: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub max_steps_per_period: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Dop853,
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_step: 1.0,
            max_steps_per_period: 100_000,
        }
    }
}

impl IntegratorConfig {
    /// Looser tolerances for long statistical runs where individual chaotic
    /// orbits are not meaningful beyond a Lyapunov time anyway.
    pub fn survey() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if !(self.max_step > 0.0) || self.max_steps_per_period == 0 {
            return Err(Error::InvalidArgument("step caps must be positive".into()));
        }
        if let Method::Rk4 { steps_per_period } = self.method {
            if steps_per_period == 0 {
                return Err(Error::InvalidArgument(
                    "steps_per_period must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    fn tolerances(&self, span: f64) -> Tolerances {
        let periods = (span.abs() / TAU).ceil().max(1.0);
        Tolerances {
            abs: self.abs_tol,
            rel: self.rel_tol,
            max_step: self.max_step,
            max_steps: (self.max_steps_per_period as f64 * periods).min(usize::MAX as f64 / 2.0)
                as usize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: PhaseState,
    pub energy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub spec: ModelSpec,
    pub config: IntegratorConfig,
    pub initial: PhaseState,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    fn new(spec: &ModelSpec, config: &IntegratorConfig, s0: PhaseState) -> Self {
        Self {
            spec: spec.clone(),
            config: *config,
            initial: s0,
            samples: vec![Sample {
                t: s0.t,
                state: s0,
                energy: Some(spec.energy(&s0)),
            }],
        }
    }

    fn push(&mut self, state: PhaseState) {
        let energy = Some(self.spec.energy(&state));
        self.samples.push(Sample {
            t: state.t,
            state,
            energy,
        });
    }

    pub fn last(&self) -> PhaseState {
        self.samples.last().map(|s| s.state).unwrap_or(self.initial)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Largest `|y − y(0)|` along the lifted orbit.
    pub fn y_excursion(&self) -> f64 {
        let y0 = self.initial.y;
        self.samples
            .iter()
            .map(|s| (s.state.y - y0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_energy_drift(&self) -> f64 {
        let Some(e0) = self.samples.first().and_then(|s| s.energy) else {
            return 0.0;
        };
        self.samples
            .iter()
            .filter_map(|s| s.energy)
            .map(|e| (e - e0).abs())
            .fold(0.0, f64::max)
    }

    /// Keeps every `stride`-th sample plus the last one.
    pub fn strided(&self, stride: usize) -> Trajectory {
        let stride = stride.max(1);
        let n = self.samples.len();
        let samples = self
            .samples
            .iter()
            .enumerate()
            .filter(|(i, _)| i % stride == 0 || *i + 1 == n)
            .map(|(_, s)| *s)
            .collect();
        Trajectory {
            samples,
            ..self.clone()
        }
    }
}

#[inline]
fn flow_rhs(spec: &ModelSpec) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + '_ {
    move |t, y| {
        let (dx, dy) = spec.vector_field(y[0], y[1], t);
        [dx, dy]
    }
}

/// State `(x, y, Φ₁₁, Φ₁₂, Φ₂₁, Φ₂₂)` with `Φ' = J(x, y, t)·Φ`.
fn variational_rhs(spec: &ModelSpec) -> impl Fn(f64, &[f64; 6]) -> [f64; 6] + '_ {
    move |t, y| {
        let ((dx, dy), j) = spec.field_with_jacobian(y[0], y[1], t);
        [
            dx,
            dy,
            j[0][0] * y[2] + j[0][1] * y[4],
            j[0][0] * y[3] + j[0][1] * y[5],
            j[1][0] * y[2] + j[1][1] * y[4],
            j[1][0] * y[3] + j[1][1] * y[5],
        ]
    }
}

/// Low-level driver shared by every public entry point.
pub(crate) struct Integrator<'a> {
    spec: &'a ModelSpec,
    config: &'a IntegratorConfig,
    hint: Option<f64>,
}

pub(crate) enum Segment<const N: usize> {
    Reached([f64; N]),
    Stopped { t: f64, y: [f64; N] },
}

impl<'a> Integrator<'a> {
    pub(crate) fn new(spec: &'a ModelSpec, config: &'a IntegratorConfig) -> Self {
        Self {
            spec,
            config,
            hint: None,
        }
    }

    fn run<const N: usize, F, O>(
        &mut self,
        f: &F,
        t0: f64,
        y0: [f64; N],
        t1: f64,
        observer: O,
    ) -> std::result::Result<Segment<N>, Failure<N>>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
        O: FnMut(f64, &[f64; N]) -> ControlFlow<()>,
    {
        let out = match self.config.method {
            Method::Dop853 => {
                let tol = self.config.tolerances(t1 - t0);
                dop853::solve(f, t0, y0, t1, &tol, &mut self.hint, observer)?
            }
            Method::Rk4 { steps_per_period } => {
                let n = ((t1 - t0).abs() / TAU * steps_per_period as f64).ceil() as usize;
                dop853::rk4(f, t0, y0, t1, n, observer)
            }
        };
        Ok(match out {
            Outcome::Reached(y) => Segment::Reached(y),
            Outcome::Stopped { t, y } => Segment::Stopped { t, y },
        })
    }

    /// Flow from `s` to time `t1`, observing accepted steps.
    pub(crate) fn flow_observed<O>(
        &mut self,
        s: PhaseState,
        t1: f64,
        mut observer: O,
    ) -> Result<Segment<2>>
    where
        O: FnMut(&PhaseState) -> ControlFlow<()>,
    {
        let f = flow_rhs(self.spec);
        self.run(&f, s.t, [s.x, s.y], t1, |t, y| {
            observer(&PhaseState::new(y[0], y[1], t))
        })
        .map_err(|e| failure_error(self.spec, self.config, s, e))
    }

    pub(crate) fn flow_to(&mut self, s: PhaseState, t1: f64) -> Result<PhaseState> {
        match self.flow_observed(s, t1, |_| ControlFlow::Continue(()))? {
            Segment::Reached(y) => Ok(PhaseState::new(y[0], y[1], t1)),
            Segment::Stopped { t, y } => Ok(PhaseState::new(y[0], y[1], t)),
        }
    }

    /// Flow with the variational equations; returns the end state and `DΦ`.
    pub(crate) fn flow_with_jacobian(
        &mut self,
        s: PhaseState,
        t1: f64,
    ) -> Result<(PhaseState, Mat2)> {
        let f = variational_rhs(self.spec);
        let y0 = [s.x, s.y, 1.0, 0.0, 0.0, 1.0];
        match self.run(&f, s.t, y0, t1, |_, _| ControlFlow::Continue(())) {
            Ok(Segment::Reached(y)) | Ok(Segment::Stopped { y, .. }) => Ok((
                PhaseState::new(y[0], y[1], t1),
                Mat2([[y[2], y[3]], [y[4], y[5]]]),
            )),
            Err(Failure::StepLimit { t, y }) => {
                let partial = PhaseState::new(y[0], y[1], t);
                Err(failure_error(
                    self.spec,
                    self.config,
                    s,
                    Failure::StepLimit {
                        t,
                        y: [partial.x, partial.y],
                    },
                ))
            }
            Err(Failure::Underflow { t }) => Err(Error::StepUnderflow { t }),
        }
    }
}

fn failure_error(
    spec: &ModelSpec,
    config: &IntegratorConfig,
    s0: PhaseState,
    f: Failure<2>,
) -> Error {
    match f {
        Failure::StepLimit { t, y } => {
            let mut partial = Trajectory::new(spec, config, s0);
            partial.push(PhaseState::new(y[0], y[1], t));
            Error::StepLimit {
                limit: config.tolerances(t - s0.t).max_steps,
                t,
                partial: Box::new(partial),
            }
        }
        Failure::Underflow { t } => Error::StepUnderflow { t },
    }
}

/// Integrates from `s0` to `t_final`, recording every accepted step.
pub fn advance(
    spec: &ModelSpec,
    s0: PhaseState,
    t_final: f64,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    if !(t_final > s0.t) {
        return Err(Error::InvalidArgument(format!(
            "t_final ({t_final}) must exceed the initial time ({})",
            s0.t
        )));
    }
    config.validate()?;
    let mut traj = Trajectory::new(spec, config, s0);
    let mut integ = Integrator::new(spec, config);
    let res = integ.flow_observed(s0, t_final, |s| {
        traj.push(*s);
        ControlFlow::Continue(())
    });
    match res {
        Ok(_) => Ok(traj),
        Err(Error::StepLimit { limit, t, .. }) => Err(Error::StepLimit {
            limit,
            t,
            partial: Box::new(traj),
        }),
        Err(e) => Err(e),
    }
}

/// Integrates from `s0` to `t_final`, recording states on the uniform grid
/// `t0 + k·dt` (each grid time hit exactly) and at `t_final`.
pub fn advance_sampled(
    spec: &ModelSpec,
    s0: PhaseState,
    t_final: f64,
    dt: f64,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    if !(t_final > s0.t) || !(dt > 0.0) {
        return Err(Error::InvalidArgument(
            "need t_final > t0 and dt > 0".into(),
        ));
    }
    config.validate()?;
    let mut traj = Trajectory::new(spec, config, s0);
    let mut integ = Integrator::new(spec, config);
    let mut s = s0;
    let mut k = 1u64;
    loop {
        let target = (s0.t + k as f64 * dt).min(t_final);
        s = match integ.flow_to(s, target) {
            Ok(next) => next,
            Err(Error::StepLimit { limit, t, .. }) => {
                return Err(Error::StepLimit {
                    limit,
                    t,
                    partial: Box::new(traj),
                })
            }
            Err(e) => return Err(e),
        };
        traj.push(s);
        if target >= t_final {
            return Ok(traj);
        }
        k += 1;
    }
}

/// General flow map to `t1`, forward or backward in time.
pub fn flow(
    spec: &ModelSpec,
    s0: PhaseState,
    t1: f64,
    config: &IntegratorConfig,
) -> Result<PhaseState> {
    Integrator::new(spec, config).flow_to(s0, t1)
}

/// `n` iterates of the time-2π map; iterate `k` sits at `t0 + 2πk`.
pub fn strobe(
    spec: &ModelSpec,
    s0: PhaseState,
    n: usize,
    config: &IntegratorConfig,
) -> Result<Vec<PhaseState>> {
    strobe_signed(spec, s0, n, 1.0, config)
}

/// `n` iterates of the inverse time-2π map.
pub fn strobe_inverse(
    spec: &ModelSpec,
    s0: PhaseState,
    n: usize,
    config: &IntegratorConfig,
) -> Result<Vec<PhaseState>> {
    strobe_signed(spec, s0, n, -1.0, config)
}

fn strobe_signed(
    spec: &ModelSpec,
    s0: PhaseState,
    n: usize,
    sign: f64,
    config: &IntegratorConfig,
) -> Result<Vec<PhaseState>> {
    if n == 0 {
        return Err(Error::InvalidArgument("strobe needs n >= 1".into()));
    }
    config.validate()?;
    let mut integ = Integrator::new(spec, config);
    let mut out = Vec::with_capacity(n);
    let mut s = s0;
    for k in 1..=n {
        s = integ.flow_to(s, s0.t + sign * TAU * k as f64)?;
        out.push(s);
    }
    Ok(out)
}

/// One application of the time-2π map (or its inverse for `sign < 0`).
pub fn strobe_once(
    spec: &ModelSpec,
    s: PhaseState,
    sign: f64,
    config: &IntegratorConfig,
) -> Result<PhaseState> {
    Integrator::new(spec, config).flow_to(s, s.t + sign.signum() * TAU)
}

/// Jacobian of the time-2π map at `s0` via the variational equations.
pub fn strobe_jacobian(
    spec: &ModelSpec,
    s0: PhaseState,
    config: &IntegratorConfig,
) -> Result<Mat2> {
    Ok(strobe_with_jacobian(spec, s0, config)?.1)
}

pub fn strobe_with_jacobian(
    spec: &ModelSpec,
    s0: PhaseState,
    config: &IntegratorConfig,
) -> Result<(PhaseState, Mat2)> {
    config.validate()?;
    Integrator::new(spec, config).flow_with_jacobian(s0, s0.t + TAU)
}
