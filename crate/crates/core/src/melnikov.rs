//! Unperturbed separatrices and first-order Melnikov integrals along them.
//!
//! For a perturbing Hamiltonian `F`, `M(t0) = ∫ {h0, F}(q(τ), τ + t0) dτ` with
//! `{A, B} = A_x·B_y − A_y·B_x`. The separatrix is parameterized so that
//! `τ = 0` is the point of maximal `|ẋ| + |ẏ|`. With `H = h0 + μF` the normal
//! gap between unstable and stable manifolds on the phase-`t0` section
//! through `q(0)` is `μ·M(t0)/|∇h0(q(0))|` to first order.

use std::f64::consts::{PI, TAU};
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoints::nearest_saddle;
use crate::integrate::dop853::{self, Failure, Outcome, Tolerances};
use crate::linalg::Mat2;
use crate::models::{separatrix_level, Family, ModelSpec, Perturbation, PhaseState};
use crate::roots::brent;

/// Distance from the saddle where each half of the separatrix is seeded.
pub const SEED_OFFSET: f64 = 1e-9;
pub const TAIL_THRESHOLD: f64 = 1e-12;
/// Largest allowed gap between the two halves at the symmetry point.
pub const MATCH_TOL: f64 = 1e-6;
pub const MIN_T0_SAMPLES: usize = 64;

/// Eigen-data of the linearized unperturbed field at a saddle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleLinearization {
    pub nu: f64,
    pub unstable: [f64; 2],
    pub stable: [f64; 2],
}

pub fn saddle_linearization(spec: &ModelSpec, saddle: &PhaseState) -> Result<SaddleLinearization> {
    separatrix_level(spec, saddle)?;
    let (_, j) = spec
        .unperturbed()
        .field_with_jacobian(saddle.x, saddle.y, 0.0);
    let m = Mat2(j);
    let pairs = m.real_eigen().ok_or(Error::NotASaddle {
        x: saddle.x,
        y: saddle.y,
    })?;
    let (up, down) = if pairs[0].0 > 0.0 {
        (pairs[0], pairs[1])
    } else {
        (pairs[1], pairs[0])
    };
    if !(up.0 > 0.0 && down.0 < 0.0) {
        return Err(Error::NotASaddle {
            x: saddle.x,
            y: saddle.y,
        });
    }
    Ok(SaddleLinearization {
        nu: up.0,
        unstable: up.1,
        stable: down.1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparatrixSample {
    pub tau: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatrixOrbit {
    pub family: Family,
    pub epsilon: f64,
    pub from: PhaseState,
    /// The lattice copy of the requested target that the orbit actually reaches.
    pub to: PhaseState,
    /// Sign applied to the unstable eigenvector of `from`.
    pub branch: i8,
    pub level: f64,
    pub nu_from: f64,
    pub nu_to: f64,
    pub step: f64,
    pub t_cut: f64,
    /// Distance between the forward and backward halves at `τ = 0`.
    pub mismatch: f64,
    pub samples: Vec<SeparatrixSample>,
}

impl SeparatrixOrbit {
    /// The symmetry point `q(0)`.
    pub fn center(&self) -> SeparatrixSample {
        self.samples[self.samples.len() / 2]
    }

    pub fn decay_rate(&self) -> f64 {
        self.nu_from.min(self.nu_to)
    }

    pub fn max_energy_error(&self, spec: &ModelSpec) -> f64 {
        let h0 = spec.unperturbed().with_epsilon(self.epsilon);
        self.samples
            .iter()
            .map(|s| (h0.integrable_energy(s.x, s.y) - self.level).abs())
            .fold(0.0, f64::max)
    }
}

/// Unperturbed field in coordinates `z = q − saddle`. Saddle coordinates are
/// multiples of π (or 1 for the Cubic upper row), so the trigonometric shifts
/// are exact and small offsets keep full relative precision.
#[derive(Debug, Clone, Copy)]
struct LocalField {
    family: Family,
    epsilon: f64,
    saddle: PhaseState,
    cx: f64,
    cy: f64,
}

impl LocalField {
    fn new(family: Family, epsilon: f64, saddle: PhaseState) -> Self {
        let sign = |v: f64| {
            if ((v / PI).round() as i64).rem_euclid(2) == 0 {
                1.0
            } else {
                -1.0
            }
        };
        Self {
            family,
            epsilon,
            saddle,
            cx: sign(saddle.x),
            cy: sign(saddle.y),
        }
    }

    #[inline]
    fn field(&self, z: &[f64; 2]) -> [f64; 2] {
        match self.family {
            Family::Torus => [-self.cy * z[1].sin(), -self.epsilon * self.cx * z[0].sin()],
            Family::Cubic => {
                let y0 = self.saddle.y;
                [
                    (y0 + z[1]) * ((1.0 - y0) - z[1]),
                    -self.epsilon / 12.0 * self.cx * z[0].sin(),
                ]
            }
        }
    }

    /// Field Jacobian `[[∂ẋ/∂x, ∂ẋ/∂y], [∂ẏ/∂x, ∂ẏ/∂y]]`.
    fn jacobian(&self, z: &[f64; 2]) -> [[f64; 2]; 2] {
        match self.family {
            Family::Torus => [
                [0.0, -self.cy * z[1].cos()],
                [-self.epsilon * self.cx * z[0].cos(), 0.0],
            ],
            Family::Cubic => {
                let y0 = self.saddle.y;
                [
                    [0.0, (1.0 - 2.0 * y0) - 2.0 * z[1]],
                    [-self.epsilon / 12.0 * self.cx * z[0].cos(), 0.0],
                ]
            }
        }
    }

    fn absolute(&self, z: &[f64; 2]) -> PhaseState {
        PhaseState::at(self.saddle.x + z[0], self.saddle.y + z[1])
    }

    fn l1_speed(&self, z: &[f64; 2]) -> f64 {
        let v = self.field(z);
        v[0].abs() + v[1].abs()
    }

    /// Time derivative of `|ẋ| + |ẏ|` along the flow.
    fn l1_speed_rate(&self, z: &[f64; 2]) -> f64 {
        let v = self.field(z);
        let j = self.jacobian(z);
        let ax = j[0][0] * v[0] + j[0][1] * v[1];
        let ay = j[1][0] * v[0] + j[1][1] * v[1];
        v[0].signum() * ax + v[1].signum() * ay
    }
}

/// Sequential flow of a `LocalField` with a carried step hint.
struct LocalFlow {
    field: LocalField,
    tol: Tolerances,
    hint: Option<f64>,
}

impl LocalFlow {
    fn new(field: LocalField) -> Self {
        Self {
            field,
            tol: Tolerances {
                abs: SEED_OFFSET * 1e-12,
                rel: 1e-12,
                max_step: 0.5,
                max_steps: 1_000_000,
            },
            hint: None,
        }
    }

    fn flow(&mut self, t0: f64, z: [f64; 2], t1: f64) -> Result<[f64; 2]> {
        let f = |_t: f64, z: &[f64; 2]| self.field.field(z);
        match dop853::solve(&f, t0, z, t1, &self.tol, &mut self.hint, |_, _| {
            ControlFlow::Continue(())
        }) {
            Ok(Outcome::Reached(y)) | Ok(Outcome::Stopped { y, .. }) => Ok(y),
            Err(Failure::StepLimit { t, .. }) => Err(Error::Integration(format!(
                "separatrix step budget exhausted at t = {t}"
            ))),
            Err(Failure::Underflow { t }) => Err(Error::StepUnderflow { t }),
        }
    }
}

struct Half {
    field: LocalField,
    /// Uniform samples `(t, z)` at `t = dir·k·dt`.
    states: Vec<(f64, [f64; 2])>,
    /// Saddle the half ends near (lattice copy), if any.
    end_saddle: Option<PhaseState>,
}

/// Integrates from `z0` (at `t = 0`) in direction `dir` until the orbit has
/// left its saddle and come within a small radius of another lattice saddle.
fn run_half(
    h0: &ModelSpec,
    field: LocalField,
    z0: [f64; 2],
    dir: f64,
    dt: f64,
    t_max: f64,
) -> Result<Half> {
    const R_LEAVE: f64 = 0.2;
    const R_STOP: f64 = 0.05;
    let mut flow = LocalFlow::new(field);
    let mut z = z0;
    let mut states = vec![(0.0, z)];
    let mut left = false;
    let mut k = 0usize;
    while (k as f64) * dt < t_max {
        let t_prev = dir * k as f64 * dt;
        k += 1;
        let t = dir * k as f64 * dt;
        z = flow.flow(t_prev, z, t)?;
        states.push((t, z));
        if !left {
            left = z[0].hypot(z[1]) > R_LEAVE;
            continue;
        }
        let q = field.absolute(&z);
        let near = nearest_saddle(h0, &q);
        if q.distance(&near) < R_STOP {
            return Ok(Half {
                field,
                states,
                end_saddle: Some(near),
            });
        }
        if z[0].abs() > 1e3 || z[1].abs() > 1e3 {
            break;
        }
    }
    Ok(Half {
        field,
        states,
        end_saddle: None,
    })
}

/// Time along `half` where `|ẋ| + |ẏ|` peaks, and the local state there.
fn peak_time(half: &Half) -> Result<(f64, [f64; 2])> {
    let f = half.field;
    let (i, _) = half
        .states
        .iter()
        .enumerate()
        .map(|(i, (_, z))| (i, f.l1_speed(z)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty half");
    let lo = half.states[i.saturating_sub(1)].0;
    let hi = half.states[(i + 1).min(half.states.len() - 1)].0;
    let (t_anchor, z_anchor) = half.states[i];
    let mut flow = LocalFlow::new(f);
    let rate_at = |t: f64| -> Option<f64> {
        let z = flow.flow(t_anchor, z_anchor, t).ok()?;
        Some(f.l1_speed_rate(&z))
    };
    let t_peak = brent(rate_at, lo.min(hi), lo.max(hi), 1e-14, 200).unwrap_or(t_anchor);
    let z = LocalFlow::new(f).flow(t_anchor, z_anchor, t_peak)?;
    Ok((t_peak, z))
}

/// Unperturbed connection from saddle `from` to saddle `to` (matched modulo
/// the lattice). `t_cut` defaults to `40/ν`.
pub fn separatrix(
    spec: &ModelSpec,
    from: PhaseState,
    to: PhaseState,
    t_cut: Option<f64>,
) -> Result<SeparatrixOrbit> {
    let h0 = spec.unperturbed();
    let from = PhaseState::at(from.x, from.y);
    let level = separatrix_level(&h0, &from)?;
    let level_to = separatrix_level(&h0, &to)?;
    if (level - level_to).abs() > 1e-12 {
        return Err(Error::NoSuchConnection(format!(
            "separatrix levels differ ({level} vs {level_to}) at epsilon = {}",
            spec.epsilon
        )));
    }
    let lin_a = saddle_linearization(&h0, &from)?;
    let periodic_y = spec.family.y_periodic();
    let same_class = |p: &PhaseState| {
        let dx = (p.x - to.x) / TAU;
        let dy = if periodic_y {
            let r = (p.y - to.y) / TAU;
            r - r.round()
        } else {
            p.y - to.y
        };
        (dx - dx.round()).abs() < 1e-6 && dy.abs() < 1e-6
    };
    let nu_a = lin_a.nu;
    let t_max = 4.0 * ((1.0 / SEED_OFFSET).ln() + 20.0) / nu_a;
    let field_a = LocalField::new(spec.family, spec.epsilon, from);

    // Pick the unstable branch that lands on a copy of `to`, nearest the
    // requested lift.
    let mut best: Option<(i8, Half, PhaseState)> = None;
    for branch in [1i8, -1] {
        let b = branch as f64;
        let z0 = [
            b * SEED_OFFSET * lin_a.unstable[0],
            b * SEED_OFFSET * lin_a.unstable[1],
        ];
        let half = run_half(&h0, field_a, z0, 1.0, 0.05 / nu_a, t_max)?;
        if let Some(end) = half.end_saddle {
            if same_class(&end) && end.distance(&from) > 1e-9 {
                let better = best
                    .as_ref()
                    .map_or(true, |(_, _, e)| end.distance(&to) < e.distance(&to));
                if better {
                    best = Some((branch, half, end));
                }
            }
        }
    }
    let Some((branch, fwd, target)) = best else {
        return Err(Error::NoSuchConnection(format!(
            "no unstable branch of ({}, {}) reaches ({}, {})",
            from.x, from.y, to.x, to.y
        )));
    };
    let lin_b = saddle_linearization(&h0, &target)?;
    let field_b = LocalField::new(spec.family, spec.epsilon, target);
    let last = field_a.absolute(&fwd.states.last().expect("non-empty half").1);
    let toward = [last.x - target.x, last.y - target.y];
    let sb = if lin_b.stable[0] * toward[0] + lin_b.stable[1] * toward[1] >= 0.0 {
        1.0
    } else {
        -1.0
    };
    let w = [sb * lin_b.stable[0], sb * lin_b.stable[1]];
    let zb = [SEED_OFFSET * w[0], SEED_OFFSET * w[1]];
    let bwd = run_half(&h0, field_b, zb, -1.0, 0.05 / lin_b.nu, t_max)?;

    let (t_pf, zf) = peak_time(&fwd)?;
    let (t_pb, zpb) = peak_time(&bwd)?;
    let peak_f = field_a.absolute(&zf);
    let mismatch = peak_f.distance(&field_b.absolute(&zpb));
    if mismatch > MATCH_TOL {
        return Err(Error::NoSuchConnection(format!(
            "forward and backward halves miss each other by {mismatch:.3e}"
        )));
    }

    let nu_min = nu_a.min(lin_b.nu);
    let t_cut = t_cut.unwrap_or(40.0 / nu_min);
    if !(t_cut > 0.0) {
        return Err(Error::InvalidArgument("t_cut must be positive".into()));
    }
    let n_half = (t_cut / (0.025 / nu_min)).ceil().max(1.0) as usize;
    let step = t_cut / n_half as f64;
    let b = branch as f64;

    let mut samples = Vec::with_capacity(2 * n_half + 1);
    // τ ≤ 0 from the forward half, t = τ + t_pf; linear tail before the seed.
    let mut flow = LocalFlow::new(field_a);
    let (mut t_cur, mut z) = (0.0, fwd.states[0].1);
    for k in 0..=n_half {
        let tau = -t_cut + k as f64 * step;
        let t = tau + t_pf;
        let p = if k == n_half {
            peak_f
        } else if t <= 0.0 {
            let r = SEED_OFFSET * (nu_a * t).exp() * b;
            field_a.absolute(&[r * lin_a.unstable[0], r * lin_a.unstable[1]])
        } else {
            z = flow.flow(t_cur, z, t)?;
            t_cur = t;
            field_a.absolute(&z)
        };
        samples.push(SeparatrixSample {
            tau,
            x: p.x,
            y: p.y,
        });
    }
    // τ > 0 from the backward half, t = τ + t_pb, generated from t = 0
    // downwards and then reversed.
    let mut flow = LocalFlow::new(field_b);
    let (mut t_cur, mut z) = (0.0, bwd.states[0].1);
    let mut tail = Vec::with_capacity(n_half);
    for k in (1..=n_half).rev() {
        let tau = k as f64 * step;
        let t = tau + t_pb;
        let p = if t >= 0.0 {
            let r = SEED_OFFSET * (-lin_b.nu * t).exp();
            field_b.absolute(&[r * w[0], r * w[1]])
        } else {
            z = flow.flow(t_cur, z, t)?;
            t_cur = t;
            field_b.absolute(&z)
        };
        tail.push(SeparatrixSample {
            tau,
            x: p.x,
            y: p.y,
        });
    }
    tail.reverse();
    samples.extend(tail);

    Ok(SeparatrixOrbit {
        family: spec.family,
        epsilon: spec.epsilon,
        from,
        to: target,
        branch,
        level,
        nu_from: nu_a,
        nu_to: lin_b.nu,
        step,
        t_cut,
        mismatch,
        samples,
    })
}

/// `M(t0) = Σ_m a_m·cos(m·t0) + b_m·sin(m·t0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub m: i32,
    pub cos: f64,
    pub sin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelnikovZero {
    pub t0: f64,
    pub slope: f64,
    pub simple: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelnikovProfile {
    pub t0: Vec<f64>,
    pub values: Vec<f64>,
    pub zeros: Vec<MelnikovZero>,
    pub harmonics: Vec<Harmonic>,
    /// `q(0)`, where the section for splitting comparisons sits.
    pub section_point: (f64, f64),
    pub grad_norm: f64,
    pub step: f64,
    pub t_cut: f64,
    /// Integrand envelope `|∇h0|·Σ|c|(|a| + |b|)` at the two ends.
    pub tail_envelope: f64,
    /// Bound on the neglected tail integral.
    pub tail_bound: f64,
}

impl MelnikovProfile {
    pub fn eval(&self, t0: f64) -> f64 {
        self.harmonics
            .iter()
            .map(|h| {
                let (s, c) = (h.m as f64 * t0).sin_cos();
                h.cos * c + h.sin * s
            })
            .sum()
    }

    pub fn slope(&self, t0: f64) -> f64 {
        self.harmonics
            .iter()
            .map(|h| {
                let m = h.m as f64;
                let (s, c) = (m * t0).sin_cos();
                m * (h.sin * c - h.cos * s)
            })
            .sum()
    }

    /// `max |M|` over a phase, refined from a dense grid.
    pub fn max_abs(&self) -> f64 {
        const N: usize = 4096;
        let mut best = (0.0f64, 0.0f64);
        for k in 0..N {
            let t = TAU * k as f64 / N as f64;
            let v = self.eval(t).abs();
            if v > best.1 {
                best = (t, v);
            }
        }
        let h = TAU / N as f64;
        let s = |t: f64| self.slope(t) * self.eval(t).signum();
        match brent(|t| Some(s(t)), best.0 - h, best.0 + h, 1e-14, 100) {
            Some(t) => self.eval(t).abs().max(best.1),
            None => best.1,
        }
    }
}

/// First-order Melnikov profile of `perturbation` along `sep`, sampled on
/// `n_t0 ≥ 64` equispaced phases.
pub fn melnikov_profile(
    sep: &SeparatrixOrbit,
    perturbation: &Perturbation,
    n_t0: usize,
) -> Result<MelnikovProfile> {
    if n_t0 < MIN_T0_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_T0_SAMPLES} phase samples, got {n_t0}"
        )));
    }
    let h0 = ModelSpec::standard(sep.family, sep.epsilon, 0.0)?;
    let n = sep.samples.len();
    let grads: Vec<(f64, f64)> = sep
        .samples
        .iter()
        .map(|s| h0.integrable_gradient(s.x, s.y))
        .collect();

    let bound = perturbation.gradient_bound();
    let g_first = grads[0].0.hypot(grads[0].1);
    let g_last = grads[n - 1].0.hypot(grads[n - 1].1);
    let tail_envelope = bound * g_first.max(g_last);
    if tail_envelope >= TAIL_THRESHOLD {
        return Err(Error::TailTruncation {
            envelope: tail_envelope,
            t_cut: sep.t_cut,
        });
    }
    let tail_bound = bound * (g_first / sep.nu_from + g_last / sep.nu_to);

    // Term by term: {h0, c·cos θ} = −c·sin θ·(b·h0_x − a·h0_y), θ = ax + by + m(τ + t0) + φ.
    let mut acc: Vec<Harmonic> = Vec::new();
    for term in &perturbation.terms {
        if term.c == 0.0 {
            continue;
        }
        let (a, b) = (term.a as f64, term.b as f64);
        let (mut sum_c, mut sum_s) = (0.0, 0.0);
        for (k, (s, g)) in sep.samples.iter().zip(&grads).enumerate() {
            let wgt = if k == 0 || k == n - 1 { 0.5 } else { 1.0 } * sep.step;
            let w = b * g.0 - a * g.1;
            let (sn, cs) = term.phase(s.x, s.y, s.tau).sin_cos();
            sum_c += wgt * w * cs;
            sum_s += wgt * w * sn;
        }
        // −c·Σ w·sin(θ_k + m·t0) = −c·(S·cos(m t0) + C·sin(m t0))
        let (hc, hs) = (-term.c * sum_s, -term.c * sum_c);
        let key = term.m.abs();
        let sign = if term.m < 0 { -1.0 } else { 1.0 };
        let entry = match acc.iter_mut().find(|h| h.m == key) {
            Some(e) => e,
            None => {
                acc.push(Harmonic {
                    m: key,
                    cos: 0.0,
                    sin: 0.0,
                });
                acc.last_mut().expect("just pushed")
            }
        };
        entry.cos += hc;
        entry.sin += sign * hs;
    }
    acc.sort_by_key(|h| h.m);

    let center = sep.center();
    let g0 = h0.integrable_gradient(center.x, center.y);
    let mut profile = MelnikovProfile {
        t0: (0..n_t0).map(|k| TAU * k as f64 / n_t0 as f64).collect(),
        values: Vec::new(),
        zeros: Vec::new(),
        harmonics: acc,
        section_point: (center.x, center.y),
        grad_norm: g0.0.hypot(g0.1),
        step: sep.step,
        t_cut: sep.t_cut,
        tail_envelope,
        tail_bound,
    };
    profile.values = profile.t0.iter().map(|&t| profile.eval(t)).collect();
    profile.zeros = find_zeros(&profile);
    Ok(profile)
}

fn find_zeros(p: &MelnikovProfile) -> Vec<MelnikovZero> {
    let scale = p.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale <= 1e-13 {
        return Vec::new();
    }
    let n = p.t0.len();
    let mut zeros = Vec::new();
    for k in 0..n {
        let (a, b) = (p.t0[k], if k + 1 < n { p.t0[k + 1] } else { TAU });
        let (fa, fb) = (p.values[k], p.eval(b));
        if fa == 0.0 || fa.signum() != fb.signum() && fb != 0.0 {
            if let Some(t) = brent(|t| Some(p.eval(t)), a, b, 1e-14, 200) {
                let slope = p.slope(t);
                zeros.push(MelnikovZero {
                    t0: t,
                    slope,
                    simple: slope.abs() > 1e-8 * scale,
                });
            }
        }
    }
    zeros
}

/// First-order splitting distance `μ·max|M| / |∇h0(q(0))|`.
pub fn predict_splitting(profile: &MelnikovProfile, mu: f64) -> f64 {
    if profile.grad_norm == 0.0 {
        return 0.0;
    }
    mu * profile.max_abs() / profile.grad_norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Term;
    use std::f64::consts::PI;

    fn torus_diagonal() -> SeparatrixOrbit {
        let spec = ModelSpec::standard(Family::Torus, 1.0, 0.0).unwrap();
        separatrix(
            &spec,
            PhaseState::at(0.0, 0.0),
            PhaseState::at(PI, -PI),
            None,
        )
        .unwrap()
    }

    #[test]
    fn torus_diagonal_matches_closed_form() {
        let sep = torus_diagonal();
        assert_eq!(sep.to, PhaseState::at(PI, -PI));
        for s in &sep.samples {
            let x = 2.0 * s.tau.exp().atan();
            assert!((s.x - x).abs() < 1e-7, "tau {} x {} vs {}", s.tau, s.x, x);
            assert!((s.y + x).abs() < 1e-7);
        }
        assert!((sep.nu_from - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cubic_reconnection_orbit() {
        let spec = ModelSpec::standard(Family::Cubic, 1.0, 0.0).unwrap();
        let sep = separatrix(
            &spec,
            PhaseState::at(PI, 0.0),
            PhaseState::at(0.0, 1.0),
            None,
        )
        .unwrap();
        assert_eq!(sep.to, PhaseState::at(TAU, 1.0));
        assert!(sep.max_energy_error(&spec) < 1e-9);
        let first = sep.samples.first().unwrap();
        let last = sep.samples.last().unwrap();
        assert!((first.x - PI).hypot(first.y) < 1e-12);
        assert!((last.x - TAU).hypot(last.y - 1.0) < 1e-12);
        assert!((sep.level - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn no_connection_when_levels_differ() {
        let spec = ModelSpec::standard(Family::Cubic, 0.5, 0.0).unwrap();
        let r = separatrix(
            &spec,
            PhaseState::at(PI, 0.0),
            PhaseState::at(0.0, 1.0),
            None,
        );
        assert!(matches!(r, Err(Error::NoSuchConnection(_))));
    }

    #[test]
    fn zero_perturbation_gives_zero_profile() {
        let p = melnikov_profile(&torus_diagonal(), &Perturbation::zero(), 64).unwrap();
        assert!(p.values.iter().all(|v| *v == 0.0));
        assert!(p.zeros.is_empty());
    }

    #[test]
    fn torus_diagonal_profile_closed_form() {
        // {h0, f} = −sin x·sin(t − x) on the diagonal, x = 2·atan(e^τ).
        let sep = torus_diagonal();
        let p = melnikov_profile(&sep, &Perturbation::standard(), 64).unwrap();
        for (&t0, &m) in p.t0.iter().zip(&p.values) {
            let n = 200_000;
            let (a, b) = (-40.0, 40.0);
            let h = (b - a) / n as f64;
            let mut acc = 0.0;
            for k in 0..=n {
                let tau = a + k as f64 * h;
                let x = 2.0 * f64::atan(f64::exp(tau));
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                acc += w * h * -(x.sin()) * (tau + t0 - x).sin();
            }
            assert!((m - acc).abs() < 1e-9, "t0 {t0}: {m} vs {acc}");
        }
        assert!(p.zeros.len() >= 2);
        assert!(p.zeros.iter().all(|z| z.simple));
        assert!(p.tail_bound < 1e-9);
    }

    #[test]
    fn autonomous_cos_x_gives_constant_profile() {
        let spec = ModelSpec::standard(Family::Cubic, 1.0, 0.0).unwrap();
        let sep = separatrix(
            &spec,
            PhaseState::at(PI, 0.0),
            PhaseState::at(0.0, 1.0),
            None,
        )
        .unwrap();
        let f = Perturbation::new(vec![Term::new(-1.0 / 12.0, 1, 0, 0, 0.0)]);
        let p = melnikov_profile(&sep, &f, 64).unwrap();
        let m0 = p.values[0];
        assert!(m0.abs() > 1e-3);
        for v in &p.values {
            assert!((v - m0).abs() < 1e-12);
        }
        // Along the unperturbed flow {h0, F} = −dF/dt, so M = F(π, 0) − F(2π, 1) = 1/6.
        assert!((m0 - 1.0 / 6.0).abs() < 1e-8, "{m0}");
    }

    #[test]
    fn prediction_is_linear_in_mu() {
        let p = melnikov_profile(&torus_diagonal(), &Perturbation::standard(), 64).unwrap();
        assert_eq!(predict_splitting(&p, 0.0), 0.0);
        let a = predict_splitting(&p, 1e-3);
        assert!(a > 0.0);
        assert_eq!(predict_splitting(&p, 2e-3), 2.0 * a);
    }

    #[test]
    fn periodic_and_single_harmonic() {
        let sep = torus_diagonal();
        let f = Perturbation::new(vec![Term::new(0.7, 1, -1, 2, 0.3)]);
        let p = melnikov_profile(&sep, &f, 64).unwrap();
        assert!((p.eval(0.4) - p.eval(0.4 + TAU)).abs() < 1e-12);
        assert_eq!(p.harmonics.len(), 1);
        assert_eq!(p.harmonics[0].m, 2);
    }

    #[test]
    fn too_short_t_cut_is_reported() {
        let spec = ModelSpec::standard(Family::Torus, 1.0, 0.0).unwrap();
        let sep = separatrix(
            &spec,
            PhaseState::at(0.0, 0.0),
            PhaseState::at(PI, -PI),
            Some(5.0),
        )
        .unwrap();
        let r = melnikov_profile(&sep, &Perturbation::standard(), 64);
        assert!(matches!(r, Err(Error::TailTruncation { .. })));
    }
}
