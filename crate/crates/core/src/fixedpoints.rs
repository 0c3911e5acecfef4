//! Hyperbolic fixed points of the time-2π map: the periodic orbits that
//! continue the unperturbed saddles.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{strobe_with_jacobian, IntegratorConfig};
use crate::linalg::Mat2;
use crate::models::{saddle_grid, Family, ModelSpec, PhaseState};

pub const RESIDUAL_TOL: f64 = 1e-10;
pub const MAX_NEWTON_ITERATIONS: usize = 25;
pub const HYPERBOLICITY_MARGIN: f64 = 1e-8;
const HOMOTOPY_STEPS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicOrbit {
    pub spec: ModelSpec,
    pub base: PhaseState,
    /// `(λ_u, λ_s)` with `|λ_u| > 1 > |λ_s|`.
    pub eigenvalues: (f64, f64),
    /// Unit eigenvectors `(v_u, v_s)` with non-negative `x` component.
    pub eigenvectors: ([f64; 2], [f64; 2]),
    pub residual: f64,
    pub parent_saddle: PhaseState,
    pub iterations: usize,
}

impl HyperbolicOrbit {
    pub fn lambda_u(&self) -> f64 {
        self.eigenvalues.0
    }

    pub fn lambda_s(&self) -> f64 {
        self.eigenvalues.1
    }

    pub fn v_u(&self) -> [f64; 2] {
        self.eigenvectors.0
    }

    pub fn v_s(&self) -> [f64; 2] {
        self.eigenvectors.1
    }

    /// Distance from the unperturbed saddle it continues.
    pub fn offset_from_parent(&self) -> f64 {
        self.base.distance(&self.parent_saddle)
    }
}

/// `P(s) − s`, with the lifted translation by whole periods removed.
fn residual_vector(family: Family, s: &PhaseState, image: &PhaseState) -> [f64; 2] {
    let unwrap = |d: f64| d - TAU * (d / TAU).round();
    let dx = unwrap(image.x - s.x);
    let dy = if family.y_periodic() {
        unwrap(image.y - s.y)
    } else {
        image.y - s.y
    };
    [dx, dy]
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Nearest unperturbed saddle to `s` (lattice search around its cell).
pub fn nearest_saddle(spec: &ModelSpec, s: &PhaseState) -> PhaseState {
    let k0 = (s.x / TAU).round() as i32;
    let kp0 = (s.y / TAU).round() as i32;
    let ks = (k0 - 1)..=(k0 + 1);
    let kps = (kp0 - 1)..=(kp0 + 1);
    saddle_grid(spec, ks, kps)
        .into_iter()
        .min_by(|a, b| a.distance(s).total_cmp(&b.distance(s)))
        .expect("saddle grid around a cell is never empty")
}

/// Newton iteration on `P(s) − s` from `guess`. The strobe phase is taken
/// from `guess.t`.
///
/// When strong expansion makes the direct solve fail for `μ > 0`, the orbit
/// is followed instead from `μ = 0` up to `spec.mu` through a short
/// homotopy seeded at `guess`.
pub fn refine_fixed_point(
    spec: &ModelSpec,
    guess: PhaseState,
    config: &IntegratorConfig,
) -> Result<HyperbolicOrbit> {
    let direct = newton(spec, guess, config);
    if direct.is_ok() || spec.mu == 0.0 {
        return direct;
    }
    let mut seed = guess;
    for k in 1..HOMOTOPY_STEPS {
        let stage = spec.with_mu(spec.mu * k as f64 / HOMOTOPY_STEPS as f64);
        match newton(&stage, seed, config) {
            Ok(o) => seed = o.base,
            // Report the original failure; the homotopy was only a fallback.
            Err(_) => return direct,
        }
    }
    newton(spec, seed, config).or(direct)
}

fn newton(
    spec: &ModelSpec,
    guess: PhaseState,
    config: &IntegratorConfig,
) -> Result<HyperbolicOrbit> {
    let mut s = guess;
    let (mut image, mut jac) = strobe_with_jacobian(spec, s, config)?;
    let mut r = residual_vector(spec.family, &s, &image);
    let mut rn = norm(r);
    let mut iterations = 0;
    while rn > RESIDUAL_TOL {
        if iterations >= MAX_NEWTON_ITERATIONS {
            return Err(Error::NoConvergence {
                residual: rn,
                iterations,
            });
        }
        iterations += 1;
        let Some(step) = jac.sub_identity().solve([-r[0], -r[1]]) else {
            return Err(Error::NoConvergence {
                residual: rn,
                iterations,
            });
        };
        // Damped update: halve until the residual decreases.
        let mut scale = 1.0;
        let accepted = loop {
            let trial = PhaseState::new(s.x + scale * step[0], s.y + scale * step[1], s.t);
            let (ti, tj) = strobe_with_jacobian(spec, trial, config)?;
            let tr = residual_vector(spec.family, &trial, &ti);
            if norm(tr) < rn || scale < 1.0 / 64.0 {
                break (trial, ti, tj, tr);
            }
            scale *= 0.5;
        };
        let prev = rn;
        (s, image, jac, r) = accepted;
        rn = norm(r);
        if rn >= prev && rn > RESIDUAL_TOL {
            return Err(Error::NoConvergence {
                residual: rn,
                iterations,
            });
        }
    }
    let _ = image;
    classify(spec, s, jac, rn, iterations)
}

fn classify(
    spec: &ModelSpec,
    base: PhaseState,
    jac: Mat2,
    residual: f64,
    iterations: usize,
) -> Result<HyperbolicOrbit> {
    let tr = jac.trace();
    let eig = if tr.abs() > 2.0 {
        jac.real_eigen()
    } else {
        None
    };
    let Some([(lu, vu), (ls, vs)]) = eig else {
        return Err(Error::NotHyperbolic { modulus: 1.0 });
    };
    if lu.abs() <= 1.0 + HYPERBOLICITY_MARGIN {
        return Err(Error::NotHyperbolic { modulus: lu.abs() });
    }
    Ok(HyperbolicOrbit {
        spec: spec.clone(),
        base,
        eigenvalues: (lu, ls),
        eigenvectors: (vu, vs),
        residual,
        parent_saddle: nearest_saddle(spec, &base),
        iterations,
    })
}

/// Which parameter `continue_orbit` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "parameter", content = "target")]
pub enum ContinuationTarget {
    Mu(f64),
    Epsilon(f64),
}

/// Result of a naive parameter continuation. `failure` holds the error that
/// stopped the chain early, if any.
#[derive(Debug)]
pub struct Continuation {
    pub chain: Vec<HyperbolicOrbit>,
    pub failure: Option<Error>,
}

impl Continuation {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Steps the parameter linearly in `n_steps` increments, seeding each Newton
/// solve with the previous base point.
pub fn continue_orbit(
    orbit: &HyperbolicOrbit,
    target: ContinuationTarget,
    n_steps: usize,
    config: &IntegratorConfig,
) -> Continuation {
    let mut chain = vec![orbit.clone()];
    let start = &orbit.spec;
    for k in 1..=n_steps {
        let frac = k as f64 / n_steps as f64;
        let spec = match target {
            ContinuationTarget::Mu(m) => start.with_mu(start.mu + frac * (m - start.mu)),
            ContinuationTarget::Epsilon(e) => {
                start.with_epsilon(start.epsilon + frac * (e - start.epsilon))
            }
        };
        if let Err(e) = spec.validate() {
            return Continuation {
                chain,
                failure: Some(e),
            };
        }
        let seed = chain.last().expect("chain starts non-empty").base;
        match refine_fixed_point(&spec, seed, config) {
            Ok(o) => chain.push(o),
            Err(e) => {
                return Continuation {
                    chain,
                    failure: Some(e),
                }
            }
        }
    }
    Continuation {
        chain,
        failure: None,
    }
}
