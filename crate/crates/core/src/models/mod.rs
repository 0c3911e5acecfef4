//! The two Hamiltonian families, their vector fields and the unperturbed
//! saddle lattices.
//!
//! * Cubic: `H = y²/2 − y³/3 − (ε/12)·cos x + κ·μ·f(x, y, t)` on `T × R × T`.
//! * Torus: `H = cos y − ε·cos x + κ·μ·f(x, y, t)` on `T³`.
//!
//! `κ = ε` for [`Coupling::EpsMu`] and `κ = 1` for [`Coupling::MuOnly`].

mod perturbation;

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use perturbation::{Jet, Perturbation, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Cubic,
    Torus,
}

impl Family {
    /// Whether `y` is an angle.
    pub fn y_periodic(self) -> bool {
        matches!(self, Family::Torus)
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cubic" => Ok(Family::Cubic),
            "torus" => Ok(Family::Torus),
            other => Err(Error::Parse(format!("unknown family `{other}`"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Cubic => "cubic",
            Family::Torus => "torus",
        })
    }
}

/// How the perturbation `f` enters the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// `ε·μ·f`, the perturbation sits inside `ε·F`.
    EpsMu,
    /// `μ·f` with no `ε` factor.
    #[default]
    MuOnly,
}

impl FromStr for Coupling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eps-mu" | "epsmu" => Ok(Coupling::EpsMu),
            "mu-only" | "muonly" | "mu" => Ok(Coupling::MuOnly),
            other => Err(Error::Parse(format!("unknown coupling `{other}`"))),
        }
    }
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coupling::EpsMu => "eps-mu",
            Coupling::MuOnly => "mu-only",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub epsilon: f64,
    pub mu: f64,
    pub perturbation: Perturbation,
    pub coupling: Coupling,
}

impl ModelSpec {
    pub fn new(
        family: Family,
        epsilon: f64,
        mu: f64,
        perturbation: Perturbation,
        coupling: Coupling,
    ) -> Result<Self> {
        let spec = Self {
            family,
            epsilon,
            mu,
            perturbation,
            coupling,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Model with the standard perturbation `cos(x + 2y + t)` and `μ·f` coupling.
    pub fn standard(family: Family, epsilon: f64, mu: f64) -> Result<Self> {
        Self::new(
            family,
            epsilon,
            mu,
            Perturbation::standard(),
            Coupling::MuOnly,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 2.0) {
            return Err(Error::InvalidSpec(format!(
                "epsilon must lie in (0, 2], got {}",
                self.epsilon
            )));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "mu must be >= 0, got {}",
                self.mu
            )));
        }
        for t in &self.perturbation.terms {
            if !t.c.is_finite() || !t.phi.is_finite() {
                return Err(Error::InvalidSpec("non-finite perturbation term".into()));
            }
        }
        Ok(())
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        Self { mu, ..self.clone() }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }

    pub fn unperturbed(&self) -> Self {
        self.with_mu(0.0)
    }

    /// Total weight `κ·μ` in front of `f`.
    #[inline]
    pub fn perturbation_weight(&self) -> f64 {
        match self.coupling {
            Coupling::EpsMu => self.epsilon * self.mu,
            Coupling::MuOnly => self.mu,
        }
    }

    /// `κ·f`, the first-order perturbing Hamiltonian per unit `μ`.
    pub fn perturbation_per_unit_mu(&self) -> Perturbation {
        match self.coupling {
            Coupling::EpsMu => self.perturbation.scaled(self.epsilon),
            Coupling::MuOnly => self.perturbation.clone(),
        }
    }

    /// Everything that separates this Hamiltonian from the integrable one at
    /// `reference_epsilon`: the `−δ·cos x` shift (with the family's `1/12`)
    /// plus `κ·μ·f`.
    pub fn perturbing_hamiltonian(&self, reference_epsilon: f64) -> Perturbation {
        let delta = self.epsilon - reference_epsilon;
        let mut p = self.perturbation.scaled(self.perturbation_weight());
        if delta != 0.0 {
            let scale = match self.family {
                Family::Cubic => 1.0 / 12.0,
                Family::Torus => 1.0,
            };
            p.terms.push(Term::new(-delta * scale, 1, 0, 0, 0.0));
        }
        p
    }

    /// Integrable part `h_ε(x, y)`.
    #[inline]
    pub fn integrable_energy(&self, x: f64, y: f64) -> f64 {
        match self.family {
            Family::Cubic => y * y / 2.0 - y * y * y / 3.0 - self.epsilon / 12.0 * x.cos(),
            Family::Torus => y.cos() - self.epsilon * x.cos(),
        }
    }

    /// `(∂h_ε/∂x, ∂h_ε/∂y)`.
    #[inline]
    pub fn integrable_gradient(&self, x: f64, y: f64) -> (f64, f64) {
        match self.family {
            Family::Cubic => (self.epsilon / 12.0 * x.sin(), y - y * y),
            Family::Torus => (self.epsilon * x.sin(), -y.sin()),
        }
    }

    #[inline]
    pub fn energy(&self, s: &PhaseState) -> f64 {
        let mut h = self.integrable_energy(s.x, s.y);
        let w = self.perturbation_weight();
        if w != 0.0 {
            h += w * self.perturbation.value(s.x, s.y, s.t);
        }
        h
    }

    /// Hamilton's equations `(ẋ, ẏ) = (∂H/∂y, −∂H/∂x)`.
    #[inline]
    pub fn vector_field(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        let (hx, hy) = self.integrable_gradient(x, y);
        let w = self.perturbation_weight();
        if w == 0.0 {
            return (hy, -hx);
        }
        let (fx, fy) = self.perturbation.gradient(x, y, t);
        (hy + w * fy, -(hx + w * fx))
    }

    /// Field and its Jacobian `[[∂ẋ/∂x, ∂ẋ/∂y], [∂ẏ/∂x, ∂ẏ/∂y]]`.
    pub fn field_with_jacobian(&self, x: f64, y: f64, t: f64) -> ((f64, f64), [[f64; 2]; 2]) {
        let (hx, hy) = self.integrable_gradient(x, y);
        let (hxx, hyy) = match self.family {
            Family::Cubic => (self.epsilon / 12.0 * x.cos(), 1.0 - 2.0 * y),
            Family::Torus => (self.epsilon * x.cos(), -y.cos()),
        };
        let w = self.perturbation_weight();
        let j = if w != 0.0 {
            self.perturbation.jet(x, y, t)
        } else {
            Jet::default()
        };
        let (hx, hy) = (hx + w * j.fx, hy + w * j.fy);
        let (hxx, hxy, hyy) = (hxx + w * j.fxx, w * j.fxy, hyy + w * j.fyy);
        ((hy, -hx), [[hxy, hyy], [-hxx, -hxy]])
    }
}

pub fn energy(spec: &ModelSpec, s: &PhaseState) -> f64 {
    spec.energy(s)
}

pub fn vector_field(spec: &ModelSpec, s: &PhaseState) -> (f64, f64) {
    spec.vector_field(s.x, s.y, s.t)
}

/// Wraps an angle to `[−π, π)`.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    let w = a - TAU * ((a + PI) / TAU).floor();
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// A point of extended phase space. `x` and `y` are lifted (unwrapped)
/// coordinates; wrapped views are derived on demand.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl PhaseState {
    pub const fn new(x: f64, y: f64, t: f64) -> Self {
        Self { x, y, t }
    }

    pub const fn at(x: f64, y: f64) -> Self {
        Self { x, y, t: 0.0 }
    }

    pub fn wrapped_x(&self) -> f64 {
        wrap_angle(self.x)
    }

    /// `(x, y)` reduced to the fundamental domain of `family`.
    pub fn wrapped(&self, family: Family) -> (f64, f64) {
        let y = if family.y_periodic() {
            wrap_angle(self.y)
        } else {
            self.y
        };
        (wrap_angle(self.x), y)
    }

    /// Strobe phase `t mod 2π` in `[0, 2π)`.
    pub fn phase(&self) -> f64 {
        self.t.rem_euclid(TAU)
    }

    pub fn distance(&self, other: &PhaseState) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Distance after reducing the difference modulo the periodic directions.
    pub fn distance_mod(&self, other: &PhaseState, family: Family) -> f64 {
        let dx = wrap_angle(self.x - other.x);
        let dy = if family.y_periodic() {
            wrap_angle(self.y - other.y)
        } else {
            self.y - other.y
        };
        dx.hypot(dy)
    }
}

/// The two unperturbed saddle families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SaddleFamily {
    /// Cubic `((2k+1)π, 0)`; Torus `(2kπ, 2k'π)`.
    Lower,
    /// Cubic `(2kπ, 1)`; Torus `((2k+1)π, (2k'+1)π)`.
    Upper,
}

/// Unperturbed saddles for the requested lattice indices. The first family is
/// listed in full before the second; Cubic ignores `k_prime`.
pub fn saddle_grid(
    spec: &ModelSpec,
    k: impl IntoIterator<Item = i32> + Clone,
    k_prime: impl IntoIterator<Item = i32> + Clone,
) -> Vec<PhaseState> {
    let ks: Vec<i32> = k.into_iter().collect();
    let kps: Vec<i32> = k_prime.into_iter().collect();
    let mut out = Vec::new();
    match spec.family {
        Family::Cubic => {
            out.extend(
                ks.iter()
                    .map(|&k| PhaseState::at((2 * k + 1) as f64 * PI, 0.0)),
            );
            out.extend(ks.iter().map(|&k| PhaseState::at(2.0 * k as f64 * PI, 1.0)));
        }
        Family::Torus => {
            if kps.is_empty() {
                return out;
            }
            for &k in &ks {
                for &kp in &kps {
                    out.push(PhaseState::at(2.0 * k as f64 * PI, 2.0 * kp as f64 * PI));
                }
            }
            for &k in &ks {
                for &kp in &kps {
                    out.push(PhaseState::at(
                        (2 * k + 1) as f64 * PI,
                        (2 * kp + 1) as f64 * PI,
                    ));
                }
            }
        }
    }
    out
}

const SADDLE_TOL: f64 = 1e-9;

/// Identifies which unperturbed saddle family `s` belongs to, if any.
pub fn saddle_family(spec: &ModelSpec, s: &PhaseState) -> Option<SaddleFamily> {
    let near_multiple = |v: f64, offset: f64| {
        let r = (v - offset) / TAU;
        ((r - r.round()) * TAU).abs() < SADDLE_TOL
    };
    match spec.family {
        Family::Cubic => {
            if near_multiple(s.x, PI) && s.y.abs() < SADDLE_TOL {
                Some(SaddleFamily::Lower)
            } else if near_multiple(s.x, 0.0) && (s.y - 1.0).abs() < SADDLE_TOL {
                Some(SaddleFamily::Upper)
            } else {
                None
            }
        }
        Family::Torus => {
            if near_multiple(s.x, 0.0) && near_multiple(s.y, 0.0) {
                Some(SaddleFamily::Lower)
            } else if near_multiple(s.x, PI) && near_multiple(s.y, PI) {
                Some(SaddleFamily::Upper)
            } else {
                None
            }
        }
    }
}

/// Energy level of the separatrix through an unperturbed saddle, with `μ`
/// treated as zero.
pub fn separatrix_level(spec: &ModelSpec, saddle: &PhaseState) -> Result<f64> {
    let fam = saddle_family(spec, saddle).ok_or(Error::NotASaddle {
        x: saddle.x,
        y: saddle.y,
    })?;
    Ok(family_level(spec, fam))
}

/// Closed-form separatrix level of a saddle family.
pub fn family_level(spec: &ModelSpec, fam: SaddleFamily) -> f64 {
    let e = spec.epsilon;
    match (spec.family, fam) {
        (Family::Cubic, SaddleFamily::Lower) => e / 12.0,
        (Family::Cubic, SaddleFamily::Upper) => 1.0 / 6.0 - e / 12.0,
        (Family::Torus, SaddleFamily::Lower) => 1.0 - e,
        (Family::Torus, SaddleFamily::Upper) => e - 1.0,
    }
}

/// Unperturbed critical point classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalKind {
    Saddle,
    Center,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub x: f64,
    pub y: f64,
    pub kind: CriticalKind,
    pub energy: f64,
}

/// Critical points of `h_ε` in one fundamental cell `x ∈ [0, 2π)` (and
/// `y ∈ [0, 2π)` for Torus), classified by the sign of the Hessian determinant.
pub fn critical_points(spec: &ModelSpec) -> Vec<CriticalPoint> {
    let candidates: &[(f64, f64)] = match spec.family {
        Family::Cubic => &[(0.0, 0.0), (PI, 0.0), (0.0, 1.0), (PI, 1.0)],
        Family::Torus => &[(0.0, 0.0), (PI, 0.0), (0.0, PI), (PI, PI)],
    };
    let h0 = spec.unperturbed();
    candidates
        .iter()
        .map(|&(x, y)| {
            let (_, jac) = h0.field_with_jacobian(x, y, 0.0);
            // det of the Hessian of h equals det of the field Jacobian.
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            CriticalPoint {
                x,
                y,
                kind: if det < 0.0 {
                    CriticalKind::Saddle
                } else {
                    CriticalKind::Center
                },
                energy: h0.integrable_energy(x, y),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(family: Family, eps: f64, mu: f64) -> ModelSpec {
        ModelSpec::standard(family, eps, mu).unwrap()
    }

    #[test]
    fn energy_examples() {
        let c = spec(Family::Cubic, 1.0, 0.0);
        assert!((c.energy(&PhaseState::at(PI, 0.0)) - 1.0 / 12.0).abs() < 1e-15);
        assert!((c.energy(&PhaseState::at(0.0, 1.0)) - 1.0 / 12.0).abs() < 1e-15);
        let t = spec(Family::Torus, 0.5, 0.0);
        assert!((t.energy(&PhaseState::at(0.0, 0.0)) - 0.5).abs() < 1e-15);
        for eps in [0.3, 1.0, 1.7] {
            let t = spec(Family::Torus, eps, 0.0);
            assert!((t.energy(&PhaseState::at(PI, PI)) - (eps - 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn mu_zero_is_time_independent() {
        let c = spec(Family::Cubic, 0.7, 0.0);
        let a = c.energy(&PhaseState::new(0.3, 0.4, 0.0));
        let b = c.energy(&PhaseState::new(0.3, 0.4, 2.1));
        assert_eq!(a, b);
    }

    #[test]
    fn validation_rejects_out_of_range() {
        assert!(ModelSpec::standard(Family::Cubic, 0.0, 0.1).is_err());
        assert!(ModelSpec::standard(Family::Cubic, 2.5, 0.1).is_err());
        assert!(ModelSpec::standard(Family::Torus, 1.0, -0.1).is_err());
        assert!(ModelSpec::standard(Family::Torus, 2.0, 0.0).is_ok());
    }

    #[test]
    fn saddles_are_equilibria() {
        for family in [Family::Cubic, Family::Torus] {
            for eps in [0.25, 1.0, 2.0] {
                let s = spec(family, eps, 0.0);
                for p in saddle_grid(&s, -2..=2, -2..=2) {
                    let (dx, dy) = vector_field(&s, &p);
                    assert!(dx.abs() < 1e-14 && dy.abs() < 1e-14, "{p:?}");
                }
            }
        }
    }

    #[test]
    fn elliptic_point_is_not_a_saddle() {
        let s = spec(Family::Cubic, 1.0, 0.0);
        let (dx, dy) = vector_field(&s, &PhaseState::at(0.0, 0.0));
        assert_eq!((dx, dy), (0.0, 0.0));
        assert!(separatrix_level(&s, &PhaseState::at(0.0, 0.0)).is_err());
    }

    #[test]
    fn saddle_grid_examples() {
        let c = spec(Family::Cubic, 1.0, 0.0);
        assert_eq!(
            saddle_grid(&c, [0], [0]),
            vec![PhaseState::at(PI, 0.0), PhaseState::at(0.0, 1.0)]
        );
        let t = spec(Family::Torus, 1.0, 0.0);
        assert_eq!(
            saddle_grid(&t, [0], [0]),
            vec![PhaseState::at(0.0, 0.0), PhaseState::at(PI, PI)]
        );
        assert_eq!(
            saddle_grid(&t, [-1, 0], [0]),
            vec![
                PhaseState::at(-TAU, 0.0),
                PhaseState::at(0.0, 0.0),
                PhaseState::at(-PI, PI),
                PhaseState::at(PI, PI),
            ]
        );
        assert!(saddle_grid(&t, Vec::<i32>::new(), [0]).is_empty());
    }

    #[test]
    fn separatrix_levels() {
        let c = spec(Family::Cubic, 1.0, 0.0);
        assert!(
            (separatrix_level(&c, &PhaseState::at(PI, 0.0)).unwrap() - 1.0 / 12.0).abs() < 1e-16
        );
        let t = spec(Family::Torus, 1.0, 0.0);
        assert_eq!(
            separatrix_level(&t, &PhaseState::at(0.0, 0.0)).unwrap(),
            0.0
        );
        let c = spec(Family::Cubic, 0.5, 0.0);
        let lo = separatrix_level(&c, &PhaseState::at(PI, 0.0)).unwrap();
        let hi = separatrix_level(&c, &PhaseState::at(0.0, 1.0)).unwrap();
        assert!((lo - 1.0 / 24.0).abs() < 1e-16 && (hi - 1.0 / 8.0).abs() < 1e-16);
        assert!(matches!(
            separatrix_level(&c, &PhaseState::at(1.0, 0.0)),
            Err(Error::NotASaddle { .. })
        ));
    }

    #[test]
    fn torus_shift_antisymmetry() {
        let s = spec(Family::Torus, 0.8, 0.0);
        for i in 0..100 {
            for j in 0..100 {
                let x = -PI + TAU * i as f64 / 100.0;
                let y = -PI + TAU * j as f64 / 100.0;
                let a = s.energy(&PhaseState::at(x, y));
                let b = s.energy(&PhaseState::at(x + PI, y + PI));
                assert!((a + b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cubic_reflection_symmetry() {
        let s = spec(Family::Cubic, 0.6, 0.0);
        for i in 0..50 {
            for j in 0..50 {
                let x = TAU * i as f64 / 50.0;
                let y = -1.0 + 3.0 * j as f64 / 50.0;
                let a = s.energy(&PhaseState::at(x, y));
                let b = s.energy(&PhaseState::at(-x, y));
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn perturbing_hamiltonian_reproduces_model() {
        let s = ModelSpec::new(
            Family::Cubic,
            1.03,
            0.02,
            Perturbation::standard(),
            Coupling::EpsMu,
        )
        .unwrap();
        let base = s.with_epsilon(1.0).unperturbed();
        let f1 = s.perturbing_hamiltonian(1.0);
        let p = PhaseState::new(0.4, 0.3, 1.2);
        let lhs = s.energy(&p);
        let rhs = base.energy(&p) + f1.value(p.x, p.y, p.t);
        assert!((lhs - rhs).abs() < 1e-15);
    }

    #[test]
    fn wrap_angle_range() {
        for a in [-10.0, -PI, 0.0, PI, 3.5 * PI, 1e3] {
            let w = wrap_angle(a);
            assert!((-PI..PI).contains(&w));
            let k = (a - w) / TAU;
            assert!((k - k.round()).abs() < 1e-12);
        }
    }

    #[test]
    fn critical_point_topology() {
        for family in [Family::Cubic, Family::Torus] {
            for eps in [0.5, 1.0, 1.5] {
                let cps = critical_points(&spec(family, eps, 0.0));
                let saddles = cps
                    .iter()
                    .filter(|c| c.kind == CriticalKind::Saddle)
                    .count();
                assert_eq!(saddles, 2);
                assert_eq!(cps.len() - saddles, 2);
            }
        }
    }
}
