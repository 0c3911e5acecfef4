//! CSV and JSON export. Every float is written with 17 significant digits so
//! files round-trip bit for bit.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::integrate::{strobe, Trajectory};
use crate::manifolds::{ManifoldArc, SplittingResult};
use crate::melnikov::MelnikovProfile;
use crate::models::{critical_points, CriticalPoint, Family, ModelSpec, PhaseState};
use crate::regimes::{ConfinementOptions, Evidence, ExcursionRecord, Itinerary, RegimeMap};
use crate::IntegratorConfig;

pub const TRAJECTORY_HEADER: &str = "t,x,y,x_lift,y_lift,energy";
pub const ARC_HEADER: &str = "s,x,y";
pub const PROFILE_HEADER: &str = "t0,M";
pub const REGIME_HEADER: &str = "eps,mu,verdict,evidence_id";
pub const SPLITTING_HEADER: &str = "t0,gap,y_unstable,y_stable";
pub const EXCURSION_HEADER: &str = "seed_x,seed_y,first_passage,amplitude,y_min,y_max,t_end";
pub const ITINERARY_HEADER: &str = "i,j,t_enter,t_exit";
pub const PORTRAIT_HEADER: &str = "level,h,x0,y0,x1,y1";

/// `{:.16e}`: 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Rows of the trajectory schema for a list of states of `spec`.
pub fn write_states<W: Write + ?Sized>(
    w: &mut W,
    spec: &ModelSpec,
    states: &[PhaseState],
) -> Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for s in states {
        let (x, y) = s.wrapped(spec.family);
        writeln!(
            w,
            "{},{},{},{},{},{}",
            num(s.t),
            num(x),
            num(y),
            num(s.x),
            num(s.y),
            num(spec.energy(s))
        )?;
    }
    Ok(())
}

pub fn write_trajectory<W: Write + ?Sized>(w: &mut W, traj: &Trajectory) -> Result<()> {
    let states: Vec<PhaseState> = traj.samples.iter().map(|s| s.state).collect();
    write_states(w, &traj.spec, &states)
}

pub fn write_arc<W: Write + ?Sized>(w: &mut W, arc: &ManifoldArc) -> Result<()> {
    writeln!(w, "{ARC_HEADER}")?;
    for p in &arc.points {
        writeln!(w, "{},{},{}", num(p.s), num(p.x), num(p.y))?;
    }
    Ok(())
}

pub fn write_profile<W: Write + ?Sized>(w: &mut W, profile: &MelnikovProfile) -> Result<()> {
    writeln!(w, "{PROFILE_HEADER}")?;
    for (t0, m) in profile.t0.iter().zip(&profile.values) {
        writeln!(w, "{},{}", num(*t0), num(*m))?;
    }
    Ok(())
}

pub fn write_splitting<W: Write + ?Sized>(w: &mut W, result: &SplittingResult) -> Result<()> {
    writeln!(w, "{SPLITTING_HEADER}")?;
    for s in &result.samples {
        writeln!(
            w,
            "{},{},{},{}",
            num(s.t0),
            num(s.gap),
            num(s.y_unstable),
            num(s.y_stable)
        )?;
    }
    Ok(())
}

pub fn write_regime_map<W: Write + ?Sized>(w: &mut W, map: &RegimeMap) -> Result<()> {
    writeln!(w, "{REGIME_HEADER}")?;
    for c in &map.cells {
        let verdict = serde_json::to_value(c.verdict)?;
        writeln!(
            w,
            "{},{},{},{}",
            num(c.eps),
            num(c.mu),
            verdict.as_str().unwrap_or_default(),
            c.evidence_id
        )?;
    }
    Ok(())
}

pub fn write_excursions<W: Write + ?Sized>(w: &mut W, records: &[ExcursionRecord]) -> Result<()> {
    writeln!(w, "{EXCURSION_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            num(r.seed.x),
            num(r.seed.y),
            opt_num(r.first_passage),
            num(r.amplitude),
            num(r.y_min),
            num(r.y_max),
            num(r.t_end)
        )?;
    }
    Ok(())
}

pub fn write_itinerary<W: Write + ?Sized>(w: &mut W, it: &Itinerary) -> Result<()> {
    writeln!(w, "{ITINERARY_HEADER}")?;
    for v in &it.visits {
        writeln!(
            w,
            "{},{},{},{}",
            v.symbol.i,
            v.symbol.j,
            num(v.t_enter),
            num(v.t_exit)
        )?;
    }
    Ok(())
}

/// Strobe orbit backing a confinement verdict: the witness seed up to its
/// crossing, or the invariant-curve candidate. Deterministic, so it matches
/// what the test saw.
pub fn evidence_orbit(
    spec: &ModelSpec,
    evidence: &Evidence,
    options: &ConfinementOptions,
) -> Result<Option<Vec<PhaseState>>> {
    let (seed, n) = match evidence {
        Evidence::Crossing(w) => (w.seed, w.iterate.max(1)),
        Evidence::Curve(c) => (c.seed, options.curve_strobe),
        Evidence::BudgetExhausted { .. } => return Ok(None),
    };
    let mut states = vec![seed];
    states.extend(strobe(spec, seed, n, &options.integrator)?);
    Ok(Some(states))
}

/// One straight piece of a level curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSegment {
    pub level: usize,
    pub h: f64,
    pub a: (f64, f64),
    pub b: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portrait {
    pub family: Family,
    pub epsilon: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
    pub levels: Vec<f64>,
    pub critical_points: Vec<CriticalPoint>,
    pub saddles: usize,
    pub centers: usize,
}

/// Default window: one period in `x` centred on 0, `y ∈ [−1, 2]` for Cubic
/// and one period for Torus.
pub fn portrait_window(family: Family) -> ((f64, f64), (f64, f64)) {
    use std::f64::consts::PI;
    let y = match family {
        Family::Cubic => (-1.0, 2.0),
        Family::Torus => (-PI, PI),
    };
    ((-PI, PI), y)
}

/// Levels of `h_ε` drawn in a portrait: the separatrix levels of the
/// critical points plus `extra` levels spread evenly over the sampled range.
pub fn portrait_levels(spec: &ModelSpec, extra: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut levels: Vec<f64> = critical_points(spec).iter().map(|c| c.energy).collect();
    for k in 1..=extra {
        levels.push(lo + (hi - lo) * k as f64 / (extra + 1) as f64);
    }
    levels.sort_by(f64::total_cmp);
    levels.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    levels
}

/// Marching squares on an `nx × ny` grid of `h_ε`.
pub fn level_segments(
    spec: &ModelSpec,
    levels: &[f64],
    x_range: (f64, f64),
    y_range: (f64, f64),
    nx: usize,
    ny: usize,
) -> Vec<LevelSegment> {
    let nx = nx.max(2);
    let ny = ny.max(2);
    let xs: Vec<f64> = (0..nx)
        .map(|i| x_range.0 + (x_range.1 - x_range.0) * i as f64 / (nx - 1) as f64)
        .collect();
    let ys: Vec<f64> = (0..ny)
        .map(|j| y_range.0 + (y_range.1 - y_range.0) * j as f64 / (ny - 1) as f64)
        .collect();
    let h: Vec<Vec<f64>> = ys
        .iter()
        .map(|&y| xs.iter().map(|&x| spec.integrable_energy(x, y)).collect())
        .collect();
    let mut out = Vec::new();
    for (level, &c) in levels.iter().enumerate() {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                // Corners counter-clockwise from bottom-left.
                let corners = [
                    (xs[i], ys[j], h[j][i]),
                    (xs[i + 1], ys[j], h[j][i + 1]),
                    (xs[i + 1], ys[j + 1], h[j + 1][i + 1]),
                    (xs[i], ys[j + 1], h[j + 1][i]),
                ];
                let mut hits = Vec::with_capacity(4);
                for e in 0..4 {
                    let (p, q) = (corners[e], corners[(e + 1) % 4]);
                    let (dp, dq) = (p.2 - c, q.2 - c);
                    if (dp < 0.0) != (dq < 0.0) {
                        let r = dp / (dp - dq);
                        hits.push((p.0 + r * (q.0 - p.0), p.1 + r * (q.1 - p.1)));
                    }
                }
                // Saddle cells give four hits; pair them in edge order.
                for pair in hits.chunks_exact(2) {
                    out.push(LevelSegment {
                        level,
                        h: c,
                        a: pair[0],
                        b: pair[1],
                    });
                }
            }
        }
    }
    out
}

pub fn write_level_segments<W: Write + ?Sized>(w: &mut W, segments: &[LevelSegment]) -> Result<()> {
    writeln!(w, "{PORTRAIT_HEADER}")?;
    for s in segments {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.level,
            num(s.h),
            num(s.a.0),
            num(s.a.1),
            num(s.b.0),
            num(s.b.1)
        )?;
    }
    Ok(())
}

/// Everything needed to regenerate a run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub platform: String,
    pub subcommand: String,
    /// Full argument vector, program name excluded.
    pub argv: Vec<String>,
    pub spec: Option<ModelSpec>,
    pub integrator: Option<IntegratorConfig>,
    pub parameters: serde_json::Value,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, argv: Vec<String>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            platform: format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
            subcommand: subcommand.to_string(),
            argv,
            spec: None,
            integrator: None,
            parameters: serde_json::Value::Null,
            outputs: Vec::new(),
        }
    }
}

pub fn write_json<W: Write + ?Sized, T: Serialize + ?Sized>(w: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}
