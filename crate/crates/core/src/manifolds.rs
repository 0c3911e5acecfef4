//! One-dimensional stable and unstable manifolds of strobe-map fixed points,
//! their intersections, and the splitting distance on a section.
//!
//! Arcs are parameterized by `u = n + σ`: the point at `u` is the `n`-th
//! image (preimage for stable arcs) of `base + b·δ·Λ^σ·v`, with `Λ` the
//! expanding multiplier of the map used. Re-evaluating any `u` is therefore
//! exact up to integration error, which crossing polish and section hits
//! rely on.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoints::{refine_fixed_point, HyperbolicOrbit};
use crate::integrate::{strobe_once, IntegratorConfig};
use crate::melnikov::separatrix;
use crate::models::{ModelSpec, PhaseState};
use crate::roots::brent;

/// Tangent angle below which a crossing is not counted as transversal.
pub const ANGLE_FLOOR: f64 = 1e-6;
pub const CROSSING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifoldKind {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcOptions {
    pub seed_offset: f64,
    pub max_spacing: f64,
    /// Largest turning angle between consecutive segments, radians.
    pub max_turn: f64,
    pub max_points: usize,
    /// Largest number of map applications per point.
    pub max_iterates: usize,
}

impl Default for ArcOptions {
    fn default() -> Self {
        Self {
            seed_offset: 1e-7,
            max_spacing: 1e-3,
            max_turn: 0.2,
            max_points: 200_000,
            max_iterates: 64,
        }
    }
}

impl ArcOptions {
    fn validate(&self) -> Result<()> {
        if !(self.seed_offset > 0.0 && self.max_spacing > 0.0 && self.max_turn > 0.0) {
            return Err(Error::InvalidArgument(
                "seed offset, spacing and turn limits must be positive".into(),
            ));
        }
        if self.max_points < 2 || self.max_iterates == 0 {
            return Err(Error::InvalidArgument(
                "arc budgets must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcPoint {
    pub u: f64,
    /// Cumulative polyline arclength.
    pub s: f64,
    pub x: f64,
    pub y: f64,
}

/// Why growth stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArcEnd {
    Arclength,
    Predicate,
    PointBudget,
    IterateBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldArc {
    pub owner: HyperbolicOrbit,
    pub kind: ManifoldKind,
    pub branch: i8,
    pub options: ArcOptions,
    pub config: IntegratorConfig,
    pub points: Vec<ArcPoint>,
    pub end: ArcEnd,
    /// Points accepted at the minimum parameter step despite violating the
    /// spacing or turning limits.
    pub forced: usize,
}

impl ManifoldArc {
    pub fn arclength(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.s)
    }

    /// True when growth stopped on a budget rather than on request.
    pub fn truncated(&self) -> bool {
        matches!(self.end, ArcEnd::PointBudget | ArcEnd::IterateBudget)
    }

    pub fn phase(&self) -> f64 {
        self.owner.base.t
    }

    pub fn point_at(&self, u: f64) -> Result<PhaseState> {
        ArcParam::new(
            &self.owner,
            self.kind,
            self.branch,
            self.options.seed_offset,
        )?
        .eval(u, &self.config)
    }
}

/// The map `u ↦ point` shared by growth, polish and section hits.
#[derive(Clone, Copy)]
struct ArcParam<'a> {
    owner: &'a HyperbolicOrbit,
    sign: f64,
    factor: f64,
    dir: [f64; 2],
}

impl<'a> ArcParam<'a> {
    fn new(owner: &'a HyperbolicOrbit, kind: ManifoldKind, branch: i8, delta: f64) -> Result<Self> {
        let (lu, ls) = owner.eigenvalues;
        if !(lu.abs() > 1.0 && ls.abs() < 1.0) {
            return Err(Error::NotHyperbolic { modulus: lu.abs() });
        }
        if lu < 0.0 {
            return Err(Error::InvalidArgument(
                "orientation-reversing fixed points are not supported".into(),
            ));
        }
        if branch != 1 && branch != -1 {
            return Err(Error::InvalidArgument("branch must be +1 or -1".into()));
        }
        let b = branch as f64 * delta;
        let (sign, factor, v) = match kind {
            ManifoldKind::Unstable => (1.0, lu, owner.v_u()),
            ManifoldKind::Stable => (-1.0, 1.0 / ls, owner.v_s()),
        };
        Ok(Self {
            owner,
            sign,
            factor,
            dir: [b * v[0], b * v[1]],
        })
    }

    fn eval(&self, u: f64, cfg: &IntegratorConfig) -> Result<PhaseState> {
        let n = u.floor().max(0.0);
        let r = self.factor.powf(u - n);
        let base = self.owner.base;
        let mut p = PhaseState::new(base.x + r * self.dir[0], base.y + r * self.dir[1], base.t);
        for _ in 0..n as usize {
            p = strobe_once(&self.owner.spec, p, self.sign, cfg)?;
        }
        Ok(PhaseState::new(p.x, p.y, base.t))
    }
}

fn turn(a: [f64; 2], b: [f64; 2]) -> f64 {
    let cross = a[0] * b[1] - a[1] * b[0];
    let dot = a[0] * b[0] + a[1] * b[1];
    cross.atan2(dot).abs()
}

/// Grows an arc until its arclength reaches `target_arclength`.
pub fn grow_manifold(
    orbit: &HyperbolicOrbit,
    kind: ManifoldKind,
    branch: i8,
    target_arclength: f64,
    options: &ArcOptions,
    config: &IntegratorConfig,
) -> Result<ManifoldArc> {
    grow_manifold_until(
        orbit,
        kind,
        branch,
        target_arclength,
        options,
        config,
        |_| false,
    )
}

/// As [`grow_manifold`], also stopping after the first point for which
/// `stop` returns true.
pub fn grow_manifold_until<S>(
    orbit: &HyperbolicOrbit,
    kind: ManifoldKind,
    branch: i8,
    target_arclength: f64,
    options: &ArcOptions,
    config: &IntegratorConfig,
    mut stop: S,
) -> Result<ManifoldArc>
where
    S: FnMut(&PhaseState) -> bool,
{
    options.validate()?;
    config.validate()?;
    if !(target_arclength >= 0.0) {
        return Err(Error::InvalidArgument(
            "target arclength must be non-negative".into(),
        ));
    }
    let param = ArcParam::new(orbit, kind, branch, options.seed_offset)?;
    let first = param.eval(0.0, config)?;
    let mut arc = ManifoldArc {
        owner: orbit.clone(),
        kind,
        branch,
        options: *options,
        config: *config,
        points: vec![ArcPoint {
            u: 0.0,
            s: 0.0,
            x: first.x,
            y: first.y,
        }],
        end: ArcEnd::Arclength,
        forced: 0,
    };
    if target_arclength == 0.0 {
        return Ok(arc);
    }
    if stop(&first) {
        arc.end = ArcEnd::Predicate;
        return Ok(arc);
    }

    const MAX_DU: f64 = 0.25;
    const MIN_DU: f64 = 1e-12;
    let mut du = 0.05;
    loop {
        let last = *arc.points.last().expect("arc is never empty");
        if arc.points.len() >= options.max_points {
            arc.end = ArcEnd::PointBudget;
            return Ok(arc);
        }
        if last.u >= options.max_iterates as f64 {
            arc.end = ArcEnd::IterateBudget;
            return Ok(arc);
        }
        let prev_dir = arc
            .points
            .len()
            .checked_sub(2)
            .map(|i| [last.x - arc.points[i].x, last.y - arc.points[i].y]);
        let (u, p, d) = loop {
            let u = last.u + du;
            let p = param.eval(u, config)?;
            let seg = [p.x - last.x, p.y - last.y];
            let d = seg[0].hypot(seg[1]);
            let bend = prev_dir.map_or(0.0, |pd| turn(pd, seg));
            let ok = d <= options.max_spacing && bend <= options.max_turn;
            if ok || du <= MIN_DU {
                if !ok {
                    arc.forced += 1;
                }
                if ok && d < 0.3 * options.max_spacing && bend < 0.3 * options.max_turn {
                    du = (du * 2.0).min(MAX_DU);
                }
                break (u, p, d);
            }
            du = (du * 0.5).max(MIN_DU);
        };
        let s = last.s + d;
        arc.points.push(ArcPoint {
            u,
            s,
            x: p.x,
            y: p.y,
        });
        if stop(&p) {
            arc.end = ArcEnd::Predicate;
            return Ok(arc);
        }
        if s >= target_arclength {
            return Ok(arc);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeteroclinicCrossing {
    pub point: PhaseState,
    /// Parent saddles of the unstable and stable owners.
    pub from_orbit: PhaseState,
    pub to_orbit: PhaseState,
    pub u_unstable: f64,
    pub u_stable: f64,
    /// Angle between the manifold tangents, in `[0, π/2]`.
    pub angle: f64,
    pub transversal: bool,
    /// Distance between the two arc points after polishing.
    pub residual: f64,
    pub polished: bool,
}

#[derive(Clone, Copy)]
struct Block {
    start: usize,
    end: usize,
    lo: [f64; 2],
    hi: [f64; 2],
}

const BLOCK: usize = 32;

fn blocks(points: &[ArcPoint]) -> Vec<Block> {
    let mut out = Vec::new();
    let n = points.len();
    let mut start = 0;
    while start + 1 < n {
        let end = (start + BLOCK).min(n - 1);
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &points[start..=end] {
            lo = [lo[0].min(p.x), lo[1].min(p.y)];
            hi = [hi[0].max(p.x), hi[1].max(p.y)];
        }
        out.push(Block { start, end, lo, hi });
        start = end;
    }
    out
}

fn overlaps(a: &Block, b: &Block) -> bool {
    a.lo[0] <= b.hi[0] && b.lo[0] <= a.hi[0] && a.lo[1] <= b.hi[1] && b.lo[1] <= a.hi[1]
}

/// Intersection parameters `(s, t) ∈ [0,1]²` of segments `p0p1` and `q0q1`.
fn segment_hit(p0: &ArcPoint, p1: &ArcPoint, q0: &ArcPoint, q1: &ArcPoint) -> Option<(f64, f64)> {
    let r = [p1.x - p0.x, p1.y - p0.y];
    let q = [q1.x - q0.x, q1.y - q0.y];
    let den = r[0] * q[1] - r[1] * q[0];
    if den == 0.0 {
        return None;
    }
    let w = [q0.x - p0.x, q0.y - p0.y];
    let s = (w[0] * q[1] - w[1] * q[0]) / den;
    let t = (w[0] * r[1] - w[1] * r[0]) / den;
    ((0.0..1.0).contains(&s) && (0.0..1.0).contains(&t)).then_some((s, t))
}

/// Polyline crossings between an unstable and a stable arc, each polished by
/// Newton iteration in `(u_u, u_s)` until the points agree to `tol`.
pub fn find_crossings(
    arc_u: &ManifoldArc,
    arc_s: &ManifoldArc,
    tol: f64,
) -> Result<Vec<HeteroclinicCrossing>> {
    if arc_u.kind != ManifoldKind::Unstable || arc_s.kind != ManifoldKind::Stable {
        return Err(Error::InvalidArgument(
            "expected an unstable and a stable arc".into(),
        ));
    }
    let dphase = (arc_u.phase() - arc_s.phase()) / TAU;
    if (dphase - dphase.round()).abs() > 1e-12 {
        return Err(Error::InvalidArgument(
            "arcs live on different strobe phases".into(),
        ));
    }
    let (pu, ps) = (&arc_u.points, &arc_s.points);
    let (bu, bs) = (blocks(pu), blocks(ps));
    let mut raw = Vec::new();
    for a in &bu {
        for b in bs.iter().filter(|b| overlaps(a, b)) {
            for i in a.start..a.end {
                for j in b.start..b.end {
                    if let Some((s, t)) = segment_hit(&pu[i], &pu[i + 1], &ps[j], &ps[j + 1]) {
                        let uu = pu[i].u + s * (pu[i + 1].u - pu[i].u);
                        let us = ps[j].u + t * (ps[j + 1].u - ps[j].u);
                        raw.push((uu, us));
                    }
                }
            }
        }
    }
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));

    let param_u = ArcParam::new(
        &arc_u.owner,
        arc_u.kind,
        arc_u.branch,
        arc_u.options.seed_offset,
    )?;
    let param_s = ArcParam::new(
        &arc_s.owner,
        arc_s.kind,
        arc_s.branch,
        arc_s.options.seed_offset,
    )?;
    let spacing = arc_u.options.max_spacing.max(arc_s.options.max_spacing);
    let mut out = Vec::with_capacity(raw.len());
    for (uu, us) in raw {
        out.push(polish(
            &param_u,
            &param_s,
            &arc_u.config,
            uu,
            us,
            spacing,
            tol,
        )?);
    }
    Ok(out)
}

/// Local polyline of `2·HALF + 1` points around `u` with geometric spacing
/// close to `d`.
fn local_polyline(
    param: &ArcParam,
    cfg: &IntegratorConfig,
    u: f64,
    d: f64,
) -> Result<Vec<ArcPoint>> {
    const HALF: i32 = 4;
    let probe = (d * 1e-3).max(1e-12);
    let (a, b) = (param.eval(u, cfg)?, param.eval(u + probe, cfg)?);
    let speed = (a.distance(&b) / probe).max(1e-300);
    let h = d / speed;
    let mut out = Vec::with_capacity(2 * HALF as usize + 1);
    for k in -HALF..=HALF {
        let uk = u + k as f64 * h;
        if uk < 0.0 {
            continue;
        }
        let p = param.eval(uk, cfg)?;
        out.push(ArcPoint {
            u: uk,
            s: 0.0,
            x: p.x,
            y: p.y,
        });
    }
    Ok(out)
}

/// Hit of two local polylines closest to their centers, as interpolated
/// parameters plus the sagitta estimate of the two hit segments.
fn local_hit(a: &[ArcPoint], b: &[ArcPoint]) -> Option<(f64, f64, PhaseState, f64)> {
    let mut best: Option<(f64, f64, PhaseState, f64, usize)> = None;
    let (ca, cb) = (a.len() / 2, b.len() / 2);
    for i in 0..a.len().saturating_sub(1) {
        for j in 0..b.len().saturating_sub(1) {
            let Some((s, t)) = segment_hit(&a[i], &a[i + 1], &b[j], &b[j + 1]) else {
                continue;
            };
            let off = i.abs_diff(ca) + j.abs_diff(cb);
            if best.as_ref().is_some_and(|x| x.4 <= off) {
                continue;
            }
            let p = PhaseState::at(
                a[i].x + s * (a[i + 1].x - a[i].x),
                a[i].y + s * (a[i + 1].y - a[i].y),
            );
            let sag = |pts: &[ArcPoint], k: usize| -> f64 {
                let lo = k.saturating_sub(1);
                let hi = (k + 2).min(pts.len() - 1);
                let v1 = [pts[k].x - pts[lo].x, pts[k].y - pts[lo].y];
                let v2 = [pts[hi].x - pts[k].x, pts[hi].y - pts[k].y];
                let d = (pts[k + 1].x - pts[k].x).hypot(pts[k + 1].y - pts[k].y);
                if lo == k || hi == k {
                    0.0
                } else {
                    d * turn(v1, v2) / 8.0
                }
            };
            best = Some((
                a[i].u + s * (a[i + 1].u - a[i].u),
                b[j].u + t * (b[j + 1].u - b[j].u),
                p,
                sag(a, i).max(sag(b, j)),
                off,
            ));
        }
    }
    best.map(|(uu, us, p, r, _)| (uu, us, p, r))
}

fn chord(param: &ArcParam, cfg: &IntegratorConfig, u: f64, h: f64) -> Result<[f64; 2]> {
    let lo = (u - h).max(0.0);
    let (a, b) = (param.eval(lo, cfg)?, param.eval(u + h, cfg)?);
    Ok([b.x - a.x, b.y - a.y])
}

/// Refines a chord crossing by intersecting ever finer local polylines.
/// Forward iteration amplifies integration error along the arc, so the
/// parameterization is noisy but points stay on the manifold; working with
/// geometry alone sidesteps the noise.
fn polish(
    pu: &ArcParam,
    ps: &ArcParam,
    cfg: &IntegratorConfig,
    mut uu: f64,
    mut us: f64,
    spacing: f64,
    tol: f64,
) -> Result<HeteroclinicCrossing> {
    const FINEST: f64 = 1e-5;
    let mut point = pu.eval(uu, cfg)?;
    let mut residual = spacing;
    let mut d = spacing;
    let mut reached = false;
    loop {
        let (la, lb) = (
            local_polyline(pu, cfg, uu, d)?,
            local_polyline(ps, cfg, us, d)?,
        );
        let Some((nu, ns, p, r)) = local_hit(&la, &lb) else {
            break;
        };
        (uu, us, point, residual) = (nu, ns, p, r);
        if d <= FINEST {
            reached = true;
            break;
        }
        d = (d * 0.03).max(FINEST);
    }
    // Tangents from chords symmetric about the crossing.
    let h = |param: &ArcParam, u: f64| -> Result<f64> {
        let b = param.eval(u + 1e-9, cfg)?;
        let a = param.eval(u, cfg)?;
        Ok(d / (a.distance(&b) / 1e-9).max(1e-300))
    };
    let (tu, ts) = (
        chord(pu, cfg, uu, h(pu, uu)?)?,
        chord(ps, cfg, us, h(ps, us)?)?,
    );
    let mut angle = turn(tu, ts);
    if angle > std::f64::consts::FRAC_PI_2 {
        angle = std::f64::consts::PI - angle;
    }
    Ok(HeteroclinicCrossing {
        point,
        from_orbit: pu.owner.parent_saddle,
        to_orbit: ps.owner.parent_saddle,
        u_unstable: uu,
        u_stable: us,
        angle,
        transversal: angle >= ANGLE_FLOOR,
        residual,
        polished: reached && residual <= tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplittingOptions {
    pub n_phases: usize,
    /// Section `x = const`; `None` picks the symmetry point of the
    /// unperturbed connection, or the midpoint between the saddles.
    pub section_x: Option<f64>,
    pub arc: ArcOptions,
    /// Largest arclength grown while looking for the section.
    pub max_arclength: f64,
    /// Refine sign changes of the gap in `t0` by root finding.
    pub refine_zeros: bool,
}

impl Default for SplittingOptions {
    fn default() -> Self {
        Self {
            n_phases: 32,
            section_x: None,
            arc: ArcOptions {
                max_spacing: 0.02,
                ..ArcOptions::default()
            },
            max_arclength: 20.0,
            refine_zeros: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplittingSample {
    pub t0: f64,
    /// Signed normal gap `(y_u − y_s)·n_y`, `n = ∇h0/|∇h0|`.
    pub gap: f64,
    pub y_unstable: f64,
    pub y_stable: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingResult {
    pub spec: ModelSpec,
    pub from: PhaseState,
    /// Lattice copy of the requested target that the connection reaches.
    pub to: PhaseState,
    pub section_x: f64,
    pub branch_unstable: i8,
    pub branch_stable: i8,
    pub samples: Vec<SplittingSample>,
    /// Sample of largest `|gap|`.
    pub max_gap: SplittingSample,
    /// Phases where the gap changes sign.
    pub zeros: Vec<f64>,
}

impl SplittingResult {
    pub fn max_abs_gap(&self) -> f64 {
        self.max_gap.gap.abs()
    }
}

struct SplittingSetup {
    section_x: f64,
    toward: PhaseState,
    /// Lattice copy of the target reached by the unperturbed connection.
    to: PhaseState,
}

fn splitting_setup(
    spec: &ModelSpec,
    from: PhaseState,
    to: PhaseState,
    section_x: Option<f64>,
) -> SplittingSetup {
    match separatrix(&spec.unperturbed(), from, to, None) {
        Ok(sep) => {
            let c = sep.center();
            SplittingSetup {
                section_x: section_x.unwrap_or(c.x),
                toward: PhaseState::at(c.x, c.y),
                to: sep.to,
            }
        }
        Err(_) => {
            let mid = PhaseState::at(0.5 * (from.x + to.x), 0.5 * (from.y + to.y));
            SplittingSetup {
                section_x: section_x.unwrap_or(mid.x),
                toward: mid,
                to,
            }
        }
    }
}

fn branch_toward(v: [f64; 2], origin: &PhaseState, target: &PhaseState) -> i8 {
    let d = v[0] * (target.x - origin.x) + v[1] * (target.y - origin.y);
    if d >= 0.0 {
        1
    } else {
        -1
    }
}

/// Grows an arc until it crosses `x = section_x`, then solves for the exact
/// hit in `u`. Returns the hit point.
fn section_hit(
    orbit: &HyperbolicOrbit,
    kind: ManifoldKind,
    branch: i8,
    section_x: f64,
    opts: &SplittingOptions,
    cfg: &IntegratorConfig,
) -> Result<PhaseState> {
    let side0 = (orbit.base.x - section_x).signum();
    let arc = grow_manifold_until(
        orbit,
        kind,
        branch,
        opts.max_arclength,
        &opts.arc,
        cfg,
        |p| (p.x - section_x).signum() != side0,
    )?;
    if arc.end != ArcEnd::Predicate {
        return Err(Error::InsufficientArclength(format!(
            "{kind:?} arc of ({:.6}, {:.6}) did not reach x = {section_x} within arclength {:.3}",
            orbit.base.x,
            orbit.base.y,
            arc.arclength()
        )));
    }
    let n = arc.points.len();
    let (a, b) = (arc.points[n - 2].u, arc.points[n - 1].u);
    let param = ArcParam::new(orbit, kind, branch, opts.arc.seed_offset)?;
    let mut failure = None;
    let u = brent(
        |u| match param.eval(u, cfg) {
            Ok(p) => Some(p.x - section_x),
            Err(e) => {
                failure = Some(e);
                None
            }
        },
        a,
        b,
        1e-15,
        200,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let u = u.ok_or_else(|| Error::Integration("section bracket lost".into()))?;
    param.eval(u, cfg)
}

/// Signed gap on the section at one phase.
fn gap_at_phase(
    spec: &ModelSpec,
    from: PhaseState,
    to: PhaseState,
    setup: &SplittingSetup,
    opts: &SplittingOptions,
    cfg: &IntegratorConfig,
) -> Result<(SplittingSample, i8, i8)> {
    let t0 = from.t;
    let a = refine_fixed_point(spec, PhaseState::new(from.x, from.y, t0), cfg)?;
    let b = refine_fixed_point(spec, PhaseState::new(to.x, to.y, t0), cfg)?;
    let bu = branch_toward(a.v_u(), &a.base, &setup.toward);
    let bs = branch_toward(b.v_s(), &b.base, &setup.toward);
    let pu = section_hit(&a, ManifoldKind::Unstable, bu, setup.section_x, opts, cfg)?;
    let ps = section_hit(&b, ManifoldKind::Stable, bs, setup.section_x, opts, cfg)?;
    let h0 = spec.unperturbed();
    let (gx, gy) = h0.integrable_gradient(setup.section_x, 0.5 * (pu.y + ps.y));
    let g = gx.hypot(gy);
    let ny = if g > 0.0 { gy / g } else { 1.0 };
    Ok((
        SplittingSample {
            t0,
            gap: (pu.y - ps.y) * ny,
            y_unstable: pu.y,
            y_stable: ps.y,
        },
        bu,
        bs,
    ))
}

/// Splitting between the unstable manifold of the orbit continuing `from`
/// and the stable manifold of the orbit continuing `to`, measured on the
/// section `x = section_x` for `n_phases` equispaced strobe phases.
pub fn splitting_distance(
    spec: &ModelSpec,
    from: PhaseState,
    to: PhaseState,
    options: &SplittingOptions,
    config: &IntegratorConfig,
) -> Result<SplittingResult> {
    spec.validate()?;
    if options.n_phases == 0 {
        return Err(Error::InvalidArgument("need at least one phase".into()));
    }
    let setup = splitting_setup(spec, from, to, options.section_x);
    let to = setup.to;
    let phases: Vec<f64> = (0..options.n_phases)
        .map(|k| TAU * k as f64 / options.n_phases as f64)
        .collect();
    let at = |t0: f64| {
        gap_at_phase(
            spec,
            PhaseState::new(from.x, from.y, t0),
            PhaseState::new(to.x, to.y, t0),
            &setup,
            options,
            config,
        )
    };
    let results: Vec<(SplittingSample, i8, i8)> =
        phases.par_iter().map(|&t0| at(t0)).collect::<Result<_>>()?;
    let (bu, bs) = (results[0].1, results[0].2);
    let samples: Vec<SplittingSample> = results.into_iter().map(|r| r.0).collect();
    let max_gap = *samples
        .iter()
        .max_by(|a, b| a.gap.abs().total_cmp(&b.gap.abs()))
        .expect("at least one phase");

    let n = samples.len();
    let scale = max_gap.gap.abs();
    let mut zeros = Vec::new();
    if n > 1 && scale > 1e-12 {
        for k in 0..n {
            let (a, b) = (&samples[k], &samples[(k + 1) % n]);
            if a.gap.signum() == b.gap.signum() {
                continue;
            }
            let (ta, tb) = (a.t0, if k + 1 < n { b.t0 } else { TAU });
            let linear = ta + (tb - ta) * a.gap / (a.gap - b.gap);
            let t = if options.refine_zeros {
                brent(|t| at(t).ok().map(|r| r.0.gap), ta, tb, 1e-6, 40).unwrap_or(linear)
            } else {
                linear
            };
            zeros.push(t);
        }
    }
    Ok(SplittingResult {
        spec: spec.clone(),
        from,
        to,
        section_x: setup.section_x,
        branch_unstable: bu,
        branch_stable: bs,
        samples,
        max_gap,
        zeros,
    })
}
