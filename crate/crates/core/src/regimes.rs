//! Regime diagnostics: confinement by invariant curves versus band-crossing
//! orbits, rotation numbers, excursion timing, symbolic itineraries and the
//! parallel `(ε, μ)` sweep.

use std::f64::consts::{PI, TAU};
use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{strobe, Integrator, IntegratorConfig};
use crate::models::{family_level, Family, ModelSpec, PhaseState, SaddleFamily};
use crate::roots::brent;

/// `y` of the two saddle rows in the fundamental strip.
pub fn saddle_rows(family: Family) -> (f64, f64) {
    match family {
        Family::Cubic => (0.0, 1.0),
        Family::Torus => (0.0, PI),
    }
}

pub fn default_band(family: Family) -> (f64, f64) {
    match family {
        Family::Cubic => (-1.0, 2.0),
        Family::Torus => (0.0, TAU),
    }
}

/// Solves `h0(x, y) = level` for `y` strictly inside the saddle strip, where
/// `h0(x, ·)` is monotone.
fn level_y(h0: &ModelSpec, x: f64, level: f64) -> Option<f64> {
    let (lo, hi) = saddle_rows(h0.family);
    let f = |y: f64| Some(h0.integrable_energy(x, y) - level);
    brent(f, lo, hi, 1e-15, 200)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfinementOptions {
    /// Crossing band; `None` picks the family default.
    pub band: Option<(f64, f64)>,
    pub n_orbits: usize,
    pub n_strobe: usize,
    /// Strobe iterates per seed between crossing checks across seeds.
    pub chunk: usize,
    pub n_candidates: usize,
    pub curve_strobe: usize,
    pub curve: CurveOptions,
    pub integrator: IntegratorConfig,
}

impl Default for ConfinementOptions {
    fn default() -> Self {
        Self {
            band: None,
            n_orbits: 64,
            n_strobe: 10_000,
            chunk: 50,
            n_candidates: 8,
            curve_strobe: 2_000,
            curve: CurveOptions::default(),
            integrator: IntegratorConfig::survey(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveOptions {
    /// Largest `|Δy|` between iterates adjacent in `x mod 2π`.
    pub spread_threshold: f64,
    /// Largest uncovered gap in `x mod 2π`.
    pub max_x_gap: f64,
    /// Largest `|ρ_n − ρ_{n/2}|` for a converged rotation number.
    pub convergence_tol: f64,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self {
            spread_threshold: 0.05,
            max_x_gap: 0.5,
            convergence_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Confined,
    Overlapped,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingWitness {
    pub seed_index: usize,
    pub seed: PhaseState,
    /// Strobe iterate at which the band was first traversed.
    pub iterate: usize,
    pub y_min: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveEvidence {
    pub seed: PhaseState,
    pub rotation: f64,
    pub spread: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// Strobe iterates `(x mod 2π, y)`.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Evidence {
    Crossing(CrossingWitness),
    Curve(CurveEvidence),
    /// No crossing within budget and no curve found.
    BudgetExhausted {
        iterates: usize,
        candidates: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfinementResult {
    pub spec: ModelSpec,
    pub band: (f64, f64),
    pub verdict: Verdict,
    pub evidence: Evidence,
    pub seeds: Vec<PhaseState>,
    /// Iterates completed by every seed before the verdict.
    pub iterates_run: usize,
}

/// Seeds on the unperturbed separatrix level of each saddle family, half per
/// family, equispaced in `x`. Where a level does not cross the strip the
/// seed sits on that family's saddle row.
pub fn separatrix_seeds(spec: &ModelSpec, n: usize) -> Vec<PhaseState> {
    let h0 = spec.unperturbed();
    let (row_lo, row_hi) = saddle_rows(spec.family);
    let n_lo = n.div_ceil(2);
    let mut out = Vec::with_capacity(n);
    for (fam, count, row) in [
        (SaddleFamily::Lower, n_lo, row_lo),
        (SaddleFamily::Upper, n - n_lo, row_hi),
    ] {
        let level = family_level(&h0, fam);
        for i in 0..count {
            let x = TAU * (i as f64 + 0.5) / count as f64;
            let y = level_y(&h0, x, level).unwrap_or(row);
            out.push(PhaseState::at(x, y));
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

fn traverses(family: Family, band: (f64, f64), r: Range) -> bool {
    if family.y_periodic() {
        let k = ((r.hi - band.1) / TAU).floor();
        r.lo <= band.0 + TAU * k
    } else {
        r.lo < band.0 || r.hi > band.1
    }
}

/// Runs the band-crossing test over `seeds`, advancing them round-robin in
/// chunks. Returns the earliest crossing (by iterate, then seed index) and
/// the number of iterates completed.
fn crossing_search(
    spec: &ModelSpec,
    seeds: &[PhaseState],
    band: (f64, f64),
    n_strobe: usize,
    chunk: usize,
    cfg: &IntegratorConfig,
) -> Result<(Option<CrossingWitness>, usize)> {
    let mut states: Vec<(PhaseState, Range)> = seeds
        .iter()
        .map(|s| (*s, Range { lo: s.y, hi: s.y }))
        .collect();
    let mut done = 0;
    while done < n_strobe {
        let steps = chunk.min(n_strobe - done);
        let results: Vec<Result<(PhaseState, Range, Option<usize>)>> = states
            .par_iter()
            .map(|(s, r)| {
                let its = strobe(spec, *s, steps, cfg)?;
                let mut r = *r;
                let mut hit = None;
                for (k, p) in its.iter().enumerate() {
                    r.lo = r.lo.min(p.y);
                    r.hi = r.hi.max(p.y);
                    if hit.is_none() && traverses(spec.family, band, r) {
                        hit = Some(done + k + 1);
                    }
                }
                let last = *its.last().expect("steps >= 1");
                Ok((last, r, hit))
            })
            .collect();
        let mut best: Option<CrossingWitness> = None;
        for (i, res) in results.into_iter().enumerate() {
            let (s, r, hit) = res?;
            states[i] = (s, r);
            if let Some(it) = hit {
                if best.as_ref().map_or(true, |b| it < b.iterate) {
                    best = Some(CrossingWitness {
                        seed_index: i,
                        seed: seeds[i],
                        iterate: it,
                        y_min: r.lo,
                        y_max: r.hi,
                    });
                }
            }
        }
        done += steps;
        if best.is_some() {
            return Ok((best, done));
        }
    }
    Ok((None, done))
}

/// Candidate seeds for rotational curves: `x = 0` with energies strictly
/// between the two separatrix levels, middle first.
pub fn curve_candidates(spec: &ModelSpec, n: usize) -> Vec<PhaseState> {
    let h0 = spec.unperturbed();
    let a = family_level(&h0, SaddleFamily::Lower);
    let b = family_level(&h0, SaddleFamily::Upper);
    let mut order: Vec<usize> = (0..n).collect();
    let mid = (n as f64 - 1.0) / 2.0;
    order.sort_by(|i, j| (*i as f64 - mid).abs().total_cmp(&(*j as f64 - mid).abs()));
    order
        .into_iter()
        .filter_map(|j| {
            let level = a + (b - a) * (j + 1) as f64 / (n + 1) as f64;
            level_y(&h0, 0.0, level).map(|y| PhaseState::at(0.0, y))
        })
        .collect()
}

pub fn confinement_test(
    spec: &ModelSpec,
    options: &ConfinementOptions,
) -> Result<ConfinementResult> {
    spec.validate()?;
    options.integrator.validate()?;
    if options.n_orbits == 0 || options.n_strobe == 0 || options.chunk == 0 {
        return Err(Error::InvalidArgument(
            "confinement budgets must be positive".into(),
        ));
    }
    let band = options.band.unwrap_or_else(|| default_band(spec.family));
    let (row_lo, row_hi) = saddle_rows(spec.family);
    if !(band.0 <= row_lo && row_hi <= band.1) {
        return Err(Error::InvalidArgument(format!(
            "band [{}, {}] must contain both saddle rows",
            band.0, band.1
        )));
    }
    let seeds = separatrix_seeds(spec, options.n_orbits);
    let (witness, iterates_run) = crossing_search(
        spec,
        &seeds,
        band,
        options.n_strobe,
        options.chunk,
        &options.integrator,
    )?;
    let mut result = ConfinementResult {
        spec: spec.clone(),
        band,
        verdict: Verdict::Undetermined,
        evidence: Evidence::BudgetExhausted {
            iterates: iterates_run,
            candidates: 0,
        },
        seeds,
        iterates_run,
    };
    if let Some(w) = witness {
        result.verdict = Verdict::Overlapped;
        result.evidence = Evidence::Crossing(w);
        return Ok(result);
    }
    let candidates = curve_candidates(spec, options.n_candidates);
    for c in &candidates {
        let rot = rotation_number(
            spec,
            *c,
            options.curve_strobe,
            &options.curve,
            &options.integrator,
        )?;
        if let Rotation::Circle {
            rotation,
            spread,
            y_min,
            y_max,
            points,
            ..
        } = rot
        {
            if row_lo < y_min && y_max < row_hi {
                result.verdict = Verdict::Confined;
                result.evidence = Evidence::Curve(CurveEvidence {
                    seed: *c,
                    rotation,
                    spread,
                    y_min,
                    y_max,
                    points,
                });
                return Ok(result);
            }
        }
    }
    result.evidence = Evidence::BudgetExhausted {
        iterates: iterates_run,
        candidates: candidates.len(),
    };
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Rotation {
    /// Strobe iterates fill a graph over `x`.
    Circle {
        /// Mean lifted `x` advance per iterate.
        rotation: f64,
        /// `|ρ_n − ρ_{n/2}|`.
        convergence: f64,
        converged: bool,
        spread: f64,
        y_min: f64,
        y_max: f64,
        points: Vec<(f64, f64)>,
    },
    /// The orbit does not wind in `x`.
    Librational {
        x_range: f64,
    },
    NotCircle {
        spread: f64,
        x_gap: f64,
    },
}

impl Rotation {
    pub fn is_circle(&self) -> bool {
        matches!(self, Rotation::Circle { .. })
    }
}

/// Rotation number of the strobe orbit of `s0`, with a curve-likeness test
/// on the iterates.
pub fn rotation_number(
    spec: &ModelSpec,
    s0: PhaseState,
    n_strobe: usize,
    options: &CurveOptions,
    cfg: &IntegratorConfig,
) -> Result<Rotation> {
    if n_strobe < 2 {
        return Err(Error::InvalidArgument(
            "rotation number needs at least 2 iterates".into(),
        ));
    }
    let its = strobe(spec, s0, n_strobe, cfg)?;
    let x_min = its.iter().map(|p| p.x).fold(s0.x, f64::min);
    let x_max = its.iter().map(|p| p.x).fold(s0.x, f64::max);
    if x_max - x_min < TAU {
        return Ok(Rotation::Librational {
            x_range: x_max - x_min,
        });
    }
    let mut pts: Vec<(f64, f64)> = std::iter::once(s0)
        .chain(its.iter().copied())
        .map(|p| (p.x.rem_euclid(TAU), p.y))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pts.len();
    let mut spread = 0.0f64;
    let mut x_gap = 0.0f64;
    for k in 0..n {
        let (a, b) = (pts[k], pts[(k + 1) % n]);
        let dx = if k + 1 < n {
            b.0 - a.0
        } else {
            b.0 + TAU - a.0
        };
        x_gap = x_gap.max(dx);
        spread = spread.max((b.1 - a.1).abs());
    }
    if spread > options.spread_threshold || x_gap > options.max_x_gap {
        return Ok(Rotation::NotCircle { spread, x_gap });
    }
    let half = n_strobe / 2;
    let rho = (its[n_strobe - 1].x - s0.x) / n_strobe as f64;
    let rho_half = (its[half - 1].x - s0.x) / half as f64;
    let convergence = (rho - rho_half).abs();
    let (y_min, y_max) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.1), hi.max(p.1))
        });
    Ok(Rotation::Circle {
        rotation: rho,
        convergence,
        converged: convergence <= options.convergence_tol,
        spread,
        y_min,
        y_max,
        points: pts,
    })
}

/// When an excursion counts as a passage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum PassageRule {
    /// First time `|y − y0| ≥ delta`, either direction.
    Displacement { delta: f64 },
    /// First time `y ≥ y_plus` after having been at or below `y_minus`.
    Directional { y_minus: f64, y_plus: f64 },
}

impl PassageRule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PassageRule::Displacement { delta } => delta > 0.0,
            PassageRule::Directional { y_minus, y_plus } => y_plus > y_minus,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "passage thresholds must be increasing".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcursionRecord {
    pub seed: PhaseState,
    /// Elapsed time to the passage; `None` on timeout.
    pub first_passage: Option<f64>,
    /// `max |y − y0|` over the part of the run that was integrated.
    pub amplitude: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub t_end: f64,
}

/// Integrates each seed to `t_max` (or to its passage when
/// `stop_at_passage`), recording passage time and excursion amplitude.
pub fn excursion_stats(
    spec: &ModelSpec,
    seeds: &[PhaseState],
    t_max: f64,
    rule: PassageRule,
    stop_at_passage: bool,
    cfg: &IntegratorConfig,
) -> Result<Vec<ExcursionRecord>> {
    rule.validate()?;
    cfg.validate()?;
    if !(t_max > 0.0) {
        return Err(Error::InvalidArgument("t_max must be positive".into()));
    }
    seeds
        .par_iter()
        .map(|s0| excursion_one(spec, *s0, t_max, rule, stop_at_passage, cfg))
        .collect()
}

fn excursion_one(
    spec: &ModelSpec,
    s0: PhaseState,
    t_max: f64,
    rule: PassageRule,
    stop_at_passage: bool,
    cfg: &IntegratorConfig,
) -> Result<ExcursionRecord> {
    let mut rec = ExcursionRecord {
        seed: s0,
        first_passage: None,
        amplitude: 0.0,
        y_min: s0.y,
        y_max: s0.y,
        t_end: s0.t,
    };
    let mut armed = matches!(rule, PassageRule::Directional { y_minus, .. } if s0.y <= y_minus);
    let mut visit = |p: &PhaseState| {
        rec.y_min = rec.y_min.min(p.y);
        rec.y_max = rec.y_max.max(p.y);
        rec.amplitude = rec.amplitude.max((p.y - s0.y).abs());
        rec.t_end = p.t;
        if rec.first_passage.is_none() {
            let passed = match rule {
                PassageRule::Displacement { delta } => (p.y - s0.y).abs() >= delta,
                PassageRule::Directional { y_minus, y_plus } => {
                    armed |= p.y <= y_minus;
                    armed && p.y >= y_plus
                }
            };
            if passed {
                rec.first_passage = Some(p.t - s0.t);
                if stop_at_passage {
                    return ControlFlow::Break(());
                }
            }
        }
        ControlFlow::Continue(())
    };
    Integrator::new(spec, cfg).flow_observed(s0, s0.t + t_max, |p| visit(p))?;
    Ok(rec)
}

/// Median of the passage times with timeouts ranked last; `None` when at
/// least half the seeds time out.
pub fn median_passage(records: &[ExcursionRecord]) -> Option<f64> {
    let mut v: Vec<f64> = records
        .iter()
        .map(|r| r.first_passage.unwrap_or(f64::INFINITY))
        .collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let m = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    m.is_finite().then_some(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItineraryOptions {
    pub r_cell: f64,
    pub dt: f64,
}

impl Default for ItineraryOptions {
    fn default() -> Self {
        Self {
            r_cell: PI / 8.0,
            dt: 0.05,
        }
    }
}

/// Torus saddle `(i·π, j·π)` with `i ≡ j (mod 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Symbol {
    pub i: i64,
    pub j: i64,
}

impl Symbol {
    pub fn point(&self) -> (f64, f64) {
        (self.i as f64 * PI, self.j as f64 * PI)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub symbol: Symbol,
    pub t_enter: f64,
    pub t_exit: f64,
    /// The orbit crossed this saddle's cell without entering its `r_cell`
    /// ball. Such visits are only inserted to bridge two ball visits that
    /// are not heteroclinic neighbours.
    #[serde(default)]
    pub grazing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransitionClass {
    /// Along one diagonal heteroclinic connection.
    Diagonal,
    /// To the same-family saddle one cell away in `x` or `y`.
    Axial,
    /// Across a cell between diagonally opposite corners, skipping the
    /// saddle in between.
    OppositeCorner,
    Other,
}

pub fn classify_transition(a: Symbol, b: Symbol) -> TransitionClass {
    let (di, dj) = ((b.i - a.i).abs(), (b.j - a.j).abs());
    match (di, dj) {
        (1, 1) => TransitionClass::Diagonal,
        (2, 0) | (0, 2) => TransitionClass::Axial,
        (2, 2) => TransitionClass::OppositeCorner,
        _ => TransitionClass::Other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TransitionCounts {
    pub diagonal: usize,
    pub axial: usize,
    pub opposite_corner: usize,
    pub other: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Itinerary {
    pub seed: PhaseState,
    pub r_cell: f64,
    pub visits: Vec<Visit>,
    pub counts: TransitionCounts,
}

impl Itinerary {
    pub fn len(&self) -> usize {
        self.visits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visits.is_empty()
    }

    pub fn symbols(&self) -> Vec<Symbol> {
        self.visits.iter().map(|v| v.symbol).collect()
    }

    /// No opposite-corner or unclassified jumps.
    pub fn is_legal(&self) -> bool {
        self.counts.opposite_corner == 0 && self.counts.other == 0
    }
}

fn nearest_symbol(x: f64, y: f64, r_cell: f64) -> Option<Symbol> {
    let (i, j) = ((x / PI).round() as i64, (y / PI).round() as i64);
    if (i - j).rem_euclid(2) != 0 {
        return None;
    }
    let (px, py) = (i as f64 * PI, j as f64 * PI);
    ((x - px).hypot(y - py) < r_cell).then_some(Symbol { i, j })
}

/// Cell of the saddle lattice containing `(x, y)`: the diamond
/// `|x − iπ| + |y − jπ| ≤ π`. Neighbouring diamonds share an edge exactly
/// when their saddles are joined by a diagonal connection.
fn diamond(x: f64, y: f64) -> Symbol {
    let a = ((x + y) / (2.0 * PI)).round() as i64;
    let b = ((y - x) / (2.0 * PI)).round() as i64;
    Symbol { i: a - b, j: a + b }
}

struct Tracker {
    r_cell: f64,
    visits: Vec<Visit>,
    /// Diamond cells crossed since the last ball visit, with entry and exit times.
    flight: Vec<Visit>,
}

impl Tracker {
    fn new(r_cell: f64) -> Self {
        Self {
            r_cell,
            visits: Vec::new(),
            flight: Vec::new(),
        }
    }

    fn record(&mut self, p: &PhaseState) {
        let cell = diamond(p.x, p.y);
        match self.flight.last_mut() {
            Some(v) if v.symbol == cell => v.t_exit = p.t,
            _ => self.flight.push(Visit {
                symbol: cell,
                t_enter: p.t,
                t_exit: p.t,
                grazing: true,
            }),
        }
        let Some(sym) = nearest_symbol(p.x, p.y, self.r_cell) else {
            return;
        };
        let flight = std::mem::take(&mut self.flight);
        match self.visits.last_mut() {
            Some(v) if v.symbol == sym => {
                v.t_exit = p.t;
                return;
            }
            Some(v) if classify_transition(v.symbol, sym) != TransitionClass::Diagonal => {
                let from = v.symbol;
                // Bridge with the cells the flight actually crossed.
                let lo = flight
                    .iter()
                    .position(|c| c.symbol != from)
                    .unwrap_or(flight.len());
                let hi = flight
                    .iter()
                    .rposition(|c| c.symbol != sym)
                    .map_or(lo, |k| k + 1);
                self.visits.extend_from_slice(&flight[lo..hi.max(lo)]);
            }
            _ => {}
        }
        self.visits.push(Visit {
            symbol: sym,
            t_enter: p.t,
            t_exit: p.t,
            grazing: false,
        });
    }
}

/// Saddle-neighborhood itinerary of a Torus orbit sampled every `dt`, with
/// consecutive repeats collapsed.
pub fn itinerary(
    spec: &ModelSpec,
    s0: PhaseState,
    t_max: f64,
    options: &ItineraryOptions,
    cfg: &IntegratorConfig,
) -> Result<Itinerary> {
    if spec.family != Family::Torus {
        return Err(Error::InvalidArgument(
            "itineraries are defined for the torus family".into(),
        ));
    }
    if !(options.r_cell > 0.0 && options.r_cell < PI / 4.0) {
        return Err(Error::InvalidArgument("r_cell must lie in (0, π/4)".into()));
    }
    if !(options.dt > 0.0 && t_max > 0.0) {
        return Err(Error::InvalidArgument(
            "dt and t_max must be positive".into(),
        ));
    }
    cfg.validate()?;
    let mut tracker = Tracker::new(options.r_cell);
    tracker.record(&s0);
    let mut integ = Integrator::new(spec, cfg);
    let mut s = s0;
    let mut k = 1u64;
    loop {
        let target = (s0.t + k as f64 * options.dt).min(s0.t + t_max);
        s = integ.flow_to(s, target)?;
        tracker.record(&s);
        if target >= s0.t + t_max {
            break;
        }
        k += 1;
    }
    let visits = tracker.visits;
    let mut counts = TransitionCounts::default();
    for w in visits.windows(2) {
        match classify_transition(w[0].symbol, w[1].symbol) {
            TransitionClass::Diagonal => counts.diagonal += 1,
            TransitionClass::Axial => counts.axial += 1,
            TransitionClass::OppositeCorner => counts.opposite_corner += 1,
            TransitionClass::Other => counts.other += 1,
        }
    }
    Ok(Itinerary {
        seed: s0,
        r_cell: options.r_cell,
        visits,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub eps: Vec<f64>,
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub eps: f64,
    pub mu: f64,
    pub verdict: Verdict,
    pub evidence_id: String,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySample {
    pub mu: f64,
    /// Smallest `ε` with an Overlapped verdict in the row.
    pub eps_star: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFit {
    /// Least-squares slope of `1 − ε*` against `μ` through the origin.
    pub c2_hat: f64,
    pub std_error: f64,
    pub n_rows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityViolation {
    pub mu: f64,
    /// A Confined cell above an Overlapped one.
    pub confined_eps: f64,
    pub overlapped_eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeMap {
    pub family: Family,
    pub base: ModelSpec,
    pub options: ConfinementOptions,
    pub cells: Vec<Cell>,
    pub boundary: Vec<BoundarySample>,
    pub fit: Option<BoundaryFit>,
    pub violations: Vec<MonotonicityViolation>,
}

impl RegimeMap {
    pub fn cell(&self, eps: f64, mu: f64) -> Option<&Cell> {
        self.cells.iter().find(|c| c.eps == eps && c.mu == mu)
    }
}

/// Runs `confinement_test` on every `(ε, μ)` cell of `grid`, with `base`
/// supplying family, coupling and perturbation.
pub fn sweep(
    base: &ModelSpec,
    grid: &SweepGrid,
    options: &ConfinementOptions,
) -> Result<RegimeMap> {
    if grid.eps.is_empty() || grid.mu.is_empty() {
        return Err(Error::InvalidArgument(
            "sweep grid must be non-empty".into(),
        ));
    }
    let jobs: Vec<(usize, usize)> = (0..grid.mu.len())
        .flat_map(|j| (0..grid.eps.len()).map(move |i| (i, j)))
        .collect();
    let cells: Vec<Cell> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let (eps, mu) = (grid.eps[i], grid.mu[j]);
            let spec = base.with_epsilon(eps).with_mu(mu);
            let (verdict, evidence) = match confinement_test(&spec, options) {
                Ok(r) => (r.verdict, r.evidence),
                Err(e) => {
                    log::warn!("cell eps={eps} mu={mu} failed: {e}");
                    (
                        Verdict::Undetermined,
                        Evidence::BudgetExhausted {
                            iterates: 0,
                            candidates: 0,
                        },
                    )
                }
            };
            Cell {
                eps,
                mu,
                verdict,
                evidence_id: format!("cell-{j:03}-{i:03}"),
                evidence,
            }
        })
        .collect();

    let mut boundary = Vec::with_capacity(grid.mu.len());
    let mut violations = Vec::new();
    for &mu in &grid.mu {
        let mut row: Vec<&Cell> = cells.iter().filter(|c| c.mu == mu).collect();
        row.sort_by(|a, b| a.eps.total_cmp(&b.eps));
        let eps_star = row
            .iter()
            .find(|c| c.verdict == Verdict::Overlapped)
            .map(|c| c.eps);
        if let Some(e0) = eps_star {
            for c in row
                .iter()
                .filter(|c| c.verdict == Verdict::Confined && c.eps > e0)
            {
                violations.push(MonotonicityViolation {
                    mu,
                    confined_eps: c.eps,
                    overlapped_eps: e0,
                });
            }
        }
        boundary.push(BoundarySample { mu, eps_star });
    }
    let fit = fit_boundary(&boundary);
    Ok(RegimeMap {
        family: base.family,
        base: base.clone(),
        options: *options,
        cells,
        boundary,
        fit,
        violations,
    })
}

/// `1 − ε*(μ) ≈ Ĉ₂·μ` by least squares through the origin.
pub fn fit_boundary(samples: &[BoundarySample]) -> Option<BoundaryFit> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter_map(|b| b.eps_star.map(|e| (b.mu, 1.0 - e)))
        .filter(|(m, _)| *m > 0.0)
        .collect();
    if pts.is_empty() {
        return None;
    }
    let sxx: f64 = pts.iter().map(|(m, _)| m * m).sum();
    let sxy: f64 = pts.iter().map(|(m, d)| m * d).sum();
    let c2_hat = sxy / sxx;
    let n = pts.len();
    let std_error = if n > 1 {
        let rss: f64 = pts.iter().map(|(m, d)| (d - c2_hat * m).powi(2)).sum();
        (rss / (n - 1) as f64 / sxx).sqrt()
    } else {
        f64::NAN
    };
    Some(BoundaryFit {
        c2_hat,
        std_error,
        n_rows: n,
    })
}

/// Ordinary least squares `y ≈ a + b·x`; returns `(a, b, R²)`.
pub fn affine_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let b = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some((my - b * mx, b, r2))
}
