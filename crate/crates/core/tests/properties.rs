use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use proptest::prelude::*;

use overlap_lab::cli::parse;
use overlap_lab::fixedpoints::refine_fixed_point;
use overlap_lab::integrate::{strobe, strobe_jacobian, strobe_once};
use overlap_lab::io::num;
use overlap_lab::melnikov::{melnikov_profile, separatrix, SeparatrixOrbit};
use overlap_lab::models::{family_level, saddle_grid, wrap_angle, SaddleFamily, Term};
use overlap_lab::regimes::{itinerary, ItineraryOptions};
use overlap_lab::{Family, IntegratorConfig, ModelSpec, Perturbation, PhaseState};

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::Cubic), Just(Family::Torus)]
}

fn spec(family: Family, eps: f64, mu: f64) -> ModelSpec {
    ModelSpec::standard(family, eps, mu).unwrap()
}

fn cheap() -> ProptestConfig {
    ProptestConfig::with_cases(24)
}

proptest! {
    #[test]
    fn levels_coincide_only_at_reconnection(fam in family(), eps in 0.01f64..2.0) {
        let s = spec(fam, eps, 0.0);
        let gap = (family_level(&s, SaddleFamily::Lower) - family_level(&s, SaddleFamily::Upper)).abs();
        if (eps - 1.0).abs() < 1e-14 {
            prop_assert!(gap < 1e-14);
        } else {
            prop_assert!(gap > 0.0);
        }
    }

    #[test]
    fn torus_energy_is_antisymmetric_under_half_shift(eps in 0.01f64..2.0, x in -10.0f64..10.0, y in -10.0f64..10.0) {
        let s = spec(Family::Torus, eps, 0.0);
        let a = s.energy(&PhaseState::at(x, y));
        let b = s.energy(&PhaseState::at(x + PI, y + PI));
        prop_assert!((a + b).abs() < 1e-14);
    }

    #[test]
    fn cubic_energy_is_even_in_x(eps in 0.01f64..2.0, x in -10.0f64..10.0, y in -2.0f64..3.0) {
        let s = spec(Family::Cubic, eps, 0.0);
        prop_assert_eq!(s.energy(&PhaseState::at(x, y)), s.energy(&PhaseState::at(-x, y)));
    }

    #[test]
    fn field_matches_energy_differences(
        fam in family(),
        eps in 0.1f64..2.0,
        mu in 0.0f64..0.2,
        x in -4.0f64..4.0,
        y in -1.0f64..2.0,
        t in 0.0f64..TAU,
    ) {
        let s = spec(fam, eps, mu);
        let h = 1e-6;
        let e = |x: f64, y: f64| s.energy(&PhaseState::new(x, y, t));
        let hx = (e(x + h, y) - e(x - h, y)) / (2.0 * h);
        let hy = (e(x, y + h) - e(x, y - h)) / (2.0 * h);
        let (dx, dy) = s.vector_field(x, y, t);
        let scale = 1.0 + dx.abs().max(dy.abs());
        prop_assert!((dx - hy).abs() <= 1e-6 * scale, "{dx} vs {hy}");
        prop_assert!((dy + hx).abs() <= 1e-6 * scale, "{dy} vs {}", -hx);
    }

    #[test]
    fn unperturbed_saddles_are_equilibria(fam in family(), eps in 0.01f64..2.0, k in -5i32..5, kp in -5i32..5) {
        let s = spec(fam, eps, 0.0);
        for p in saddle_grid(&s, k..=k, kp..=kp) {
            let (dx, dy) = s.vector_field(p.x, p.y, 0.0);
            prop_assert!(dx.abs() < 1e-14 && dy.abs() < 1e-14, "{p:?}: {dx} {dy}");
        }
    }

    #[test]
    fn wrapped_angles_lie_in_range_and_are_congruent(a in -1e4f64..1e4) {
        let w = wrap_angle(a);
        prop_assert!((-PI..PI).contains(&w));
        let k = (a - w) / TAU;
        prop_assert!((k - k.round()).abs() < 1e-9);
    }

    #[test]
    fn seventeen_digit_output_round_trips(bits in any::<u64>()) {
        let v = f64::from_bits(bits);
        prop_assume!(v.is_finite());
        prop_assert_eq!(num(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn perturbation_text_round_trips(
        terms in prop::collection::vec((-5.0f64..5.0, -3i32..4, -3i32..4, -2i32..3, -3.0f64..3.0), 1..5)
    ) {
        let p = Perturbation { terms: terms.iter().map(|&(c, a, b, m, phi)| Term::new(c, a, b, m, phi)).collect() };
        let back = Perturbation::parse_expr(&p.to_string()).unwrap();
        let list = Perturbation::from_term_list(&p.to_term_list()).unwrap();
        for (x, y, t) in [(0.3, -0.7, 1.1), (2.0, 0.5, -3.0)] {
            let v = p.value(x, y, t);
            prop_assert!((back.value(x, y, t) - v).abs() < 1e-12);
            prop_assert!((list.value(x, y, t) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_ranges_have_the_expected_count(a in -5.0f64..5.0, n in 1usize..60, h in 0.001f64..1.0) {
        let b = a + n as f64 * h;
        let r = parse::range(&format!("{a}:{b}:{h}")).unwrap().0;
        prop_assert!(r.len() == n + 1 || r.len() == n, "{} vs {n}", r.len());
        prop_assert!(r.iter().all(|v| *v >= a && *v <= b + 1e-9));
    }
}

proptest! {
    #![proptest_config(cheap())]

    #[test]
    fn strobe_map_preserves_area(
        fam in family(),
        eps in 0.3f64..1.5,
        mu in prop_oneof![Just(0.0), Just(0.1)],
        x in -PI..PI,
        y in -0.5f64..1.5,
    ) {
        let j = strobe_jacobian(&spec(fam, eps, mu), PhaseState::at(x, y), &IntegratorConfig::default()).unwrap();
        prop_assert!((j.det() - 1.0).abs() <= 1e-8, "det {}", j.det());
    }

    #[test]
    fn forward_then_backward_strobe_returns(fam in family(), eps in 0.3f64..1.5, mu in 0.0f64..0.1, x in -PI..PI, y in -0.5f64..1.5) {
        let s = spec(fam, eps, mu);
        // Default tolerances leave up to ~4e-8 after a round trip near strongly expanding saddles.
        let cfg = IntegratorConfig { abs_tol: 1e-14, rel_tol: 1e-12, ..IntegratorConfig::default() };
        let p0 = PhaseState::at(x, y);
        let p1 = strobe_once(&s, p0, 1.0, &cfg).unwrap();
        let back = strobe_once(&s, p1, -1.0, &cfg).unwrap();
        prop_assert!(back.distance(&p0) <= 1e-9, "{}", back.distance(&p0));
    }

    #[test]
    fn integration_is_deterministic(fam in family(), x in -PI..PI, y in -0.5f64..1.5) {
        let s = spec(fam, 0.9, 0.05);
        let cfg = IntegratorConfig::default();
        let a = strobe(&s, PhaseState::at(x, y), 3, &cfg).unwrap();
        let b = strobe(&s, PhaseState::at(x, y), 3, &cfg).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert_eq!(p.x.to_bits(), q.x.to_bits());
            prop_assert_eq!(p.y.to_bits(), q.y.to_bits());
        }
    }

    #[test]
    fn continued_saddles_have_reciprocal_multipliers(
        fam in family(),
        mu in 0.0f64..0.05,
        k in -2i32..2,
        upper in any::<bool>(),
        phase in 0.0f64..TAU,
    ) {
        let s = spec(fam, 1.0, mu);
        let grid = saddle_grid(&s, k..=k, 0..=0);
        let p = grid[usize::from(upper)];
        let o = refine_fixed_point(&s, PhaseState::new(p.x, p.y, phase), &IntegratorConfig::default()).unwrap();
        prop_assert!((o.lambda_u() * o.lambda_s() - 1.0).abs() <= 1e-8);
        prop_assert!(o.residual <= 1e-10);
        prop_assert!(o.offset_from_parent() <= 10.0 * mu + 1e-12);
    }

    #[test]
    fn itineraries_are_adjacency_legal(y0 in 0.005f64..0.2, mu in 0.01f64..0.15) {
        let s = spec(Family::Torus, 1.0, mu);
        let it = itinerary(&s, PhaseState::at(0.0, y0), 150.0, &ItineraryOptions::default(), &IntegratorConfig::default()).unwrap();
        prop_assert!(it.is_legal(), "{:?} {:?}", it.counts, it.symbols());
    }
}

fn diagonal() -> &'static SeparatrixOrbit {
    static SEP: OnceLock<SeparatrixOrbit> = OnceLock::new();
    SEP.get_or_init(|| {
        separatrix(
            &spec(Family::Torus, 1.0, 0.0),
            PhaseState::at(0.0, 0.0),
            PhaseState::at(PI, -PI),
            None,
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(cheap())]

    #[test]
    fn melnikov_is_linear_in_the_perturbation(c in -10.0f64..10.0, a in -2i32..3, b in -2i32..3, m in 0i32..3) {
        prop_assume!(c.abs() > 1e-3);
        let f = Perturbation { terms: vec![Term::new(1.0, a, b, m, 0.3)] };
        let base = melnikov_profile(diagonal(), &f, 64).unwrap();
        let scaled = melnikov_profile(diagonal(), &f.scaled(c), 64).unwrap();
        let norm = base.max_abs().max(1e-300);
        for (u, v) in base.values.iter().zip(&scaled.values) {
            prop_assert!((c * u - v).abs() <= 1e-10 * c.abs() * norm, "{u} {v}");
        }
    }

    #[test]
    fn melnikov_is_periodic_and_resonant(a in -2i32..3, b in -2i32..3, m in 0i32..4, t0 in 0.0f64..TAU) {
        let f = Perturbation { terms: vec![Term::new(1.0, a, b, m, 0.0)] };
        let p = melnikov_profile(diagonal(), &f, 64).unwrap();
        prop_assert!((p.eval(t0) - p.eval(t0 + TAU)).abs() <= 1e-12 * (1.0 + p.max_abs()));
        // Discrete Fourier content outside harmonic m.
        let n = p.values.len();
        let total: f64 = p.values.iter().map(|v| v * v).sum();
        prop_assume!(total > 1e-20);
        let (mut cm, mut sm) = (0.0, 0.0);
        for (t, v) in p.t0.iter().zip(&p.values) {
            cm += v * (m as f64 * t).cos();
            sm += v * (m as f64 * t).sin();
        }
        let norm = if m == 0 { n as f64 } else { n as f64 / 2.0 };
        let (cm, sm) = (cm / norm, sm / norm);
        let resid: f64 = p
            .t0
            .iter()
            .zip(&p.values)
            .map(|(t, v)| {
                let fit = cm * (m as f64 * t).cos() + sm * (m as f64 * t).sin();
                (v - fit).powi(2)
            })
            .sum();
        prop_assert!((resid / total).sqrt() <= 1e-8, "relative residual {}", (resid / total).sqrt());
    }
}
