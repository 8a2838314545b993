use henonlab::dist::{MapDistribution, SequenceSeed};
use henonlab::escape::{classify_orbit, green_plus, GreenConstants};
use henonlab::map::{condition_a_radius, det2, in_v_plus};
use henonlab::minsets::{discover_minimal_sets, estimate_tl, DiscoveryParams, MinSetId};
use henonlab::sequence::{Explicit, Sampled, Shifted};
use henonlab::{C2Point, Complex64, HenonMap, PolyC};
use proptest::prelude::*;

fn complex(range: f64) -> impl Strategy<Value = Complex64> {
    (-range..range, -range..range).prop_map(|(a, b)| Complex64::new(a, b))
}

fn point(range: f64) -> impl Strategy<Value = C2Point> {
    (complex(range), complex(range)).prop_map(|(x, y)| C2Point::new(x, y))
}

fn henon_map() -> impl Strategy<Value = HenonMap> {
    (2usize..=4, complex(1.0), 0.05f64..2.0, 0.0..std::f64::consts::TAU, 0.2f64..2.0, prop::collection::vec(complex(1.0), 4))
        .prop_map(|(d, alpha, dr, dt, lead, rest)| {
            let mut coeffs = vec![Complex64::new(lead, 0.0)];
            coeffs.extend(rest.into_iter().take(d));
            HenonMap::new(alpha, Complex64::from_polar(dr, dt), PolyC::new(&coeffs).unwrap()).unwrap()
        })
}

fn quad(c: f64) -> HenonMap {
    HenonMap::real(0.0, 0.1, &[1.0, 0.0, c]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn inverse_roundtrip(f in henon_map(), z in point(3.0)) {
        let back = f.apply_inverse(f.apply(z));
        prop_assert!(back.distance(&z) <= 1e-9 * (1.0 + z.norm()));
        let fwd = f.apply(f.apply_inverse(z));
        prop_assert!(fwd.distance(&z) <= 1e-9 * (1.0 + z.norm()));
    }

    #[test]
    fn jacobian_determinant_is_delta(f in henon_map(), z in point(3.0)) {
        let d = det2(&f.jacobian(z));
        prop_assert!((d - f.delta()).norm() <= 1e-12 * (1.0 + f.delta().norm()));
    }

    #[test]
    fn swap_conjugates_inverse(f in henon_map(), z in point(3.0)) {
        let g = f.inverse_as_plus();
        let lhs = g.apply(z.swap()).swap();
        prop_assert!(lhs.distance(&f.apply_inverse(z)) <= 1e-10 * (1.0 + lhs.norm()));
        prop_assert!((g.delta() * f.delta() - 1.0).norm() < 1e-12);
    }

    #[test]
    fn condition_a_forward_clause(f in henon_map(), s in 1.0f64..4.0, t in 0.0f64..1.0, a in 0.0..std::f64::consts::TAU, b in 0.0..std::f64::consts::TAU) {
        let p = condition_a_radius(&[f], 1.0).unwrap();
        let ay = p.r * s;
        let z = C2Point::new(Complex64::from_polar(ay * t, a), Complex64::from_polar(ay, b));
        let w = f.apply(z);
        prop_assert!(in_v_plus(w, p.r));
        prop_assert!(w.y.norm() > p.rho * z.y.norm());
    }

    #[test]
    fn condition_a_backward_clause(f in henon_map(), s in 1.0f64..4.0, t in 0.0f64..1.0, a in 0.0..std::f64::consts::TAU, b in 0.0..std::f64::consts::TAU) {
        let p = condition_a_radius(&[f], 1.0).unwrap();
        let ax = p.r * s;
        let z = C2Point::new(Complex64::from_polar(ax, a), Complex64::from_polar(ax * t, b));
        let w = f.apply_inverse(z);
        prop_assert!(w.x.norm() > p.r.max(w.y.norm()));
        prop_assert!(w.x.norm() > p.rho * z.x.norm());
    }

    #[test]
    fn sampling_is_order_free(master in any::<u64>(), stream in any::<u64>(), i in 0u64..1000) {
        let dist = MapDistribution::ball(quad(0.0), 0.1).unwrap();
        let s = SequenceSeed::new(master, stream);
        let direct = dist.sample_map(s, i);
        let seq = dist.sample_sequence(s, i as usize + 1);
        prop_assert_eq!(direct, seq[i as usize]);
    }

    #[test]
    fn escape_is_monotone_in_cap(z in point(1.5), master in 0u64..1000) {
        let dist = MapDistribution::ball(quad(0.0), 0.05).unwrap();
        let p = dist.filtration(1.0).unwrap();
        let seq = Sampled::new(&dist, SequenceSeed::new(master, 0));
        let short = classify_orbit(&seq, z, &p, 50).unwrap();
        let long = classify_orbit(&seq, z, &p, 100).unwrap();
        if let Some(n) = short.escaped_at() {
            prop_assert_eq!(long.escaped_at(), Some(n));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// `𝒢_{σγ}(γ_0 z) = d_0 𝒢_γ(z)` along explicit sequences.
    #[test]
    fn green_functional_equation(maps in prop::collection::vec(henon_map(), 1..4), z in point(2.0)) {
        let p = condition_a_radius(&maps, 1.0).unwrap();
        let consts = GreenConstants::for_maps(&maps, &p).unwrap();
        let seq = Explicit(maps.clone());
        let z = C2Point::new(z.x, z.y + Complex64::new(2.0 * p.r, 0.0));
        let g = green_plus(&seq, z, &p, &consts, 1e-9, 200).unwrap();
        let shifted = Shifted { inner: &seq, by: 1 };
        let g1 = green_plus(&shifted, maps[0].apply(z), &p, &consts, 1e-9, 200).unwrap();
        let d = maps[0].degree() as f64;
        prop_assert!((g1.value - d * g.value).abs() <= 2e-9 * (1.0 + d) + g1.error_bound + d * g.error_bound);
    }
}

fn two_map_fixture() -> (MapDistribution, Vec<henonlab::minsets::MinimalSetDescriptor>, henonlab::FiltrationParams) {
    let dist = MapDistribution::finite(vec![quad(0.0), quad(0.2)], vec![0.5, 0.5]).unwrap();
    let p = dist.filtration(1.0).unwrap();
    let grid: Vec<C2Point> = (0..5).map(|k| C2Point::from_reals(0.0, 0.0, 0.1 * k as f64 - 0.2, 0.0)).collect();
    let found = discover_minimal_sets(&dist, &p, &grid, &DiscoveryParams::default(), SequenceSeed::new(3, 0)).unwrap();
    (dist, found.descriptors, p)
}

#[test]
fn basin_partition_sums_to_one() {
    let (dist, ms, p) = two_map_fixture();
    for y in [0.0, 0.5, 0.9, 0.95, 1.2] {
        let est = estimate_tl(&dist, &ms, &p, C2Point::from_reals(0.0, 0.0, y, 0.0), 400, 2000, SequenceSeed::new(4, 0)).unwrap();
        let total: usize = est.counts.values().sum::<usize>() + est.unresolved_count;
        assert_eq!(total, est.samples);
        let s: f64 = est.probabilities.values().sum::<f64>() + est.unresolved;
        assert!((s - 1.0).abs() < 1e-12);
    }
}

/// `T_L(z) = Σ_j w_j T_L(h_j z)`, the harmonic (martingale) property.
#[test]
fn basin_probability_is_harmonic() {
    let (dist, ms, p) = two_map_fixture();
    let l = MinSetId::Finite(0);
    let samples = 4000;
    for y in [0.9, 0.95, 1.0] {
        let z = C2Point::from_reals(0.0, 0.0, y, 0.0);
        let here = estimate_tl(&dist, &ms, &p, z, samples, 2000, SequenceSeed::new(10, 0)).unwrap();
        let fin = dist.as_finite().unwrap();
        let mut mean = 0.0;
        let mut var = here.std_error(l).powi(2);
        for (k, (h, w)) in fin.maps().iter().zip(fin.weights()).enumerate() {
            let e = estimate_tl(&dist, &ms, &p, h.apply(z), samples, 2000, SequenceSeed::new(11, k as u64)).unwrap();
            mean += w * e.probability(l);
            var += (w * e.std_error(l)).powi(2);
        }
        let diff = (here.probability(l) - mean).abs();
        assert!(diff <= 4.0 * var.sqrt() + 1e-9, "y={y}: {} vs {mean} (σ={})", here.probability(l), var.sqrt());
    }
}

#[test]
fn basin_probability_constant_on_capture_neighbourhood() {
    let (dist, ms, p) = two_map_fixture();
    let l = ms.iter().find(|d| d.is_finite()).unwrap();
    for k in 0..4 {
        let c = l.hulls[0].center;
        let off = l.capture_radius * 0.5 * (k as f64 / 4.0);
        let z = C2Point::new(c.x, c.y + Complex64::new(off, 0.0));
        let est = estimate_tl(&dist, &ms, &p, z, 200, 2000, SequenceSeed::new(12, k)).unwrap();
        assert_eq!(est.probability(l.id), 1.0);
    }
}

#[test]
fn unresolved_mass_shrinks_with_cap() {
    let (dist, ms, p) = two_map_fixture();
    let z = C2Point::from_reals(0.0, 0.0, 0.95, 0.0);
    let mut last = f64::INFINITY;
    for cap in [10, 20, 40, 80, 160] {
        let est = estimate_tl(&dist, &ms, &p, z, 500, cap, SequenceSeed::new(13, 0)).unwrap();
        assert!(est.unresolved <= last, "cap {cap}: {} > {last}", est.unresolved);
        last = est.unresolved;
    }
    assert!(last < 0.01);
}
