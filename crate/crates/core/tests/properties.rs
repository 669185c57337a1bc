//! Monotonicity and consistency properties, mostly on random tiny maps.

mod common;

use proptest::prelude::*;

use hyperfractal::analytics::expected_relay_count;
use hyperfractal::experiments::generate_map;
use hyperfractal::graph::{build_graph, CommGraph, EnergyModel, EnergyModelKind};
use hyperfractal::map::{derive_p_from_df, derive_pr_from_dr, df_from_p, dr_from_pr, MapParams};
use hyperfractal::routing::{
    energy_profile, giant_component, min_energy_within_hops, min_hops_power_capped,
    route_through_levels, ComponentSpec, Route,
};
use hyperfractal::rng::substream;

fn graph(seed: u64) -> CommGraph {
    common::random_small_graph(&mut substream(seed, 0x70, 0), 12)
}

/// Two distinct entities picked from `among`.
fn pair(among: &[usize], a: usize, b: usize) -> Option<(usize, usize)> {
    let n = among.len();
    (n >= 2).then(|| (among[a % n], among[(a % n + 1 + b % (n - 1)) % n]))
}

fn any_pair(g: &CommGraph, a: usize, b: usize) -> (usize, usize) {
    let all: Vec<usize> = (0..g.len()).collect();
    pair(&all, a, b).unwrap()
}

fn check_route(g: &CommGraph, r: &Route, s: usize, t: usize) -> Result<(), TestCaseError> {
    prop_assert_eq!(r.source(), s);
    prop_assert_eq!(r.target(), t);
    prop_assert_eq!(r.hops, r.vertices.len() - 1);
    let powers = common::hop_powers(g, &r.vertices);
    prop_assert_eq!(r.accumulated_energy, common::fold_energy(&powers));
    prop_assert_eq!(r.max_power, common::max_power(&powers));
    prop_assert!(r.max_power <= r.accumulated_energy);
    prop_assert!(r.relay_count <= r.hops.saturating_sub(1));
    prop_assert_eq!(r, &Route::from_vertices(g, r.vertices.clone()).unwrap());
    Ok(())
}

fn subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.binary_search(x).is_ok())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn energy_within_k_never_increases(seed in any::<u64>(), a in any::<usize>(), b in any::<usize>()) {
        let g = graph(seed);
        let (s, t) = any_pair(&g, a, b);
        let profile = energy_profile(&g, s, t, 8).unwrap();
        for k in 0..8 {
            if let (Some(e), Some(x)) = (profile.upto[k], profile.exact[k]) {
                prop_assert!(e <= x);
            }
            if k > 0 {
                match (profile.upto[k - 1], profile.upto[k]) {
                    (Some(before), Some(now)) => prop_assert!(now <= before),
                    (Some(_), None) => prop_assert!(false, "feasibility lost at k = {}", k + 1),
                    _ => {}
                }
            }
            if let Some(r) = min_energy_within_hops(&g, s, t, k + 1).unwrap() {
                check_route(&g, &r, s, t)?;
                prop_assert!(r.hops <= k + 1);
                prop_assert_eq!(Some(r.accumulated_energy), profile.upto[k]);
            }
        }
    }

    #[test]
    fn looser_power_cap_never_needs_more_hops(seed in any::<u64>(), a in any::<usize>(), b in any::<usize>()) {
        let g = graph(seed);
        let (s, t) = any_pair(&g, a, b);
        let p_max = g.model().p_max;
        let mut previous: Option<usize> = None;
        for j in (0..12).rev() {
            let cap = p_max * 10f64.powf(-0.5 * j as f64);
            let r = min_hops_power_capped(&g, s, t, cap).unwrap();
            if let Some(r) = &r {
                check_route(&g, r, s, t)?;
                prop_assert!(r.max_power <= cap);
                if let Some(h) = previous {
                    prop_assert!(r.hops <= h);
                }
            } else {
                prop_assert!(previous.is_none(), "feasibility lost at cap {}", cap);
            }
            previous = r.map(|r| r.hops);
        }
    }

    #[test]
    fn components_grow_with_budget_and_relays(seed in any::<u64>(), lo in 0.01f64..2.0, extra in 0.0f64..2.0) {
        let g = graph(seed);
        let p_max = g.model().p_max;
        let (small, large) = (lo * p_max, (lo + extra) * p_max);
        type Spec = fn(f64, Option<usize>) -> ComponentSpec;
        let specs: [Spec; 2] = [
            |b, k| k.map_or(ComponentSpec::energy(b), |k| ComponentSpec::energy_with_relays(b, k)),
            |b, k| k.map_or(ComponentSpec::max_power(b), |k| ComponentSpec::max_power_with_relays(b, k)),
        ];
        for spec in specs {
            let unlimited = giant_component(&g, spec(large, None)).unwrap().members;
            let smaller = giant_component(&g, spec(small, None)).unwrap().members;
            prop_assert!(subset(&smaller, &unlimited));
            let mut previous: Vec<usize> = Vec::new();
            for k in 0..4 {
                let members = giant_component(&g, spec(large, Some(k))).unwrap().members;
                prop_assert!(subset(&previous, &members));
                prop_assert!(subset(&members, &unlimited));
                previous = members;
            }
            prop_assert!(unlimited.iter().all(|&v| v < g.node_count()));
        }
    }

    #[test]
    fn diverted_routes_cost_at_least_the_unconstrained_optimum(
        seed in any::<u64>(),
        a in any::<usize>(),
        b in any::<usize>(),
        half in prop::collection::vec(1u32..3, 0..3),
    ) {
        let params = MapParams::from_dimensions(300, 3.0, 300.0, 2.3).unwrap();
        let (nodes, relays) = generate_map(&params, seed);
        let g = build_graph(&nodes, &relays, EnergyModel::new(EnergyModelKind::NominalPerStreet, 2.0, 1000.0).unwrap());
        let Some((s, t)) = pair(&g.central_cross_entities(), a, b) else {
            return Ok(());
        };
        // out and back through mirrored levels, like the diverted patterns
        let levels: Vec<u32> = half.iter().chain(half.iter().rev()).copied().collect();
        if let Some(r) = route_through_levels(&g, s, t, &levels).unwrap() {
            check_route(&g, &r, s, t)?;
            let best = min_energy_within_hops(&g, s, t, r.hops).unwrap().expect("a route exists");
            prop_assert!(best.accumulated_energy <= r.accumulated_energy);
        }
    }

    #[test]
    fn relay_count_grows_with_mass(d_r in 2.0f64..8.0, rho in 0.1f64..5000.0, factor in 1.001f64..10.0) {
        let p_r = derive_pr_from_dr(d_r).unwrap();
        let low = expected_relay_count(rho, p_r, 60).unwrap();
        let high = expected_relay_count(rho * factor, p_r, 60).unwrap();
        prop_assert!(high.value > low.value);
        prop_assert!(low.value <= rho);
        prop_assert!(low.tail_bound >= 0.0);
    }

    #[test]
    fn dimensions_round_trip(d in 2.0f64..12.0) {
        let p = derive_p_from_df(d).unwrap();
        prop_assert!((0.0..1.0).contains(&p));
        prop_assert!((df_from_p(p).unwrap() - d).abs() < 1e-9);
        let p_r = derive_pr_from_dr(d).unwrap();
        prop_assert!((0.0..1.0).contains(&p_r));
        prop_assert!((dr_from_pr(p_r).unwrap() - d).abs() < 1e-9);
    }
}
