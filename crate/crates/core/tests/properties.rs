use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use roadevo::generator::{gen_irregular_grid, perturb, random_graph};
use roadevo::ingest::{emit_erg, parse_erg};
use roadevo::metrics::{approximation_ratio, haversine_km, threshold_ratio, EARTH_RADIUS_KM};
use roadevo::{
    label_nodes, match_graphs, verify_conformal, ConformalMap, EmbeddedGraph, Label, LonLat,
    MatchConfig, SeedIndex, Side, VebTree, VertexId,
};

fn any_graph() -> impl Strategy<Value = EmbeddedGraph> {
    prop_oneof![
        (1usize..40, 0.0f64..0.4, any::<u64>()).prop_map(|(n, p, s)| random_graph(n, p, 6, s)),
        (2usize..9, 2usize..9, 0.0f64..0.6, any::<u64>())
            .prop_map(|(r, c, irr, s)| gen_irregular_grid(r, c, irr, s).unwrap()),
    ]
}

fn labels_sorted(g: &EmbeddedGraph, k: usize) -> Vec<Label> {
    let mut l = label_nodes(g, k).labels;
    l.sort();
    l
}

/// Same embedded graph with vertices renamed by `perm` and every rotation
/// stored from a different starting neighbor.
fn relabel(g: &EmbeddedGraph, seed: u64) -> EmbeddedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.vertex_count();
    let mut perm: Vec<u32> = (0..n as u32).collect();
    perm.shuffle(&mut rng);
    let mut rotation = vec![Vec::new(); n];
    let mut coords = vec![None; n];
    for v in g.vertices() {
        let mut r: Vec<VertexId> = g
            .rotation(v)
            .iter()
            .map(|u| VertexId(perm[u.index()]))
            .collect();
        if !r.is_empty() {
            let shift = (seed as usize + v.index()) % r.len();
            r.rotate_left(shift);
        }
        rotation[perm[v.index()] as usize] = r;
        coords[perm[v.index()] as usize] = g.coord(v);
    }
    let coords = if g.has_coords() { coords } else { Vec::new() };
    EmbeddedGraph::with_coords(rotation, coords).unwrap()
}

fn lonlat() -> impl Strategy<Value = LonLat> {
    (-180.0f64..=180.0, -90.0f64..=90.0).prop_map(|(lon, lat)| LonLat::new(lon, lat))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn erg_round_trip(g in any_graph()) {
        let text = emit_erg(&g);
        let back = parse_erg(&text).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(emit_erg(&back), text);
    }

    #[test]
    fn labels_ignore_numbering_and_rotation_offsets(g in any_graph(), k in 0usize..5, seed in any::<u64>()) {
        let h = relabel(&g, seed);
        prop_assert_eq!(labels_sorted(&g, k), labels_sorted(&h, k));
    }

    #[test]
    fn label_tables_cover_every_vertex(g in any_graph(), k in 0usize..5) {
        let l = label_nodes(&g, k);
        prop_assert_eq!(l.table.vertex_total(), g.vertex_count());
        for (label, vs) in l.table.iter() {
            prop_assert!(!vs.is_empty());
            for &v in vs {
                prop_assert_eq!(label.degrees()[0] as usize, g.deg(v));
            }
        }
    }

    #[test]
    fn identity_is_conformal(g in any_graph()) {
        prop_assert_eq!(verify_conformal(&g, &g, &ConformalMap::identity(&g)), Ok(()));
    }

    #[test]
    fn veb_matches_sorted_set(max_key in 1u64..300, ops in prop::collection::vec((0u8..3, any::<u64>()), 0..400)) {
        let mut t = VebTree::new(max_key);
        let mut oracle = BTreeSet::new();
        for (op, raw) in ops {
            let key = 1 + raw % max_key;
            match op {
                0 => prop_assert_eq!(t.insert(key).unwrap(), oracle.insert(key)),
                1 => prop_assert_eq!(t.delete(key).unwrap(), oracle.remove(&key)),
                _ => prop_assert_eq!(t.contains(key).unwrap(), oracle.contains(&key)),
            }
            prop_assert_eq!(t.min(), oracle.first().copied());
            prop_assert_eq!(t.max(), oracle.last().copied());
        }
    }

    #[test]
    fn index_removal_equals_rebuild(g in any_graph(), k in 1usize..4, seed in any::<u64>(), frac in 0.0f64..1.0) {
        let (h, _) = perturb(&g, 0.0, 0.1, 0.0, seed).unwrap();
        let (l1, l2) = (label_nodes(&g, k), label_nodes(&h, k));
        let mut idx = SeedIndex::build(&l1.table, &l2.table, 1 << 40).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gone = [BTreeSet::new(), BTreeSet::new()];
        for (side, graph) in [(Side::First, &g), (Side::Second, &h)] {
            let mut vs: Vec<VertexId> = graph.vertices().collect();
            vs.shuffle(&mut rng);
            for &v in vs.iter().take((frac * vs.len() as f64) as usize) {
                if idx.is_present(side, v) {
                    idx.remove_vertex(side, v).unwrap();
                    gone[side.index()].insert(v);
                }
            }
        }
        let t1 = l1.table.filtered(|v| !gone[0].contains(&v));
        let t2 = l2.table.filtered(|v| !gone[1].contains(&v));
        let rebuilt = SeedIndex::build(&t1, &t2, 1 << 40).unwrap();
        prop_assert_eq!(idx.snapshot(), rebuilt.snapshot());
        prop_assert_eq!(idx.min_product(), rebuilt.min_product());
    }

    #[test]
    fn haversine_properties(p in lonlat(), q in lonlat()) {
        let d = haversine_km(p, q);
        prop_assert!(d >= 0.0);
        prop_assert!(d <= std::f64::consts::PI * EARTH_RADIUS_KM + 1e-9);
        prop_assert!((d - haversine_km(q, p)).abs() < 1e-9);
        prop_assert!(haversine_km(p, p).abs() < 1e-9);
    }

    #[test]
    fn threshold_ratio_is_monotone(seed in any::<u64>(), a in 0.0f64..2.0, b in 0.0f64..2.0) {
        let g = gen_irregular_grid(6, 6, 0.2, seed).unwrap();
        let (h, _) = perturb(&g, 0.1, 0.0, 0.0, seed).unwrap();
        let m = ConformalMap::new(
            g.vertices().zip(h.vertices().collect::<Vec<_>>().into_iter().rev()).collect::<Vec<_>>(),
        );
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let r_lo = threshold_ratio(&m, &g, &h, lo).unwrap().ratio;
        let r_hi = threshold_ratio(&m, &g, &h, hi).unwrap().ratio;
        prop_assert!((0.0..=1.0).contains(&r_lo));
        prop_assert!(r_lo <= r_hi);
    }

    #[test]
    fn approximation_ratio_ignores_numbering(g in any_graph(), k in 1usize..4, seed in any::<u64>()) {
        let (h, _) = perturb(&g, 0.1, 0.05, 0.05, seed).unwrap();
        let h2 = relabel(&h, seed);
        let lg = label_nodes(&g, k);
        let (a, b) = (label_nodes(&h, k), label_nodes(&h2, k));
        let n = (g.vertex_count(), h.vertex_count());
        prop_assert_eq!(
            approximation_ratio(&lg.table, &a.table, n.0, n.1).ok(),
            approximation_ratio(&lg.table, &b.table, n.0, n.1).ok()
        );
    }

    #[test]
    fn matcher_output_is_conformal_and_disjoint(g in any_graph(), k in 1usize..5, seed in any::<u64>()) {
        let (h, _) = perturb(&g, 0.1, 0.05, 0.05, seed).unwrap();
        let out = match_graphs(&g, &h, &MatchConfig { k, max_product: 1 << 40, rng_seed: seed }).unwrap();
        prop_assert_eq!(verify_conformal(&g, &h, &out.to_map()), Ok(()));
        prop_assert_eq!(out.matched() + out.unmatched1.len(), g.vertex_count());
        prop_assert_eq!(out.matched() + out.unmatched2.len(), h.vertex_count());
    }

    #[test]
    fn zero_perturbation_is_identity(g in any_graph(), seed in any::<u64>()) {
        let (h, gt) = perturb(&g, 0.0, 0.0, 0.0, seed).unwrap();
        prop_assert_eq!(&h, &g);
        prop_assert_eq!(gt.survivors(), g.vertex_count());
    }
}
