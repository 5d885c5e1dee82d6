//! Evaluation quantities: geographic pair distances, label discrimination
//! and threshold ratios.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{ConformalMap, EmbeddedGraph, LonLat};
use crate::labeling::MasterTable;

/// Mean Earth radius (IUGG).
pub const EARTH_RADIUS_KM: f64 = 6371.0088;
pub const KM_PER_MILE: f64 = 1.609344;
pub const DEFAULT_THRESHOLD_MILES: f64 = 5.0;
pub const DEFAULT_BUCKET_KM: f64 = 0.5;

/// Great-circle distance by the haversine formula.
pub fn haversine_km(p: LonLat, q: LonLat) -> f64 {
    let (phi1, phi2) = (p.lat.to_radians(), q.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (q.lon - p.lon).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

/// Haversine between two optional points; `None` when either is missing.
pub fn distance_km(p: Option<LonLat>, q: Option<LonLat>) -> Option<f64> {
    Some(haversine_km(p?, q?))
}

/// Cross-graph same-label pair count divided by the smaller vertex count.
pub fn approximation_ratio(
    mt1: &MasterTable,
    mt2: &MasterTable,
    n1_total: usize,
    n2_total: usize,
) -> Result<f64> {
    let b = n1_total.min(n2_total);
    if b == 0 {
        return Err(Error::Undefined("approximation ratio of an empty graph"));
    }
    let a: u64 = mt1
        .iter()
        .map(|(l, v1)| v1.len() as u64 * mt2.count(l) as u64)
        .sum();
    Ok(a as f64 / b as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdReport {
    pub ratio: f64,
    pub within: usize,
    pub measured: usize,
    /// Pairs skipped because a coordinate was missing.
    pub excluded: usize,
}

/// Distances of matched pairs that have coordinates on both sides, and the
/// number of pairs that did not.
pub fn pair_distances(
    m: &ConformalMap,
    g1: &EmbeddedGraph,
    g2: &EmbeddedGraph,
) -> (Vec<f64>, usize) {
    let all: Vec<Option<f64>> = m
        .pairs
        .par_iter()
        .map(|&(a, b)| distance_km(g1.coord(a), g2.coord(b)))
        .collect();
    let excluded = all.iter().filter(|d| d.is_none()).count();
    (all.into_iter().flatten().collect(), excluded)
}

/// Fraction of matched pairs within `threshold_miles` of each other.
pub fn threshold_ratio(
    m: &ConformalMap,
    g1: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    threshold_miles: f64,
) -> Result<ThresholdReport> {
    let (d, excluded) = pair_distances(m, g1, g2);
    threshold_of(&d, excluded, threshold_miles)
}

fn threshold_of(d: &[f64], excluded: usize, threshold_miles: f64) -> Result<ThresholdReport> {
    if d.is_empty() {
        return Err(Error::Undefined("threshold ratio without measurable pairs"));
    }
    let limit = threshold_miles * KM_PER_MILE;
    let within = d.iter().filter(|&&x| x <= limit).count();
    Ok(ThresholdReport {
        ratio: within as f64 / d.len() as f64,
        within,
        measured: d.len(),
        excluded,
    })
}

/// Distances between every cross-graph pair of vertices sharing a label,
/// bucketed into `bucket_km` wide bins. Returns `(bucket lower edge, count)`
/// for every bin from 0 up to the last non-empty one.
pub fn pair_distance_histogram(
    mt1: &MasterTable,
    mt2: &MasterTable,
    g1: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    bucket_km: f64,
) -> Result<Vec<(f64, u64)>> {
    if bucket_km.is_nan() || bucket_km <= 0.0 {
        return Err(Error::InvalidArgument(
            "bucket width must be positive".into(),
        ));
    }
    let groups: Vec<(&[_], &[_])> = mt1
        .iter()
        .map(|(l, v1)| (v1, mt2.get(l)))
        .filter(|(_, v2)| !v2.is_empty())
        .collect();
    let bins: Vec<usize> = groups
        .par_iter()
        .flat_map_iter(|(v1, v2)| {
            v1.iter().flat_map(move |&a| {
                v2.iter()
                    .filter_map(move |&b| distance_km(g1.coord(a), g2.coord(b)))
            })
        })
        .map(|d| (d / bucket_km).floor() as usize)
        .collect();
    let mut counts = vec![0u64; bins.iter().max().map_or(0, |m| m + 1)];
    for b in bins {
        counts[b] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (i as f64 * bucket_km, c))
        .collect())
}

pub fn histogram_csv(rows: &[(f64, u64)]) -> String {
    let mut out = String::from("bucket_km,count\n");
    for (b, c) in rows {
        let _ = writeln!(out, "{b},{c}");
    }
    out
}

/// Summary of one matching run against coordinates and labels.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub pair_distances: Vec<f64>,
    pub excluded_pairs: usize,
    pub approximation_ratio: Option<f64>,
    pub threshold_ratio: Option<f64>,
    pub threshold_miles: f64,
    pub seed_seconds: Option<f64>,
    pub match_seconds: Option<f64>,
}

impl EvalReport {
    pub fn new(
        m: &ConformalMap,
        g1: &EmbeddedGraph,
        g2: &EmbeddedGraph,
        tables: Option<(&MasterTable, &MasterTable)>,
        threshold_miles: f64,
    ) -> Self {
        let (pair_distances, excluded_pairs) = pair_distances(m, g1, g2);
        let threshold_ratio = threshold_of(&pair_distances, excluded_pairs, threshold_miles)
            .ok()
            .map(|r| r.ratio);
        let approximation_ratio = tables.and_then(|(mt1, mt2)| {
            approximation_ratio(mt1, mt2, g1.vertex_count(), g2.vertex_count()).ok()
        });
        EvalReport {
            pair_distances,
            excluded_pairs,
            approximation_ratio,
            threshold_ratio,
            threshold_miles,
            seed_seconds: None,
            match_seconds: None,
        }
    }

    pub fn to_text(&self) -> String {
        let opt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"));
        let mean = if self.pair_distances.is_empty() {
            None
        } else {
            Some(self.pair_distances.iter().sum::<f64>() / self.pair_distances.len() as f64)
        };
        let max = self.pair_distances.iter().copied().reduce(f64::max);
        let mut out = String::new();
        let _ = writeln!(out, "measured_pairs: {}", self.pair_distances.len());
        let _ = writeln!(out, "excluded_pairs: {}", self.excluded_pairs);
        let _ = writeln!(out, "mean_distance_km: {}", opt(mean));
        let _ = writeln!(out, "max_distance_km: {}", opt(max));
        let _ = writeln!(
            out,
            "approximation_ratio: {}",
            opt(self.approximation_ratio)
        );
        let _ = writeln!(
            out,
            "threshold_ratio@{}mi: {}",
            self.threshold_miles,
            opt(self.threshold_ratio)
        );
        if let Some(s) = self.seed_seconds {
            let _ = writeln!(out, "seed_time: {s:.6}");
        }
        if let Some(s) = self.match_seconds {
            let _ = writeln!(out, "match_time: {s:.6}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::rot;
    use crate::graph::VertexId;
    use crate::labeling::label_nodes;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn reference_distances() {
        let o = LonLat::new(0.0, 0.0);
        assert_eq!(haversine_km(o, o), 0.0);
        let quarter = std::f64::consts::FRAC_PI_2 * EARTH_RADIUS_KM;
        assert!(close(
            haversine_km(o, LonLat::new(90.0, 0.0)),
            quarter,
            1e-6
        ));
        assert!(close(
            haversine_km(o, LonLat::new(180.0, 0.0)),
            2.0 * quarter,
            1e-6
        ));
        assert!(close(
            haversine_km(LonLat::new(10.0, 90.0), LonLat::new(-170.0, -90.0)),
            2.0 * quarter,
            1e-6
        ));
        // published reference values, within half a percent
        assert!(close(quarter, 10007.54, 10007.54 * 0.005));
        assert!(close(2.0 * quarter, 20015.09, 20015.09 * 0.005));
        assert!(close(5.0 * KM_PER_MILE, 8.04672, 1e-12));
    }

    fn line_with(coords: &[(f64, f64)]) -> EmbeddedGraph {
        let n = coords.len() as u32;
        let lists: Vec<Vec<u32>> = (0..n)
            .map(|v| {
                let mut l = Vec::new();
                if v > 0 {
                    l.push(v - 1);
                }
                if v + 1 < n {
                    l.push(v + 1);
                }
                l
            })
            .collect();
        let refs: Vec<&[u32]> = lists.iter().map(Vec::as_slice).collect();
        EmbeddedGraph::with_coords(
            rot(&refs),
            coords
                .iter()
                .map(|&(x, y)| Some(LonLat::new(x, y)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn threshold_arithmetic() {
        // eleven coincident points, then move the last one ~10 km east
        let pts: Vec<(f64, f64)> = (0..11).map(|i| (i as f64 * 0.01, 0.0)).collect();
        let g1 = line_with(&pts);
        let mut moved = pts.clone();
        moved[10].0 += 10.0 / 111.195;
        let g2 = line_with(&moved);
        let m = ConformalMap::identity(&g1);
        let r = threshold_ratio(&m, &g1, &g2, 5.0).unwrap();
        assert_eq!((r.within, r.measured, r.excluded), (10, 11, 0));
        assert!(close(r.ratio, 10.0 / 11.0, 1e-12));
        assert_eq!(threshold_ratio(&m, &g1, &g1, 5.0).unwrap().ratio, 1.0);
    }

    #[test]
    fn missing_coordinates_are_excluded() {
        let g1 = line_with(&[(0.0, 0.0), (0.01, 0.0)]);
        let g2 =
            EmbeddedGraph::with_coords(rot(&[&[1], &[0]]), vec![Some(LonLat::new(0.0, 0.0)), None])
                .unwrap();
        let r = threshold_ratio(&ConformalMap::identity(&g1), &g1, &g2, 5.0).unwrap();
        assert_eq!((r.measured, r.excluded), (1, 1));
        let empty = ConformalMap::new(vec![(VertexId(1), VertexId(1))]);
        assert!(matches!(
            threshold_ratio(&empty, &g1, &g2, 5.0),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn approximation_ratio_cases() {
        let g = crate::generator::gen_irregular_grid(6, 6, 0.3, 2).unwrap();
        let l = label_nodes(&g, 6);
        if l.table.len() == g.vertex_count() {
            assert_eq!(
                approximation_ratio(&l.table, &l.table, 36, 36).unwrap(),
                1.0
            );
        }
        let l1 = label_nodes(&crate::graph::fixtures::path(3), 1);
        let cycle = EmbeddedGraph::new(rot(&[&[1, 2], &[2, 0], &[0, 1]])).unwrap();
        let l2 = label_nodes(&cycle, 1);
        assert_eq!(
            approximation_ratio(&l1.table, &l2.table, 3, 3).unwrap(),
            0.0
        );
        assert!(approximation_ratio(&l1.table, &l2.table, 0, 3).is_err());
        // path(3) self: labels (1,2) x2 and (2,1,1) x1 -> 4 + 1 = 5 pairs over 3
        assert!(close(
            approximation_ratio(&l1.table, &l1.table, 3, 3).unwrap(),
            5.0 / 3.0,
            1e-12
        ));
    }

    #[test]
    fn histogram_identity_is_zero_bucket() {
        let g = crate::generator::gen_irregular_grid(5, 5, 0.4, 1).unwrap();
        let l = label_nodes(&g, 8);
        let rows = pair_distance_histogram(&l.table, &l.table, &g, &g, DEFAULT_BUCKET_KM).unwrap();
        let total: u64 = rows.iter().map(|r| r.1).sum();
        let pairs: usize = l.table.iter().map(|(_, v)| v.len() * v.len()).sum();
        assert_eq!(total as usize, pairs);
        assert!(rows[0].1 >= 25);
        assert!(histogram_csv(&rows).starts_with("bucket_km,count\n0,"));
    }
}
