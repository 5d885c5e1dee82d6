//! Exhaustive reference algorithms for toy-sized graphs.
//!
//! These are deliberately written without any of the matcher's machinery
//! (no seed index, no journal, hash maps instead of flat arrays) so they can
//! serve as independent checks.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::{is_cyclically_sorted, ConformalMap, EmbeddedGraph, VertexId};

pub const DEFAULT_SIZE_CAP: usize = 10;

fn guard(g1: &EmbeddedGraph, g2: &EmbeddedGraph, cap: usize) -> Result<()> {
    let n = g1.vertex_count().max(g2.vertex_count());
    if n > cap {
        return Err(Error::SizeCap {
            what: format!("graph with {n} vertices"),
            cap,
        });
    }
    Ok(())
}

struct Search<'a> {
    g1: &'a EmbeddedGraph,
    g2: &'a EmbeddedGraph,
    order: Vec<VertexId>,
    fwd: Vec<Option<VertexId>>,
    inv: Vec<Option<VertexId>>,
    size: usize,
    best: usize,
    witness: Vec<(VertexId, VertexId)>,
    // when set, keep every map of maximum size instead of the first one
    all: Option<Vec<Vec<(VertexId, VertexId)>>>,
}

impl Search<'_> {
    /// Cyclic order of `x`'s assigned neighbors is preserved around `f(x)`.
    fn order_ok(&self, x: VertexId) -> bool {
        let Some(fx) = self.fwd[x.index()] else {
            return true;
        };
        let rot2 = self.g2.rotation(fx);
        let positions: Vec<usize> = self
            .g1
            .rotation(x)
            .iter()
            .filter_map(|u| self.fwd[u.index()])
            .map(|fu| {
                rot2.iter()
                    .position(|&y| y == fu)
                    .expect("edges checked first")
            })
            .collect();
        is_cyclically_sorted(&positions)
    }

    fn feasible(&mut self, v: VertexId, w: VertexId) -> bool {
        if self.g1.deg(v) != self.g2.deg(w) || self.inv[w.index()].is_some() {
            return false;
        }
        for u in self.g1.vertices() {
            if let Some(fu) = self.fwd[u.index()] {
                if self.g1.has_edge(v, u) != self.g2.has_edge(w, fu) {
                    return false;
                }
            }
        }
        self.fwd[v.index()] = Some(w);
        let ok = self.order_ok(v) && self.g1.rotation(v).iter().all(|&u| self.order_ok(u));
        self.fwd[v.index()] = None;
        ok
    }

    /// Upper bound on pairs still attainable from position `depth` onward.
    fn potential(&self, depth: usize) -> usize {
        let mut rem1 = [0usize; 256];
        let mut free2 = [0usize; 256];
        for &v in &self.order[depth..] {
            rem1[self.g1.deg(v)] += 1;
        }
        for w in self.g2.vertices() {
            if self.inv[w.index()].is_none() {
                free2[self.g2.deg(w)] += 1;
            }
        }
        rem1.iter().zip(free2.iter()).map(|(a, b)| *a.min(b)).sum()
    }

    fn current(&self) -> Vec<(VertexId, VertexId)> {
        self.fwd
            .iter()
            .enumerate()
            .filter_map(|(v, w)| w.map(|w| (VertexId::from(v), w)))
            .collect()
    }

    fn go(&mut self, depth: usize) {
        if self.size > self.best {
            self.best = self.size;
            self.witness = self.current();
            if let Some(all) = &mut self.all {
                all.clear();
            }
        }
        if depth == self.order.len() {
            if self.size == self.best {
                if let Some(mut all) = self.all.take() {
                    all.push(self.current());
                    self.all = Some(all);
                }
            }
            return;
        }
        let reach = self.size + self.potential(depth);
        if reach < self.best || (reach == self.best && self.all.is_none()) {
            return;
        }
        let v = self.order[depth];
        for w in self.g2.vertices() {
            if self.feasible(v, w) {
                self.fwd[v.index()] = Some(w);
                self.inv[w.index()] = Some(v);
                self.size += 1;
                self.go(depth + 1);
                self.size -= 1;
                self.inv[w.index()] = None;
                self.fwd[v.index()] = None;
            }
        }
        self.go(depth + 1);
    }
}

/// Exact maximum conformal partial map between two toy graphs, with one
/// witness. Refuses graphs above `size_cap` vertices.
pub fn brute_force_max_conformal(
    g1: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    size_cap: usize,
) -> Result<(usize, ConformalMap)> {
    let s = search(g1, g2, size_cap, false)?;
    Ok((s.best, ConformalMap::new(s.witness)))
}

/// Every conformal partial map of maximum cardinality. A pair whose maximum
/// is attained by exactly one map admits no alternative assignment of any
/// matched vertex, which is how non-degenerate pairs are recognized.
pub fn all_maximum_conformal(
    g1: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    size_cap: usize,
) -> Result<(usize, Vec<ConformalMap>)> {
    let s = search(g1, g2, size_cap, true)?;
    let maps = s
        .all
        .unwrap_or_default()
        .into_iter()
        .map(ConformalMap::new)
        .collect();
    Ok((s.best, maps))
}

fn search<'a>(
    g1: &'a EmbeddedGraph,
    g2: &'a EmbeddedGraph,
    size_cap: usize,
    keep_all: bool,
) -> Result<Search<'a>> {
    guard(g1, g2, size_cap)?;
    let mut order: Vec<VertexId> = g1.vertices().collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(g1.deg(v)), v));
    let mut s = Search {
        g1,
        g2,
        order,
        fwd: vec![None; g1.vertex_count()],
        inv: vec![None; g2.vertex_count()],
        size: 0,
        best: 0,
        witness: Vec::new(),
        all: keep_all.then(Vec::new),
    };
    s.go(0);
    Ok(s)
}

fn min_rotations(g: &EmbeddedGraph, v: VertexId) -> Vec<usize> {
    let rot = g.rotation(v);
    let d = rot.len();
    if d == 0 {
        return vec![0];
    }
    let mut seqs: Vec<(Vec<usize>, usize)> = (0..d)
        .map(|o| ((0..d).map(|j| g.deg(rot[(o + j) % d])).collect(), o))
        .collect();
    seqs.sort();
    let min = seqs[0].0.clone();
    seqs.into_iter()
        .filter(|(s, _)| *s == min)
        .map(|(_, o)| o)
        .collect()
}

struct Flood<'a> {
    g1: &'a EmbeddedGraph,
    g2: &'a EmbeddedGraph,
    // v1 -> (v2, offset) with rotation(v1)[i] ~ rotation(v2)[(i + offset) % d]
    fwd: HashMap<VertexId, (VertexId, usize)>,
    inv: HashMap<VertexId, VertexId>,
}

#[derive(Clone, Copy)]
struct Step {
    a1: VertexId,
    a2: VertexId,
    offset: usize,
    // first rotation index on side 1 to pair, and how many to pair
    start: usize,
    count: usize,
}

impl Flood<'_> {
    fn consistent(&self, a1: VertexId, a2: VertexId, offset: usize) -> bool {
        let r1 = self.g1.rotation(a1);
        let r2 = self.g2.rotation(a2);
        let d = r1.len();
        (0..d).all(|i| {
            let x = r1[i];
            let y = r2[(i + offset) % d];
            match (self.fwd.get(&x), self.inv.get(&y)) {
                (None, None) => true,
                (Some(&(fx, ox)), _) if fx == y => {
                    let rx = self.g1.rotation(x);
                    let j = rx.iter().position(|&z| z == a1).unwrap();
                    self.g2.rotation(y)[(j + ox) % rx.len()] == a2
                }
                _ => false,
            }
        })
    }

    fn admit(&mut self, s: Step) -> Option<Vec<Step>> {
        let d = self.g1.deg(s.a1);
        if self.fwd.contains_key(&s.a1)
            || self.inv.contains_key(&s.a2)
            || d != self.g2.deg(s.a2)
            || !self.consistent(s.a1, s.a2, s.offset)
        {
            return None;
        }
        self.fwd.insert(s.a1, (s.a2, s.offset));
        self.inv.insert(s.a2, s.a1);
        let r1 = self.g1.rotation(s.a1);
        let r2 = self.g2.rotation(s.a2);
        let children = (0..s.count)
            .map(|j| {
                let i = (s.start + j) % d;
                let (b1, b2) = (r1[i], r2[(i + s.offset) % d]);
                let (d1, d2) = (self.g1.deg(b1), self.g2.deg(b2));
                let p1 = self
                    .g1
                    .rotation(b1)
                    .iter()
                    .position(|&z| z == s.a1)
                    .unwrap();
                let p2 = self
                    .g2
                    .rotation(b2)
                    .iter()
                    .position(|&z| z == s.a2)
                    .unwrap();
                Step {
                    a1: b1,
                    a2: b2,
                    offset: if d1 == d2 { (p2 + d1 - p1) % d1 } else { 0 },
                    start: p1 + 1,
                    count: d1 - 1,
                }
            })
            .collect();
        Some(children)
    }

    /// Processes one BFS level, then recurses on the next.
    fn level(&mut self, steps: Vec<Step>) {
        if steps.is_empty() {
            return;
        }
        let mut next = Vec::new();
        for s in steps {
            if let Some(children) = self.admit(s) {
                next.extend(children);
            }
        }
        self.level(next);
    }
}

/// Largest greedy flood from seeds `s1 <-> s2` over all pairs of canonical
/// starting rotations, starting from an empty matching.
pub fn exhaustive_flood_from(
    g1: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    s1: VertexId,
    s2: VertexId,
    size_cap: usize,
) -> Result<usize> {
    guard(g1, g2, size_cap)?;
    if !g1.contains(s1) || !g2.contains(s2) {
        return Err(Error::InvalidArgument("seed out of range".into()));
    }
    let d = g1.deg(s1);
    if d != g2.deg(s2) {
        return Ok(0);
    }
    let mut best = 0;
    for o1 in min_rotations(g1, s1) {
        for o2 in min_rotations(g2, s2) {
            let mut f = Flood {
                g1,
                g2,
                fwd: HashMap::new(),
                inv: HashMap::new(),
            };
            let offset = if d == 0 { 0 } else { (o2 + d - o1) % d };
            f.level(vec![Step {
                a1: s1,
                a2: s2,
                offset,
                start: o1,
                count: d,
            }]);
            best = best.max(f.fwd.len());
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{path, rot};
    use crate::graph::verify_conformal;

    #[test]
    fn self_and_singletons() {
        let k1 = EmbeddedGraph::new(rot(&[&[]])).unwrap();
        assert_eq!(brute_force_max_conformal(&k1, &k1, 10).unwrap().0, 1);
        let g = crate::generator::gen_irregular_grid(3, 3, 0.3, 5).unwrap();
        let (n, w) = brute_force_max_conformal(&g, &g, 10).unwrap();
        assert_eq!(n, 9);
        assert_eq!(verify_conformal(&g, &g, &w), Ok(()));
    }

    #[test]
    fn size_cap_refuses() {
        let g = path(11);
        assert!(matches!(
            brute_force_max_conformal(&g, &g, 10),
            Err(Error::SizeCap { .. })
        ));
    }

    #[test]
    fn p3_p4() {
        let (a, b) = (path(3), path(4));
        assert_eq!(
            exhaustive_flood_from(&a, &b, VertexId(0), VertexId(0), 10).unwrap(),
            2
        );
        // P3's middle vertex has both ends as neighbors, but no degree-2
        // vertex of P4 is adjacent to both of P4's ends, so at most 2 pairs
        let (best, w) = brute_force_max_conformal(&a, &b, 10).unwrap();
        assert_eq!(verify_conformal(&a, &b, &w), Ok(()));
        assert_eq!(best, 2);
    }

    #[test]
    fn flood_covers_identical_component() {
        let g = crate::generator::gen_irregular_grid(3, 3, 0.2, 8).unwrap();
        for v in g.vertices() {
            assert_eq!(exhaustive_flood_from(&g, &g, v, v, 10).unwrap(), 9);
        }
    }
}
