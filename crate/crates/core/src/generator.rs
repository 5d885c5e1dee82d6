//! Synthetic road networks and controlled evolution with known ground truth.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, IngestError, Result};
use crate::graph::{ConformalMap, EmbeddedGraph, GraphOptions, LonLat, VertexId};
use crate::ingest::{bearing_deg, sort_clockwise};

/// Degree cap for generated and perturbed graphs.
pub const GENERATED_MAX_DEGREE: usize = 8;
const ORIGIN: LonLat = LonLat {
    lon: -121.0,
    lat: 38.0,
};
const STEP_DEG: f64 = 0.002;
const RETRY_CAP: u64 = 16;
// an edge is only dropped if its endpoints stay connected within this many hops
const DETOUR_HOPS: usize = 6;

type Adjacency = Vec<BTreeSet<usize>>;

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn detour_exists(adj: &Adjacency, a: usize, b: usize) -> bool {
    let mut seen = BTreeSet::from([a]);
    let mut queue = VecDeque::from([(a, 0usize)]);
    while let Some((u, d)) = queue.pop_front() {
        if d == DETOUR_HOPS {
            continue;
        }
        for &w in &adj[u] {
            if u == a && w == b {
                continue;
            }
            if w == b {
                return true;
            }
            if seen.insert(w) {
                queue.push_back((w, d + 1));
            }
        }
    }
    false
}

fn is_connected(adj: &Adjacency) -> bool {
    if adj.is_empty() {
        return true;
    }
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == adj.len()
}

fn edges_of(adj: &Adjacency) -> Vec<(usize, usize)> {
    adj.iter()
        .enumerate()
        .flat_map(|(u, s)| s.iter().filter(move |&&w| w > u).map(move |&w| (u, w)))
        .collect()
}

fn build_from_coords(adj: &Adjacency, coords: &[LonLat]) -> Result<EmbeddedGraph> {
    let rotation = adj
        .iter()
        .enumerate()
        .map(|(v, s)| {
            let mut nbrs: Vec<VertexId> = s.iter().map(|&u| VertexId::from(u)).collect();
            sort_clockwise(coords[v], &mut nbrs, |u| coords[u.index()]);
            nbrs
        })
        .collect();
    Ok(EmbeddedGraph::with_coords(
        rotation,
        coords.iter().map(|&c| Some(c)).collect(),
    )?)
}

/// Lattice grid with random cell diagonals added and random edges removed,
/// `round(irregularity * E)` of each where `E` is the plain grid's edge
/// count. Vertex `r * cols + c` sits at row `r`, column `c`. Always connected,
/// simple and of maximum degree at most 8.
pub fn gen_irregular_grid(
    rows: usize,
    cols: usize,
    irregularity: f64,
    rng_seed: u64,
) -> Result<EmbeddedGraph> {
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidArgument(
            "grid needs at least 2 rows and 2 columns".into(),
        ));
    }
    if !(0.0..=1.0).contains(&irregularity) {
        return Err(Error::InvalidArgument(
            "irregularity must lie in [0, 1]".into(),
        ));
    }
    let n = rows * cols;
    if n > u32::MAX as usize {
        return Err(Error::InvalidArgument("grid too large".into()));
    }
    let id = |r: usize, c: usize| r * cols + c;
    let coords: Vec<LonLat> = (0..n)
        .map(|v| {
            LonLat::new(
                ORIGIN.lon + (v % cols) as f64 * STEP_DEG,
                ORIGIN.lat + (v / cols) as f64 * STEP_DEG,
            )
        })
        .collect();

    let mut base: Adjacency = vec![BTreeSet::new(); n];
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                base[id(r, c)].insert(id(r, c + 1));
                base[id(r, c + 1)].insert(id(r, c));
            }
            if r + 1 < rows {
                base[id(r, c)].insert(id(r + 1, c));
                base[id(r + 1, c)].insert(id(r, c));
            }
        }
    }
    let grid_edges = rows * (cols - 1) + cols * (rows - 1);
    let target = (irregularity * grid_edges as f64).round() as usize;
    let cells = (rows - 1) * (cols - 1);

    for attempt in 0..RETRY_CAP {
        let mut rng = rng_for(rng_seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        let mut adj = base.clone();

        let mut added = 0;
        let mut tries = 0;
        while added < target.min(2 * cells) && tries < 20 * target + 100 {
            tries += 1;
            let cell = rng.gen_range(0..cells);
            let (r, c) = (cell / (cols - 1), cell % (cols - 1));
            let (a, b) = if rng.gen_bool(0.5) {
                (id(r, c), id(r + 1, c + 1))
            } else {
                (id(r, c + 1), id(r + 1, c))
            };
            if adj[a].contains(&b)
                || adj[a].len() >= GENERATED_MAX_DEGREE
                || adj[b].len() >= GENERATED_MAX_DEGREE
            {
                continue;
            }
            adj[a].insert(b);
            adj[b].insert(a);
            added += 1;
        }

        let mut edges = edges_of(&adj);
        edges.shuffle(&mut rng);
        let mut removed = 0;
        for (a, b) in edges {
            if removed == target {
                break;
            }
            if detour_exists(&adj, a, b) {
                adj[a].remove(&b);
                adj[b].remove(&a);
                removed += 1;
            }
        }

        if is_connected(&adj) {
            return build_from_coords(&adj, &coords);
        }
    }
    Err(Error::Generation(format!(
        "no connected grid after {RETRY_CAP} attempts"
    )))
}

/// Correspondence from the vertices of an original graph to their ids in an
/// evolved copy; `None` for deleted vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruth {
    pub forward: Vec<Option<VertexId>>,
}

impl GroundTruth {
    pub fn identity(n: usize) -> Self {
        GroundTruth {
            forward: (0..n).map(|v| Some(VertexId::from(v))).collect(),
        }
    }

    pub fn get(&self, v: VertexId) -> Option<VertexId> {
        self.forward.get(v.index()).copied().flatten()
    }

    pub fn survivors(&self) -> usize {
        self.forward.iter().filter(|x| x.is_some()).count()
    }

    /// `n <original count>` followed by `t <old> <new>` per survivor.
    pub fn to_text(&self) -> String {
        let mut out = format!("n {}\n", self.forward.len());
        for (v, w) in self.forward.iter().enumerate() {
            if let Some(w) = w {
                let _ = writeln!(out, "t {v} {w}");
            }
        }
        out
    }

    pub fn parse(text: &str) -> std::result::Result<Self, IngestError> {
        let syntax = |line: usize, msg: &str| IngestError::Syntax {
            line,
            msg: msg.to_string(),
        };
        let mut forward: Option<Vec<Option<VertexId>>> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            let f: Vec<&str> = s.split_whitespace().collect();
            let num = |t: &str| {
                t.parse::<u32>()
                    .map_err(|_| syntax(line, "expected an integer"))
            };
            match (f[0], &forward) {
                ("n", None) if f.len() == 2 => forward = Some(vec![None; num(f[1])? as usize]),
                ("t", Some(_)) if f.len() == 3 => {
                    let (a, b) = (num(f[1])?, num(f[2])?);
                    let fw = forward.as_mut().unwrap();
                    let count = fw.len();
                    let slot = fw
                        .get_mut(a as usize)
                        .ok_or(IngestError::UndeclaredVertex {
                            line,
                            id: a as u64,
                            count,
                        })?;
                    if slot.is_some() {
                        return Err(IngestError::DuplicateVertex { line, id: a as u64 });
                    }
                    *slot = Some(VertexId(b));
                }
                _ => {
                    return Err(syntax(
                        line,
                        "expected `n <count>` once, then `t <old> <new>` lines",
                    ))
                }
            }
        }
        forward
            .map(|forward| GroundTruth { forward })
            .ok_or_else(|| syntax(0, "missing `n <count>` line"))
    }
}

/// Deletes vertices, deletes edges, then adds edges between vertices two hops
/// apart. Each count is `round(fraction * size)` of the original graph's
/// vertices or edges. Surviving vertices keep their coordinates and are
/// renumbered in ascending order of their original ids.
pub fn perturb(
    g: &EmbeddedGraph,
    remove_vertex_frac: f64,
    remove_edge_frac: f64,
    add_edge_frac: f64,
    rng_seed: u64,
) -> Result<(EmbeddedGraph, GroundTruth)> {
    for f in [remove_vertex_frac, remove_edge_frac, add_edge_frac] {
        if !(0.0..=0.5).contains(&f) {
            return Err(Error::InvalidArgument(format!(
                "perturbation fraction {f} outside [0, 0.5]"
            )));
        }
    }
    let mut rng = rng_for(rng_seed);
    let n = g.vertex_count();
    let m = g.edge_count();

    let mut alive = vec![true; n];
    let kill = (remove_vertex_frac * n as f64).round() as usize;
    for v in index::sample(&mut rng, n, kill) {
        alive[v] = false;
    }
    // surviving neighbors keep their original cyclic order
    let mut rotation: Vec<Vec<usize>> = g
        .vertices()
        .map(|v| {
            if alive[v.index()] {
                g.rotation(v)
                    .iter()
                    .map(|u| u.index())
                    .filter(|&u| alive[u])
                    .collect()
            } else {
                Vec::new()
            }
        })
        .collect();

    let edges: Vec<(usize, usize)> = rotation
        .iter()
        .enumerate()
        .flat_map(|(u, s)| s.iter().filter(move |&&w| w > u).map(move |&w| (u, w)))
        .collect();
    let drop = ((remove_edge_frac * m as f64).round() as usize).min(edges.len());
    for i in index::sample(&mut rng, edges.len(), drop) {
        let (a, b) = edges[i];
        rotation[a].retain(|&x| x != b);
        rotation[b].retain(|&x| x != a);
    }

    let cap = GENERATED_MAX_DEGREE.max(g.max_degree());
    let live: Vec<usize> = (0..n).filter(|&v| alive[v]).collect();
    let add = (add_edge_frac * m as f64).round() as usize;
    let mut added = 0;
    let mut tries = 0;
    while added < add && !live.is_empty() && tries < 50 * add + 100 {
        tries += 1;
        let a = live[rng.gen_range(0..live.len())];
        if rotation[a].len() >= cap {
            continue;
        }
        let two_hop: BTreeSet<usize> = rotation[a]
            .iter()
            .flat_map(|&u| rotation[u].iter().copied())
            .filter(|&w| w != a && !rotation[a].contains(&w) && rotation[w].len() < cap)
            .collect();
        if two_hop.is_empty() {
            continue;
        }
        let b = *two_hop.iter().nth(rng.gen_range(0..two_hop.len())).unwrap();
        if overlaps_existing(g, &rotation, a, b) {
            continue;
        }
        insert_edge(g, &mut rotation, a, b, &mut rng);
        insert_edge(g, &mut rotation, b, a, &mut rng);
        added += 1;
    }

    let mut forward = vec![None; n];
    for (new, &old) in live.iter().enumerate() {
        forward[old] = Some(VertexId::from(new));
    }
    let new_rotation: Vec<Vec<VertexId>> = live
        .iter()
        .map(|&v| rotation[v].iter().map(|&u| forward[u].unwrap()).collect())
        .collect();
    let coords = if g.has_coords() {
        live.iter().map(|&v| g.coord(VertexId::from(v))).collect()
    } else {
        Vec::new()
    };
    let out = EmbeddedGraph::with_options(new_rotation, coords, GraphOptions { max_degree: cap })?;
    Ok((out, GroundTruth { forward }))
}

/// True when `a -> b` would leave `a` at the same bearing as an existing road,
/// which happens when `b` lies straight beyond one of `a`'s neighbors.
fn overlaps_existing(g: &EmbeddedGraph, rotation: &[Vec<usize>], a: usize, b: usize) -> bool {
    let at = |v: usize| g.coord(VertexId::from(v));
    let same = |x: usize, y: usize| match (at(x), at(y)) {
        (Some(cx), Some(cb)) => rotation[x].iter().any(|&u| {
            at(u).is_some_and(|cu| (bearing_deg(cx, cu) - bearing_deg(cx, cb)).abs() < 1e-9)
        }),
        _ => false,
    };
    same(a, b) || same(b, a)
}

/// Places `b` into `a`'s rotation at its clockwise bearing slot, or at a
/// random slot when coordinates are missing.
fn insert_edge(
    g: &EmbeddedGraph,
    rotation: &mut [Vec<usize>],
    a: usize,
    b: usize,
    rng: &mut ChaCha8Rng,
) {
    let list = &mut rotation[a];
    if list.is_empty() {
        list.push(b);
        return;
    }
    let at = |v: usize| g.coord(VertexId::from(v));
    let pos = match (at(a), at(b)) {
        (Some(ca), Some(cb)) if list.iter().all(|&u| at(u).is_some()) => {
            let target = bearing_deg(ca, cb);
            // insert after the neighbor with the smallest clockwise gap to b
            let gap = |u: usize| (target - bearing_deg(ca, at(u).unwrap())).rem_euclid(360.0);
            let best = (0..list.len())
                .min_by(|&i, &j| gap(list[i]).total_cmp(&gap(list[j])))
                .unwrap();
            best + 1
        }
        _ => rng.gen_range(0..=list.len()),
    };
    list.insert(pos, b);
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruthScore {
    /// Share of matched pairs that agree with the ground truth; 0 when
    /// nothing was matched, see `undefined`.
    pub correct_fraction: f64,
    pub matched_fraction: f64,
    pub correct: usize,
    pub matched: usize,
    pub survivors: usize,
    /// Set when the matching is empty and `correct_fraction` has no meaning.
    pub undefined: bool,
}

pub fn score_against_ground_truth(m: &ConformalMap, gt: &GroundTruth) -> TruthScore {
    let matched = m.len();
    let correct = m
        .pairs
        .iter()
        .filter(|&&(a, b)| gt.get(a) == Some(b))
        .count();
    let survivors = gt.survivors();
    TruthScore {
        correct_fraction: if matched == 0 {
            0.0
        } else {
            correct as f64 / matched as f64
        },
        matched_fraction: if survivors == 0 {
            0.0
        } else {
            matched as f64 / survivors as f64
        },
        correct,
        matched,
        survivors,
        undefined: matched == 0,
    }
}

/// Erdős–Rényi style graph with degrees capped at `max_degree` and uniformly
/// random rotations. No coordinates.
pub fn random_graph(n: usize, p: f64, max_degree: usize, rng_seed: u64) -> EmbeddedGraph {
    let mut rng = rng_for(rng_seed);
    let mut rotation: Vec<Vec<VertexId>> = vec![Vec::new(); n];
    for a in 0..n {
        for b in a + 1..n {
            if rotation[a].len() < max_degree
                && rotation[b].len() < max_degree
                && rng.gen_bool(p.clamp(0.0, 1.0))
            {
                rotation[a].push(VertexId::from(b));
                rotation[b].push(VertexId::from(a));
            }
        }
    }
    for r in &mut rotation {
        r.shuffle(&mut rng);
    }
    EmbeddedGraph::with_options(
        rotation,
        Vec::new(),
        GraphOptions {
            max_degree: max_degree.max(1),
        },
    )
    .expect("random graph is simple by construction")
}
