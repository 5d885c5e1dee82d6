//! Quasi-unique vertex labels.
//!
//! A vertex's label is its degree followed by the degrees of every vertex
//! within distance `k`, listed in the order of a canonical breadth-first
//! search. The search starts from the cyclic rotation of the vertex's
//! neighbors whose degree sequence is lexicographically smallest and then
//! walks each vertex's neighbors clockwise from the edge it was reached by.
//! When several starting rotations tie, the smallest resulting label wins, so
//! the label does not depend on where a stored rotation happens to begin.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rayon::prelude::*;

use crate::graph::{EmbeddedGraph, VertexId};

pub const DEFAULT_K: usize = 7;

/// Degree sequence produced by the canonical BFS. First entry is the degree
/// of the labeled vertex.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Label(Box<[u8]>);

impl Label {
    pub fn new(degrees: Vec<u8>) -> Self {
        Label(degrees.into_boxed_slice())
    }

    pub fn degrees(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Label -> vertices bearing it, vertices ascending.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MasterTable {
    entries: BTreeMap<Label, Vec<VertexId>>,
}

impl MasterTable {
    pub fn get(&self, label: &Label) -> &[VertexId] {
        self.entries.get(label).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn count(&self, label: &Label) -> usize {
        self.get(label).len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Label, &[VertexId])> {
        self.entries.iter().map(|(l, v)| (l, v.as_slice()))
    }

    /// Number of distinct labels.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn vertex_total(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    /// Copy restricted to the vertices `keep` accepts; emptied entries are
    /// dropped.
    pub fn filtered(&self, keep: impl Fn(VertexId) -> bool) -> MasterTable {
        let entries = self
            .entries
            .iter()
            .filter_map(|(l, vs)| {
                let kept: Vec<VertexId> = vs.iter().copied().filter(|&v| keep(v)).collect();
                (!kept.is_empty()).then(|| (l.clone(), kept))
            })
            .collect();
        MasterTable { entries }
    }

    /// `(entry size, number of entries with that size)`, ascending by size.
    pub fn size_histogram(&self) -> Vec<(usize, usize)> {
        let mut h: BTreeMap<usize, usize> = BTreeMap::new();
        for v in self.entries.values() {
            *h.entry(v.len()).or_default() += 1;
        }
        h.into_iter().collect()
    }
}

/// Labels of one graph at a fixed depth.
#[derive(Clone, Debug)]
pub struct Labeling {
    pub k: usize,
    pub labels: Vec<Label>,
    pub table: MasterTable,
}

/// Offsets into `rotation(v)` whose induced neighbor-degree sequence is
/// lexicographically minimal. Ascending; `[0]` for isolated vertices.
pub fn canonical_start_rotations(g: &EmbeddedGraph, v: VertexId) -> Vec<usize> {
    let rot = g.rotation(v);
    let d = rot.len();
    if d <= 1 {
        return vec![0];
    }
    let degs: Vec<usize> = rot.iter().map(|&u| g.deg(u)).collect();
    let degs = &degs;
    let seq = |o: usize| (0..d).map(move |j| degs[(o + j) % d]);
    let mut best = vec![0];
    for o in 1..d {
        match seq(o).cmp(seq(best[0])) {
            std::cmp::Ordering::Less => best = vec![o],
            std::cmp::Ordering::Equal => best.push(o),
            std::cmp::Ordering::Greater => {}
        }
    }
    best
}

/// Reusable BFS buffers; one per worker thread.
pub(crate) struct BfsScratch {
    stamp: Vec<u32>,
    epoch: u32,
    queue: VecDeque<(VertexId, usize, usize)>,
}

impl BfsScratch {
    pub(crate) fn new(n: usize) -> Self {
        BfsScratch {
            stamp: vec![0; n],
            epoch: 0,
            queue: VecDeque::new(),
        }
    }

    fn next_epoch(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    /// BFS to depth `k` from `v`, seeding the queue with `v`'s rotation
    /// starting at `offset`. Visited vertices (excluding `v`) are appended to
    /// `out` in discovery order.
    pub(crate) fn bfs(
        &mut self,
        g: &EmbeddedGraph,
        v: VertexId,
        k: usize,
        offset: usize,
        out: &mut Vec<VertexId>,
    ) {
        out.clear();
        if k == 0 {
            return;
        }
        self.next_epoch();
        let epoch = self.epoch;
        self.stamp[v.index()] = epoch;
        self.queue.clear();
        let rot = g.rotation(v);
        let d = rot.len();
        for j in 0..d {
            let i = (offset + j) % d;
            let u = rot[i];
            if self.stamp[u.index()] != epoch {
                self.stamp[u.index()] = epoch;
                out.push(u);
                self.queue.push_back((u, g.back_position(v, i), 1));
            }
        }
        while let Some((u, incoming, dist)) = self.queue.pop_front() {
            if dist >= k {
                continue;
            }
            let rot = g.rotation(u);
            let du = rot.len();
            for j in 1..du {
                let i = (incoming + j) % du;
                let w = rot[i];
                if self.stamp[w.index()] != epoch {
                    self.stamp[w.index()] = epoch;
                    out.push(w);
                    self.queue.push_back((w, g.back_position(u, i), dist + 1));
                }
            }
        }
    }

    /// Label of `v` plus the offset that produced it.
    pub(crate) fn label(
        &mut self,
        g: &EmbeddedGraph,
        v: VertexId,
        k: usize,
        order: &mut Vec<VertexId>,
    ) -> (Label, usize) {
        let mut best: Option<(Vec<u8>, usize)> = None;
        let mut buf = Vec::new();
        for offset in canonical_start_rotations(g, v) {
            self.bfs(g, v, k, offset, order);
            buf.clear();
            buf.push(g.deg(v) as u8);
            buf.extend(order.iter().map(|&u| g.deg(u) as u8));
            if best.as_ref().is_none_or(|(b, _)| buf < *b) {
                best = Some((buf.clone(), offset));
            }
        }
        let (degs, offset) = best.expect("at least one start rotation");
        (Label::new(degs), offset)
    }
}

/// Vertices within distance `k` of `v` (excluding `v`) in canonical BFS order.
pub fn lexicographic_bfs(g: &EmbeddedGraph, v: VertexId, k: usize) -> Vec<VertexId> {
    let mut scratch = BfsScratch::new(g.vertex_count());
    let mut order = Vec::new();
    let (_, offset) = scratch.label(g, v, k, &mut order);
    scratch.bfs(g, v, k, offset, &mut order);
    order
}

pub fn label_vertex(g: &EmbeddedGraph, v: VertexId, k: usize) -> Label {
    let mut scratch = BfsScratch::new(g.vertex_count());
    scratch.label(g, v, k, &mut Vec::new()).0
}

/// Labels every vertex and groups vertices by label. Per-vertex work runs in
/// parallel.
pub fn label_nodes(g: &EmbeddedGraph, k: usize) -> Labeling {
    let n = g.vertex_count();
    let labels: Vec<Label> = (0..n)
        .into_par_iter()
        .map_init(
            || (BfsScratch::new(n), Vec::new()),
            |(scratch, order), v| scratch.label(g, VertexId::from(v), k, order).0,
        )
        .collect();
    let mut entries: BTreeMap<Label, Vec<VertexId>> = BTreeMap::new();
    for (v, l) in labels.iter().enumerate() {
        entries
            .entry(l.clone())
            .or_default()
            .push(VertexId::from(v));
    }
    Labeling {
        k,
        labels,
        table: MasterTable { entries },
    }
}
