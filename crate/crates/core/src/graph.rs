//! Embedded graphs: undirected simple graphs with a clockwise rotation system.
//!
//! Adjacency is stored in compressed rows. For every directed slot `(v, i)`
//! the graph also keeps the position of `v` inside the rotation of its
//! neighbor, so walking "clockwise from the edge we arrived on" is O(1).

use std::fmt;

use crate::error::GraphError;

/// Dense vertex index, `0..vertex_count`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub u32);

impl VertexId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for VertexId {
    fn from(v: usize) -> Self {
        VertexId(v as u32)
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Longitude/latitude in degrees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LonLat {
    pub lon: f64,
    pub lat: f64,
}

impl LonLat {
    pub fn new(lon: f64, lat: f64) -> Self {
        LonLat { lon, lat }
    }

    pub fn is_valid(&self) -> bool {
        self.lon.is_finite()
            && self.lat.is_finite()
            && (-180.0..=180.0).contains(&self.lon)
            && (-90.0..=90.0).contains(&self.lat)
    }
}

pub const DEFAULT_MAX_DEGREE: usize = 16;

#[derive(Clone, Copy, Debug)]
pub struct GraphOptions {
    /// Construction fails for any vertex of larger degree. At most 255.
    pub max_degree: usize,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            max_degree: DEFAULT_MAX_DEGREE,
        }
    }
}

/// An undirected simple graph with a clockwise rotation system and optional
/// per-vertex coordinates. Immutable once built.
#[derive(Clone, Debug)]
pub struct EmbeddedGraph {
    offsets: Vec<u32>,
    targets: Vec<VertexId>,
    // back[s] = position of the slot's source inside the rotation of targets[s]
    back: Vec<u8>,
    coords: Vec<Option<LonLat>>,
}

impl PartialEq for EmbeddedGraph {
    fn eq(&self, other: &Self) -> bool {
        self.offsets == other.offsets
            && self.targets == other.targets
            && self.coords == other.coords
    }
}

impl EmbeddedGraph {
    pub fn new(rotation: Vec<Vec<VertexId>>) -> Result<Self, GraphError> {
        Self::with_options(rotation, Vec::new(), GraphOptions::default())
    }

    pub fn with_coords(
        rotation: Vec<Vec<VertexId>>,
        coords: Vec<Option<LonLat>>,
    ) -> Result<Self, GraphError> {
        Self::with_options(rotation, coords, GraphOptions::default())
    }

    /// Validates and builds a graph. `coords` may be empty (no coordinates) or
    /// have exactly one entry per vertex.
    pub fn with_options(
        rotation: Vec<Vec<VertexId>>,
        coords: Vec<Option<LonLat>>,
        opts: GraphOptions,
    ) -> Result<Self, GraphError> {
        let n = rotation.len();
        let cap = opts.max_degree.min(u8::MAX as usize);
        let coords = if coords.is_empty() {
            vec![None; n]
        } else if coords.len() != n {
            return Err(GraphError::CoordinateCount {
                got: coords.len(),
                expected: n,
            });
        } else {
            coords
        };
        for (v, c) in coords.iter().enumerate() {
            if let Some(c) = c {
                if !c.is_valid() {
                    return Err(GraphError::BadCoordinate(v.into(), c.lon, c.lat));
                }
            }
        }

        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0u32);
        for (v, nbrs) in rotation.iter().enumerate() {
            let vid = VertexId::from(v);
            if nbrs.len() > cap {
                return Err(GraphError::DegreeCap {
                    vertex: vid,
                    degree: nbrs.len(),
                    cap,
                });
            }
            for (i, &u) in nbrs.iter().enumerate() {
                if u.index() >= n {
                    return Err(GraphError::VertexOutOfRange(u, n));
                }
                if u == vid {
                    return Err(GraphError::SelfLoop(vid));
                }
                if nbrs[..i].contains(&u) {
                    return Err(GraphError::ParallelEdge(vid, u));
                }
            }
            offsets.push(offsets[v] + nbrs.len() as u32);
        }

        let mut targets = Vec::with_capacity(offsets[n] as usize);
        let mut back = Vec::with_capacity(offsets[n] as usize);
        for (v, nbrs) in rotation.iter().enumerate() {
            let vid = VertexId::from(v);
            for &u in nbrs {
                let pos = rotation[u.index()]
                    .iter()
                    .position(|&w| w == vid)
                    .ok_or(GraphError::Asymmetric(u, vid))?;
                targets.push(u);
                back.push(pos as u8);
            }
        }

        Ok(EmbeddedGraph {
            offsets,
            targets,
            back,
            coords,
        })
    }

    pub fn empty() -> Self {
        EmbeddedGraph {
            offsets: vec![0],
            targets: Vec::new(),
            back: Vec::new(),
            coords: Vec::new(),
        }
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.vertex_count()).map(VertexId::from)
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v.index() < self.vertex_count()
    }

    fn check(&self, v: VertexId) -> Result<(), GraphError> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(GraphError::VertexOutOfRange(v, self.vertex_count()))
        }
    }

    /// Degree of `v`, or an error when `v` is out of range.
    pub fn degree(&self, v: VertexId) -> Result<usize, GraphError> {
        self.check(v)?;
        Ok(self.deg(v))
    }

    /// Unchecked degree for hot loops.
    #[inline]
    pub fn deg(&self, v: VertexId) -> usize {
        (self.offsets[v.index() + 1] - self.offsets[v.index()]) as usize
    }

    pub fn max_degree(&self) -> usize {
        self.vertices().map(|v| self.deg(v)).max().unwrap_or(0)
    }

    /// Clockwise rotation of `v` as stored.
    #[inline]
    pub fn rotation(&self, v: VertexId) -> &[VertexId] {
        let lo = self.offsets[v.index()] as usize;
        let hi = self.offsets[v.index() + 1] as usize;
        &self.targets[lo..hi]
    }

    /// For slot `i` of `v`'s rotation, the position of `v` within the
    /// rotation of that neighbor.
    #[inline]
    pub fn back_position(&self, v: VertexId, i: usize) -> usize {
        self.back[self.offsets[v.index()] as usize + i] as usize
    }

    pub fn position_of(&self, v: VertexId, u: VertexId) -> Option<usize> {
        self.rotation(v).iter().position(|&w| w == u)
    }

    pub fn has_edge(&self, v: VertexId, u: VertexId) -> bool {
        self.contains(v) && self.rotation(v).contains(&u)
    }

    /// The neighbors of `v` other than `incoming`, clockwise, starting right
    /// after `incoming`.
    pub fn neighbors_clockwise_from(
        &self,
        v: VertexId,
        incoming: VertexId,
    ) -> Result<Vec<VertexId>, GraphError> {
        self.check(v)?;
        let rot = self.rotation(v);
        let start = self
            .position_of(v, incoming)
            .ok_or(GraphError::NotAdjacent(v, incoming))?;
        let d = rot.len();
        Ok((1..d).map(|j| rot[(start + j) % d]).collect())
    }

    pub fn coord(&self, v: VertexId) -> Option<LonLat> {
        self.coords.get(v.index()).copied().flatten()
    }

    pub fn coords(&self) -> &[Option<LonLat>] {
        &self.coords
    }

    pub fn has_coords(&self) -> bool {
        self.coords.iter().any(Option::is_some)
    }

    /// Rotation system as owned vectors, e.g. for rebuilding a modified graph.
    pub fn to_rotation(&self) -> Vec<Vec<VertexId>> {
        self.vertices().map(|v| self.rotation(v).to_vec()).collect()
    }
}

/// A partial injective vertex map from G1 to G2, as a list of pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConformalMap {
    pub pairs: Vec<(VertexId, VertexId)>,
}

impl ConformalMap {
    pub fn new(pairs: Vec<(VertexId, VertexId)>) -> Self {
        ConformalMap { pairs }
    }

    pub fn identity(g: &EmbeddedGraph) -> Self {
        ConformalMap {
            pairs: g.vertices().map(|v| (v, v)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Which of the two graphs a vertex belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    First,
    Second,
}

impl Side {
    #[inline]
    pub fn index(self) -> usize {
        match self {
            Side::First => 0,
            Side::Second => 1,
        }
    }
}

/// First reason a map fails to be conformal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    OutOfRange(Side, VertexId),
    NotInjective(Side, VertexId),
    /// Condition 1: matched vertices must have equal full-graph degree.
    Degree(VertexId, VertexId),
    /// `(v, u)` is an edge in G1 with both ends matched, but the images are
    /// not adjacent in G2.
    MissingEdge(VertexId, VertexId),
    /// `(x, y)` is an edge in G2 between images whose preimages are not
    /// adjacent in G1.
    ExtraEdge(VertexId, VertexId),
    /// Condition 2: the matched neighbors of `v` appear around `f(v)` in a
    /// different cyclic order.
    Order(VertexId, VertexId),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OutOfRange(s, v) => write!(f, "vertex {v} out of range in {s:?} graph"),
            Violation::NotInjective(s, v) => write!(f, "vertex {v} used twice on {s:?} side"),
            Violation::Degree(a, b) => write!(f, "degree mismatch for pair ({a}, {b})"),
            Violation::MissingEdge(v, u) => write!(f, "edge ({v}, {u}) has no image edge"),
            Violation::ExtraEdge(x, y) => write!(f, "image edge ({x}, {y}) has no preimage edge"),
            Violation::Order(a, b) => write!(f, "cyclic order broken at pair ({a}, {b})"),
        }
    }
}

const NONE: u32 = u32::MAX;

/// Returns the first violation of the conformal conditions, checking degree
/// equality, adjacency in both directions among matched vertices, and that
/// matched neighbors keep their clockwise cyclic order.
pub fn verify_conformal(
    g1: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    m: &ConformalMap,
) -> Result<(), Violation> {
    let mut fwd = vec![NONE; g1.vertex_count()];
    let mut inv = vec![NONE; g2.vertex_count()];
    for &(a, b) in &m.pairs {
        if !g1.contains(a) {
            return Err(Violation::OutOfRange(Side::First, a));
        }
        if !g2.contains(b) {
            return Err(Violation::OutOfRange(Side::Second, b));
        }
        if fwd[a.index()] != NONE {
            return Err(Violation::NotInjective(Side::First, a));
        }
        if inv[b.index()] != NONE {
            return Err(Violation::NotInjective(Side::Second, b));
        }
        fwd[a.index()] = b.0;
        inv[b.index()] = a.0;
    }
    for &(a, b) in &m.pairs {
        if g1.deg(a) != g2.deg(b) {
            return Err(Violation::Degree(a, b));
        }
    }
    let mut positions = Vec::new();
    for &(a, b) in &m.pairs {
        positions.clear();
        for &u in g1.rotation(a) {
            let fu = fwd[u.index()];
            if fu == NONE {
                continue;
            }
            match g2.position_of(b, VertexId(fu)) {
                Some(p) => positions.push(p),
                None => return Err(Violation::MissingEdge(a, u)),
            }
        }
        for &y in g2.rotation(b) {
            let py = inv[y.index()];
            if py != NONE && !g1.has_edge(a, VertexId(py)) {
                return Err(Violation::ExtraEdge(b, y));
            }
        }
        if !is_cyclically_sorted(&positions) {
            return Err(Violation::Order(a, b));
        }
    }
    Ok(())
}

/// True when `seq` (distinct values) is a rotation of an ascending sequence.
pub(crate) fn is_cyclically_sorted(seq: &[usize]) -> bool {
    if seq.len() < 3 {
        return true;
    }
    let descents = (0..seq.len())
        .filter(|&i| seq[(i + 1) % seq.len()] < seq[i])
        .count();
    descents <= 1
}
