//! Reading and writing graph snapshots.
//!
//! Two inputs are supported: the ERG text format, which carries the rotation
//! system explicitly, and a segment format (one polyline per road) from which
//! vertices and clockwise rotations are derived geometrically.
//!
//! ```text
//! ERG 1
//! n 3
//! v 0 -122.41 37.77
//! a 0 1 2
//! a 1 2 0
//! a 2 0 1
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::error::IngestError;
use crate::graph::{EmbeddedGraph, GraphOptions, LonLat, VertexId};

pub const ERG_HEADER: &str = "ERG 1";

fn syntax(line: usize, msg: impl Into<String>) -> IngestError {
    IngestError::Syntax {
        line,
        msg: msg.into(),
    }
}

/// Content lines with 1-based line numbers; comments and blank lines dropped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_num<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T, IngestError> {
    tok.parse()
        .map_err(|_| syntax(line, format!("cannot parse {what} from {tok:?}")))
}

pub fn parse_erg(text: &str) -> Result<EmbeddedGraph, IngestError> {
    parse_erg_with(text, GraphOptions::default())
}

pub fn parse_erg_with(text: &str, opts: GraphOptions) -> Result<EmbeddedGraph, IngestError> {
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, l)) if l.split_whitespace().collect::<Vec<_>>() == ["ERG", "1"] => {}
        Some((no, l)) => return Err(syntax(no, format!("expected {ERG_HEADER:?}, found {l:?}"))),
        None => return Err(syntax(1, "empty document, expected header")),
    }
    let count: usize = match lines.next() {
        Some((no, l)) => {
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != 2 || toks[0] != "n" {
                return Err(syntax(no, "expected \"n <vertex_count>\""));
            }
            parse_num(no, toks[1], "vertex count")?
        }
        None => return Err(syntax(1, "missing vertex count line")),
    };
    if count > u32::MAX as usize - 1 {
        return Err(syntax(2, "vertex count too large"));
    }

    let mut coords: Vec<Option<LonLat>> = vec![None; count];
    let mut declared = vec![false; count];
    let mut rotation: Vec<Option<Vec<VertexId>>> = vec![None; count];

    let vertex = |no: usize, tok: &str| -> Result<VertexId, IngestError> {
        let id: u64 = parse_num(no, tok, "vertex id")?;
        if id as usize >= count {
            return Err(IngestError::UndeclaredVertex {
                line: no,
                id,
                count,
            });
        }
        Ok(VertexId(id as u32))
    };

    for (no, l) in lines {
        let mut toks = l.split_whitespace();
        let tag = toks.next().unwrap_or_default();
        match tag {
            "v" => {
                let rest: Vec<&str> = toks.collect();
                if rest.len() != 1 && rest.len() != 3 {
                    return Err(syntax(no, "expected \"v <id> [<lon> <lat>]\""));
                }
                let v = vertex(no, rest[0])?;
                if declared[v.index()] {
                    return Err(IngestError::DuplicateVertex {
                        line: no,
                        id: v.0 as u64,
                    });
                }
                declared[v.index()] = true;
                if rest.len() == 3 {
                    let lon = parse_num(no, rest[1], "longitude")?;
                    let lat = parse_num(no, rest[2], "latitude")?;
                    coords[v.index()] = Some(LonLat::new(lon, lat));
                }
            }
            "a" => {
                let v = match toks.next() {
                    Some(t) => vertex(no, t)?,
                    None => return Err(syntax(no, "expected \"a <id> <nbr> ...\"")),
                };
                if rotation[v.index()].is_some() {
                    return Err(IngestError::DuplicateVertex {
                        line: no,
                        id: v.0 as u64,
                    });
                }
                let nbrs = toks.map(|t| vertex(no, t)).collect::<Result<Vec<_>, _>>()?;
                rotation[v.index()] = Some(nbrs);
            }
            other => return Err(syntax(no, format!("unknown record {other:?}"))),
        }
    }

    let rotation = rotation
        .into_iter()
        .map(Option::unwrap_or_default)
        .collect();
    let coords = if coords.iter().any(Option::is_some) {
        coords
    } else {
        Vec::new()
    };
    Ok(EmbeddedGraph::with_options(rotation, coords, opts)?)
}

/// Deterministic ERG text: vertices ascending, rotations as stored, a `v`
/// record only for vertices with coordinates.
pub fn emit_erg(g: &EmbeddedGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{ERG_HEADER}");
    let _ = writeln!(out, "n {}", g.vertex_count());
    for v in g.vertices() {
        if let Some(c) = g.coord(v) {
            let _ = writeln!(out, "v {v} {} {}", c.lon, c.lat);
        }
    }
    for v in g.vertices() {
        let rot = g.rotation(v);
        if rot.is_empty() {
            continue;
        }
        let _ = write!(out, "a {v}");
        for u in rot {
            let _ = write!(out, " {u}");
        }
        out.push('\n');
    }
    out
}

/// Road polylines, one per road, as read from the segment format.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SegmentSet {
    pub polylines: Vec<Vec<LonLat>>,
}

pub fn parse_segments(text: &str) -> Result<SegmentSet, IngestError> {
    let mut polylines = Vec::new();
    for (no, l) in content_lines(text) {
        let mut toks = l.split_whitespace();
        if toks.next() != Some("s") {
            return Err(syntax(no, "expected \"s <lon,lat> <lon,lat> ...\""));
        }
        let pts = toks
            .map(|t| {
                let (a, b) = t
                    .split_once(',')
                    .ok_or_else(|| syntax(no, format!("bad point {t:?}")))?;
                let p = LonLat::new(
                    parse_num(no, a, "longitude")?,
                    parse_num(no, b, "latitude")?,
                );
                if !p.is_valid() {
                    return Err(syntax(no, format!("coordinate out of range {t:?}")));
                }
                Ok(p)
            })
            .collect::<Result<Vec<_>, _>>()?;
        if pts.len() < 2 {
            return Err(syntax(no, "a polyline needs at least two points"));
        }
        polylines.push(pts);
    }
    Ok(SegmentSet { polylines })
}

pub fn emit_segments(s: &SegmentSet) -> String {
    let mut out = String::new();
    for pl in &s.polylines {
        out.push('s');
        for p in pl {
            let _ = write!(out, " {},{}", p.lon, p.lat);
        }
        out.push('\n');
    }
    out
}

/// Keeps only the first and last point of every road, dropping interior
/// shape points that would otherwise become degree-2 vertices.
pub fn collapse_polylines(s: &SegmentSet) -> SegmentSet {
    SegmentSet {
        polylines: s
            .polylines
            .iter()
            .map(|pl| vec![pl[0], pl[pl.len() - 1]])
            .collect(),
    }
}

/// Initial great-circle bearing from `from` to `to`, degrees clockwise from
/// north in `[0, 360)`.
pub fn bearing_deg(from: LonLat, to: LonLat) -> f64 {
    let (p1, p2) = (from.lat.to_radians(), to.lat.to_radians());
    let dl = (to.lon - from.lon).to_radians();
    let y = dl.sin() * p2.cos();
    let x = p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos();
    let b = y.atan2(x).to_degrees();
    let b = if b < 0.0 { b + 360.0 } else { b };
    if b >= 360.0 {
        0.0
    } else {
        b
    }
}

/// Sorts `nbrs` clockwise from due north as seen from `center`; equal
/// bearings fall back to ascending id.
pub fn sort_clockwise(center: LonLat, nbrs: &mut [VertexId], coord: impl Fn(VertexId) -> LonLat) {
    let mut keyed: Vec<(f64, VertexId)> = nbrs
        .iter()
        .map(|&u| (bearing_deg(center, coord(u)), u))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (slot, (_, u)) in nbrs.iter_mut().zip(keyed) {
        *slot = u;
    }
}

struct EndpointIndex {
    eps: f64,
    exact: HashMap<(u64, u64), VertexId>,
    cells: HashMap<(i64, i64), Vec<VertexId>>,
    points: Vec<LonLat>,
}

impl EndpointIndex {
    fn new(eps: f64) -> Self {
        EndpointIndex {
            eps,
            exact: HashMap::new(),
            cells: HashMap::new(),
            points: Vec::new(),
        }
    }

    fn cell(&self, p: LonLat) -> (i64, i64) {
        (
            (p.lon / self.eps).floor() as i64,
            (p.lat / self.eps).floor() as i64,
        )
    }

    fn id_of(&mut self, p: LonLat) -> VertexId {
        if self.eps <= 0.0 {
            // +0.0 normalizes -0.0
            let key = ((p.lon + 0.0).to_bits(), (p.lat + 0.0).to_bits());
            let next = VertexId::from(self.points.len());
            let id = *self.exact.entry(key).or_insert(next);
            if id == next {
                self.points.push(p);
            }
            return id;
        }
        let (cx, cy) = self.cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.cells.get(&(cx + dx, cy + dy)) {
                    for &id in ids {
                        let q = self.points[id.index()];
                        if (q.lon - p.lon).hypot(q.lat - p.lat) <= self.eps {
                            return id;
                        }
                    }
                }
            }
        }
        let id = VertexId::from(self.points.len());
        self.points.push(p);
        self.cells.entry((cx, cy)).or_default().push(id);
        id
    }
}

/// One vertex per distinct road endpoint (identified within `snap_eps`
/// degrees, exact equality when zero), one edge per road, rotations sorted
/// clockwise by bearing. Interior polyline points are ignored.
pub fn build_graph_from_segments(
    s: &SegmentSet,
    snap_eps: f64,
) -> Result<EmbeddedGraph, IngestError> {
    build_graph_from_segments_with(s, snap_eps, GraphOptions::default())
}

pub fn build_graph_from_segments_with(
    s: &SegmentSet,
    snap_eps: f64,
    opts: GraphOptions,
) -> Result<EmbeddedGraph, IngestError> {
    let mut index = EndpointIndex::new(snap_eps);
    let mut adj: Vec<Vec<VertexId>> = Vec::new();
    let mut seen: HashSet<(VertexId, VertexId)> = HashSet::new();
    for (i, pl) in s.polylines.iter().enumerate() {
        let a = index.id_of(pl[0]);
        let b = index.id_of(pl[pl.len() - 1]);
        if adj.len() < index.points.len() {
            adj.resize(index.points.len(), Vec::new());
        }
        if a == b {
            return Err(IngestError::ZeroLengthSegment(i));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(IngestError::DuplicateSegment { index: i });
        }
        adj[a.index()].push(b);
        adj[b.index()].push(a);
    }
    let points = index.points;
    for (v, nbrs) in adj.iter_mut().enumerate() {
        sort_clockwise(points[v], nbrs, |u| points[u.index()]);
    }
    let coords = points.into_iter().map(Some).collect();
    Ok(EmbeddedGraph::with_options(adj, coords, opts)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle() {
        let text = "ERG 1\nn 3\na 0 1 2\na 1 2 0\na 2 0 1\n";
        let g = parse_erg(text).unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(emit_erg(&g), text);
    }

    #[test]
    fn empty_document() {
        let g = parse_erg("ERG 1\nn 0\n").unwrap();
        assert_eq!(g.vertex_count(), 0);
        assert_eq!(emit_erg(&g), "ERG 1\nn 0\n");
        assert_eq!(emit_erg(&EmbeddedGraph::empty()), "ERG 1\nn 0\n");
    }

    #[test]
    fn comments_blank_lines_and_coords() {
        let text = "# snapshot\nERG 1\n\nn 2\nv 0 -120.5 37.25\nv 1\n# edge\na 0 1\na 1 0\n";
        let g = parse_erg(text).unwrap();
        assert_eq!(g.coord(VertexId(0)), Some(LonLat::new(-120.5, 37.25)));
        assert_eq!(g.coord(VertexId(1)), None);
        assert_eq!(parse_erg(&emit_erg(&g)).unwrap(), g);
    }

    #[test]
    fn undeclared_vertex_names_line() {
        let err = parse_erg("ERG 1\nn 2\na 0 1\na 1 0 5\n").unwrap_err();
        assert_eq!(
            err,
            IngestError::UndeclaredVertex {
                line: 4,
                id: 5,
                count: 2
            }
        );
        assert!(err.to_string().starts_with("line 4"));
    }

    #[test]
    fn malformed_documents() {
        assert!(matches!(
            parse_erg("ERG 2\nn 0\n"),
            Err(IngestError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_erg("ERG 1\nn x\n"),
            Err(IngestError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            parse_erg("ERG 1\nn 2\nv 0\nv 0\n"),
            Err(IngestError::DuplicateVertex { line: 4, id: 0 })
        ));
        assert!(matches!(
            parse_erg("ERG 1\nn 2\na 0 1\n"),
            Err(IngestError::Graph(_))
        ));
        assert!(matches!(
            parse_erg("ERG 1\nn 1\nq 0\n"),
            Err(IngestError::Syntax { line: 3, .. })
        ));
    }

    #[test]
    fn collapse_keeps_endpoints() {
        let pl: Vec<LonLat> = (0..7)
            .map(|i| LonLat::new(i as f64 * 0.1, (i * i) as f64 * 0.01))
            .collect();
        let s = SegmentSet {
            polylines: vec![pl.clone(), vec![pl[0], pl[1]]],
        };
        let c = collapse_polylines(&s);
        assert_eq!(c.polylines[0], vec![pl[0], pl[6]]);
        assert_eq!(c.polylines[1], vec![pl[0], pl[1]]);
    }

    #[test]
    fn plus_sign_rotation_is_nesw() {
        // arms listed W, S, E, N to make sure sorting does the work
        let o = LonLat::new(0.0, 0.0);
        let arms = [
            LonLat::new(-0.01, 0.0),
            LonLat::new(0.0, -0.01),
            LonLat::new(0.01, 0.0),
            LonLat::new(0.0, 0.01),
        ];
        let s = SegmentSet {
            polylines: arms.iter().map(|&a| vec![o, a]).collect(),
        };
        let g = build_graph_from_segments(&s, 0.0).unwrap();
        let center = VertexId(0);
        let names: Vec<LonLat> = g
            .rotation(center)
            .iter()
            .map(|&u| g.coord(u).unwrap())
            .collect();
        assert_eq!(names, vec![arms[3], arms[2], arms[1], arms[0]]);
    }

    #[test]
    fn shared_endpoints_and_l_shape() {
        let a = LonLat::new(0.0, 0.0);
        let b = LonLat::new(0.0, 0.01);
        let c = LonLat::new(0.01, 0.01);
        let s = SegmentSet {
            polylines: vec![vec![a, LonLat::new(0.0, 0.005), b], vec![b, c]],
        };
        let g = build_graph_from_segments(&collapse_polylines(&s), 0.0).unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.degree(VertexId(1)).unwrap(), 2);
    }

    #[test]
    fn snapping_merges_near_endpoints() {
        let s = SegmentSet {
            polylines: vec![
                vec![LonLat::new(0.0, 0.0), LonLat::new(0.0, 1.0)],
                vec![LonLat::new(0.0, 1.0000001), LonLat::new(1.0, 1.0)],
            ],
        };
        assert_eq!(
            build_graph_from_segments(&s, 0.0).unwrap().vertex_count(),
            4
        );
        assert_eq!(
            build_graph_from_segments(&s, 1e-6).unwrap().vertex_count(),
            3
        );
    }

    #[test]
    fn zero_length_segment_rejected() {
        let p = LonLat::new(1.0, 1.0);
        let s = SegmentSet {
            polylines: vec![
                vec![LonLat::new(0.0, 0.0), p],
                vec![p, LonLat::new(2.0, 2.0), p],
            ],
        };
        assert_eq!(
            build_graph_from_segments(&s, 0.0).unwrap_err(),
            IngestError::ZeroLengthSegment(1)
        );
    }

    #[test]
    fn segment_text_round_trip() {
        let text = "# roads\ns 0,0 0.5,0.5 1,1\ns 1,1 2,1\n";
        let s = parse_segments(text).unwrap();
        assert_eq!(s.polylines.len(), 2);
        assert_eq!(parse_segments(&emit_segments(&s)).unwrap(), s);
        assert!(parse_segments("s 0,0\n").is_err());
        assert!(parse_segments("s 0,0 1;1\n").is_err());
    }

    #[test]
    fn bearings() {
        let o = LonLat::new(0.0, 0.0);
        assert!((bearing_deg(o, LonLat::new(0.0, 1.0)) - 0.0).abs() < 1e-9);
        assert!((bearing_deg(o, LonLat::new(1.0, 0.0)) - 90.0).abs() < 1e-9);
        assert!((bearing_deg(o, LonLat::new(0.0, -1.0)) - 180.0).abs() < 1e-9);
        assert!((bearing_deg(o, LonLat::new(-1.0, 0.0)) - 270.0).abs() < 1e-9);
    }
}
