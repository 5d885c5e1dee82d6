//! Flood-based conformal matching.
//!
//! Labels are taken from the seed index in order of increasing product. For
//! each label every seed pair and every canonical starting orientation is
//! tried as an isolated trial: the seeds are matched, then a breadth-first
//! flood pairs up neighbors by their clockwise position relative to the edge
//! each vertex was reached through. Trials mutate the live state and are
//! undone through a journal; the largest trial for the label is committed.
//!
//! A pair is accepted only when it keeps the map conformal: both vertices
//! unmatched, equal degree, and every already-matched neighbor sitting at the
//! aligned clockwise position on the other side (seen from both endpoints).
//! Anything else ends that branch of the flood.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, IngestError, Result};
use crate::graph::{ConformalMap, EmbeddedGraph, Side, VertexId};
use crate::labeling::{canonical_start_rotations, label_nodes, Labeling, DEFAULT_K};
use crate::seed_index::{auto_tune_k, LabelId, SeedIndex, TuneResult, DEFAULT_MAX_PRODUCT};

const UNMATCHED: u32 = u32::MAX;

/// A pending pair in the flood, reached through the edges `from1 -> v1` and
/// `from2 -> v2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Frontier {
    pub v1: VertexId,
    pub v2: VertexId,
    pub from1: VertexId,
    pub from2: VertexId,
    // position of from_i inside rotation(v_i)
    slot1: u8,
    slot2: u8,
}

/// Matched arrays, committed and tentative pairs, and the flood queue.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchState {
    matched: [Vec<u32>; 2],
    // for matched v1: rotation(v1)[i] corresponds to rotation(f(v1))[(i + shift) % d]
    shift: Vec<u8>,
    total: Vec<(VertexId, VertexId)>,
    trial: Vec<(VertexId, VertexId)>,
    queue: VecDeque<Frontier>,
    in_trial: bool,
}

impl MatchState {
    fn new(n1: usize, n2: usize) -> Self {
        MatchState {
            matched: [vec![UNMATCHED; n1], vec![UNMATCHED; n2]],
            shift: vec![0; n1],
            total: Vec::new(),
            trial: Vec::new(),
            queue: VecDeque::new(),
            in_trial: false,
        }
    }

    pub fn partner(&self, side: Side, v: VertexId) -> Option<VertexId> {
        match self.matched[side.index()][v.index()] {
            UNMATCHED => None,
            p => Some(VertexId(p)),
        }
    }

    pub fn is_matched(&self, side: Side, v: VertexId) -> bool {
        self.matched[side.index()][v.index()] != UNMATCHED
    }

    pub fn committed(&self) -> &[(VertexId, VertexId)] {
        &self.total
    }

    pub fn tentative(&self) -> &[(VertexId, VertexId)] {
        &self.trial
    }

    pub fn queue(&self) -> impl Iterator<Item = &Frontier> {
        self.queue.iter()
    }

    pub fn in_trial(&self) -> bool {
        self.in_trial
    }
}

/// One match run over a pair of graphs: the seed index plus match state.
#[derive(Clone, Debug)]
pub struct MatchSession<'g> {
    g1: &'g EmbeddedGraph,
    g2: &'g EmbeddedGraph,
    index: SeedIndex,
    state: MatchState,
}

impl<'g> MatchSession<'g> {
    pub fn new(g1: &'g EmbeddedGraph, g2: &'g EmbeddedGraph, index: SeedIndex) -> Self {
        MatchSession {
            g1,
            g2,
            index,
            state: MatchState::new(g1.vertex_count(), g2.vertex_count()),
        }
    }

    /// Labels both graphs at depth `k` and builds the seed index.
    pub fn from_graphs(
        g1: &'g EmbeddedGraph,
        g2: &'g EmbeddedGraph,
        k: usize,
        max_product: u64,
    ) -> Result<Self> {
        let (l1, l2) = rayon::join(|| label_nodes(g1, k), || label_nodes(g2, k));
        let index = SeedIndex::build(&l1.table, &l2.table, max_product)?;
        Ok(Self::new(g1, g2, index))
    }

    pub fn index(&self) -> &SeedIndex {
        &self.index
    }

    pub fn state(&self) -> &MatchState {
        &self.state
    }

    /// Opens a trial. Every mutation until [`abort_trial`](Self::abort_trial)
    /// or [`commit_trial`](Self::commit_trial) is journaled.
    pub fn checkpoint(&mut self) -> Result<()> {
        if self.state.in_trial {
            return Err(Error::Internal("checkpoint inside an open trial".into()));
        }
        self.index.begin_journal()?;
        self.state.in_trial = true;
        Ok(())
    }

    /// Replays the journal backwards, restoring the pre-trial state exactly.
    pub fn abort_trial(&mut self) -> Result<()> {
        if !self.state.in_trial {
            return Err(Error::Internal("abort without an open trial".into()));
        }
        while let Some((a, b)) = self.state.trial.pop() {
            self.state.matched[0][a.index()] = UNMATCHED;
            self.state.matched[1][b.index()] = UNMATCHED;
            self.state.shift[a.index()] = 0;
        }
        self.state.queue.clear();
        self.index.rollback_journal()?;
        self.state.in_trial = false;
        Ok(())
    }

    pub fn commit_trial(&mut self) -> Result<()> {
        if !self.state.in_trial {
            return Err(Error::Internal("commit without an open trial".into()));
        }
        self.state.total.append(&mut self.state.trial);
        self.state.queue.clear();
        self.index.commit_journal()?;
        self.state.in_trial = false;
        Ok(())
    }

    /// Whether `a1 <-> a2` under rotation offset `shift` is consistent with
    /// every matched neighbor of either vertex.
    fn can_match(&self, a1: VertexId, a2: VertexId, shift: usize) -> bool {
        let (g1, g2) = (self.g1, self.g2);
        let d = g1.deg(a1);
        if d != g2.deg(a2)
            || self.state.is_matched(Side::First, a1)
            || self.state.is_matched(Side::Second, a2)
        {
            return false;
        }
        let (r1, r2) = (g1.rotation(a1), g2.rotation(a2));
        for (i, &x1) in r1.iter().enumerate() {
            let y2 = r2[(i + shift) % d];
            let m1 = self.state.matched[0][x1.index()];
            let m2 = self.state.matched[1][y2.index()];
            if m1 == UNMATCHED && m2 == UNMATCHED {
                continue;
            }
            if m1 != y2.0 {
                return false;
            }
            // x1 <-> y2 already; its own alignment must send a1 to a2
            let back = g1.back_position(a1, i);
            let dx = g1.deg(x1);
            let sx = self.state.shift[x1.index()] as usize;
            if g2.rotation(y2)[(back + sx) % dx] != a2 {
                return false;
            }
        }
        true
    }

    fn accept(
        &mut self,
        a1: VertexId,
        a2: VertexId,
        shift: usize,
        first_slot: usize,
        skip_incoming: bool,
    ) -> Result<()> {
        let d = self.g1.deg(a1);
        self.state.matched[0][a1.index()] = a2.0;
        self.state.matched[1][a2.index()] = a1.0;
        self.state.shift[a1.index()] = shift as u8;
        self.state.trial.push((a1, a2));
        let (r1, r2) = (self.g1.rotation(a1), self.g2.rotation(a2));
        let start = usize::from(skip_incoming);
        for j in start..d {
            let i1 = (first_slot + j) % d;
            let i2 = (i1 + shift) % d;
            self.state.queue.push_back(Frontier {
                v1: r1[i1],
                v2: r2[i2],
                from1: a1,
                from2: a2,
                slot1: self.g1.back_position(a1, i1) as u8,
                slot2: self.g2.back_position(a2, i2) as u8,
            });
        }
        self.index.remove_vertex(Side::First, a1)?;
        self.index.remove_vertex(Side::Second, a2)?;
        Ok(())
    }

    /// Matches `u1 <-> u2` and enqueues their corresponding neighbors. With
    /// `via = Some((p1, p2))` the pair was reached over edges from the matched
    /// pair `p1 <-> p2`, which fixes the alignment and the neighbors are
    /// enqueued clockwise after the incoming edge. With `None` the stored
    /// rotations are aligned as-is.
    pub fn process_nodes(
        &mut self,
        u1: VertexId,
        u2: VertexId,
        via: Option<(VertexId, VertexId)>,
    ) -> Result<()> {
        if !self.state.in_trial {
            return Err(Error::Internal("process_nodes outside a trial".into()));
        }
        let d = self.g1.deg(u1);
        if d != self.g2.deg(u2)
            || self.state.is_matched(Side::First, u1)
            || self.state.is_matched(Side::Second, u2)
        {
            return Err(Error::Internal(format!(
                "cannot match ({u1}, {u2}): already matched or degrees differ"
            )));
        }
        match via {
            None => self.accept(u1, u2, 0, 0, false),
            Some((p1, p2)) => {
                let s1 = self.g1.position_of(u1, p1);
                let s2 = self.g2.position_of(u2, p2);
                let (Some(s1), Some(s2)) = (s1, s2) else {
                    return Err(Error::Internal(format!(
                        "({p1}, {p2}) is not adjacent to ({u1}, {u2})"
                    )));
                };
                let shift = (s2 + d - s1) % d;
                self.accept(u1, u2, shift, s1, true)
            }
        }
    }

    /// Runs one flood from seeds `s1 <-> s2`, aligning rotation offset
    /// `orient1` of `s1` with `orient2` of `s2`. Returns the number of pairs
    /// in the trial. Must be called inside a checkpoint.
    pub fn run_trial(
        &mut self,
        s1: VertexId,
        s2: VertexId,
        orient1: usize,
        orient2: usize,
    ) -> Result<usize> {
        if !self.state.in_trial {
            return Err(Error::Internal("run_trial outside a trial".into()));
        }
        let d = self.g1.deg(s1);
        if d != self.g2.deg(s2) {
            return Ok(0);
        }
        let shift = if d == 0 {
            0
        } else {
            (orient2 % d + d - orient1 % d) % d
        };
        if !self.can_match(s1, s2, shift) {
            return Ok(0);
        }
        self.accept(s1, s2, shift, if d == 0 { 0 } else { orient1 % d }, false)?;
        while let Some(f) = self.state.queue.pop_front() {
            let d = self.g1.deg(f.v1);
            if d != self.g2.deg(f.v2) {
                continue;
            }
            let shift = (f.slot2 as usize + d - f.slot1 as usize) % d;
            if self.can_match(f.v1, f.v2, shift) {
                self.accept(f.v1, f.v2, shift, f.slot1 as usize, true)?;
            }
        }
        Ok(self.state.trial.len())
    }

    /// Seed pairs and orientation combinations for a label, in enumeration
    /// order. Orientation pairs that induce the same alignment are listed once.
    pub fn candidates(&self, label: LabelId) -> Vec<Trial> {
        let seeds1: Vec<VertexId> = self.index.live_members(Side::First, label).collect();
        let seeds2: Vec<VertexId> = self.index.live_members(Side::Second, label).collect();
        let mut out = Vec::new();
        let mut shifts = Vec::new();
        for &s1 in &seeds1 {
            let o1s = canonical_start_rotations(self.g1, s1);
            for &s2 in &seeds2 {
                let o2s = canonical_start_rotations(self.g2, s2);
                let d = self.g1.deg(s1).max(1);
                shifts.clear();
                for &o1 in &o1s {
                    for &o2 in &o2s {
                        let shift = (o2 + d - o1) % d;
                        if !shifts.contains(&shift) {
                            shifts.push(shift);
                            out.push(Trial {
                                s1,
                                s2,
                                orient1: o1,
                                orient2: o2,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Tries every candidate for `label` and commits the largest trial (first
    /// one on ties). A label none of whose trials can start is retired.
    /// Returns the committed cardinality.
    pub fn match_label(&mut self, label: LabelId) -> Result<usize> {
        let cands = self.candidates(label);
        let mut best: Option<(usize, usize)> = None;
        for (i, c) in cands.iter().enumerate() {
            self.checkpoint()?;
            let card = self.run_trial(c.s1, c.s2, c.orient1, c.orient2)?;
            let improved = card > best.map_or(0, |(b, _)| b);
            if improved {
                best = Some((card, i));
            }
            if improved && i + 1 == cands.len() {
                self.commit_trial()?;
                return Ok(card);
            }
            self.abort_trial()?;
        }
        match best {
            None => {
                self.index.retire(label);
                Ok(0)
            }
            Some((card, i)) => {
                let c = cands[i];
                self.checkpoint()?;
                let again = self.run_trial(c.s1, c.s2, c.orient1, c.orient2)?;
                if again != card {
                    return Err(Error::Internal(format!(
                        "trial replay gave {again} pairs, expected {card}"
                    )));
                }
                self.commit_trial()?;
                Ok(card)
            }
        }
    }

    /// Pops labels until the index is exhausted. Returns the number of labels
    /// processed.
    pub fn run(&mut self, rng_seed: u64) -> Result<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut rounds = 0;
        while let Some(label) = self.index.pop_min_label(&mut rng) {
            self.match_label(label)?;
            rounds += 1;
        }
        Ok(rounds)
    }

    pub fn into_outcome(self, k: usize) -> MatchOutcome {
        let mut pairs = self.state.total;
        pairs.sort_unstable();
        let unmatched = |side: Side, n: usize| -> Vec<VertexId> {
            (0..n)
                .map(VertexId::from)
                .filter(|&v| self.state.matched[side.index()][v.index()] == UNMATCHED)
                .collect()
        };
        MatchOutcome {
            k,
            unmatched1: unmatched(Side::First, self.g1.vertex_count()),
            unmatched2: unmatched(Side::Second, self.g2.vertex_count()),
            pairs,
            stats: MatchStats::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Trial {
    pub s1: VertexId,
    pub s2: VertexId,
    pub orient1: usize,
    pub orient2: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct MatchConfig {
    pub k: usize,
    pub max_product: u64,
    pub rng_seed: u64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            k: DEFAULT_K,
            max_product: DEFAULT_MAX_PRODUCT,
            rng_seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatchStats {
    pub seed_time: Duration,
    pub match_time: Duration,
    pub labels_processed: usize,
    pub max_product: u64,
    pub rng_seed: u64,
}

/// Matched pairs (ascending by G1 vertex) and the unmatched remainder of each
/// graph.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchOutcome {
    pub k: usize,
    pub pairs: Vec<(VertexId, VertexId)>,
    pub unmatched1: Vec<VertexId>,
    pub unmatched2: Vec<VertexId>,
    pub stats: MatchStats,
}

impl MatchOutcome {
    pub fn matched(&self) -> usize {
        self.pairs.len()
    }

    pub fn to_map(&self) -> ConformalMap {
        ConformalMap::new(self.pairs.clone())
    }

    /// Line format: `m <id1> <id2>` per pair, `u1 <id>` / `u2 <id>` per
    /// unmatched vertex, then a `# stats` block of `key: value` lines.
    /// Timings are omitted when `timings` is false so the text is
    /// reproducible byte for byte.
    pub fn to_text(&self, timings: bool) -> String {
        let mut out = String::new();
        for (a, b) in &self.pairs {
            let _ = writeln!(out, "m {a} {b}");
        }
        for v in &self.unmatched1 {
            let _ = writeln!(out, "u1 {v}");
        }
        for v in &self.unmatched2 {
            let _ = writeln!(out, "u2 {v}");
        }
        out.push_str("# stats\n");
        let _ = writeln!(out, "k: {}", self.k);
        let _ = writeln!(out, "max_product: {}", self.stats.max_product);
        let _ = writeln!(out, "rng_seed: {}", self.stats.rng_seed);
        if timings {
            let _ = writeln!(out, "seed_time: {:.6}", self.stats.seed_time.as_secs_f64());
            let _ = writeln!(
                out,
                "match_time: {:.6}",
                self.stats.match_time.as_secs_f64()
            );
        }
        let _ = writeln!(out, "labels_processed: {}", self.stats.labels_processed);
        let _ = writeln!(out, "matched: {}", self.pairs.len());
        let _ = writeln!(out, "unmatched1: {}", self.unmatched1.len());
        let _ = writeln!(out, "unmatched2: {}", self.unmatched2.len());
        out
    }

    pub fn parse(text: &str) -> std::result::Result<Self, IngestError> {
        let mut out = MatchOutcome {
            k: 0,
            pairs: Vec::new(),
            unmatched1: Vec::new(),
            unmatched2: Vec::new(),
            stats: MatchStats::default(),
        };
        let mut in_stats = false;
        for (i, line) in text.lines().enumerate() {
            let no = i + 1;
            let line = line.trim();
            let bad = |msg: &str| IngestError::Syntax {
                line: no,
                msg: msg.to_string(),
            };
            if line.is_empty() {
                continue;
            }
            if line.starts_with('#') {
                in_stats |= line.trim_start_matches('#').trim() == "stats";
                continue;
            }
            if in_stats {
                let (key, value) = line
                    .split_once(':')
                    .ok_or_else(|| bad("expected key: value"))?;
                let value = value.trim();
                let num = |v: &str| v.parse::<f64>().map_err(|_| bad("bad number"));
                match key.trim() {
                    "k" => out.k = num(value)? as usize,
                    "max_product" => out.stats.max_product = num(value)? as u64,
                    "rng_seed" => out.stats.rng_seed = num(value)? as u64,
                    "seed_time" => out.stats.seed_time = Duration::from_secs_f64(num(value)?),
                    "match_time" => out.stats.match_time = Duration::from_secs_f64(num(value)?),
                    "labels_processed" => out.stats.labels_processed = num(value)? as usize,
                    _ => {}
                }
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let id = |t: &str| {
                t.parse::<u32>()
                    .map(VertexId)
                    .map_err(|_| bad("bad vertex id"))
            };
            match toks.as_slice() {
                ["m", a, b] => out.pairs.push((id(a)?, id(b)?)),
                ["u1", a] => out.unmatched1.push(id(a)?),
                ["u2", a] => out.unmatched2.push(id(a)?),
                _ => return Err(bad("expected m/u1/u2 record")),
            }
        }
        Ok(out)
    }
}

/// Labels, builds the index, and runs the full matching loop.
pub fn match_graphs(
    g1: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    cfg: &MatchConfig,
) -> Result<MatchOutcome> {
    if cfg.k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let t0 = Instant::now();
    let mut session = MatchSession::from_graphs(g1, g2, cfg.k, cfg.max_product)?;
    let seed_time = t0.elapsed();
    let t1 = Instant::now();
    let labels_processed = session.run(cfg.rng_seed)?;
    let match_time = t1.elapsed();
    let mut out = session.into_outcome(cfg.k);
    out.stats = MatchStats {
        seed_time,
        match_time,
        labels_processed,
        max_product: cfg.max_product,
        rng_seed: cfg.rng_seed,
    };
    Ok(out)
}

/// Same as [`match_graphs`] with labelings already computed.
pub fn match_labeled(
    g1: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    l1: &Labeling,
    l2: &Labeling,
    max_product: u64,
    rng_seed: u64,
) -> Result<MatchOutcome> {
    let index = SeedIndex::build(&l1.table, &l2.table, max_product)?;
    let mut session = MatchSession::new(g1, g2, index);
    let t1 = Instant::now();
    let labels_processed = session.run(rng_seed)?;
    let match_time = t1.elapsed();
    let mut out = session.into_outcome(l1.k);
    out.stats = MatchStats {
        match_time,
        labels_processed,
        max_product,
        rng_seed,
        ..MatchStats::default()
    };
    Ok(out)
}

/// Tunes `k` against `max_product` over `1..=k_max`, then matches. The
/// timing of the tuning scan is folded into the seed time.
pub fn match_auto_k(
    g1: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    max_product: u64,
    k_max: usize,
    rng_seed: u64,
) -> Result<(TuneResult, MatchOutcome)> {
    let t0 = Instant::now();
    let tune = auto_tune_k(g1, g2, max_product, k_max)?;
    let tune_time = t0.elapsed();
    let mut out = match_graphs(
        g1,
        g2,
        &MatchConfig {
            k: tune.k,
            max_product,
            rng_seed,
        },
    )?;
    out.stats.seed_time += tune_time;
    Ok((tune, out))
}
