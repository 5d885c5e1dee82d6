//! Seed selection: labels shared by both graphs, prioritized by the number of
//! candidate seed pairs `n1(L) * n2(L)`.
//!
//! The smallest live product is found through a [`VebTree`]; a product table
//! maps each product to the labels that currently have it. Removing a matched
//! vertex updates its label's count and moves the label between buckets.
//! Every mutation can be journaled so a tentative trial can be rolled back
//! exactly, including the order of labels inside each bucket.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{EmbeddedGraph, Side, VertexId};
use crate::labeling::{label_nodes, Label, Labeling, MasterTable};
use crate::veb::VebTree;

pub const DEFAULT_MAX_PRODUCT: u64 = 24;

/// Interned label handle, valid for one index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelId(pub u32);

impl LabelId {
    #[inline]
    fn index(self) -> usize {
        self.0 as usize
    }
}

const NO_LABEL: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum IndexUndo {
    Vertex(Side, VertexId),
    Inserted {
        product: u64,
        label: LabelId,
    },
    Removed {
        product: u64,
        label: LabelId,
        slot: usize,
    },
    Product {
        label: LabelId,
        old: u64,
    },
    Retired(LabelId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedIndex {
    bound: u64,
    veb: VebTree,
    product_table: HashMap<u64, Vec<LabelId>>,
    slot: Vec<u32>,
    label_product: Vec<u64>,
    retired: Vec<bool>,
    labels: Vec<Label>,
    counts: [Vec<u32>; 2],
    members: [Vec<Vec<VertexId>>; 2],
    vertex_label: [Vec<u32>; 2],
    present: [Vec<bool>; 2],
    journal: Option<Vec<IndexUndo>>,
}

impl SeedIndex {
    /// Indexes every label present in both tables. Fails when a product
    /// exceeds `bound`.
    pub fn build(mt1: &MasterTable, mt2: &MasterTable, bound: u64) -> Result<Self> {
        if bound == 0 {
            return Err(Error::InvalidArgument(
                "product bound must be at least 1".into(),
            ));
        }
        let span = |mt: &MasterTable| {
            mt.iter()
                .flat_map(|(_, vs)| vs.iter())
                .map(|v| v.index() + 1)
                .max()
                .unwrap_or(0)
        };
        let n = [span(mt1), span(mt2)];
        let mut idx = SeedIndex {
            bound,
            // products only shrink, so the largest initial one bounds every key
            veb: VebTree::new(bound.min(max_cross_product(mt1, mt2)).max(1)),
            product_table: HashMap::new(),
            slot: Vec::new(),
            label_product: Vec::new(),
            retired: Vec::new(),
            labels: Vec::new(),
            counts: [Vec::new(), Vec::new()],
            members: [Vec::new(), Vec::new()],
            vertex_label: [vec![NO_LABEL; n[0]], vec![NO_LABEL; n[1]]],
            present: [vec![false; n[0]], vec![false; n[1]]],
            journal: None,
        };
        for (side, mt) in [mt1, mt2].into_iter().enumerate() {
            for (_, vs) in mt.iter() {
                for v in vs {
                    idx.present[side][v.index()] = true;
                }
            }
        }
        for (label, vs1) in mt1.iter() {
            let vs2 = mt2.get(label);
            if vs2.is_empty() {
                continue;
            }
            let product = vs1.len() as u64 * vs2.len() as u64;
            if product > bound {
                return Err(Error::ProductBound {
                    label: label.to_string(),
                    product,
                    bound,
                });
            }
            let id = LabelId(idx.labels.len() as u32);
            idx.labels.push(label.clone());
            for (side, vs) in [vs1, vs2].into_iter().enumerate() {
                for v in vs {
                    idx.vertex_label[side][v.index()] = id.0;
                }
                idx.counts[side].push(vs.len() as u32);
                idx.members[side].push(vs.to_vec());
            }
            idx.slot.push(0);
            idx.label_product.push(0);
            idx.retired.push(false);
            idx.bucket_insert(product, id);
            idx.label_product[id.index()] = product;
        }
        Ok(idx)
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn is_empty(&self) -> bool {
        self.veb.is_empty()
    }

    pub fn min_product(&self) -> Option<u64> {
        self.veb.min()
    }

    pub fn label(&self, id: LabelId) -> &Label {
        &self.labels[id.index()]
    }

    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    /// Current `n1(L) * n2(L)`, zero when the label is not indexed.
    pub fn product(&self, id: LabelId) -> u64 {
        self.label_product[id.index()]
    }

    pub fn count(&self, side: Side, id: LabelId) -> u32 {
        self.counts[side.index()][id.index()]
    }

    pub fn label_of(&self, side: Side, v: VertexId) -> Option<LabelId> {
        match self.vertex_label[side.index()].get(v.index()) {
            None | Some(&NO_LABEL) => None,
            Some(&l) => Some(LabelId(l)),
        }
    }

    pub fn is_present(&self, side: Side, v: VertexId) -> bool {
        self.present[side.index()]
            .get(v.index())
            .copied()
            .unwrap_or(false)
    }

    /// Unremoved vertices bearing `id` on `side`, ascending.
    pub fn live_members(&self, side: Side, id: LabelId) -> impl Iterator<Item = VertexId> + '_ {
        let present = &self.present[side.index()];
        self.members[side.index()][id.index()]
            .iter()
            .copied()
            .filter(move |v| present[v.index()])
    }

    /// Picks a label with the minimum product, uniformly among ties. The
    /// label stays indexed. `None` once the index is exhausted.
    pub fn pop_min_label<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<LabelId> {
        let p = self.veb.min()?;
        let bucket = &self.product_table[&p];
        let pick = if bucket.len() == 1 {
            0
        } else {
            rng.gen_range(0..bucket.len())
        };
        Some(bucket[pick])
    }

    /// Drops a matched vertex from its label and re-prioritizes the label.
    pub fn remove_vertex(&mut self, side: Side, v: VertexId) -> Result<()> {
        let present = self.present[side.index()]
            .get_mut(v.index())
            .ok_or_else(|| Error::Internal(format!("vertex {v} unknown to the seed index")))?;
        if !*present {
            return Err(Error::Internal(format!(
                "vertex {v} removed twice from the {side:?} side"
            )));
        }
        *present = false;
        self.record(IndexUndo::Vertex(side, v));
        if let Some(l) = self.label_of(side, v) {
            self.counts[side.index()][l.index()] -= 1;
            self.reindex(l);
        }
        Ok(())
    }

    /// Withdraws a label from seed selection without touching its vertices.
    pub fn retire(&mut self, id: LabelId) {
        if !self.retired[id.index()] {
            self.retired[id.index()] = true;
            self.record(IndexUndo::Retired(id));
            self.reindex(id);
        }
    }

    fn reindex(&mut self, l: LabelId) {
        let new = if self.retired[l.index()] {
            0
        } else {
            self.counts[0][l.index()] as u64 * self.counts[1][l.index()] as u64
        };
        let old = self.label_product[l.index()];
        if old == new {
            return;
        }
        if old > 0 {
            self.bucket_remove(old, l);
        }
        if new > 0 {
            self.bucket_insert(new, l);
        }
        self.record(IndexUndo::Product { label: l, old });
        self.label_product[l.index()] = new;
    }

    fn bucket_insert(&mut self, product: u64, l: LabelId) {
        let bucket = self.product_table.entry(product).or_default();
        if bucket.is_empty() {
            self.veb.insert(product).expect("product within bound");
        }
        self.slot[l.index()] = bucket.len() as u32;
        bucket.push(l);
        self.record(IndexUndo::Inserted { product, label: l });
    }

    fn bucket_remove(&mut self, product: u64, l: LabelId) {
        let bucket = self.product_table.get_mut(&product).expect("bucket exists");
        let slot = self.slot[l.index()] as usize;
        bucket.swap_remove(slot);
        if let Some(&moved) = bucket.get(slot) {
            self.slot[moved.index()] = slot as u32;
        }
        if bucket.is_empty() {
            self.product_table.remove(&product);
            self.veb.delete(product).expect("product within bound");
        }
        self.record(IndexUndo::Removed {
            product,
            label: l,
            slot,
        });
    }

    fn record(&mut self, op: IndexUndo) {
        if let Some(j) = &mut self.journal {
            j.push(op);
        }
    }

    pub(crate) fn begin_journal(&mut self) -> Result<()> {
        if self.journal.is_some() {
            return Err(Error::Internal("seed index journal already open".into()));
        }
        self.journal = Some(Vec::new());
        Ok(())
    }

    pub(crate) fn commit_journal(&mut self) -> Result<()> {
        self.journal
            .take()
            .map(|_| ())
            .ok_or_else(|| Error::Internal("no seed index journal to commit".into()))
    }

    /// Undoes every journaled mutation in reverse order.
    pub(crate) fn rollback_journal(&mut self) -> Result<()> {
        let ops = self
            .journal
            .take()
            .ok_or_else(|| Error::Internal("no seed index journal to roll back".into()))?;
        for op in ops.into_iter().rev() {
            match op {
                IndexUndo::Vertex(side, v) => {
                    self.present[side.index()][v.index()] = true;
                    if let Some(l) = self.label_of(side, v) {
                        self.counts[side.index()][l.index()] += 1;
                    }
                }
                IndexUndo::Inserted { product, label } => {
                    let bucket = self.product_table.get_mut(&product).expect("bucket exists");
                    let last = bucket.pop();
                    debug_assert_eq!(last, Some(label));
                    if bucket.is_empty() {
                        self.product_table.remove(&product);
                        self.veb.delete(product).expect("product within bound");
                    }
                }
                IndexUndo::Removed {
                    product,
                    label,
                    slot,
                } => {
                    let bucket = self.product_table.entry(product).or_default();
                    if bucket.is_empty() {
                        self.veb.insert(product).expect("product within bound");
                    }
                    bucket.push(label);
                    let last = bucket.len() - 1;
                    bucket.swap(slot, last);
                    let moved = bucket[last];
                    self.slot[moved.index()] = last as u32;
                    self.slot[label.index()] = slot as u32;
                }
                IndexUndo::Product { label, old } => self.label_product[label.index()] = old,
                IndexUndo::Retired(label) => self.retired[label.index()] = false,
            }
        }
        Ok(())
    }

    /// Label -> current product for every indexed label, plus the live vEB
    /// keys. Independent of interning and bucket order.
    pub fn snapshot(&self) -> IndexSnapshot {
        let products = (0..self.labels.len())
            .filter(|&i| self.label_product[i] > 0)
            .map(|i| (self.labels[i].clone(), self.label_product[i]))
            .collect();
        let mut keys: Vec<u64> = self.product_table.keys().copied().collect();
        keys.sort_unstable();
        let veb_keys = keys
            .into_iter()
            .filter(|&k| self.veb.contains(k).unwrap_or(false))
            .collect();
        IndexSnapshot { products, veb_keys }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSnapshot {
    pub products: BTreeMap<Label, u64>,
    pub veb_keys: Vec<u64>,
}

/// Largest `n1(L) * n2(L)` over labels present in both tables (0 if none).
pub fn max_cross_product(mt1: &MasterTable, mt2: &MasterTable) -> u64 {
    mt1.iter()
        .map(|(l, vs)| vs.len() as u64 * mt2.count(l) as u64)
        .max()
        .unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TuneResult {
    pub k: usize,
    pub max_product: u64,
    /// Whether `max_product <= bound` was reached.
    pub achieved: bool,
    /// `(k, max product)` for every depth evaluated, ascending.
    pub curve: Vec<(usize, u64)>,
}

/// Smallest `k` in `1..=k_max` whose maximum cross product is at most
/// `bound`. When none qualifies, the `k` with the smallest maximum product
/// (smallest `k` on ties) is returned with `achieved == false`.
///
/// Depths are scanned in ascending order: the maximum product is not
/// guaranteed to fall monotonically with `k`.
pub fn auto_tune_k(
    g1: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    bound: u64,
    k_max: usize,
) -> Result<TuneResult> {
    if bound == 0 || k_max == 0 {
        return Err(Error::InvalidArgument(
            "auto-tuning needs a bound >= 1 and k_max >= 1".into(),
        ));
    }
    let mut curve = Vec::new();
    for k in 1..=k_max {
        let p = max_cross_product(&label_nodes(g1, k).table, &label_nodes(g2, k).table);
        curve.push((k, p));
        if p <= bound {
            return Ok(TuneResult {
                k,
                max_product: p,
                achieved: true,
                curve,
            });
        }
    }
    let &(k, max_product) = curve
        .iter()
        .min_by_key(|&&(k, p)| (p, k))
        .expect("k_max >= 1");
    Ok(TuneResult {
        k,
        max_product,
        achieved: false,
        curve,
    })
}

/// Maximum cross product at each `k` in `1..=k_max`.
pub fn max_product_curve(
    g1: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    k_max: usize,
) -> Vec<(usize, u64)> {
    (1..=k_max)
        .map(|k| {
            let (a, b): (Labeling, Labeling) = (label_nodes(g1, k), label_nodes(g2, k));
            (k, max_cross_product(&a.table, &b.table))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{path, rot};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tables(g1: &EmbeddedGraph, g2: &EmbeddedGraph, k: usize) -> (MasterTable, MasterTable) {
        (label_nodes(g1, k).table, label_nodes(g2, k).table)
    }

    #[test]
    fn identical_paths() {
        let p = path(3);
        let (a, b) = tables(&p, &p, 1);
        let idx = SeedIndex::build(&a, &b, 24).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(idx.min_product(), Some(1));
        let l = idx.pop_min_label(&mut rng).unwrap();
        assert_eq!(idx.label(l).degrees(), &[2, 1, 1]);
        let end = (0..idx.label_count() as u32)
            .map(LabelId)
            .find(|&l| idx.label(l).degrees() == [1, 2])
            .unwrap();
        assert_eq!(idx.product(end), 4);
    }

    #[test]
    fn one_sided_labels_are_not_indexed() {
        let (a, b) = tables(&path(3), &path(2), 1);
        let idx = SeedIndex::build(&a, &b, 24).unwrap();
        // path(3) has labels (1,2) and (2,1,1), path(2) only (1,1)
        assert!(idx.is_empty());
        assert_eq!(idx.label_count(), 0);
    }

    #[test]
    fn product_bound_is_enforced() {
        let p = path(6);
        let (a, b) = tables(&p, &p, 1);
        // (2,2,2) appears twice per side -> 4; ends (1,2) twice -> 4; (2,1,2) ... all <= 4
        assert!(SeedIndex::build(&a, &b, 4).is_ok());
        let err = SeedIndex::build(&a, &b, 3).unwrap_err();
        assert!(matches!(
            err,
            Error::ProductBound {
                product: 4,
                bound: 3,
                ..
            }
        ));
        assert!(err.is_config());
    }

    #[test]
    fn removal_updates_products() {
        let p = path(4);
        let (a, b) = tables(&p, &p, 1);
        let mut idx = SeedIndex::build(&a, &b, 24).unwrap();
        let end = idx.label_of(Side::First, VertexId(0)).unwrap();
        assert_eq!(idx.product(end), 4);
        idx.remove_vertex(Side::First, VertexId(0)).unwrap();
        assert_eq!(idx.product(end), 2);
        assert!(matches!(
            idx.remove_vertex(Side::First, VertexId(0)),
            Err(Error::Internal(_))
        ));
        idx.remove_vertex(Side::First, VertexId(3)).unwrap();
        assert_eq!(idx.product(end), 0);
        assert_eq!(idx.min_product(), Some(4));
    }

    #[test]
    fn unique_pair_unindexes() {
        let p = path(3);
        let (a, b) = tables(&p, &p, 1);
        let mut idx = SeedIndex::build(&a, &b, 24).unwrap();
        let mid = idx.label_of(Side::First, VertexId(1)).unwrap();
        assert_eq!(idx.product(mid), 1);
        idx.remove_vertex(Side::First, VertexId(1)).unwrap();
        assert_eq!(idx.product(mid), 0);
        assert_eq!(idx.min_product(), Some(4));
    }

    #[test]
    fn ties_are_seeded() {
        // two copies each of path(2) and path(3)
        let g = EmbeddedGraph::new(rot(&[
            &[1],
            &[0],
            &[3],
            &[2],
            &[5],
            &[4, 6],
            &[5],
            &[8],
            &[7, 9],
            &[8],
        ]))
        .unwrap();
        let (a, b) = tables(&g, &g, 1);
        let mut idx = SeedIndex::build(&a, &b, 24).unwrap();
        // labels (1,1) and (1,2) have product 16, (2,1,1) has 4
        assert_eq!(idx.min_product(), Some(4));
        for v in [5u32, 8] {
            idx.remove_vertex(Side::First, VertexId(v)).unwrap();
        }
        assert_eq!(idx.min_product(), Some(16));
        let picks = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..32)
                .map(|_| idx.pop_min_label(&mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(picks(7), picks(7));
        let seen: std::collections::BTreeSet<_> = picks(3).into_iter().collect();
        assert_eq!(seen.len(), 2);
        assert!(seen.iter().all(|&l| idx.product(l) == 16));
    }

    #[test]
    fn rollback_restores_exactly() {
        let g = crate::generator::gen_irregular_grid(6, 6, 0.2, 4).unwrap();
        let (a, b) = tables(&g, &g, 1);
        let mut idx = SeedIndex::build(&a, &b, 1000).unwrap();
        let before = idx.clone();
        idx.begin_journal().unwrap();
        for v in [0u32, 7, 8, 20, 35] {
            idx.remove_vertex(Side::First, VertexId(v)).unwrap();
            idx.remove_vertex(Side::Second, VertexId(v / 2)).unwrap();
        }
        idx.retire(LabelId(0));
        idx.rollback_journal().unwrap();
        assert_eq!(idx, before);
        assert!(idx.rollback_journal().is_err());
    }

    #[test]
    fn tune_single_edge() {
        let e = path(2);
        let t = auto_tune_k(&e, &e, 4, 5).unwrap();
        assert_eq!((t.k, t.max_product, t.achieved), (1, 4, true));
        let t = auto_tune_k(&e, &e, 1, 5).unwrap();
        assert!(!t.achieved);
        assert_eq!((t.k, t.max_product), (1, 4));
        assert_eq!(t.curve.len(), 5);
    }
}
