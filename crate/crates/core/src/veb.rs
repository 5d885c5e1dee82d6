//! van Emde Boas tree over integer keys `1..U`.
//!
//! Clusters and summaries are allocated on demand and dropped as soon as they
//! empty, so the structure of a tree is a function of its key set alone.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
struct Node {
    bits: u32,
    // min is kept out of the clusters; None means empty
    min: Option<u64>,
    max: u64,
    summary: Option<Box<Node>>,
    clusters: Vec<Option<Box<Node>>>,
}

impl Node {
    fn new(bits: u32) -> Self {
        Node {
            bits,
            min: None,
            max: 0,
            summary: None,
            clusters: Vec::new(),
        }
    }

    #[inline]
    fn lo_bits(&self) -> u32 {
        self.bits / 2
    }

    #[inline]
    fn split(&self, x: u64) -> (usize, u64) {
        let lo = self.lo_bits();
        ((x >> lo) as usize, x & ((1u64 << lo) - 1))
    }

    #[inline]
    fn join(&self, hi: usize, lo: u64) -> u64 {
        ((hi as u64) << self.lo_bits()) | lo
    }

    fn cluster(&self, h: usize) -> Option<&Node> {
        self.clusters.get(h).and_then(|c| c.as_deref())
    }

    fn contains(&self, x: u64) -> bool {
        match self.min {
            None => false,
            Some(m) if m == x || self.max == x => true,
            Some(_) if self.bits == 1 => false,
            Some(_) => {
                let (h, l) = self.split(x);
                self.cluster(h).is_some_and(|c| c.contains(l))
            }
        }
    }

    /// `x` must not be present.
    fn insert(&mut self, mut x: u64) {
        let Some(m) = self.min else {
            self.min = Some(x);
            self.max = x;
            return;
        };
        if x < m {
            self.min = Some(x);
            x = m;
        }
        if self.bits > 1 {
            let (h, l) = self.split(x);
            let lo_bits = self.lo_bits();
            let hi_bits = self.bits - lo_bits;
            if self.clusters.is_empty() {
                self.clusters.resize_with(1usize << hi_bits, || None);
            }
            match &mut self.clusters[h] {
                Some(c) => c.insert(l),
                slot @ None => {
                    let mut c = Node::new(lo_bits);
                    c.insert(l);
                    *slot = Some(Box::new(c));
                    self.summary
                        .get_or_insert_with(|| Box::new(Node::new(hi_bits)))
                        .insert(h as u64);
                }
            }
        }
        if x > self.max {
            self.max = x;
        }
    }

    /// `x` must be present.
    fn delete(&mut self, mut x: u64) {
        let m = self.min.expect("delete from empty node");
        if m == self.max {
            self.min = None;
            self.max = 0;
            return;
        }
        if self.bits == 1 {
            let other = 1 - x;
            self.min = Some(other);
            self.max = other;
            return;
        }
        if x == m {
            let summary = self
                .summary
                .as_ref()
                .expect("non-singleton node has a summary");
            let first = summary.min.expect("summary non-empty") as usize;
            let cmin = self.clusters[first].as_ref().unwrap().min.unwrap();
            x = self.join(first, cmin);
            self.min = Some(x);
        }
        let (h, l) = self.split(x);
        let emptied = {
            let c = self.clusters[h].as_mut().expect("cluster holds x");
            c.delete(l);
            c.min.is_none()
        };
        if emptied {
            self.clusters[h] = None;
            let summary = self.summary.as_mut().unwrap();
            summary.delete(h as u64);
            if summary.min.is_none() {
                self.summary = None;
                self.clusters = Vec::new();
            }
            if x == self.max {
                self.max = match &self.summary {
                    None => self.min.unwrap(),
                    Some(s) => {
                        let top = s.max as usize;
                        self.join(top, self.clusters[top].as_ref().unwrap().max)
                    }
                };
            }
        } else if x == self.max {
            let cmax = self.clusters[h].as_ref().unwrap().max;
            self.max = self.join(h, cmax);
        }
    }
}

/// Integer set over `[1, U-1]` with O(log log U) insert, delete, min and
/// membership.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VebTree {
    universe: u64,
    len: usize,
    root: Node,
}

impl VebTree {
    /// Tree whose universe is the smallest power of two strictly above
    /// `max_key` (at least 2).
    pub fn new(max_key: u64) -> Self {
        let universe = (max_key.saturating_add(1)).next_power_of_two().max(2);
        VebTree {
            universe,
            len: 0,
            root: Node::new(universe.trailing_zeros()),
        }
    }

    pub fn universe(&self) -> u64 {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn check(&self, key: u64) -> Result<()> {
        if key == 0 || key >= self.universe {
            Err(Error::KeyOutOfUniverse {
                key,
                max: self.universe - 1,
            })
        } else {
            Ok(())
        }
    }

    pub fn contains(&self, key: u64) -> Result<bool> {
        self.check(key)?;
        Ok(self.root.contains(key))
    }

    /// Returns whether the key was newly inserted.
    pub fn insert(&mut self, key: u64) -> Result<bool> {
        self.check(key)?;
        if self.root.contains(key) {
            return Ok(false);
        }
        self.root.insert(key);
        self.len += 1;
        Ok(true)
    }

    /// Returns whether the key was present.
    pub fn delete(&mut self, key: u64) -> Result<bool> {
        self.check(key)?;
        if !self.root.contains(key) {
            return Ok(false);
        }
        self.root.delete(key);
        self.len -= 1;
        Ok(true)
    }

    pub fn min(&self) -> Option<u64> {
        self.root.min
    }

    pub fn max(&self) -> Option<u64> {
        self.root.min.map(|_| self.root.max)
    }
}
