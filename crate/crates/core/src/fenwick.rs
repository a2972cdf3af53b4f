//! Minimal binary indexed tree over value ranks. Backs the pair counting in
//! the fast Wilcoxon sweep; not part of the public API.

pub(crate) struct Fenwick {
    tree: Vec<i64>,
}

impl Fenwick {
    pub(crate) fn new(len: usize) -> Self {
        Self {
            tree: vec![0; len + 1],
        }
    }

    /// Adds `delta` at 0-based position `pos`.
    pub(crate) fn add(&mut self, pos: usize, delta: i64) {
        let mut i = pos + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum of the first `len` positions, i.e. 0-based positions 0..len.
    pub(crate) fn prefix(&self, len: usize) -> i64 {
        let mut i = len.min(self.tree.len() - 1);
        let mut sum = 0;
        while i > 0 {
            sum += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        sum
    }
}
