//! Unordered vertex pairs and bitset-backed pair sets.
//!
//! A pair `(i, j)` with `i < j < n` is identified by its position in the
//! row-major enumeration of the strict upper triangle:
//! `(0,1), (0,2), ..., (0,n-1), (1,2), ...`. A [`PairSet`] stores one bit per
//! position, so set algebra over budgets of millions of pairs stays cheap.

use alloc::vec;
use alloc::vec::Vec;

/// Number of unordered pairs on `n` vertices.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Offset of the first pair of row `i`.
#[inline]
fn row_offset(n: usize, i: usize) -> usize {
    i * (2 * n - i - 1) / 2
}

/// Position of the pair `(i, j)`, `i < j < n`.
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    row_offset(n, i) + (j - i - 1)
}

/// Inverse of [`pair_index`].
pub fn pair_from_index(n: usize, idx: usize) -> (usize, usize) {
    debug_assert!(idx < pair_count(n));
    // Row estimate from the quadratic, then a local correction for rounding.
    let nf = n as f64;
    let disc = (2.0 * nf - 1.0) * (2.0 * nf - 1.0) - 8.0 * idx as f64;
    let mut i = ((2.0 * nf - 1.0 - libm::sqrt(disc.max(0.0))) / 2.0) as usize;
    i = i.min(n - 2);
    while i > 0 && row_offset(n, i) > idx {
        i -= 1;
    }
    while i + 1 < n - 1 && row_offset(n, i + 1) <= idx {
        i += 1;
    }
    let j = idx - row_offset(n, i) + i + 1;
    (i, j)
}

/// A set of unordered pairs over a fixed vertex count.
#[derive(Clone, PartialEq, Eq)]
pub struct PairSet {
    n: usize,
    words: Vec<u64>,
    len: usize,
}

impl core::fmt::Debug for PairSet {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("PairSet").field("n", &self.n).field("len", &self.len).finish()
    }
}

impl PairSet {
    pub fn empty(n: usize) -> Self {
        PairSet { n, words: vec![0; pair_count(n).div_ceil(64)], len: 0 }
    }

    /// Every pair on `n` vertices.
    pub fn full(n: usize) -> Self {
        let total = pair_count(n);
        let mut words = vec![u64::MAX; total.div_ceil(64)];
        let tail = total % 64;
        if tail != 0 {
            if let Some(last) = words.last_mut() {
                *last = (1u64 << tail) - 1;
            }
        }
        PairSet { n, words, len: total }
    }

    pub fn from_pairs<I: IntoIterator<Item = (usize, usize)>>(n: usize, pairs: I) -> Self {
        let mut set = PairSet::empty(n);
        for (i, j) in pairs {
            set.insert(i, j);
        }
        set
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Size of the pair universe this set lives in.
    pub fn universe(&self) -> usize {
        pair_count(self.n)
    }

    #[inline]
    pub fn contains_index(&self, idx: usize) -> bool {
        self.words[idx >> 6] >> (idx & 63) & 1 == 1
    }

    /// Membership for a pair given in either order. Self-pairs are never members.
    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.contains_index(pair_index(self.n, a, b))
    }

    /// Returns `true` when the pair was newly inserted.
    #[inline]
    pub fn insert_index(&mut self, idx: usize) -> bool {
        let w = &mut self.words[idx >> 6];
        let bit = 1u64 << (idx & 63);
        if *w & bit == 0 {
            *w |= bit;
            self.len += 1;
            true
        } else {
            false
        }
    }

    /// Inserts `(min(i,j), max(i,j))`.
    ///
    /// # Panics
    /// If `i == j` or an endpoint is out of range.
    pub fn insert(&mut self, i: usize, j: usize) -> bool {
        assert!(i != j, "self-loop ({i}, {i}) is not a pair");
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        assert!(b < self.n, "vertex {b} out of range for n = {}", self.n);
        self.insert_index(pair_index(self.n, a, b))
    }

    pub fn iter_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let mut bits = word;
            core::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(w * 64 + tz)
            })
        })
    }

    /// Pairs in increasing index order (row-major).
    pub fn iter(&self) -> Pairs<'_> {
        Pairs { set: self, word: 0, bits: self.words.first().copied().unwrap_or(0), row: 0 }
    }

    pub fn intersection(&self, other: &PairSet) -> PairSet {
        assert_eq!(self.n, other.n);
        let words: Vec<u64> = self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect();
        let len = words.iter().map(|w| w.count_ones() as usize).sum();
        PairSet { n: self.n, words, len }
    }

    pub fn union(&self, other: &PairSet) -> PairSet {
        let mut out = self.clone();
        out.union_with(other);
        out
    }

    pub fn union_with(&mut self, other: &PairSet) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        self.len = self.words.iter().map(|w| w.count_ones() as usize).sum();
    }

    pub fn is_disjoint(&self, other: &PairSet) -> bool {
        self.n == other.n && self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    pub fn is_subset(&self, other: &PairSet) -> bool {
        self.n == other.n && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Per-vertex degree counts.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for (i, j) in self.iter() {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }
}

/// Iterator over the pairs of a [`PairSet`].
pub struct Pairs<'a> {
    set: &'a PairSet,
    word: usize,
    bits: u64,
    row: usize,
}

impl Iterator for Pairs<'_> {
    type Item = (usize, usize);

    fn next(&mut self) -> Option<(usize, usize)> {
        while self.bits == 0 {
            self.word += 1;
            if self.word >= self.set.words.len() {
                return None;
            }
            self.bits = self.set.words[self.word];
        }
        let idx = self.word * 64 + self.bits.trailing_zeros() as usize;
        self.bits &= self.bits - 1;
        let n = self.set.n;
        while row_offset(n, self.row + 1) <= idx {
            self.row += 1;
        }
        Some((self.row, idx - row_offset(n, self.row) + self.row + 1))
    }
}
