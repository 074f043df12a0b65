//! Undirected simple graphs backed by a symmetric bit matrix.
//!
//! Each node owns a row of `u64` words, so a dyad query or toggle is a single
//! bit operation and shared-partner counts are a popcount over the AND of two
//! rows. Labels and categorical attributes are reference counted so that the
//! auxiliary samplers can clone graphs cheaply.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Categorical node attributes, keyed by attribute name.
pub type Attributes = BTreeMap<String, Vec<String>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    words: usize,
    rows: Vec<u64>,
    degrees: Vec<u32>,
    edge_count: usize,
    labels: Arc<Vec<String>>,
    attributes: Arc<Attributes>,
}

impl Graph {
    /// Empty graph on `n` nodes labelled `0..n`.
    pub fn empty(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Graph {
            n,
            words,
            rows: vec![0; n * words],
            degrees: vec![0; n],
            edge_count: 0,
            labels: Arc::new((0..n).map(|i| i.to_string()).collect()),
            attributes: Arc::new(Attributes::new()),
        }
    }

    /// Builds a graph from node pairs. Duplicate pairs (in either orientation)
    /// are collapsed into a single tie.
    pub fn from_edge_list(n: usize, edges: &[(usize, usize)], attributes: Option<Attributes>) -> Result<Self> {
        let mut g = Graph::empty(n);
        if let Some(attrs) = attributes {
            g.set_attributes(attrs)?;
        }
        for &(i, j) in edges {
            g.check_dyad(i, j)?;
            if !g.has_edge(i, j) {
                g.flip(i, j);
            }
        }
        Ok(g)
    }

    /// Same graph with the given node labels.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::AttributeLength {
                name: "labels".into(),
                len: labels.len(),
                n: self.n,
            });
        }
        self.labels = Arc::new(labels);
        Ok(self)
    }

    pub fn set_attributes(&mut self, attributes: Attributes) -> Result<()> {
        for (name, values) in &attributes {
            if values.len() != self.n {
                return Err(Error::AttributeLength {
                    name: name.clone(),
                    len: values.len(),
                    n: self.n,
                });
            }
        }
        self.attributes = Arc::new(attributes);
        Ok(())
    }

    /// Empty graph sharing this graph's node set, labels and attributes.
    pub fn cleared(&self) -> Self {
        Graph {
            rows: vec![0; self.rows.len()],
            degrees: vec![0; self.n],
            edge_count: 0,
            ..self.clone()
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn dyad_count(&self) -> usize {
        self.n * self.n.saturating_sub(1) / 2
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn attributes(&self) -> &Attributes {
        &self.attributes
    }

    pub fn attribute(&self, name: &str) -> Option<&[String]> {
        self.attributes.get(name).map(Vec::as_slice)
    }

    fn check_node(&self, i: usize) -> Result<()> {
        if i >= self.n {
            Err(Error::NodeOutOfRange { node: i, n: self.n })
        } else {
            Ok(())
        }
    }

    pub(crate) fn check_dyad(&self, i: usize, j: usize) -> Result<()> {
        self.check_node(i)?;
        self.check_node(j)?;
        if i == j {
            Err(Error::SelfLoop(i))
        } else {
            Ok(())
        }
    }

    #[inline]
    fn row(&self, i: usize) -> &[u64] {
        &self.rows[i * self.words..(i + 1) * self.words]
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.rows[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    /// Flips the dyad without bounds checks. Returns the new tie state.
    #[inline]
    pub(crate) fn flip(&mut self, i: usize, j: usize) -> bool {
        let mask_j = 1u64 << (j % 64);
        let mask_i = 1u64 << (i % 64);
        self.rows[i * self.words + j / 64] ^= mask_j;
        self.rows[j * self.words + i / 64] ^= mask_i;
        if self.has_edge(i, j) {
            self.degrees[i] += 1;
            self.degrees[j] += 1;
            self.edge_count += 1;
            true
        } else {
            self.degrees[i] -= 1;
            self.degrees[j] -= 1;
            self.edge_count -= 1;
            false
        }
    }

    /// Flips the tie between `i` and `j`, returning whether it is now present.
    pub fn toggle(&mut self, i: usize, j: usize) -> Result<bool> {
        self.check_dyad(i, j)?;
        Ok(self.flip(i, j))
    }

    pub fn degree(&self, i: usize) -> Result<usize> {
        self.check_node(i)?;
        Ok(self.degrees[i] as usize)
    }

    #[inline]
    pub(crate) fn degree_unchecked(&self, i: usize) -> usize {
        self.degrees[i] as usize
    }

    /// Number of nodes adjacent to both `i` and `j`.
    pub fn shared_partners(&self, i: usize, j: usize) -> Result<usize> {
        self.check_dyad(i, j)?;
        Ok(self.shared_partners_unchecked(i, j))
    }

    #[inline]
    pub(crate) fn shared_partners_unchecked(&self, i: usize, j: usize) -> usize {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// Calls `f` for every common neighbour of `i` and `j`.
    #[inline]
    pub(crate) fn for_each_common_neighbor(&self, i: usize, j: usize, mut f: impl FnMut(usize)) {
        for (w, (a, b)) in self.row(i).iter().zip(self.row(j)).enumerate() {
            let mut bits = a & b;
            while bits != 0 {
                let t = bits.trailing_zeros() as usize;
                f(w * 64 + t);
                bits &= bits - 1;
            }
        }
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i).iter().enumerate().flat_map(|(w, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    None
                } else {
                    let t = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    Some(w * 64 + t)
                }
            })
        })
    }

    /// Ties as `(i, j)` pairs with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| self.neighbors(i).filter(move |&j| j > i).map(move |j| (i, j)))
    }

    /// The `k`-th of the `2·edge_count()` ordered incidences `(i, j)`, ordered
    /// by `i` then `j`.
    pub(crate) fn incidence(&self, mut k: usize) -> (usize, usize) {
        let mut i = 0;
        while k >= self.degrees[i] as usize {
            k -= self.degrees[i] as usize;
            i += 1;
        }
        for (w, &word) in self.row(i).iter().enumerate() {
            let ones = word.count_ones() as usize;
            if k < ones {
                let mut bits = word;
                for _ in 0..k {
                    bits &= bits - 1;
                }
                return (i, w * 64 + bits.trailing_zeros() as usize);
            }
            k -= ones;
        }
        unreachable!("degree bookkeeping matches the adjacency rows")
    }

    /// Maps a dyad index in `0..dyad_count()` to the pair `(i, j)`, `i < j`.
    pub fn dyad(&self, mut index: usize) -> (usize, usize) {
        let mut i = 0;
        loop {
            let row_len = self.n - i - 1;
            if index < row_len {
                return (i, i + 1 + index);
            }
            index -= row_len;
            i += 1;
        }
    }

    /// Graph with nodes renamed by `perm` (node `i` becomes `perm[i]`).
    /// Attributes are permuted along with the nodes.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: perm.len(),
            });
        }
        let edges: Vec<_> = self.edges().map(|(i, j)| (perm[i], perm[j])).collect();
        let mut attrs = Attributes::new();
        for (name, values) in self.attributes.iter() {
            let mut out = vec![String::new(); self.n];
            for (i, v) in values.iter().enumerate() {
                out[perm[i]] = v.clone();
            }
            attrs.insert(name.clone(), out);
        }
        Graph::from_edge_list(self.n, &edges, Some(attrs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn star(leaves: usize) -> Graph {
        let edges: Vec<_> = (1..=leaves).map(|l| (0, l)).collect();
        Graph::from_edge_list(leaves + 1, &edges, None).unwrap()
    }

    fn complete(n: usize) -> Graph {
        let mut edges = vec![];
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        Graph::from_edge_list(n, &edges, None).unwrap()
    }

    #[test]
    fn empty_and_triangle() {
        let g = Graph::from_edge_list(3, &[], None).unwrap();
        assert_eq!(g.edge_count(), 0);
        let t = Graph::from_edge_list(3, &[(0, 1), (1, 2), (0, 2)], None).unwrap();
        assert_eq!(t.edge_count(), 3);
    }

    #[test]
    fn duplicates_are_collapsed() {
        let g = Graph::from_edge_list(3, &[(0, 1), (1, 0), (0, 1)], None).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(g.has_edge(1, 0));
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            Graph::from_edge_list(3, &[(0, 3)], None),
            Err(Error::NodeOutOfRange { node: 3, n: 3 })
        ));
        assert!(matches!(
            Graph::from_edge_list(3, &[(1, 1)], None),
            Err(Error::SelfLoop(1))
        ));
        let mut attrs = Attributes::new();
        attrs.insert("sex".into(), vec!["F".into(), "M".into()]);
        assert!(matches!(
            Graph::from_edge_list(3, &[], Some(attrs)),
            Err(Error::AttributeLength { .. })
        ));
    }

    #[test]
    fn toggle_cases() {
        let mut g = Graph::empty(3);
        assert!(g.toggle(0, 1).unwrap());
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1)]);

        let mut t = complete(3);
        assert!(!t.toggle(0, 1).unwrap());
        assert_eq!(t.edge_count(), 2);
        assert_eq!(t.edges().collect::<Vec<_>>(), vec![(0, 2), (1, 2)]);

        assert!(matches!(t.toggle(2, 2), Err(Error::SelfLoop(2))));
        assert!(matches!(t.toggle(0, 9), Err(Error::NodeOutOfRange { .. })));
    }

    #[test]
    fn degrees_and_partners() {
        let s = star(3);
        assert_eq!(s.degree(0).unwrap(), 3);
        assert_eq!(s.degree(2).unwrap(), 1);
        assert!(s.degree(4).is_err());

        let t = complete(3);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert_eq!(t.shared_partners(i, j).unwrap(), 1);
        }
        assert_eq!(Graph::empty(4).shared_partners(0, 3).unwrap(), 0);
        assert_eq!(complete(4).shared_partners(1, 3).unwrap(), 2);
    }

    #[test]
    fn rows_span_word_boundaries() {
        let mut g = Graph::empty(130);
        g.toggle(0, 64).unwrap();
        g.toggle(0, 129).unwrap();
        g.toggle(63, 64).unwrap();
        g.toggle(63, 129).unwrap();
        assert_eq!(g.shared_partners(0, 63).unwrap(), 2);
        assert_eq!(g.neighbors(0).collect::<Vec<_>>(), vec![64, 129]);
        assert_eq!(g.edge_count(), 4);
    }

    #[test]
    fn dyad_indexing_covers_all_pairs() {
        let g = Graph::empty(6);
        let pairs: Vec<_> = (0..g.dyad_count()).map(|k| g.dyad(k)).collect();
        let mut expected = vec![];
        for i in 0..6 {
            for j in i + 1..6 {
                expected.push((i, j));
            }
        }
        assert_eq!(pairs, expected);
    }

    #[test]
    fn incidences_enumerate_both_orientations() {
        let g = Graph::from_edge_list(70, &[(0, 1), (3, 65), (65, 69), (2, 3)], None).unwrap();
        let all: Vec<_> = (0..2 * g.edge_count()).map(|k| g.incidence(k)).collect();
        let mut want: Vec<_> = g.edges().flat_map(|(i, j)| [(i, j), (j, i)]).collect();
        want.sort();
        assert_eq!(all, want);
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (2usize..12).prop_flat_map(|n| {
            let dyads = n * (n - 1) / 2;
            proptest::collection::vec(any::<bool>(), dyads).prop_map(move |bits| {
                let mut g = Graph::empty(n);
                for (k, b) in bits.into_iter().enumerate() {
                    if b {
                        let (i, j) = g.dyad(k);
                        g.flip(i, j);
                    }
                }
                g
            })
        })
    }

    proptest! {
        #[test]
        fn handshake_lemma(g in arb_graph()) {
            let total: usize = (0..g.node_count()).map(|i| g.degree(i).unwrap()).sum();
            prop_assert_eq!(total, 2 * g.edge_count());
            prop_assert_eq!(g.edges().count(), g.edge_count());
        }

        #[test]
        fn toggles_are_commuting_involutions(g in arb_graph(), a in 0usize..1000, b in 0usize..1000) {
            let (i, j) = g.dyad(a % g.dyad_count());
            let (k, l) = g.dyad(b % g.dyad_count());
            let mut h = g.clone();
            h.toggle(i, j).unwrap();
            h.toggle(i, j).unwrap();
            prop_assert_eq!(&h, &g);

            let mut x = g.clone();
            x.toggle(i, j).unwrap();
            x.toggle(k, l).unwrap();
            let mut y = g.clone();
            y.toggle(k, l).unwrap();
            y.toggle(i, j).unwrap();
            prop_assert_eq!(x, y);
        }

        #[test]
        fn shared_partners_symmetric(g in arb_graph(), a in 0usize..1000) {
            let (i, j) = g.dyad(a % g.dyad_count());
            prop_assert_eq!(g.shared_partners(i, j).unwrap(), g.shared_partners(j, i).unwrap());
            let brute = (0..g.node_count()).filter(|&k| g.has_edge(i, k) && g.has_edge(j, k)).count();
            prop_assert_eq!(g.shared_partners(i, j).unwrap(), brute);
        }
    }
}
