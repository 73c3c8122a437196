//! Canonical forms of finite vertex-colored graphs with labelled directed
//! edges: color refinement plus individualization, keeping the smallest
//! certificate over all branches.

use std::collections::BTreeMap;

use serde::Serialize;

#[derive(Clone, Debug, Default)]
pub struct LabelledGraph {
    /// Initial vertex colors (marks, sides of a map).
    pub colors: Vec<u32>,
    /// Directed labelled edges `(from, to, label)`.
    pub edges: Vec<(u32, u32, u32)>,
}

impl LabelledGraph {
    pub fn new(n: usize) -> Self {
        LabelledGraph { colors: vec![0; n], edges: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    /// Disjoint union; vertices of `other` are shifted past those of `self`.
    pub fn append(&mut self, other: &LabelledGraph) -> u32 {
        let offset = self.len() as u32;
        self.colors.extend_from_slice(&other.colors);
        self.edges.extend(other.edges.iter().map(|&(u, v, l)| (u + offset, v + offset, l)));
        offset
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CanonicalForm {
    pub text: String,
    pub hash: String,
}

impl CanonicalForm {
    fn from_certificate(cert: &[u32]) -> Self {
        let text = cert.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let hash = crate::hash_hex(text.as_bytes());
        CanonicalForm { text, hash }
    }
}

struct Adjacency {
    /// Per vertex: `(label, direction, neighbor)`; direction 0 = outgoing.
    lists: Vec<Vec<(u32, u32, u32)>>,
}

impl Adjacency {
    fn new(g: &LabelledGraph) -> Self {
        let mut lists = vec![Vec::new(); g.len()];
        for &(u, v, l) in &g.edges {
            lists[u as usize].push((l, 0, v));
            lists[v as usize].push((l, 1, u));
        }
        Adjacency { lists }
    }
}

/// Iterated refinement. Colors are replaced by the rank of the signature
/// (own color, sorted neighbor colors with labels and directions) among all
/// signatures, which keeps the procedure independent of vertex order.
fn refine(adj: &Adjacency, colors: &mut Vec<u32>) {
    let n = colors.len();
    let mut classes = count_classes(colors);
    loop {
        let sigs: Vec<(u32, Vec<(u32, u32, u32)>)> = (0..n)
            .map(|i| {
                let mut nb: Vec<(u32, u32, u32)> =
                    adj.lists[i].iter().map(|&(l, d, j)| (l, d, colors[j as usize])).collect();
                nb.sort_unstable();
                (colors[i], nb)
            })
            .collect();
        let mut sorted: Vec<&(u32, Vec<(u32, u32, u32)>)> = sigs.iter().collect();
        sorted.sort();
        sorted.dedup();
        let rank: BTreeMap<&(u32, Vec<(u32, u32, u32)>), u32> =
            sorted.into_iter().enumerate().map(|(r, s)| (s, r as u32)).collect();
        let next: Vec<u32> = sigs.iter().map(|s| rank[s]).collect();
        let next_classes = count_classes(&next);
        *colors = next;
        if next_classes == classes {
            return;
        }
        classes = next_classes;
    }
}

fn count_classes(colors: &[u32]) -> usize {
    let mut c = colors.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

fn certificate(g: &LabelledGraph, colors: &[u32]) -> Vec<u32> {
    // colors form a permutation of 0..n here
    let n = g.len();
    let mut initial = vec![0u32; n];
    for i in 0..n {
        initial[colors[i] as usize] = g.colors[i];
    }
    let mut edges: Vec<(u32, u32, u32)> =
        g.edges.iter().map(|&(u, v, l)| (colors[u as usize], colors[v as usize], l)).collect();
    edges.sort_unstable();
    let mut cert = Vec::with_capacity(2 + n + 3 * edges.len());
    cert.push(n as u32);
    cert.extend_from_slice(&initial);
    cert.push(edges.len() as u32);
    for (u, v, l) in edges {
        cert.extend([u, v, l]);
    }
    cert
}

fn search(g: &LabelledGraph, adj: &Adjacency, mut colors: Vec<u32>, best: &mut Option<Vec<u32>>) {
    refine(adj, &mut colors);
    let n = colors.len();
    // Smallest color shared by several vertices.
    let mut count = vec![0usize; n];
    for &c in &colors {
        count[c as usize] += 1;
    }
    let target = (0..n).find(|&c| count[c] > 1);
    match target {
        None => {
            let cert = certificate(g, &colors);
            if best.as_ref().is_none_or(|b| cert < *b) {
                *best = Some(cert);
            }
        }
        Some(c) => {
            let cell: Vec<usize> = (0..n).filter(|&i| colors[i] as usize == c).collect();
            for &v in &cell {
                let mut next: Vec<u32> = colors.iter().map(|&x| 2 * x).collect();
                next[v] += 1;
                search(g, adj, next, best);
            }
        }
    }
}

/// Equal forms iff the graphs are isomorphic by a bijection preserving
/// vertex colors, edge directions and edge labels.
pub fn canonical_form(g: &LabelledGraph) -> CanonicalForm {
    let adj = Adjacency::new(g);
    // Start from the rank of each initial color so that only their order matters
    // to the refinement; the certificate still records the initial colors.
    let mut distinct: Vec<u32> = g.colors.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let colors: Vec<u32> = g.colors.iter().map(|c| distinct.binary_search(c).unwrap() as u32).collect();
    let mut best = None;
    search(g, &adj, colors, &mut best);
    CanonicalForm::from_certificate(&best.unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: u32, label: u32) -> LabelledGraph {
        let mut g = LabelledGraph::new(n as usize);
        g.edges = (0..n).map(|i| (i, (i + 1) % n, label)).collect();
        g
    }

    #[test]
    fn rotations_of_a_cycle_agree() {
        let mut a = cycle(6, 0);
        let mut b = cycle(6, 0);
        a.colors[0] = 1;
        b.colors[3] = 1;
        assert_eq!(canonical_form(&a), canonical_form(&b));
        assert_eq!(canonical_form(&cycle(6, 0)), canonical_form(&cycle(6, 0)));
        assert_ne!(canonical_form(&cycle(6, 0)), canonical_form(&cycle(5, 0)));
        assert_ne!(canonical_form(&cycle(6, 0)), canonical_form(&cycle(6, 1)));
    }

    #[test]
    fn direction_matters() {
        let mut a = LabelledGraph::new(3);
        a.edges = vec![(0, 1, 0), (1, 2, 0)];
        let mut b = LabelledGraph::new(3);
        b.edges = vec![(0, 1, 0), (2, 1, 0)];
        assert_ne!(canonical_form(&a), canonical_form(&b));
    }

    #[test]
    fn regular_graphs_need_individualization() {
        // Two disjoint triangles vs a hexagon: refinement alone cannot tell.
        let mut two = LabelledGraph::new(6);
        two.edges = vec![(0, 1, 0), (1, 2, 0), (2, 0, 0), (3, 4, 0), (4, 5, 0), (5, 3, 0)];
        assert_ne!(canonical_form(&two), canonical_form(&cycle(6, 0)));
        let mut shuffled = LabelledGraph::new(6);
        shuffled.edges = vec![(5, 1, 0), (1, 3, 0), (3, 5, 0), (0, 2, 0), (2, 4, 0), (4, 0, 0)];
        assert_eq!(canonical_form(&two), canonical_form(&shuffled));
    }
}
