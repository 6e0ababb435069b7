//! Random walks of a conversation over a semantic tree of themes.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ctmc::{solve_ctmc, RateMatrix};

/// A rooted tree of themes. Node 0 is the root; a node's word concatenates
/// the labels on its root path, root excluded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemanticTree {
    labels: Vec<String>,
    parent: Vec<Option<usize>>,
    adjacency: Vec<Vec<usize>>,
}

impl SemanticTree {
    /// `edges` are (parent, child) pairs over `labels`; node 0 is the root.
    pub fn new(labels: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::invalid("tree", "no nodes"));
        }
        if edges.len() + 1 != n {
            return Err(Error::invalid("tree", format!("{n} nodes need {} edges, got {}", n - 1, edges.len())));
        }
        let mut parent = vec![None; n];
        let mut adjacency = vec![Vec::new(); n];
        for &(p, c) in edges {
            if p >= n || c >= n {
                return Err(Error::invalid("tree", format!("edge ({p}, {c}) out of range")));
            }
            if c == 0 || parent[c].is_some() || p == c {
                return Err(Error::invalid("tree", format!("node {} has two parents or is the root", labels[c])));
            }
            parent[c] = Some(p);
            adjacency[p].push(c);
            adjacency[c].push(p);
        }
        let tree = SemanticTree { labels, parent, adjacency };
        // n − 1 edges, one parent each: connected iff every node reaches the root
        for i in 0..n {
            let mut j = i;
            for _ in 0..n {
                match tree.parent[j] {
                    Some(p) => j = p,
                    None => break,
                }
            }
            if j != 0 {
                return Err(Error::invalid("tree", format!("node {} is not connected to the root", tree.labels[i])));
            }
        }
        Ok(tree)
    }

    /// Build from labelled (parent, child) edges; the first parent is the root.
    pub fn from_labels(edges: &[(&str, &str)]) -> Result<Self> {
        let mut labels: Vec<String> = Vec::new();
        let mut index = BTreeMap::new();
        let mut id = |s: &str, labels: &mut Vec<String>| {
            *index.entry(s.to_string()).or_insert_with(|| {
                labels.push(s.to_string());
                labels.len() - 1
            })
        };
        let root = edges.first().map(|e| e.0).unwrap_or("S");
        id(root, &mut labels);
        let pairs: Vec<(usize, usize)> = edges
            .iter()
            .map(|(p, c)| (id(p, &mut labels), id(c, &mut labels)))
            .collect();
        SemanticTree::new(labels, &pairs)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.len()).filter_map(|c| self.parent[c].map(|p| (p, c))).collect()
    }

    pub fn word(&self, i: usize) -> String {
        let mut path = Vec::new();
        let mut j = i;
        while let Some(p) = self.parent[j] {
            path.push(self.labels[j].as_str());
            j = p;
        }
        path.reverse();
        path.concat()
    }

    /// Nodes on the `k` side of the edge `j–k`.
    fn beyond(&self, j: usize, k: usize) -> Vec<usize> {
        let mut out = vec![k];
        let mut stack = vec![(k, j)];
        while let Some((v, from)) = stack.pop() {
            for &w in &self.adjacency[v] {
                if w != from {
                    out.push(w);
                    stack.push((w, v));
                }
            }
        }
        out
    }
}

/// Step matrix of the walk toward favorites: from `j`, each neighbor `k` is
/// weighted by how many (person, favorite) targets lie behind it. Rows with
/// no target anywhere stay put.
pub fn tree_transition(tree: &SemanticTree, favorites: &[BTreeSet<usize>]) -> DMatrix<f64> {
    let n = tree.len();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut total = 0.0;
        for &k in tree.neighbors(j) {
            let behind: BTreeSet<usize> = tree.beyond(j, k).into_iter().collect();
            let count: usize = favorites.iter().map(|f| f.intersection(&behind).count()).sum();
            m[(j, k)] = count as f64;
            total += count as f64;
        }
        if total > 0.0 {
            // the last positive entry absorbs rounding so the row sums to 1 exactly
            let mut ks: Vec<usize> = tree.neighbors(j).iter().copied().filter(|&k| m[(j, k)] > 0.0).collect();
            ks.sort_unstable();
            let last = ks.pop().expect("total > 0");
            let mut acc = 0.0;
            for k in ks {
                m[(j, k)] /= total;
                acc += m[(j, k)];
            }
            m[(j, last)] = 1.0 - acc;
        } else {
            m[(j, j)] = 1.0;
        }
    }
    m
}

/// Chain on the tree's nodes with directed rates `n(j, k)` on tree edges.
pub fn tree_chain(tree: &SemanticTree, rates: &[(usize, usize, f64)]) -> Result<RateMatrix> {
    for &(j, k, _) in rates {
        if j >= tree.len() || k >= tree.len() || !tree.neighbors(j).contains(&k) {
            return Err(Error::invalid("tree rates", format!("({j}, {k}) is not a tree edge")));
        }
    }
    RateMatrix::new(tree.labels.clone(), rates)
}

/// Rates equal to the step probabilities of [`tree_transition`], scaled.
pub fn walk_rates(tree: &SemanticTree, favorites: &[BTreeSet<usize>], scale: f64) -> Vec<(usize, usize, f64)> {
    let m = tree_transition(tree, favorites);
    let mut out = Vec::new();
    for j in 0..tree.len() {
        for &k in tree.neighbors(j) {
            if m[(j, k)] > 0.0 {
                out.push((j, k, scale * m[(j, k)]));
            }
        }
    }
    out
}

/// Distribution over themes at time `t` of the walk started from `p0`.
pub fn tree_walk_ctmc(tree: &SemanticTree, rates: &[(usize, usize, f64)], p0: &[f64], t: f64) -> Result<Vec<f64>> {
    solve_ctmc(&tree_chain(tree, rates)?, p0, t)
}

/// The ten-theme tree: S over Cu, Sp, Ar; Cu over D1, D2; Sp over Fu, Ba;
/// Ar over Mu, Pa. Nodes are numbered in that order.
pub fn fixture_tree() -> SemanticTree {
    SemanticTree::from_labels(&[
        ("S", "Cu"),
        ("S", "Sp"),
        ("S", "Ar"),
        ("Cu", "D1"),
        ("Cu", "D2"),
        ("Sp", "Fu"),
        ("Sp", "Ba"),
        ("Ar", "Mu"),
        ("Ar", "Pa"),
    ])
    .expect("fixture tree")
}

/// Favorite sets of the two talkers, as 0-based nodes of [`fixture_tree`]:
/// {Cu, D1, Sp, Ba} and {Sp, D2, Fu, Ba}.
pub fn fixture_favorites() -> Vec<BTreeSet<usize>> {
    vec![BTreeSet::from([1, 4, 2, 7]), BTreeSet::from([2, 5, 6, 7])]
}

/// Directed edges (1-based) of the literal ten-equation system. Nodes 5, 7
/// and 10 have outflow only.
pub const FIXTURE_LITERAL_EDGES: [(usize, usize); 15] = [
    (1, 2),
    (1, 3),
    (1, 4),
    (2, 1),
    (3, 1),
    (4, 1),
    (2, 6),
    (6, 2),
    (3, 8),
    (8, 3),
    (4, 9),
    (9, 4),
    (5, 2),
    (7, 3),
    (10, 4),
];

/// Literal system with every rate 1 (0-based edges).
pub fn fixture_literal_rates(rate: f64) -> Vec<(usize, usize, f64)> {
    FIXTURE_LITERAL_EDGES
        .iter()
        .map(|&(j, k)| (j - 1, k - 1, rate))
        .collect()
}

/// The literal system plus the missing inflows 2→5, 3→7 and 4→10.
pub fn fixture_symmetric_rates(rate: f64) -> Vec<(usize, usize, f64)> {
    let mut out = fixture_literal_rates(rate);
    out.extend([(1, 4, rate), (2, 6, rate), (3, 9, rate)]);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeRateDoc {
    pub from: String,
    pub to: String,
    pub rate: f64,
}

/// Tree file: labelled (parent, child) edges, one favorite list per person,
/// optional directed rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeDoc {
    pub edges: Vec<(String, String)>,
    #[serde(default)]
    pub favorites: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<TreeRateDoc>>,
}

impl TreeDoc {
    pub fn tree(&self) -> Result<SemanticTree> {
        let pairs: Vec<(&str, &str)> = self.edges.iter().map(|(p, c)| (p.as_str(), c.as_str())).collect();
        SemanticTree::from_labels(&pairs)
    }

    pub fn favorite_sets(&self, tree: &SemanticTree) -> Result<Vec<BTreeSet<usize>>> {
        self.favorites
            .iter()
            .map(|f| f.iter().map(|l| node(tree, l)).collect())
            .collect()
    }

    /// Declared rates, or the favorite-driven walk at unit scale.
    pub fn resolved_rates(&self, tree: &SemanticTree) -> Result<Vec<(usize, usize, f64)>> {
        match &self.rates {
            Some(rs) => rs
                .iter()
                .map(|r| Ok((node(tree, &r.from)?, node(tree, &r.to)?, r.rate)))
                .collect(),
            None => Ok(walk_rates(tree, &self.favorite_sets(tree)?, 1.0)),
        }
    }
}

fn node(tree: &SemanticTree, label: &str) -> Result<usize> {
    tree.index_of(label)
        .ok_or_else(|| Error::invalid("tree", format!("unknown node {label}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_words() {
        let t = fixture_tree();
        assert_eq!(t.len(), 10);
        assert_eq!(t.labels()[4], "D1");
        assert_eq!(t.word(4), "CuD1");
        assert_eq!(t.word(0), "");
        assert_eq!(t.word(9), "ArPa");
    }

    #[test]
    fn fixture_steps() {
        let t = fixture_tree();
        let m = tree_transition(&t, &fixture_favorites());
        // from S: Cu side holds Cu, D1 and D2; Sp side Sp twice, Ba twice, Fu
        assert!((m[(0, 1)] - 3.0 / 8.0).abs() < 1e-15);
        assert!((m[(0, 2)] - 5.0 / 8.0).abs() < 1e-15);
        assert_eq!(m[(0, 3)], 0.0);
        // Ar leads nowhere but back
        assert_eq!(m[(3, 0)], 1.0);
        // Mu, Pa: every target lies through Ar
        assert_eq!(m[(8, 3)], 1.0);
        for i in 0..10 {
            assert_eq!(m.row(i).sum(), 1.0);
        }
    }

    #[test]
    fn lone_node_absorbs() {
        let t = SemanticTree::new(vec!["S".into()], &[]).unwrap();
        let m = tree_transition(&t, &[BTreeSet::from([0])]);
        assert_eq!(m[(0, 0)], 1.0);
    }

    #[test]
    fn bad_trees() {
        let l = |n: usize| (0..n).map(|i| i.to_string()).collect::<Vec<_>>();
        assert!(SemanticTree::new(l(3), &[(0, 1)]).is_err());
        assert!(SemanticTree::new(l(3), &[(0, 1), (0, 1)]).is_err());
        assert!(SemanticTree::new(l(3), &[(1, 2), (2, 1)]).is_err());
        assert!(SemanticTree::new(l(2), &[(1, 0)]).is_err());
    }

    #[test]
    fn literal_leaves_drain() {
        let t = fixture_tree();
        let rates = fixture_literal_rates(1.0);
        let mut p0 = vec![0.0; 10];
        for i in [4, 6, 9] {
            p0[i] = 1.0 / 3.0;
        }
        let mut last = [1.0; 3];
        for step in 1..=10 {
            let p = tree_walk_ctmc(&t, &rates, &p0, step as f64 * 0.5).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for (slot, i) in [4, 6, 9].into_iter().enumerate() {
                // pure decay at unit rate
                let expect = (-(step as f64) * 0.5).exp() / 3.0;
                assert!((p[i] - expect).abs() < 1e-9);
                assert!(p[i] < last[slot]);
                last[slot] = p[i];
            }
        }
    }

    #[test]
    fn symmetric_variant_keeps_leaves() {
        let t = fixture_tree();
        let chain = tree_chain(&t, &fixture_symmetric_rates(1.0)).unwrap();
        let pi = super::super::ctmc::stationary(&chain).unwrap();
        assert!(pi.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn rates_must_follow_edges() {
        let t = fixture_tree();
        assert!(tree_chain(&t, &[(4, 5, 1.0)]).is_err());
    }

    #[test]
    fn doc_round_trip() {
        let doc = TreeDoc {
            edges: vec![("S".into(), "A".into()), ("A".into(), "B".into())],
            favorites: vec![vec!["B".into()]],
            rates: None,
        };
        let text = serde_json::to_string(&doc).unwrap();
        let back: TreeDoc = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc);
        let t = back.tree().unwrap();
        assert_eq!(t.word(2), "AB");
        let r = back.resolved_rates(&t).unwrap();
        assert_eq!(r, vec![(0, 1, 1.0), (1, 2, 1.0)]);
    }
}
