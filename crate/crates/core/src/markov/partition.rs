//! Neighbor functions, partitions of a group of people, and the chain of
//! subgroup emergence and collapse between agreed partitions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

use super::ctmc::RateMatrix;

pub type Person = u32;
pub type Block = BTreeSet<Person>;

/// Enumeration is exponential in the group size.
pub const MAX_PEOPLE: usize = 10;

/// Who each person can talk to. Reflexive: `j ∈ N(j)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborFn {
    neighbors: BTreeMap<Person, Block>,
}

impl NeighborFn {
    pub fn new(neighbors: BTreeMap<Person, Block>) -> Result<Self> {
        if neighbors.is_empty() {
            return Err(Error::invalid("neighbor function", "no people"));
        }
        for (j, n) in &neighbors {
            if !n.contains(j) {
                return Err(Error::invalid("neighbor function", format!("{j} ∉ N({j})")));
            }
            if let Some(k) = n.iter().find(|k| !neighbors.contains_key(k)) {
                return Err(Error::invalid("neighbor function", format!("N({j}) names unknown person {k}")));
            }
        }
        Ok(NeighborFn { neighbors })
    }

    pub fn from_lists(lists: &[(Person, &[Person])]) -> Result<Self> {
        NeighborFn::new(
            lists
                .iter()
                .map(|(j, n)| (*j, n.iter().copied().collect()))
                .collect(),
        )
    }

    /// Everyone neighbors everyone.
    pub fn complete(people: impl IntoIterator<Item = Person>) -> Result<Self> {
        let all: Block = people.into_iter().collect();
        NeighborFn::new(all.iter().map(|j| (*j, all.clone())).collect())
    }

    pub fn people(&self) -> impl Iterator<Item = Person> + '_ {
        self.neighbors.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn of(&self, j: Person) -> Option<&Block> {
        self.neighbors.get(&j)
    }

    /// A block is agreed when it is a single person, or lies inside the
    /// neighbor set of one of its own members.
    pub fn agrees(&self, block: &Block) -> bool {
        block.len() == 1
            || block
                .iter()
                .any(|j| self.neighbors.get(j).is_some_and(|n| block.is_subset(n)))
    }
}

/// Disjoint non-empty blocks covering the people, sorted by least member.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    blocks: Vec<Block>,
}

impl Partition {
    pub fn new(mut blocks: Vec<Block>) -> Result<Self> {
        if blocks.iter().any(|b| b.is_empty()) {
            return Err(Error::invalid("partition", "empty block"));
        }
        let mut seen = BTreeSet::new();
        for b in &blocks {
            for j in b {
                if !seen.insert(*j) {
                    return Err(Error::invalid("partition", format!("{j} appears in two blocks")));
                }
            }
        }
        blocks.sort_by_key(|b| *b.iter().next().unwrap());
        Ok(Partition { blocks })
    }

    pub fn from_slices(blocks: &[&[Person]]) -> Result<Self> {
        Partition::new(blocks.iter().map(|b| b.iter().copied().collect()).collect())
    }

    pub fn singletons(people: impl IntoIterator<Item = Person>) -> Self {
        Partition {
            blocks: people.into_iter().map(|j| Block::from([j])).collect(),
        }
        .sorted()
    }

    fn sorted(mut self) -> Self {
        self.blocks.sort_by_key(|b| *b.iter().next().unwrap());
        self
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn people(&self) -> Block {
        self.blocks.iter().flatten().copied().collect()
    }

    pub fn is_singleton(&self, j: Person) -> bool {
        self.blocks.iter().any(|b| b.len() == 1 && b.contains(&j))
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            let ids: Vec<String> = b.iter().map(|j| j.to_string()).collect();
            f.write_str(&ids.join(","))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{self}}}")
    }
}

/// Conversation theme of a block; `Null` is silence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mark {
    Null,
    Theme(String),
}

/// A partition with one mark per block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkedPartition {
    pub partition: Partition,
    pub marks: Vec<Mark>,
}

impl MarkedPartition {
    pub fn new(partition: Partition, marks: Vec<Mark>) -> Result<Self> {
        if marks.len() != partition.blocks().len() {
            return Err(Error::invalid("marked partition", "one mark per block"));
        }
        Ok(MarkedPartition { partition, marks })
    }

    /// Every block silent.
    pub fn silent(partition: Partition) -> Self {
        let marks = vec![Mark::Null; partition.blocks().len()];
        MarkedPartition { partition, marks }
    }
}

/// Every partition of the people whose blocks all agree with `nf`, in
/// restricted-growth order.
pub fn enumerate_agreed_partitions(nf: &NeighborFn) -> Result<Vec<Partition>> {
    let people: Vec<Person> = nf.people().collect();
    if people.len() > MAX_PEOPLE {
        return Err(Error::pre(format!(
            "{} people exceed the enumeration limit of {MAX_PEOPLE}",
            people.len()
        )));
    }
    let mut out = Vec::new();
    let mut growth = vec![0usize; people.len()];
    fn rec(
        i: usize,
        used: usize,
        growth: &mut Vec<usize>,
        people: &[Person],
        nf: &NeighborFn,
        out: &mut Vec<Partition>,
    ) {
        if i == people.len() {
            let mut blocks = vec![Block::new(); used];
            for (p, g) in people.iter().zip(growth.iter()) {
                blocks[*g].insert(*p);
            }
            if blocks.iter().all(|b| nf.agrees(b)) {
                out.push(Partition::new(blocks).expect("restricted growth gives a partition"));
            }
            return;
        }
        for g in 0..=used {
            growth[i] = g;
            rec(i + 1, used.max(g + 1), growth, people, nf, out);
        }
    }
    rec(0, 0, &mut growth, &people, nf, &mut out);
    Ok(out)
}

/// Emergence and collapse intensities of subgroups.
pub trait RateSpec {
    /// Rate at which the agreed block `a` (|a| ≥ 2) forms from singletons.
    fn emergence(&self, a: &Block) -> f64;
    /// Rate at which block `a` (|a| ≥ 2) dissolves into singletons.
    fn collapse(&self, a: &Block) -> f64;
}

/// The same emergence rate for every subgroup, and the same collapse rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformRates {
    pub emergence: f64,
    pub collapse: f64,
}

impl RateSpec for UniformRates {
    fn emergence(&self, _: &Block) -> f64 {
        self.emergence
    }
    fn collapse(&self, _: &Block) -> f64 {
        self.collapse
    }
}

/// Chain over the agreed partitions of `nf`. A subgroup forms when all of
/// its members are alone; a subgroup collapses back into singletons.
pub fn build_partition_chain(
    nf: &NeighborFn,
    rates: &impl RateSpec,
) -> Result<(Vec<Partition>, RateMatrix)> {
    let states = enumerate_agreed_partitions(nf)?;
    let index: BTreeMap<&Partition, usize> = states.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let candidates: Vec<Block> = states
        .iter()
        .flat_map(|p| p.blocks.iter().cloned())
        .filter(|b| b.len() >= 2)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut edges = Vec::new();
    for (from, p) in states.iter().enumerate() {
        for a in &candidates {
            if a.iter().all(|j| p.is_singleton(*j)) {
                let mut blocks: Vec<Block> = p
                    .blocks()
                    .iter()
                    .filter(|b| !b.is_subset(a))
                    .cloned()
                    .collect();
                blocks.push(a.clone());
                let to = index[&Partition::new(blocks)?];
                let r = rates.emergence(a);
                if r < 0.0 {
                    return Err(Error::invalid("rates", format!("negative emergence rate for {a:?}")));
                }
                if r > 0.0 {
                    edges.push((from, to, r));
                }
            }
        }
        for b in p.blocks().iter().filter(|b| b.len() >= 2) {
            let mut blocks: Vec<Block> = p.blocks().iter().filter(|x| *x != b).cloned().collect();
            blocks.extend(b.iter().map(|j| Block::from([*j])));
            let to = index[&Partition::new(blocks)?];
            let r = rates.collapse(b);
            if r < 0.0 {
                return Err(Error::invalid("rates", format!("negative collapse rate for {b:?}")));
            }
            if r > 0.0 {
                edges.push((from, to, r));
            }
        }
    }
    let labels = states.iter().map(|p| p.to_string()).collect();
    Ok((states, RateMatrix::new(labels, &edges)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The four-person neighbor function with 11 agreed partitions.
    fn four() -> NeighborFn {
        NeighborFn::from_lists(&[(1, &[1, 2, 4]), (2, &[1, 2, 4]), (3, &[2, 3, 4]), (4, &[1, 3, 4])]).unwrap()
    }

    /// Bell numbers by the triangle recurrence, as an oracle.
    fn bell(n: usize) -> usize {
        let mut row = vec![1usize];
        for _ in 0..n {
            let mut next = vec![*row.last().unwrap()];
            for v in &row {
                let x = *next.last().unwrap() + v;
                next.push(x);
            }
            row = next;
        }
        row[0]
    }

    #[test]
    fn four_person_partitions() {
        let parts = enumerate_agreed_partitions(&four()).unwrap();
        assert_eq!(parts.len(), 11);
        assert!(parts.contains(&Partition::from_slices(&[&[1, 2], &[3, 4]]).unwrap()));
        assert!(!parts.contains(&Partition::from_slices(&[&[1, 3], &[2, 4]]).unwrap()));
        assert!(parts.contains(&Partition::singletons([1, 2, 3, 4])));
    }

    #[test]
    fn trivial_groups() {
        let one = NeighborFn::complete([7]).unwrap();
        assert_eq!(enumerate_agreed_partitions(&one).unwrap().len(), 1);
        for n in 1..=6 {
            let nf = NeighborFn::complete(1..=n as u32).unwrap();
            assert_eq!(enumerate_agreed_partitions(&nf).unwrap().len(), bell(n));
        }
        let big = NeighborFn::complete(1..=11).unwrap();
        assert!(enumerate_agreed_partitions(&big).is_err());
    }

    #[test]
    fn neighbor_validation() {
        assert!(NeighborFn::from_lists(&[(1, &[2]), (2, &[2])]).is_err());
        assert!(NeighborFn::from_lists(&[(1, &[1, 5])]).is_err());
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::from_slices(&[&[1, 2], &[2, 3]]).is_err());
        assert!(Partition::from_slices(&[&[1], &[]]).is_err());
        assert_eq!(Partition::from_slices(&[&[3, 4], &[1, 2]]).unwrap().to_string(), "1,2|3,4");
    }

    #[test]
    fn chain_is_conservative() {
        let (states, chain) = build_partition_chain(&four(), &UniformRates { emergence: 1.0, collapse: 2.0 }).unwrap();
        assert_eq!(states.len(), 11);
        for j in 0..chain.len() {
            let s: f64 = chain.q().column(j).sum();
            assert!(s.abs() < 1e-12);
        }
    }
}
