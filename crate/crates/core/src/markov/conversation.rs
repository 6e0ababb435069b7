//! The fourteen-state chain of a four-person conversation, themes ignored.
//!
//! States, numbered from 1 as `D1`..`D14`:
//! `D1` everyone alone; `D2`..`D5` person 1..4 alone beside a trio;
//! `D6`..`D11` the pairs 12, 34, 14, 23, 24, 13 beside two loners;
//! `D12`..`D14` the pair-of-pairs 12|34, 14|23, 13|24.

use crate::error::{Error, Result};

use super::ctmc::RateMatrix;
use super::partition::{NeighborFn, Partition, Person};

pub const STATES: usize = 14;

/// Undirected edges between states, 1-based. Each contributes both directions.
pub const EDGES: [(usize, usize); 16] = [
    (1, 2),
    (1, 3),
    (1, 4),
    (1, 5),
    (1, 6),
    (1, 7),
    (1, 8),
    (1, 9),
    (1, 10),
    (1, 11),
    (6, 12),
    (7, 12),
    (8, 13),
    (9, 13),
    (10, 14),
    (11, 14),
];

pub fn state_labels() -> Vec<String> {
    (1..=STATES).map(|k| format!("D{k}")).collect()
}

/// Partition behind each state, in state order.
pub fn state_partitions() -> Vec<Partition> {
    let p = |b: &[&[Person]]| Partition::from_slices(b).expect("fixture partition");
    vec![
        p(&[&[1], &[2], &[3], &[4]]),
        p(&[&[1], &[2, 3, 4]]),
        p(&[&[2], &[1, 3, 4]]),
        p(&[&[3], &[1, 2, 4]]),
        p(&[&[4], &[1, 2, 3]]),
        p(&[&[1, 2], &[3], &[4]]),
        p(&[&[3, 4], &[1], &[2]]),
        p(&[&[1, 4], &[2], &[3]]),
        p(&[&[2, 3], &[1], &[4]]),
        p(&[&[2, 4], &[1], &[3]]),
        p(&[&[1, 3], &[2], &[4]]),
        p(&[&[1, 2], &[3, 4]]),
        p(&[&[1, 4], &[2, 3]]),
        p(&[&[1, 3], &[2, 4]]),
    ]
}

/// Four people where `j` cannot start a talk with `j+1 (mod 4)`. Every pair
/// and trio agrees with it, the whole group does not, so its agreed
/// partitions are exactly the fourteen states.
pub fn cyclic_neighbors() -> NeighborFn {
    NeighborFn::from_lists(&[(1, &[1, 3, 4]), (2, &[1, 2, 4]), (3, &[1, 2, 3]), (4, &[2, 3, 4])])
        .expect("fixture neighbors")
}

/// Chain over the fourteen states with `m(j, k)` (1-based) on every edge
/// direction.
pub fn conversation_chain(m: impl Fn(usize, usize) -> f64) -> Result<RateMatrix> {
    let mut edges = Vec::with_capacity(2 * EDGES.len());
    for &(a, b) in &EDGES {
        edges.push((a - 1, b - 1, m(a, b)));
        edges.push((b - 1, a - 1, m(b, a)));
    }
    RateMatrix::new(state_labels(), &edges)
}

/// All rates 1.
pub fn unit_conversation_chain() -> RateMatrix {
    conversation_chain(|_, _| 1.0).expect("unit rates are valid")
}

/// Stationary distribution of a fourteen-state chain by its rational
/// formulas: `f1 = 1`, the trios by detailed balance with `D1`, the
/// pair-of-pairs by eliminating their two feeder pairs.
pub fn closed_form_stationary(chain: &RateMatrix) -> Result<Vec<f64>> {
    if chain.len() != STATES {
        return Err(Error::pre(format!("expected {STATES} states, got {}", chain.len())));
    }
    let m = |i: usize, j: usize| chain.rate(i - 1, j - 1);
    let div = |num: f64, den: f64, what: &str| {
        if den > 0.0 {
            Ok(num / den)
        } else {
            Err(Error::pre(format!("zero denominator rate in {what}")))
        }
    };
    let mut f = [0.0; STATES + 1];
    f[1] = 1.0;
    for k in 2..=5 {
        f[k] = div(m(1, k), m(k, 1), &format!("f{k}"))?;
    }
    // a pair-of-pairs state `top` fed by pairs `x` and `y`
    for (top, x, y) in [(12, 6, 7), (13, 8, 9), (14, 10, 11)] {
        let ax = m(x, 1) + m(x, top);
        let ay = m(y, 1) + m(y, top);
        let num = m(y, top) * m(1, y) * ax + m(1, x) * m(x, top) * ay;
        let den = m(y, 1) * m(top, y) * ax + m(x, 1) * m(top, x) * ay;
        f[top] = div(num, den, &format!("f{top}"))?;
        f[x] = div(m(top, x) * f[top] + m(1, x), ax, &format!("f{x}"))?;
        f[y] = div(m(top, y) * f[top] + m(1, y), ay, &format!("f{y}"))?;
    }
    let total: f64 = f[1..].iter().sum();
    Ok(f[1..].iter().map(|v| v / total).collect())
}

#[cfg(test)]
mod tests {
    use super::super::ctmc::stationary;
    use super::super::partition::{build_partition_chain, UniformRates};
    use super::*;

    #[test]
    fn two_direction_edges() {
        let q = unit_conversation_chain();
        assert_eq!(q.q()[(0, 0)], -10.0);
        assert_eq!(q.q()[(11, 11)], -2.0);
        assert_eq!(q.q()[(5, 5)], -2.0);
        assert_eq!(q.q()[(1, 1)], -1.0);
        assert_eq!(q.edges().len(), 32);
    }

    #[test]
    fn f2_is_a_rate_ratio() {
        let chain = conversation_chain(|j, k| match (j, k) {
            (1, 2) => 3.0,
            (2, 1) => 6.0,
            _ => 1.0,
        })
        .unwrap();
        let p = closed_form_stationary(&chain).unwrap();
        assert!((p[1] / p[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unit_rates_give_uniform() {
        let p = closed_form_stationary(&unit_conversation_chain()).unwrap();
        for v in p {
            assert!((v - 1.0 / 14.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_denominator_is_an_error() {
        let chain = conversation_chain(|j, k| if (j, k) == (3, 1) { 0.0 } else { 1.0 }).unwrap();
        assert!(closed_form_stationary(&chain).is_err());
    }

    #[test]
    fn skewed_rates_match_null_space() {
        let chain = conversation_chain(|j, k| 0.5 + ((7 * j + 3 * k) % 11) as f64 / 3.0).unwrap();
        let a = closed_form_stationary(&chain).unwrap();
        let b = stationary(&chain).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn generic_builder_reproduces_topology() {
        let (states, built) =
            build_partition_chain(&cyclic_neighbors(), &UniformRates { emergence: 1.0, collapse: 1.0 }).unwrap();
        let fixture = state_partitions();
        assert_eq!(states.len(), STATES);
        let pos: Vec<usize> = fixture
            .iter()
            .map(|p| states.iter().position(|s| s == p).expect("fixture state enumerated"))
            .collect();
        let unit = unit_conversation_chain();
        for i in 0..STATES {
            for j in 0..STATES {
                assert_eq!(unit.q()[(i, j)], built.q()[(pos[i], pos[j])], "entry ({i},{j})");
            }
        }
    }
}
