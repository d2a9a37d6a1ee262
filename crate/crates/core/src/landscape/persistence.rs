use serde::Serialize;

use crate::discretize::grid::Grid;

/// Neighbourhood structure for the sublevel sweep.
pub trait Adjacency {
    fn len(&self) -> usize;
    fn neighbors(&self, i: usize, out: &mut Vec<usize>);
}

impl Adjacency for Grid {
    fn len(&self) -> usize {
        Grid::len(self)
    }

    fn neighbors(&self, i: usize, out: &mut Vec<usize>) {
        self.axis_neighbors(i, out);
    }
}

/// A chain `0 – 1 – … – n−1`.
pub struct Path(pub usize);

impl Adjacency for Path {
    fn len(&self) -> usize {
        self.0
    }

    fn neighbors(&self, i: usize, out: &mut Vec<usize>) {
        out.clear();
        if i > 0 {
            out.push(i - 1);
        }
        if i + 1 < self.0 {
            out.push(i + 1);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MergeEvent {
    pub birth_cell: usize,
    pub birth_value: f64,
    pub merge_cell: usize,
    pub merge_value: f64,
    pub persistence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersistencePairing {
    pub events: Vec<MergeEvent>,
    pub survivor_cell: usize,
    pub survivor_value: f64,
}

/// Strict total order on cells: value first, then index.
#[inline]
pub fn key_less(values: &[f64], a: usize, b: usize) -> bool {
    match values[a].total_cmp(&values[b]) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Equal => a < b,
        std::cmp::Ordering::Greater => false,
    }
}

struct UnionFind {
    parent: Vec<usize>,
    birth: Vec<usize>,
}

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[i] != root {
            let next = self.parent[i];
            self.parent[i] = root;
            i = next;
        }
        root
    }
}

/// 0-dimensional sublevel-set persistence with the elder rule.
///
/// # Panics
///
/// If `values` is empty or its length differs from the adjacency size.
pub fn persistence_sweep(values: &[f64], adjacency: &impl Adjacency) -> PersistencePairing {
    let n = values.len();
    assert!(n > 0 && n == adjacency.len());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));

    const UNSEEN: usize = usize::MAX;
    let mut uf = UnionFind {
        parent: vec![UNSEEN; n],
        birth: vec![UNSEEN; n],
    };
    let mut events = Vec::new();
    let mut nb = Vec::with_capacity(4);
    let mut roots: Vec<usize> = Vec::with_capacity(4);

    for &i in &order {
        adjacency.neighbors(i, &mut nb);
        roots.clear();
        for &j in &nb {
            if uf.parent[j] != UNSEEN {
                let r = uf.find(j);
                if !roots.contains(&r) {
                    roots.push(r);
                }
            }
        }
        uf.parent[i] = i;
        match roots.len() {
            0 => uf.birth[i] = i,
            _ => {
                // Eldest component (lowest birth key) survives.
                roots.sort_by(|&a, &b| {
                    let (ba, bb) = (uf.birth[a], uf.birth[b]);
                    values[ba].total_cmp(&values[bb]).then(ba.cmp(&bb))
                });
                let survivor = roots[0];
                for &r in &roots[1..] {
                    let b = uf.birth[r];
                    events.push(MergeEvent {
                        birth_cell: b,
                        birth_value: values[b],
                        merge_cell: i,
                        merge_value: values[i],
                        persistence: values[i] - values[b],
                    });
                    uf.parent[r] = survivor;
                }
                uf.parent[i] = survivor;
            }
        }
    }
    let root = uf.find(order[0]);
    let survivor_cell = uf.birth[root];
    events.sort_by(|a, b| {
        b.persistence
            .total_cmp(&a.persistence)
            .then(a.birth_cell.cmp(&b.birth_cell))
    });
    PersistencePairing {
        events,
        survivor_cell,
        survivor_value: values[survivor_cell],
    }
}

/// Cells connected to `seed` through cells strictly below `bound` in the
/// (value, index) order. Returns a membership mask.
pub fn sublevel_component(
    values: &[f64],
    adjacency: &impl Adjacency,
    seed: usize,
    bound: usize,
) -> Vec<bool> {
    let mut inside = vec![false; values.len()];
    if !key_less(values, seed, bound) {
        return inside;
    }
    let mut stack = vec![seed];
    inside[seed] = true;
    let mut nb = Vec::with_capacity(4);
    while let Some(i) = stack.pop() {
        adjacency.neighbors(i, &mut nb);
        for &j in &nb {
            if !inside[j] && key_less(values, j, bound) {
                inside[j] = true;
                stack.push(j);
            }
        }
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_example() {
        let v = [3.0, 1.0, 2.0, 0.0, 4.0];
        let p = persistence_sweep(&v, &Path(5));
        assert_eq!(p.events.len(), 1);
        let e = p.events[0];
        assert_eq!((e.birth_value, e.merge_value), (1.0, 2.0));
        assert_eq!((e.birth_cell, e.merge_cell), (1, 2));
        assert_eq!(p.survivor_value, 0.0);
    }

    #[test]
    fn monotone_ramp() {
        let v: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let p = persistence_sweep(&v, &Path(v.len()));
        assert!(p.events.is_empty());
        assert_eq!(p.survivor_cell, 0);
    }

    #[test]
    fn ties_break_by_index() {
        let v = [0.0, 1.0, 0.0];
        let p = persistence_sweep(&v, &Path(3));
        assert_eq!(p.survivor_cell, 0);
        assert_eq!(p.events[0].birth_cell, 2);
    }

    proptest! {
        #[test]
        fn sweep_invariants(v in prop::collection::vec(-10.0f64..10.0, 1..200)) {
            let p = persistence_sweep(&v, &Path(v.len()));
            let local_minima = (0..v.len())
                .filter(|&i| {
                    (i == 0 || key_less(&v, i, i - 1)) && (i + 1 == v.len() || key_less(&v, i, i + 1))
                })
                .count();
            prop_assert_eq!(p.events.len() + 1, local_minima);
            for w in p.events.windows(2) {
                prop_assert!(w[0].persistence >= w[1].persistence);
            }
            for e in &p.events {
                prop_assert!(e.merge_value >= e.birth_value);
                prop_assert!(key_less(&v, e.birth_cell, e.merge_cell));
            }
            let gmin = (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b))).unwrap();
            prop_assert_eq!(p.survivor_cell, gmin);
        }
    }
}
