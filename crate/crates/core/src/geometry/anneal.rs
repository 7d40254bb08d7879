//! Simulated annealing over axis orders that keep every tree cluster
//! contiguous.
//!
//! With the other axis fixed, the energy of a row order is a constant minus
//! the summed affinity of adjacent rows, so each move is scored from the
//! handful of adjacencies it changes.

use rand::Rng as _;

use crate::rng::Rng;

use crate::model::UltrametricTree;

/// Symmetric table of adjacency gains between axis members.
pub(crate) struct Affinity {
    size: usize,
    data: Vec<i64>,
}

impl Affinity {
    pub(crate) fn build(size: usize, f: impl Fn(usize, usize) -> i64) -> Self {
        let mut data = vec![0; size * size];
        for a in 0..size {
            for b in a..size {
                let v = f(a, b);
                data[a * size + b] = v;
                data[b * size + a] = v;
            }
        }
        Self { size, data }
    }

    #[inline]
    fn get(&self, a: usize, b: usize) -> i64 {
        self.data[a * self.size + b]
    }

    /// Summed affinity of consecutive members of `order`.
    pub(crate) fn path_gain(&self, order: &[usize]) -> i64 {
        order.windows(2).map(|w| self.get(w[0], w[1])).sum()
    }
}

#[derive(Debug, Clone)]
struct Node {
    children: Vec<usize>,
    item: Option<usize>,
    size: usize,
}

/// The tree's clusters as nested, ordered nodes. Leaves are axis members.
#[derive(Debug, Clone)]
pub(crate) struct OrderTree {
    nodes: Vec<Node>,
    movable: Vec<usize>,
    order: Vec<usize>,
    start: Vec<usize>,
}

impl OrderTree {
    /// Children of every node are sorted ascending by `key(members)`, ties
    /// broken by smallest member index.
    pub(crate) fn new(tree: &UltrametricTree, key: impl Fn(&[usize]) -> f64) -> Self {
        let n = tree.axis_size;
        let mut nodes = vec![Node {
            children: Vec::new(),
            item: None,
            size: n,
        }];
        let mut members: Vec<Vec<usize>> = vec![(0..n).collect()];
        // node currently representing each member's cluster at the level above
        let mut owner = vec![0usize; n];
        for level in tree.levels.iter().skip(1) {
            let mut next_owner = owner.clone();
            for cluster in level {
                let parent = owner[cluster[0]];
                if members[parent].len() == cluster.len() {
                    continue;
                }
                let id = nodes.len();
                nodes.push(Node {
                    children: Vec::new(),
                    item: None,
                    size: cluster.len(),
                });
                let mut sorted = cluster.clone();
                sorted.sort_unstable();
                members.push(sorted);
                nodes[parent].children.push(id);
                for &x in cluster {
                    next_owner[x] = id;
                }
            }
            owner = next_owner;
        }
        for x in 0..n {
            let id = nodes.len();
            nodes.push(Node {
                children: Vec::new(),
                item: Some(x),
                size: 1,
            });
            members.push(vec![x]);
            nodes[owner[x]].children.push(id);
        }
        for node in nodes.iter_mut() {
            node.children.sort_by(|&a, &b| {
                key(&members[a])
                    .total_cmp(&key(&members[b]))
                    .then(members[a][0].cmp(&members[b][0]))
            });
        }
        let movable = (0..nodes.len()).filter(|&i| nodes[i].children.len() >= 2).collect();
        let mut t = Self {
            nodes,
            movable,
            order: Vec::with_capacity(n),
            start: Vec::new(),
        };
        t.rebuild();
        t
    }

    fn rebuild(&mut self) {
        self.order.clear();
        self.start = vec![0; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            self.start[id] = self.order.len();
            if let Some(x) = self.nodes[id].item {
                self.order.push(x);
            }
            stack.extend(self.nodes[id].children.iter().rev());
        }
    }

    pub(crate) fn order(&self) -> &[usize] {
        &self.order
    }

    fn reverse_subtree(&mut self, id: usize) {
        let mut stack = vec![id];
        while let Some(u) = stack.pop() {
            self.nodes[u].children.reverse();
            stack.extend(self.nodes[u].children.iter().copied());
        }
    }

    fn gain_at(&self, aff: &Affinity, left: Option<usize>, right: Option<usize>) -> i64 {
        match (left, right) {
            (Some(a), Some(b)) => aff.get(self.order[a], self.order[b]),
            _ => 0,
        }
    }

    /// Proposes a random move; returns its gain change and a closure-free
    /// description that [`Self::apply`] can commit.
    fn propose(&self, aff: &Affinity, rng: &mut Rng) -> Option<(i64, Move)> {
        if self.movable.is_empty() {
            return None;
        }
        let node = self.movable[rng.gen_range(0..self.movable.len())];
        let k = self.nodes[node].children.len();
        let a = rng.gen_range(0..k);
        let mut b = rng.gen_range(0..k - 1);
        if b >= a {
            b += 1;
        }
        let (i, j) = (a.min(b), a.max(b));
        let ci = self.nodes[node].children[i];
        let cj = self.nodes[node].children[j];
        let s1 = self.start[ci];
        let e1 = s1 + self.nodes[ci].size - 1;
        let s2 = self.start[cj];
        let e2 = s2 + self.nodes[cj].size - 1;
        let last = self.order.len() - 1;
        let before_s1 = s1.checked_sub(1);
        let after_e2 = (e2 < last).then_some(e2 + 1);
        if rng.gen_bool(0.5) {
            // reverse the run of children i..=j
            let before = self.gain_at(aff, before_s1, Some(s1)) + self.gain_at(aff, Some(e2), after_e2);
            let after = self.gain_at(aff, before_s1, Some(e2)) + self.gain_at(aff, Some(s1), after_e2);
            Some((after - before, Move::Reverse { node, i, j }))
        } else {
            let (before, after) = if e1 + 1 == s2 {
                (
                    self.gain_at(aff, before_s1, Some(s1))
                        + self.gain_at(aff, Some(e1), Some(s2))
                        + self.gain_at(aff, Some(e2), after_e2),
                    self.gain_at(aff, before_s1, Some(s2))
                        + self.gain_at(aff, Some(e2), Some(s1))
                        + self.gain_at(aff, Some(e1), after_e2),
                )
            } else {
                let (m0, m1) = (e1 + 1, s2 - 1);
                (
                    self.gain_at(aff, before_s1, Some(s1))
                        + self.gain_at(aff, Some(e1), Some(m0))
                        + self.gain_at(aff, Some(m1), Some(s2))
                        + self.gain_at(aff, Some(e2), after_e2),
                    self.gain_at(aff, before_s1, Some(s2))
                        + self.gain_at(aff, Some(e2), Some(m0))
                        + self.gain_at(aff, Some(m1), Some(s1))
                        + self.gain_at(aff, Some(e1), after_e2),
                )
            };
            Some((after - before, Move::Swap { node, i, j }))
        }
    }

    fn apply(&mut self, mv: Move) {
        match mv {
            Move::Reverse { node, i, j } => {
                let run: Vec<usize> = self.nodes[node].children[i..=j].to_vec();
                for c in run {
                    self.reverse_subtree(c);
                }
                self.nodes[node].children[i..=j].reverse();
            }
            Move::Swap { node, i, j } => self.nodes[node].children.swap(i, j),
        }
        self.rebuild();
    }

    /// Reverses the whole order (energy is unchanged).
    pub(crate) fn flip(&mut self) {
        self.reverse_subtree(0);
        self.rebuild();
    }
}

#[derive(Debug, Clone, Copy)]
enum Move {
    Reverse { node: usize, i: usize, j: usize },
    Swap { node: usize, i: usize, j: usize },
}

/// Metropolis annealing on the path gain. `schedule` temperatures are in
/// energy units; `steps` is split evenly across them. Returns the best tree
/// state visited and its gain.
pub(crate) fn anneal(
    start: OrderTree,
    aff: &Affinity,
    schedule: &[f64],
    steps: usize,
    rng: &mut Rng,
) -> (OrderTree, i64) {
    let mut current = start;
    let mut gain = aff.path_gain(current.order());
    let mut best = current.clone();
    let mut best_gain = gain;
    if schedule.is_empty() || current.movable.is_empty() {
        return (best, best_gain);
    }
    let per_stage = steps / schedule.len();
    for &temp in schedule {
        for _ in 0..per_stage {
            let Some((delta, mv)) = current.propose(aff, rng) else {
                break;
            };
            let accept = delta >= 0 || rng.gen::<f64>() < (delta as f64 / temp).exp();
            if accept {
                current.apply(mv);
                gain += delta;
                debug_assert_eq!(gain, aff.path_gain(current.order()));
                if gain > best_gain {
                    best_gain = gain;
                    best = current.clone();
                }
            }
        }
    }
    (best, best_gain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn tree() -> UltrametricTree {
        UltrametricTree::new(
            6,
            vec![
                vec![vec![0, 1, 2, 3, 4, 5]],
                vec![vec![0, 1, 2], vec![3, 4, 5]],
                vec![vec![0, 1], vec![2], vec![3, 4, 5]],
            ],
            vec![3.0, 2.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn moves_keep_clusters_contiguous_and_gain_exact() {
        let t = tree();
        let mut ot = OrderTree::new(&t, |m| -(m[0] as f64));
        assert!(t.is_contiguous_in(ot.order()));
        let aff = Affinity::build(6, |a, b| ((a * 7 + b * 7) % 5) as i64 + (a == b) as i64);
        let mut rng = rng_from_seed(3);
        for _ in 0..500 {
            let before = aff.path_gain(ot.order());
            let (delta, mv) = ot.propose(&aff, &mut rng).unwrap();
            ot.apply(mv);
            assert_eq!(aff.path_gain(ot.order()), before + delta);
            assert!(t.is_contiguous_in(ot.order()));
            let mut sorted = ot.order().to_vec();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..6).collect::<Vec<_>>());
        }
    }

    #[test]
    fn anneal_finds_best_path_on_small_instance() {
        // Affinity rewards consecutive labels: best path is 0-1-2-3-4-5.
        let trivial = UltrametricTree::new(
            5,
            vec![vec![vec![0, 1, 2, 3, 4]], vec![vec![0], vec![1], vec![2], vec![3], vec![4]]],
            vec![1.0, 0.0],
        )
        .unwrap();
        let aff = Affinity::build(5, |a, b| if a.abs_diff(b) == 1 { 3 } else { 0 });
        let start = OrderTree::new(&trivial, |m| ((m[0] * 3) % 5) as f64);
        let mut rng = rng_from_seed(9);
        let (best, gain) = anneal(start, &aff, &[2.0, 1.0, 0.3], 3000, &mut rng);
        assert_eq!(gain, 12);
        let o = best.order();
        assert!(o == [0, 1, 2, 3, 4] || o == [4, 3, 2, 1, 0]);
    }

    #[test]
    fn flip_reverses() {
        let mut ot = OrderTree::new(&tree(), |m| m[0] as f64);
        let before = ot.order().to_vec();
        ot.flip();
        let mut rev = before.clone();
        rev.reverse();
        assert_eq!(ot.order(), rev.as_slice());
    }
}
