use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::scene::NodeId;

#[derive(Clone, Copy, PartialEq)]
struct Cost(f64);

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Shortest path by Dijkstra over an implicit graph; ties between equal
/// costs resolve toward smaller node ids.
pub fn dijkstra(
    from: NodeId,
    to: NodeId,
    neighbors: impl Fn(NodeId) -> Vec<(NodeId, f64)>,
) -> Option<Vec<NodeId>> {
    let mut dist: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut prev: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(from, 0.0);
    heap.push(Reverse((Cost(0.0), from)));
    while let Some(Reverse((Cost(d), n))) = heap.pop() {
        if d > dist[&n] {
            continue;
        }
        if n == to {
            let mut path = vec![to];
            let mut cur = to;
            while let Some(&p) = prev.get(&cur) {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        for (m, w) in neighbors(n) {
            let nd = d + w;
            if dist.get(&m).is_none_or(|&old| nd < old) {
                dist.insert(m, nd);
                prev.insert(m, n);
                heap.push(Reverse((Cost(nd), m)));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefers_cheaper_detour() {
        let edges = [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 5.0), (2, 3, 1.0)];
        let nb = |n: NodeId| {
            edges
                .iter()
                .filter_map(|&(a, b, w)| if a == n { Some((b, w)) } else if b == n { Some((a, w)) } else { None })
                .collect()
        };
        assert_eq!(dijkstra(0, 3, nb), Some(vec![0, 1, 2, 3]));
        assert_eq!(dijkstra(2, 2, nb), Some(vec![2]));
        assert_eq!(dijkstra(0, 9, nb), None);
    }
}
