use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::partition::CellSet;
use crate::sparse::CsrMatrix;

/// A row whose mass falls short of 1 by more than this leaks out of `P₁`.
/// Sampled entries are multiples of `p_ℓ / M`, far above this.
pub const LEAK_TOL: f64 = 1e-12;

/// Closed strongly connected classes of the transition graph of `p1`.
///
/// A class is closed when no row in it has an edge leaving the class and no
/// row loses mass (to the attractor cells or through discarded escape).
/// The result is empty exactly when `p1ⁿ → 0`. Indices are local to `p1`.
pub fn find_closed_subpartitions(p1: &CsrMatrix) -> Vec<CellSet> {
    let n = p1.nrows();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, p1.nnz());
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for (i, j, v) in p1.triplets() {
        if v > 0.0 {
            graph.add_edge(nodes[i], nodes[j], ());
        }
    }
    let mut comp = vec![usize::MAX; n];
    let sccs = tarjan_scc(&graph);
    for (c, members) in sccs.iter().enumerate() {
        for node in members {
            comp[node.index()] = c;
        }
    }
    let mut closed: Vec<CellSet> = sccs
        .iter()
        .enumerate()
        .filter(|(c, members)| {
            members.iter().all(|node| {
                let i = node.index();
                let leaks = 1.0 - p1.row_sum(i) > LEAK_TOL;
                !leaks && p1.row(i).all(|(j, v)| v == 0.0 || comp[j] == *c)
            })
        })
        .map(|(_, members)| {
            CellSet::new(members.iter().map(|v| v.index()).collect(), n)
                .expect("node indices are in range")
        })
        .collect();
    closed.sort_by_key(|s| s.as_slice().first().copied());
    closed
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaking_scalar_is_open() {
        assert!(find_closed_subpartitions(&CsrMatrix::from_dense(&[vec![0.5]])).is_empty());
    }

    #[test]
    fn two_cycle_is_closed() {
        let p = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let closed = find_closed_subpartitions(&p);
        assert_eq!(closed.len(), 1);
        assert_eq!(closed[0].as_slice(), &[0, 1]);
    }

    #[test]
    fn every_class_leaks() {
        let p = CsrMatrix::from_dense(&[vec![0.9, 0.1], vec![0.0, 0.7]]);
        assert!(find_closed_subpartitions(&p).is_empty());
    }

    #[test]
    fn closed_class_reached_from_transient_states() {
        // 0 -> 1 <-> 2, plus an absorbing 3 reached from 0
        let p = CsrMatrix::from_dense(&[
            vec![0.0, 0.5, 0.0, 0.5],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.4, 0.6, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ]);
        let closed = find_closed_subpartitions(&p);
        let sets: Vec<&[usize]> = closed.iter().map(CellSet::as_slice).collect();
        assert_eq!(sets, vec![&[1, 2][..], &[3][..]]);
    }

    #[test]
    fn zero_matrix_is_transient() {
        assert!(find_closed_subpartitions(&CsrMatrix::zeros(3, 3)).is_empty());
    }
}
