//! Maximum bipartite matching via Hopcroft-Karp layered augmenting paths.

/// Adjacency-list bipartite graph with `n_left` left and `n_right` right
/// vertices.
#[derive(Debug, Clone)]
pub struct BipartiteGraph {
    pub n_left: usize,
    pub n_right: usize,
    adj: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    pub fn new(n_left: usize, n_right: usize) -> Self {
        Self { n_left, n_right, adj: vec![Vec::new(); n_left] }
    }

    pub fn add_edge(&mut self, left: usize, right: usize) {
        debug_assert!(left < self.n_left && right < self.n_right);
        self.adj[left].push(right);
    }
}

#[derive(Debug, Clone)]
pub struct Matching {
    pub pair_left: Vec<Option<usize>>,
    pub pair_right: Vec<Option<usize>>,
    pub size: usize,
}

const UNLAYERED: u32 = u32::MAX;

/// Hopcroft-Karp: repeatedly BFS-layer the graph from free left vertices and
/// augment along a maximal set of vertex-disjoint shortest paths.
pub fn maximum_matching(graph: &BipartiteGraph) -> Matching {
    let n = graph.n_left;
    let mut pair_left: Vec<Option<usize>> = vec![None; n];
    let mut pair_right: Vec<Option<usize>> = vec![None; graph.n_right];
    let mut layer = vec![UNLAYERED; n];
    let mut queue = Vec::with_capacity(n);
    let mut size = 0usize;

    loop {
        // BFS from free left vertices
        queue.clear();
        for u in 0..n {
            if pair_left[u].is_none() {
                layer[u] = 0;
                queue.push(u);
            } else {
                layer[u] = UNLAYERED;
            }
        }
        let mut found_augmenting = false;
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            for &v in &graph.adj[u] {
                match pair_right[v] {
                    None => found_augmenting = true,
                    Some(w) => {
                        if layer[w] == UNLAYERED {
                            layer[w] = layer[u] + 1;
                            queue.push(w);
                        }
                    }
                }
            }
        }
        if !found_augmenting {
            break;
        }
        // DFS augmentation along layered paths
        fn try_augment(
            u: usize,
            graph: &BipartiteGraph,
            layer: &mut [u32],
            pair_left: &mut [Option<usize>],
            pair_right: &mut [Option<usize>],
        ) -> bool {
            for idx in 0..graph.adj[u].len() {
                let v = graph.adj[u][idx];
                match pair_right[v] {
                    None => {
                        pair_right[v] = Some(u);
                        pair_left[u] = Some(v);
                        return true;
                    }
                    Some(w) => {
                        if layer[w] == layer[u] + 1
                            && try_augment(w, graph, layer, pair_left, pair_right)
                        {
                            pair_right[v] = Some(u);
                            pair_left[u] = Some(v);
                            return true;
                        }
                    }
                }
            }
            layer[u] = UNLAYERED;
            false
        }
        for u in 0..n {
            if pair_left[u].is_none()
                && try_augment(u, graph, &mut layer, &mut pair_left, &mut pair_right)
            {
                size += 1;
            }
        }
    }

    Matching { pair_left, pair_right, size }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_matching_on_cycle() {
        // 0-0, 0-1, 1-1, 1-2, 2-2, 2-0: perfect matching exists
        let mut g = BipartiteGraph::new(3, 3);
        for (l, r) in [(0, 0), (0, 1), (1, 1), (1, 2), (2, 2), (2, 0)] {
            g.add_edge(l, r);
        }
        assert_eq!(maximum_matching(&g).size, 3);
    }

    #[test]
    fn blocked_vertex_limits_matching() {
        // both left vertices only reach right vertex 0
        let mut g = BipartiteGraph::new(2, 2);
        g.add_edge(0, 0);
        g.add_edge(1, 0);
        assert_eq!(maximum_matching(&g).size, 1);
    }

    #[test]
    fn matches_greedy_lower_bound_on_random_graphs() {
        let mut rng = crate::test_rng(3);
        for _ in 0..50 {
            let n = rng.usize_in(1, 12);
            let m = rng.usize_in(1, 12);
            let mut g = BipartiteGraph::new(n, m);
            let mut edges = std::collections::HashSet::new();
            for _ in 0..rng.usize_in(0, n * m) {
                let e = (rng.usize_in(0, n - 1), rng.usize_in(0, m - 1));
                if edges.insert(e) {
                    g.add_edge(e.0, e.1);
                }
            }
            let hk = maximum_matching(&g);
            // consistency: pair arrays agree and matched edges exist
            let mut count = 0;
            for u in 0..n {
                if let Some(v) = hk.pair_left[u] {
                    assert_eq!(hk.pair_right[v], Some(u));
                    assert!(g.adj[u].contains(&v));
                    count += 1;
                }
            }
            assert_eq!(count, hk.size);
            // maximum >= greedy
            let mut used = vec![false; m];
            let mut greedy = 0;
            for u in 0..n {
                for &v in &g.adj[u] {
                    if !used[v] {
                        used[v] = true;
                        greedy += 1;
                        break;
                    }
                }
            }
            assert!(hk.size >= greedy);
        }
    }
}
