//! Primal network simplex for the balanced transportation problem.
//!
//! Spanning-tree bookkeeping follows the classic thread/successor layout:
//! an artificial root joined to every node, block-search pricing and the
//! strongly feasible leaving-arc rule, which rules out cycling. Supplies are
//! integers, so every basic flow is exact.

use crate::error::{Error, Result};

const INF: i64 = i64::MAX;

/// Optimal flow and node potentials of a transportation problem.
#[derive(Debug, Clone)]
pub struct FlowSolution {
    /// Flow on each bipartite arc, row-major `n_sources x n_sinks`.
    /// Only nonzero entries are listed.
    pub flows: Vec<(usize, usize, i64)>,
    /// Potentials `u_i` of the source nodes.
    pub source_potentials: Vec<f64>,
    /// Potentials `v_j` of the sink nodes, so that `c_ij - u_i - v_j >= 0`
    /// with equality on basic arcs.
    pub sink_potentials: Vec<f64>,
    pub pivots: usize,
}

struct Solver<'a> {
    n_src: usize,
    n_snk: usize,
    node_num: usize,
    arc_num: usize,
    cost: &'a [f64],
    art_cost: f64,

    flow: Vec<i64>,
    // 1: nonbasic at lower bound, 0: basic
    state: Vec<i8>,
    pi: Vec<f64>,

    parent: Vec<usize>,
    pred: Vec<usize>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    forward: Vec<bool>,
    dirty_revs: Vec<usize>,

    // artificial arc endpoints (arc id = arc_num + node)
    art_source: Vec<usize>,
    art_target: Vec<usize>,

    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: i64,

    next_arc: usize,
    block_size: usize,
}

const NONE: usize = usize::MAX;

impl<'a> Solver<'a> {
    fn source(&self, e: usize) -> usize {
        if e < self.arc_num {
            e / self.n_snk
        } else {
            self.art_source[e - self.arc_num]
        }
    }

    fn target(&self, e: usize) -> usize {
        if e < self.arc_num {
            self.n_src + e % self.n_snk
        } else {
            self.art_target[e - self.arc_num]
        }
    }

    fn arc_cost(&self, e: usize) -> f64 {
        if e < self.arc_num {
            self.cost[e]
        } else if self.art_source[e - self.arc_num] == self.node_num {
            self.art_cost
        } else {
            0.0
        }
    }

    fn new(supply: &[i64], demand: &[i64], cost: &'a [f64]) -> Self {
        let n_src = supply.len();
        let n_snk = demand.len();
        let node_num = n_src + n_snk;
        let arc_num = n_src * n_snk;
        let all_arcs = arc_num + node_num;
        let root = node_num;

        // every root path u -> root -> v can be replaced by the direct arc
        // (u, v) of the complete bipartite graph, so exceeding the largest
        // cost is enough to drive artificial flow out
        let max_cost = cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
        let art_cost = max_cost + 1.0;

        let mut s = Solver {
            n_src,
            n_snk,
            node_num,
            arc_num,
            cost,
            art_cost,
            flow: vec![0; all_arcs],
            state: vec![1; all_arcs],
            pi: vec![0.0; node_num + 1],
            parent: vec![NONE; node_num + 1],
            pred: vec![NONE; node_num + 1],
            thread: vec![0; node_num + 1],
            rev_thread: vec![0; node_num + 1],
            succ_num: vec![0; node_num + 1],
            last_succ: vec![0; node_num + 1],
            forward: vec![false; node_num + 1],
            dirty_revs: Vec::new(),
            art_source: vec![0; node_num],
            art_target: vec![0; node_num],
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0,
            next_arc: 0,
            block_size: ((arc_num as f64).sqrt() as usize).max(10),
        };

        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = node_num + 1;
        s.last_succ[root] = root - 1;
        for u in 0..node_num {
            let e = arc_num + u;
            let sup = if u < n_src { supply[u] } else { -demand[u - n_src] };
            s.parent[u] = root;
            s.pred[u] = e;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            s.state[e] = 0;
            if sup >= 0 {
                s.forward[u] = true;
                s.pi[u] = 0.0;
                s.art_source[u] = u;
                s.art_target[u] = root;
                s.flow[e] = sup;
            } else {
                s.forward[u] = false;
                s.pi[u] = art_cost;
                s.art_source[u] = root;
                s.art_target[u] = u;
                s.flow[e] = -sup;
            }
        }
        s
    }

    /// Block search over the bipartite arcs.
    fn find_entering_arc(&mut self, eps: f64) -> bool {
        let mut min = -eps;
        let mut cnt = self.block_size;
        let mut found = false;
        let total = self.arc_num;
        let mut e = self.next_arc;
        for _ in 0..total {
            if self.state[e] == 1 {
                let i = e / self.n_snk;
                let j = self.n_src + e % self.n_snk;
                let c = self.cost[e] + self.pi[i] - self.pi[j];
                if c < min {
                    min = c;
                    self.in_arc = e;
                    found = true;
                }
            }
            e += 1;
            if e == total {
                e = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if found {
                    self.next_arc = e;
                    return true;
                }
                cnt = self.block_size;
            }
        }
        if found {
            self.next_arc = e;
        }
        found
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    fn find_leaving_arc(&mut self) -> bool {
        // entering arcs are always at their lower bound
        let first = self.source(self.in_arc);
        let second = self.target(self.in_arc);
        self.delta = INF;
        let mut result = 0;

        let mut u = first;
        while u != self.join {
            let e = self.pred[u];
            let d = if self.forward[u] { self.flow[e] } else { INF };
            if d < self.delta {
                self.delta = d;
                self.u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            let e = self.pred[u];
            let d = if self.forward[u] { INF } else { self.flow[e] };
            if d <= self.delta {
                self.delta = d;
                self.u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        result != 0 && self.delta < INF
    }

    fn change_flow(&mut self) {
        let val = self.delta;
        if val > 0 {
            self.flow[self.in_arc] += val;
            let mut u = self.source(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += if self.forward[u] { -val } else { val };
                u = self.parent[u];
            }
            let mut u = self.target(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += if self.forward[u] { val } else { -val };
                u = self.parent[u];
            }
        }
        self.state[self.in_arc] = 0;
        let out = self.pred[self.u_out];
        self.state[out] = 1;
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;

        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        let mut u = self.last_succ[u_in];
        let mut right = self.thread[u];

        let last = if old_rev_thread == v_in {
            self.thread[self.last_succ[u_out]]
        } else {
            self.thread[v_in]
        };

        // re-hang the stem u_in .. u_out below v_in, fixing the thread order
        let mut stem = u_in;
        self.thread[v_in] = stem;
        self.dirty_revs.clear();
        self.dirty_revs.push(v_in);
        let mut par_stem = v_in;
        while stem != u_out {
            let new_stem = self.parent[stem];
            self.thread[u] = new_stem;
            self.dirty_revs.push(u);

            let w = self.rev_thread[stem];
            self.thread[w] = right;
            self.rev_thread[right] = w;

            self.parent[stem] = par_stem;
            par_stem = stem;
            stem = new_stem;

            u = if self.last_succ[stem] == self.last_succ[par_stem] {
                self.rev_thread[par_stem]
            } else {
                self.last_succ[stem]
            };
            right = self.thread[u];
        }
        self.parent[u_out] = par_stem;
        self.thread[u] = last;
        self.rev_thread[last] = u;
        self.last_succ[u_out] = u;

        if old_rev_thread != v_in {
            self.thread[old_rev_thread] = right;
            self.rev_thread[right] = old_rev_thread;
        }

        for k in 0..self.dirty_revs.len() {
            let u = self.dirty_revs[k];
            let t = self.thread[u];
            self.rev_thread[t] = u;
        }

        // pred, forward, succ_num and last_succ along the reversed stem
        let mut tmp_sc = 0usize;
        let tmp_ls = self.last_succ[u_out];
        let mut u = u_out;
        while u != u_in {
            let w = self.parent[u];
            self.pred[u] = self.pred[w];
            self.forward[u] = !self.forward[w];
            tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[w];
            self.succ_num[u] = tmp_sc;
            self.last_succ[w] = tmp_ls;
            u = w;
        }
        self.pred[u_in] = self.in_arc;
        self.forward[u_in] = u_in == self.source(self.in_arc);
        self.succ_num[u_in] = old_succ_num;

        let (up_limit_in, up_limit_out) = if self.last_succ[join] == v_in { (NONE, join) } else { (join, NONE) };

        let mut u = v_in;
        while u != up_limit_in && u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = self.last_succ[u_out];
            u = self.parent[u];
        }
        let replacement = if join != old_rev_thread && v_in != old_rev_thread {
            old_rev_thread
        } else {
            self.last_succ[u_out]
        };
        let mut u = v_out;
        while u != up_limit_out && u != NONE && self.last_succ[u] == old_last_succ {
            self.last_succ[u] = replacement;
            u = self.parent[u];
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let u_in = self.u_in;
        let c = self.arc_cost(self.pred[u_in]);
        let sigma = if self.forward[u_in] {
            self.pi[self.v_in] - self.pi[u_in] - c
        } else {
            self.pi[self.v_in] - self.pi[u_in] + c
        };
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    /// Recomputes every potential from the tree, root first, to shed the
    /// rounding accumulated by incremental updates.
    fn refresh_potentials(&mut self) {
        let root = self.node_num;
        self.pi[root] = 0.0;
        let mut u = self.thread[root];
        while u != root {
            let e = self.pred[u];
            let p = self.parent[u];
            let c = self.arc_cost(e);
            // forward: arc u -> parent, so pi[u] = pi[parent] - c
            self.pi[u] = if self.forward[u] { self.pi[p] - c } else { self.pi[p] + c };
            u = self.thread[u];
        }
    }

    #[cfg(test)]
    fn check_tree(&self) {
        let root = self.node_num;
        let mut order = vec![root];
        let mut u = self.thread[root];
        while u != root {
            order.push(u);
            u = self.thread[u];
            assert!(order.len() <= self.node_num + 1, "thread is not a cycle");
        }
        assert_eq!(order.len(), self.node_num + 1);
        let mut pos = vec![0; self.node_num + 1];
        for (k, &u) in order.iter().enumerate() {
            pos[u] = k;
            assert_eq!(self.rev_thread[self.thread[u]], u);
        }
        for u in 0..self.node_num {
            let p = self.parent[u];
            assert!(pos[p] < pos[u], "parent after child in thread");
            let e = self.pred[u];
            assert_eq!(self.state[e], 0);
            let (s, t) = (self.source(e), self.target(e));
            assert!((s == u && t == p) || (s == p && t == u));
            assert_eq!(self.forward[u], s == u);
            // subtree is the contiguous thread block starting at u
            let last = self.last_succ[u];
            assert_eq!(pos[last] - pos[u] + 1, self.succ_num[u]);
        }
    }

    fn run(&mut self) -> Result<usize> {
        let scale = self.cost.iter().fold(1.0f64, |a, &c| a.max(c.abs()));
        let eps = 1e-11 * scale;
        let mut pivots = 0usize;
        let mut since_refresh = 0usize;
        loop {
            if !self.find_entering_arc(eps) {
                // confirm optimality against freshly computed potentials
                self.refresh_potentials();
                if !self.find_entering_arc(eps) {
                    break;
                }
            }
            self.find_join_node();
            if !self.find_leaving_arc() {
                return Err(Error::Solver("unbounded pivot".into()));
            }
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
            #[cfg(test)]
            self.check_tree();
            pivots += 1;
            since_refresh += 1;
            if since_refresh >= 50_000 {
                self.refresh_potentials();
                since_refresh = 0;
            }
        }
        // the problem is balanced, so no flow may remain on artificial arcs
        if (self.arc_num..self.arc_num + self.node_num).any(|e| self.flow[e] != 0) {
            return Err(Error::Solver("infeasible: flow left on artificial arcs".into()));
        }
        Ok(pivots)
    }
}

/// Solves `min Σ c_ij x_ij` subject to row sums `supply` and column sums
/// `demand`, `x >= 0`. `cost` is row-major `supply.len() x demand.len()`.
/// Supplies and demands must be nonnegative with equal totals.
pub fn solve_transport(supply: &[i64], demand: &[i64], cost: &[f64]) -> Result<FlowSolution> {
    assert_eq!(cost.len(), supply.len() * demand.len());
    if supply.iter().sum::<i64>() != demand.iter().sum::<i64>() {
        return Err(Error::Solver("unbalanced supplies".into()));
    }
    let mut solver = Solver::new(supply, demand, cost);
    let pivots = solver.run()?;
    solver.refresh_potentials();
    let n_snk = demand.len();
    let flows = (0..solver.arc_num)
        .filter(|&e| solver.flow[e] != 0)
        .map(|e| (e / n_snk, e % n_snk, solver.flow[e]))
        .collect();
    // arc i -> j has reduced cost c_ij + pi_i - pi_j; dual u_i = -pi_i, v_j = pi_j
    let source_potentials = solver.pi[..solver.n_src].iter().map(|p| -p).collect();
    let sink_potentials = solver.pi[solver.n_src..solver.node_num].to_vec();
    Ok(FlowSolution {
        flows,
        source_potentials,
        sink_potentials,
        pivots,
    })
}
