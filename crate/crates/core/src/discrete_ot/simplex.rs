// Primal network simplex for the balanced, uncapacitated transportation problem.
//
// Follows LEMON's NetworkSimplex (block search pivoting, strongly feasible
// spanning tree with thread/successor bookkeeping) specialised to a complete
// bipartite graph whose arcs are never materialised: arc `e < m` runs from
// supply node `e / nt` to demand node `ns + e % nt` and costs `cost[e]`.
// Float tolerances follow the usual adaptation used by Python OT.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{numerical, Error, Result};
use crate::math::sqrt;

const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;
const NONE: usize = usize::MAX;
const EPSILON: f64 = 2.220_446_049_250_313e-15;
const MIN_BLOCK_SIZE: usize = 10;
/// The interrupt hook is polled once per this many pivots.
const POLL_EVERY: u64 = 1024;

pub(crate) struct Solution {
    /// Row-major `ns x nt` flow.
    pub plan: Vec<f64>,
}

pub(crate) struct TransportSimplex<'a> {
    ns: usize,
    nt: usize,
    /// Number of real arcs, `ns * nt`.
    m: usize,
    cost: &'a [f64],

    // Indexed by arc; artificial arcs live at `m + u` for node `u`.
    flow: Vec<f64>,
    state: Vec<i8>,
    art_source: Vec<usize>,
    art_target: Vec<usize>,
    art_cost: Vec<f64>,

    // Indexed by node; the artificial root is node `ns + nt`.
    pi: Vec<f64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pred_dir: Vec<i8>,
    dirty_revs: Vec<usize>,

    block_size: usize,
    next_arc: usize,

    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
}

impl<'a> TransportSimplex<'a> {
    pub fn new(a: &[f64], b: &[f64], cost: &'a [f64]) -> Self {
        let ns = a.len();
        let nt = b.len();
        let m = ns * nt;
        debug_assert_eq!(cost.len(), m);
        let node_num = ns + nt;
        let root = node_num;

        let max_cost = cost.iter().fold(0.0_f64, |acc, &c| acc.max(c));
        let art = (max_cost + 1.0) * node_num as f64;

        let mut s = Self {
            ns,
            nt,
            m,
            cost,
            flow: vec![0.0; m + node_num],
            state: vec![STATE_LOWER; m + node_num],
            art_source: vec![0; node_num],
            art_target: vec![0; node_num],
            art_cost: vec![0.0; node_num],
            pi: vec![0.0; node_num + 1],
            parent: vec![NONE; node_num + 1],
            pred: vec![NONE; node_num + 1],
            thread: vec![0; node_num + 1],
            rev_thread: vec![0; node_num + 1],
            succ_num: vec![0; node_num + 1],
            last_succ: vec![0; node_num + 1],
            pred_dir: vec![DIR_UP; node_num + 1],
            dirty_revs: Vec::new(),
            block_size: (sqrt(m as f64) as usize).max(MIN_BLOCK_SIZE),
            next_arc: 0,
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
        };

        // Initial basis: a star around the root made of artificial arcs.
        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = node_num + 1;
        s.last_succ[root] = node_num - 1;
        for u in 0..node_num {
            let supply = if u < ns { a[u] } else { -b[u - ns] };
            let e = m + u;
            s.parent[u] = root;
            s.pred[u] = e;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            s.state[e] = STATE_TREE;
            if supply >= 0.0 {
                s.pred_dir[u] = DIR_UP;
                s.pi[u] = 0.0;
                s.art_source[u] = u;
                s.art_target[u] = root;
                s.flow[e] = supply;
                s.art_cost[u] = 0.0;
            } else {
                s.pred_dir[u] = DIR_DOWN;
                s.pi[u] = art;
                s.art_source[u] = root;
                s.art_target[u] = u;
                s.flow[e] = -supply;
                s.art_cost[u] = art;
            }
        }
        s
    }

    #[inline]
    fn source(&self, e: usize) -> usize {
        if e < self.m {
            e / self.nt
        } else {
            self.art_source[e - self.m]
        }
    }

    #[inline]
    fn target(&self, e: usize) -> usize {
        if e < self.m {
            self.ns + e % self.nt
        } else {
            self.art_target[e - self.m]
        }
    }

    #[inline]
    fn arc_cost(&self, e: usize) -> f64 {
        if e < self.m {
            self.cost[e]
        } else {
            self.art_cost[e - self.m]
        }
    }

    /// Runs to optimality. `interrupt` is polled periodically and stops the
    /// solver with [`Error::Interrupted`] when it returns `true`.
    pub fn run(
        mut self,
        max_pivots: u64,
        interrupt: &mut dyn FnMut() -> bool,
    ) -> Result<Solution> {
        let mut pivots = 0u64;
        while self.find_entering_arc() {
            pivots += 1;
            if pivots > max_pivots {
                return Err(numerical!(
                    "network simplex did not reach optimality within {max_pivots} pivots"
                ));
            }
            if pivots % POLL_EVERY == 0 && interrupt() {
                return Err(Error::Interrupted);
            }
            self.find_join_node();
            if !self.find_leaving_arc() {
                return Err(numerical!("transport problem reported as unbounded"));
            }
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
        }

        // Whatever is left on artificial arcs is the supply imbalance.
        let total: f64 = self.flow[..self.m].iter().sum::<f64>().max(1.0);
        let residual = self.flow[self.m..].iter().fold(0.0_f64, |a, &f| a.max(f));
        if residual > 1e-9 * total {
            return Err(numerical!(
                "transport problem infeasible: {residual:e} mass left on artificial arcs"
            ));
        }
        let mut plan = self.flow;
        plan.truncate(self.m);
        Ok(Solution { plan })
    }

    #[inline]
    fn reduced_cost(&self, i: usize, j: usize, e: usize) -> f64 {
        self.cost[e] + self.pi[i] - self.pi[self.ns + j]
    }

    #[inline]
    fn pivot_threshold(&self) -> f64 {
        let e = self.in_arc;
        let a = self.pi[self.source(e)]
            .abs()
            .max(self.pi[self.target(e)].abs())
            .max(self.arc_cost(e).abs());
        -EPSILON * a
    }

    // Block search pivot rule over the real arcs.
    fn find_entering_arc(&mut self) -> bool {
        let mut min = 0.0;
        let mut cnt = self.block_size;
        let start = self.next_arc;
        let found = self
            .scan_arcs(start, self.m, &mut min, &mut cnt)
            .or_else(|| self.scan_arcs(0, start, &mut min, &mut cnt));
        if let Some(e) = found {
            self.next_arc = e;
            return true;
        }
        min < 0.0 && min < self.pivot_threshold()
    }

    fn scan_arcs(&mut self, from: usize, to: usize, min: &mut f64, cnt: &mut usize) -> Option<usize> {
        if from >= to {
            return None;
        }
        let nt = self.nt;
        let mut i = from / nt;
        let mut j = from % nt;
        for e in from..to {
            if self.state[e] == STATE_LOWER {
                let c = self.reduced_cost(i, j, e);
                if c < *min {
                    *min = c;
                    self.in_arc = e;
                }
            }
            *cnt -= 1;
            if *cnt == 0 {
                if *min < self.pivot_threshold() {
                    return Some(e);
                }
                *cnt = self.block_size;
            }
            j += 1;
            if j == nt {
                j = 0;
                i += 1;
            }
        }
        None
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

    // The entering arc is always at its lower bound, so the cycle is oriented
    // along it. Uncapacitated arcs only block the augmentation through flow
    // running against the cycle.
    fn find_leaving_arc(&mut self) -> bool {
        let first = self.source(self.in_arc);
        let second = self.target(self.in_arc);
        self.delta = f64::INFINITY;
        let mut result = 0;

        let mut u = first;
        while u != self.join {
            if self.pred_dir[u] == DIR_UP {
                let d = self.flow[self.pred[u]];
                if d < self.delta {
                    self.delta = d;
                    self.u_out = u;
                    result = 1;
                }
            }
            u = self.parent[u];
        }
        u = second;
        while u != self.join {
            if self.pred_dir[u] == DIR_DOWN {
                let d = self.flow[self.pred[u]];
                if d <= self.delta {
                    self.delta = d;
                    self.u_out = u;
                    result = 2;
                }
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
        result != 0
    }

    fn change_flow(&mut self) {
        let val = self.delta;
        if val > 0.0 {
            self.flow[self.in_arc] += val;
            let mut u = self.source(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
            u = self.target(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
        }
        self.state[self.in_arc] = STATE_TREE;
        let out = self.pred[self.u_out];
        self.flow[out] = 0.0;
        self.state[out] = STATE_LOWER;
    }

    fn update_tree_structure(&mut self) {
        let old_rev_thread = self.rev_thread[self.u_out];
        let old_succ_num = self.succ_num[self.u_out];
        let old_last_succ = self.last_succ[self.u_out];
        let v_out = self.parent[self.u_out];
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source(self.in_arc) {
                DIR_UP
            } else {
                DIR_DOWN
            };

            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            // When old_rev_thread == v_in, join and v_out coincide.
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };

            // Reverse the stem between u_in and u_out.
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for k in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[k];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            // Predecessors, directions and successor counts along the stem.
            let mut tmp_sc = 0;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc += self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source(self.in_arc) {
                DIR_UP
            } else {
                DIR_DOWN
            };
            self.succ_num[u_in] = old_succ_num;
        }

        // last_succ from v_in towards the root.
        let up_limit_out = if self.last_succ[self.join] == v_in {
            self.join
        } else {
            NONE
        };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        // last_succ from v_out towards the root.
        if self.join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != NONE && u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != NONE && u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != self.join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != self.join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let sigma = self.pi[self.v_in]
            - self.pi[self.u_in]
            - self.pred_dir[self.u_in] as f64 * self.arc_cost(self.in_arc);
        let end = self.thread[self.last_succ[self.u_in]];
        let mut u = self.u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }
}
