//! Dinic max-flow with float capacities, used by the parametric ratio-cut
//! solver. Graphs here are tiny (one node per state plus source and sink).

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    rev: usize,
    cap: f64,
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    arcs: Vec<Vec<Arc>>,
    eps: f64,
}

impl FlowNetwork {
    pub fn new(n: usize, eps: f64) -> Self {
        FlowNetwork {
            arcs: vec![Vec::new(); n],
            eps,
        }
    }

    /// Directed arc with residual-only reverse.
    pub fn add_arc(&mut self, from: usize, to: usize, cap: f64) {
        let rev_from = self.arcs[to].len();
        let rev_to = self.arcs[from].len();
        self.arcs[from].push(Arc {
            to,
            rev: rev_from,
            cap,
        });
        self.arcs[to].push(Arc {
            to: from,
            rev: rev_to,
            cap: 0.0,
        });
    }

    /// Undirected edge: both directions share one capacity pool each way.
    pub fn add_undirected(&mut self, u: usize, v: usize, cap: f64) {
        let rev_u = self.arcs[v].len();
        let rev_v = self.arcs[u].len();
        self.arcs[u].push(Arc {
            to: v,
            rev: rev_u,
            cap,
        });
        self.arcs[v].push(Arc {
            to: u,
            rev: rev_v,
            cap,
        });
    }

    fn levels(&self, s: usize, t: usize) -> Option<Vec<i32>> {
        let mut level = vec![-1; self.arcs.len()];
        let mut queue = std::collections::VecDeque::new();
        level[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for arc in &self.arcs[u] {
                if arc.cap > self.eps && level[arc.to] < 0 {
                    level[arc.to] = level[u] + 1;
                    queue.push_back(arc.to);
                }
            }
        }
        if level[t] >= 0 {
            Some(level)
        } else {
            None
        }
    }

    fn augment(
        &mut self,
        u: usize,
        t: usize,
        pushed: f64,
        level: &[i32],
        iter: &mut [usize],
    ) -> f64 {
        if u == t {
            return pushed;
        }
        while iter[u] < self.arcs[u].len() {
            let (to, cap, rev) = {
                let arc = &self.arcs[u][iter[u]];
                (arc.to, arc.cap, arc.rev)
            };
            if cap > self.eps && level[to] == level[u] + 1 {
                let d = self.augment(to, t, pushed.min(cap), level, iter);
                if d > self.eps {
                    self.arcs[u][iter[u]].cap -= d;
                    self.arcs[to][rev].cap += d;
                    return d;
                }
            }
            iter[u] += 1;
        }
        0.0
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut flow = 0.0;
        while let Some(level) = self.levels(s, t) {
            let mut iter = vec![0usize; self.arcs.len()];
            loop {
                let pushed = self.augment(s, t, f64::INFINITY, &level, &mut iter);
                if pushed <= self.eps {
                    break;
                }
                flow += pushed;
            }
        }
        flow
    }

    /// Source side of a minimum cut; call after `max_flow`.
    pub fn min_cut_side(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.arcs.len()];
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(u) = stack.pop() {
            for arc in &self.arcs[u] {
                if arc.cap > self.eps && !seen[arc.to] {
                    seen[arc.to] = true;
                    stack.push(arc.to);
                }
            }
        }
        seen
    }
}
