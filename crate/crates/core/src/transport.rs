//! Min-cost transportation from weighted sources to capacitated sinks,
//! solved by successive shortest paths on the residual network.

const EPS: f64 = 1e-15;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    cap: f64,
    cost: f64,
    rev: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct TransportPlan {
    /// `flows[s][c]`: mass shipped from source `s` to sink `c`.
    pub flows: Vec<Vec<f64>>,
    /// Supply left at each source because no sink with spare capacity is reachable.
    pub unshipped: Vec<f64>,
}

struct Network {
    adj: Vec<Vec<Edge>>,
}

impl Network {
    fn new(nodes: usize) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: f64, cost: f64) -> (usize, usize) {
        let fwd = self.adj[from].len();
        let back = self.adj[to].len();
        self.adj[from].push(Edge {
            to,
            cap,
            cost,
            rev: back,
        });
        self.adj[to].push(Edge {
            to: from,
            cap: 0.0,
            cost: -cost,
            rev: fwd,
        });
        (from, fwd)
    }

    /// Bellman-Ford (queue based) shortest path tree from `src` over edges with
    /// residual capacity. Returns the predecessor edge of every node.
    fn shortest_paths(&self, src: usize) -> Vec<Option<(usize, usize)>> {
        let n = self.adj.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![None; n];
        let mut queued = vec![false; n];
        let mut queue = std::collections::VecDeque::from([src]);
        dist[src] = 0.0;
        queued[src] = true;
        while let Some(u) = queue.pop_front() {
            queued[u] = false;
            for (k, e) in self.adj[u].iter().enumerate() {
                if e.cap > EPS && dist[u] + e.cost < dist[e.to] - 1e-9 {
                    dist[e.to] = dist[u] + e.cost;
                    pred[e.to] = Some((u, k));
                    if !queued[e.to] {
                        queued[e.to] = true;
                        queue.push_back(e.to);
                    }
                }
            }
        }
        pred
    }
}

/// `cost[s][c]` is `None` when sink `c` cannot be reached from source `s`.
pub(crate) fn solve(supply: &[f64], capacity: &[f64], cost: &[Vec<Option<usize>>]) -> TransportPlan {
    let ns = supply.len();
    let nc = capacity.len();
    let src = 0;
    let sink = ns + nc + 1;
    let mut net = Network::new(ns + nc + 2);

    let supply_edges: Vec<(usize, usize)> = supply
        .iter()
        .enumerate()
        .map(|(s, &q)| net.add_edge(src, 1 + s, q, 0.0))
        .collect();
    let mut route_edges = vec![vec![None; nc]; ns];
    for s in 0..ns {
        for c in 0..nc {
            if let Some(d) = cost[s][c] {
                route_edges[s][c] = Some(net.add_edge(1 + s, 1 + ns + c, f64::INFINITY, d as f64));
            }
        }
    }
    for (c, &cap) in capacity.iter().enumerate() {
        net.add_edge(1 + ns + c, sink, cap, 0.0);
    }

    loop {
        let pred = net.shortest_paths(src);
        if pred[sink].is_none() {
            break;
        }
        let mut bottleneck = f64::INFINITY;
        let mut v = sink;
        while let Some((u, k)) = pred[v] {
            bottleneck = bottleneck.min(net.adj[u][k].cap);
            v = u;
        }
        if !(bottleneck > EPS) || !bottleneck.is_finite() {
            break;
        }
        let mut v = sink;
        while let Some((u, k)) = pred[v] {
            let rev = net.adj[u][k].rev;
            net.adj[u][k].cap -= bottleneck;
            net.adj[v][rev].cap += bottleneck;
            v = u;
        }
    }

    let flows = route_edges
        .iter()
        .map(|row| {
            row.iter()
                .map(|edge| match *edge {
                    Some((u, k)) => {
                        let e = &net.adj[u][k];
                        net.adj[e.to][e.rev].cap
                    }
                    None => 0.0,
                })
                .collect()
        })
        .collect();
    let unshipped = supply_edges
        .iter()
        .map(|&(u, k)| net.adj[u][k].cap.max(0.0))
        .collect();
    TransportPlan { flows, unshipped }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total_cost(plan: &TransportPlan, cost: &[Vec<Option<usize>>]) -> f64 {
        let mut total = 0.0;
        for (s, row) in plan.flows.iter().enumerate() {
            for (c, &f) in row.iter().enumerate() {
                if f > 0.0 {
                    total += f * cost[s][c].unwrap() as f64;
                }
            }
        }
        total
    }

    #[test]
    fn ships_to_nearest_when_capacity_allows() {
        let cost = vec![vec![Some(1), Some(5)], vec![Some(4), Some(2)]];
        let plan = solve(&[0.5, 0.5], &[1.0, 1.0], &cost);
        assert!((plan.flows[0][0] - 0.5).abs() < 1e-12);
        assert!((plan.flows[1][1] - 0.5).abs() < 1e-12);
        assert!(plan.unshipped.iter().all(|&u| u < 1e-12));
    }

    #[test]
    fn reroutes_when_nearest_sink_is_full() {
        // both sources prefer sink 0, which only takes 0.5; optimal sends
        // source 1 (the smaller regret) elsewhere
        let cost = vec![vec![Some(1), Some(10)], vec![Some(1), Some(2)]];
        let plan = solve(&[0.5, 0.5], &[0.5, 0.5], &cost);
        assert!((plan.flows[0][0] - 0.5).abs() < 1e-12);
        assert!((plan.flows[1][1] - 0.5).abs() < 1e-12);
        assert!((total_cost(&plan, &cost) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn brute_force_agreement_on_small_instances() {
        // 2 sources x 2 sinks with tight capacities: the optimum is a vertex of
        // a one-parameter family; scan it finely.
        let cost = vec![vec![Some(3), Some(1)], vec![Some(2), Some(7)]];
        let supply = [0.3, 0.7];
        let capacity = [0.6, 0.4];
        let plan = solve(&supply, &capacity, &cost);
        let mut best = f64::INFINITY;
        for k in 0..=3000 {
            let f00 = k as f64 * 1e-4;
            let f01 = supply[0] - f00;
            let f10 = capacity[0] - f00;
            let f11 = supply[1] - f10;
            if f01 < -1e-12 || f10 < -1e-12 || f11 < -1e-12 || f01 + f11 > capacity[1] + 1e-12 {
                continue;
            }
            best = best.min(3.0 * f00 + f01 + 2.0 * f10 + 7.0 * f11);
        }
        assert!((total_cost(&plan, &cost) - best).abs() < 1e-9);
    }

    #[test]
    fn unreachable_supply_is_reported() {
        let cost = vec![vec![None], vec![Some(1)]];
        let plan = solve(&[0.25, 0.75], &[1.0], &cost);
        assert!((plan.unshipped[0] - 0.25).abs() < 1e-12);
        assert!((plan.flows[1][0] - 0.75).abs() < 1e-12);
    }
}
