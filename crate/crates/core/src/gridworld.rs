//! Binned operational region: grid geometry, transition constraints and the
//! graph queries the planners need (layers, shortest-path hops, connectivity).
//!
//! Bins are linearized row-major over the grid dimensions (last axis fastest).
//! Obstacle bins keep their index but carry no edges at all.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("grid must have 2 or 3 axes, got {0}")]
    BadAxisCount(usize),
    #[error("every axis must hold at least one bin")]
    EmptyAxis,
    #[error("bin {bin} is out of range for a region of {bins} bins")]
    OutOfRange { bin: usize, bins: usize },
    #[error("bin {0} is marked both as obstacle and as base")]
    ObstacleInBase(usize),
    #[error("base set is empty")]
    EmptyBase,
    #[error("target set is empty")]
    EmptyTargets,
    #[error("bin {0} is an obstacle")]
    ObstacleBin(usize),
    #[error("bin {0} cannot reach the target set")]
    Unreachable(usize),
}

/// The binned region: axis sizes, obstacle bins and the defended base bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    dims: Vec<usize>,
    obstacles: BTreeSet<usize>,
    base_bins: BTreeSet<usize>,
}

impl GridSpec {
    pub fn new(
        dims: Vec<usize>,
        obstacles: BTreeSet<usize>,
        base_bins: BTreeSet<usize>,
    ) -> Result<Self, GridError> {
        if !(2..=3).contains(&dims.len()) {
            return Err(GridError::BadAxisCount(dims.len()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(GridError::EmptyAxis);
        }
        let bins: usize = dims.iter().product();
        if let Some(&bin) = obstacles.iter().chain(base_bins.iter()).find(|&&b| b >= bins) {
            return Err(GridError::OutOfRange { bin, bins });
        }
        if base_bins.is_empty() {
            return Err(GridError::EmptyBase);
        }
        if let Some(&bin) = obstacles.intersection(&base_bins).next() {
            return Err(GridError::ObstacleInBase(bin));
        }
        Ok(Self {
            dims,
            obstacles,
            base_bins,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Total number of bins `m`, obstacles included.
    pub fn num_bins(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn obstacles(&self) -> &BTreeSet<usize> {
        &self.obstacles
    }

    pub fn base_bins(&self) -> &BTreeSet<usize> {
        &self.base_bins
    }

    pub fn is_obstacle(&self, bin: usize) -> bool {
        self.obstacles.contains(&bin)
    }

    pub fn free_bins(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_bins()).filter(move |b| !self.obstacles.contains(b))
    }

    /// Row-major index of `coords`, or `None` when outside the grid.
    pub fn index(&self, coords: &[usize]) -> Option<usize> {
        if coords.len() != self.dims.len() {
            return None;
        }
        let mut idx = 0;
        for (&c, &d) in coords.iter().zip(&self.dims) {
            if c >= d {
                return None;
            }
            idx = idx * d + c;
        }
        Some(idx)
    }

    pub fn coords(&self, bin: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        let mut rest = bin;
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = rest % d;
            rest /= d;
        }
        out
    }

    /// All bins inside the inclusive axis-aligned box `[min, max]`.
    pub fn box_bins(&self, min: &[usize], max: &[usize]) -> Result<BTreeSet<usize>, GridError> {
        if min.len() != self.dims.len() || max.len() != self.dims.len() {
            return Err(GridError::BadAxisCount(min.len().max(max.len())));
        }
        let mut out = BTreeSet::new();
        for bin in 0..self.num_bins() {
            let c = self.coords(bin);
            if c.iter().zip(min).zip(max).all(|((&x, &lo), &hi)| lo <= x && x <= hi) {
                out.insert(bin);
            }
        }
        for (axis, (&lo, &hi)) in min.iter().zip(max).enumerate() {
            if lo > hi || hi >= self.dims[axis] {
                return Err(GridError::OutOfRange {
                    bin: hi,
                    bins: self.dims[axis],
                });
            }
        }
        Ok(out)
    }
}

/// Allowed one-step transitions: `allows(i, j)` is true iff an agent in bin
/// `i` may move to bin `j`. Every non-obstacle bin carries a self-loop;
/// obstacle bins carry no edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    successors: Vec<Vec<usize>>,
    predecessors: Vec<Vec<usize>>,
}

impl AdjacencyMatrix {
    /// Builds a general directed graph over `bins` nodes. Self-loops are added
    /// for every bin not in `blocked`; edges touching a blocked bin are dropped.
    pub fn from_edges(
        bins: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        blocked: &BTreeSet<usize>,
    ) -> Result<Self, GridError> {
        let mut successors = vec![BTreeSet::new(); bins];
        for i in (0..bins).filter(|i| !blocked.contains(i)) {
            successors[i].insert(i);
        }
        for (i, j) in edges {
            let bad = if i >= bins { i } else { j };
            if i >= bins || j >= bins {
                return Err(GridError::OutOfRange { bin: bad, bins });
            }
            if blocked.contains(&i) || blocked.contains(&j) {
                continue;
            }
            successors[i].insert(j);
        }
        let successors: Vec<Vec<usize>> =
            successors.into_iter().map(|s| s.into_iter().collect()).collect();
        let mut predecessors = vec![Vec::new(); bins];
        for (i, out) in successors.iter().enumerate() {
            for &j in out {
                predecessors[j].push(i);
            }
        }
        Ok(Self {
            successors,
            predecessors,
        })
    }

    pub fn size(&self) -> usize {
        self.successors.len()
    }

    pub fn allows(&self, from: usize, to: usize) -> bool {
        self.successors[from].binary_search(&to).is_ok()
    }

    /// Bins reachable in one step from `bin`, ascending, including `bin` itself.
    pub fn successors(&self, bin: usize) -> &[usize] {
        &self.successors[bin]
    }

    pub fn predecessors(&self, bin: usize) -> &[usize] {
        &self.predecessors[bin]
    }

    /// Obstacle bins are exactly the bins without a self-loop.
    pub fn is_blocked(&self, bin: usize) -> bool {
        self.successors[bin].is_empty()
    }

    pub fn free_bins(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.size()).filter(move |&b| !self.is_blocked(b))
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        let m = self.size();
        let mut out = vec![vec![0u8; m]; m];
        for (i, row) in out.iter_mut().enumerate() {
            for &j in &self.successors[i] {
                row[j] = 1;
            }
        }
        out
    }

    /// Graph distance from each bin to the nearest bin of `targets`, moving
    /// only through bins accepted by `passable` (targets are always accepted).
    pub fn distances_to_within(
        &self,
        targets: &BTreeSet<usize>,
        passable: impl Fn(usize) -> bool,
    ) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.size()];
        let mut queue = VecDeque::new();
        for &t in targets {
            if !self.is_blocked(t) {
                dist[t] = Some(0);
                queue.push_back(t);
            }
        }
        while let Some(j) = queue.pop_front() {
            let d = dist[j].unwrap_or(0);
            for &i in &self.predecessors[j] {
                if dist[i].is_none() && passable(i) {
                    dist[i] = Some(d + 1);
                    queue.push_back(i);
                }
            }
        }
        dist
    }

    pub fn distances_to(&self, targets: &BTreeSet<usize>) -> Vec<Option<usize>> {
        self.distances_to_within(targets, |_| true)
    }

    /// Next hop toward `targets` for every bin with a finite distance in
    /// `dist`; smallest bin index wins ties.
    pub fn next_hops_from_distances(&self, dist: &[Option<usize>]) -> Vec<Option<usize>> {
        (0..self.size())
            .map(|i| match dist[i] {
                Some(0) => Some(i),
                Some(d) => self.successors[i]
                    .iter()
                    .copied()
                    .find(|&j| dist[j] == Some(d - 1)),
                None => None,
            })
            .collect()
    }

    /// True iff the subgraph induced on `bins` is strongly connected.
    pub fn is_strongly_connected(&self, bins: &BTreeSet<usize>) -> bool {
        let Some(&root) = bins.iter().next() else {
            return true;
        };
        let forward = self.reach_within(root, bins, true);
        let backward = self.reach_within(root, bins, false);
        forward.len() == bins.len() && backward.len() == bins.len()
    }

    fn reach_within(&self, root: usize, bins: &BTreeSet<usize>, forward: bool) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([root]);
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            let next = if forward {
                &self.successors[u]
            } else {
                &self.predecessors[u]
            };
            for &w in next {
                if bins.contains(&w) && seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// Strongly connected components of the subgraph induced on `bins`,
    /// ordered by their smallest member.
    pub fn strongly_connected_components(&self, bins: &BTreeSet<usize>) -> Vec<BTreeSet<usize>> {
        let mut assigned = BTreeSet::new();
        let mut out = Vec::new();
        for &b in bins {
            if assigned.contains(&b) {
                continue;
            }
            let fwd = self.reach_within(b, bins, true);
            let bwd = self.reach_within(b, bins, false);
            let comp: BTreeSet<usize> = fwd.intersection(&bwd).copied().collect();
            assigned.extend(comp.iter().copied());
            out.push(comp);
        }
        out
    }
}

/// Face-neighbour connectivity plus self-loops; obstacle bins are isolated.
pub fn build_grid_adjacency(grid: &GridSpec) -> AdjacencyMatrix {
    let mut edges = Vec::new();
    for bin in grid.free_bins() {
        let coords = grid.coords(bin);
        for axis in 0..coords.len() {
            for delta in [-1i64, 1] {
                let c = coords[axis] as i64 + delta;
                if c < 0 || c >= grid.dims()[axis] as i64 {
                    continue;
                }
                let mut nb = coords.clone();
                nb[axis] = c as usize;
                if let Some(j) = grid.index(&nb) {
                    edges.push((bin, j));
                }
            }
        }
    }
    AdjacencyMatrix::from_edges(grid.num_bins(), edges, grid.obstacles())
        .expect("grid edges are in range by construction")
}

/// Bins grouped by graph distance to the base: `layer(p)` holds the bins at
/// distance exactly `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryLayers {
    layers: Vec<BTreeSet<usize>>,
    depth: Vec<Option<usize>>,
}

impl BoundaryLayers {
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Layer `p`, 1-based; `None` when `p` is 0 or past the outermost layer.
    pub fn layer(&self, p: usize) -> Option<&BTreeSet<usize>> {
        p.checked_sub(1).and_then(|i| self.layers.get(i))
    }

    pub fn layers(&self) -> &[BTreeSet<usize>] {
        &self.layers
    }

    /// Distance of `bin` to the base (0 inside it); `None` for obstacles and
    /// bins that cannot reach the base.
    pub fn depth(&self, bin: usize) -> Option<usize> {
        self.depth.get(bin).copied().flatten()
    }

    pub fn depths(&self) -> &[Option<usize>] {
        &self.depth
    }
}

pub fn compute_boundary_layers(
    adjacency: &AdjacencyMatrix,
    base: &BTreeSet<usize>,
) -> Result<BoundaryLayers, GridError> {
    if base.is_empty() {
        return Err(GridError::EmptyBase);
    }
    if let Some(&b) = base.iter().find(|&&b| b >= adjacency.size()) {
        return Err(GridError::OutOfRange {
            bin: b,
            bins: adjacency.size(),
        });
    }
    if let Some(&b) = base.iter().find(|&&b| adjacency.is_blocked(b)) {
        return Err(GridError::ObstacleBin(b));
    }
    let depth = adjacency.distances_to(base);
    let max = depth.iter().flatten().copied().max().unwrap_or(0);
    let mut layers = vec![BTreeSet::new(); max];
    for (bin, d) in depth.iter().enumerate() {
        if let Some(d) = *d {
            if d > 0 {
                layers[d - 1].insert(bin);
            }
        }
    }
    Ok(BoundaryLayers { layers, depth })
}

/// Next hop along a shortest path toward `targets` for every non-obstacle
/// bin (`None` for obstacles). Targets map to themselves.
pub fn shortest_path_next_hop(
    adjacency: &AdjacencyMatrix,
    targets: &BTreeSet<usize>,
) -> Result<Vec<Option<usize>>, GridError> {
    if targets.is_empty() {
        return Err(GridError::EmptyTargets);
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= adjacency.size()) {
        return Err(GridError::OutOfRange {
            bin: t,
            bins: adjacency.size(),
        });
    }
    let dist = adjacency.distances_to(targets);
    if let Some(bin) = adjacency.free_bins().find(|&b| dist[b].is_none()) {
        return Err(GridError::Unreachable(bin));
    }
    Ok(adjacency.next_hops_from_distances(&dist))
}
