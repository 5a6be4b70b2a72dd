//! Probability vectors, column-stochastic transition matrices and Markov
//! chain synthesis toward a desired stationary distribution.
//!
//! Matrices use the column convention: `M[i, j]` is the probability of moving
//! from bin `j` to bin `i`, so a density evolves as `x(k+1) = M x(k)`.
//!
//! Synthesis builds the recurrent part (bins where the target has mass) with a
//! Metropolis-Hastings chain over neighbouring bins and routes every transient
//! bin toward the recurrent set along shortest paths. [`synthesize_from`]
//! additionally handles targets whose support splits into several strongly
//! connected pieces, by splitting transient flow so that each piece receives
//! exactly its share of the mass when started from a known distribution.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::ops::Index;

use thiserror::Error;

use crate::gridworld::AdjacencyMatrix;
use crate::transport;

/// Densities at or below this value are treated as zero when classifying bins.
pub const ZERO_MASS: f64 = 1e-12;
/// Allowed deviation of a probability vector's total mass from one.
pub const MASS_TOLERANCE: f64 = 1e-9;
/// Allowed deviation of a matrix column sum from one.
pub const COLUMN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarkovError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("entry {index} is negative or not finite ({value})")]
    InvalidEntry { index: usize, value: f64 },
    #[error("total mass {0} is not one")]
    NotNormalized(f64),
    #[error("column {column} sums to {sum}")]
    NotStochastic { column: usize, sum: f64 },
    #[error("row index {row} out of range in column {column}")]
    RowOutOfRange { row: usize, column: usize },
    #[error("target distribution puts mass on obstacle bin {0}")]
    MassOnObstacle(usize),
    #[error("recurrent bins split into {components} disconnected components")]
    DisconnectedRecurrentStates { components: usize },
    #[error("bin {0} cannot reach any recurrent bin")]
    Unreachable(usize),
    #[error("cannot parse matrix text: {0}")]
    Parse(String),
}

/// A probability vector over the bins.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityVector {
    values: Vec<f64>,
}

impl DensityVector {
    pub fn new(values: Vec<f64>) -> Result<Self, MarkovError> {
        check_entries(&values)?;
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(MarkovError::NotNormalized(total));
        }
        Ok(Self { values })
    }

    /// Normalizes nonnegative weights to unit mass.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, MarkovError> {
        check_entries(&weights)?;
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(MarkovError::NotNormalized(total));
        }
        Ok(Self {
            values: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn basis(len: usize, bin: usize) -> Self {
        let mut values = vec![0.0; len];
        values[bin] = 1.0;
        Self { values }
    }

    pub fn uniform_over(len: usize, bins: &BTreeSet<usize>) -> Result<Self, MarkovError> {
        let mut weights = vec![0.0; len];
        for &b in bins {
            if b >= len {
                return Err(MarkovError::DimensionMismatch {
                    expected: len,
                    found: b + 1,
                });
            }
            weights[b] = 1.0;
        }
        Self::from_weights(weights)
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Bins holding more than [`ZERO_MASS`].
    pub fn support(&self) -> BTreeSet<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &x)| x > ZERO_MASS)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn mass_on(&self, bins: &BTreeSet<usize>) -> f64 {
        bins.iter().filter_map(|&b| self.values.get(b)).sum()
    }
}

impl Index<usize> for DensityVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl AsRef<[f64]> for DensityVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

fn check_entries(values: &[f64]) -> Result<(), MarkovError> {
    match values.iter().position(|v| !v.is_finite() || *v < 0.0) {
        Some(index) => Err(MarkovError::InvalidEntry {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

/// Column-stochastic matrix stored column by column; each column is a sparse
/// list of `(row, probability)` sorted by row.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    columns: Vec<Vec<(usize, f64)>>,
}

impl StochasticMatrix {
    pub fn identity(size: usize) -> Self {
        Self {
            columns: (0..size).map(|j| vec![(j, 1.0)]).collect(),
        }
    }

    pub fn from_columns(columns: Vec<Vec<(usize, f64)>>) -> Result<Self, MarkovError> {
        let size = columns.len();
        let mut out = Vec::with_capacity(size);
        for (j, column) in columns.into_iter().enumerate() {
            let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
            for (i, p) in column {
                if i >= size {
                    return Err(MarkovError::RowOutOfRange { row: i, column: j });
                }
                if !p.is_finite() || p < 0.0 {
                    return Err(MarkovError::InvalidEntry {
                        index: j * size + i,
                        value: p,
                    });
                }
                *merged.entry(i).or_default() += p;
            }
            let sum: f64 = merged.values().sum();
            if (sum - 1.0).abs() > COLUMN_TOLERANCE {
                return Err(MarkovError::NotStochastic { column: j, sum });
            }
            out.push(merged.into_iter().filter(|&(_, p)| p > 0.0).collect());
        }
        Ok(Self { columns: out })
    }

    /// `rows[i][j]` is `M[i, j]`.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self, MarkovError> {
        let size = rows.len();
        if let Some(row) = rows.iter().find(|r| r.len() != size) {
            return Err(MarkovError::DimensionMismatch {
                expected: size,
                found: row.len(),
            });
        }
        let columns = (0..size)
            .map(|j| (0..size).map(|i| (i, rows[i][j])).collect())
            .collect();
        Self::from_columns(columns)
    }

    pub fn size(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, row: usize, column: usize) -> f64 {
        let col = &self.columns[column];
        match col.binary_search_by_key(&row, |&(i, _)| i) {
            Ok(k) => col[k].1,
            Err(_) => 0.0,
        }
    }

    pub fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.columns[j]
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let m = self.size();
        let mut rows = vec![vec![0.0; m]; m];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, p) in col {
                rows[i][j] = p;
            }
        }
        rows
    }

    /// Largest deviation of any column sum from one.
    pub fn column_sum_error(&self) -> f64 {
        self.columns
            .iter()
            .map(|c| (c.iter().map(|&(_, p)| p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Checks the transition constraint `(11^T - A^T) ⊙ M = 0`: every
    /// nonzero `M[i, j]` needs `A[j, i] = 1`. Obstacle columns, which have no
    /// allowed transition at all, must be the unit placeholder `e_j`.
    pub fn respects(&self, adjacency: &AdjacencyMatrix) -> bool {
        if adjacency.size() != self.size() {
            return false;
        }
        self.columns.iter().enumerate().all(|(j, col)| {
            if adjacency.is_blocked(j) {
                col.as_slice() == [(j, 1.0)]
            } else {
                col.iter().all(|&(i, _)| adjacency.allows(j, i))
            }
        })
    }

    /// `M x` on raw slices, skipping zero entries of `x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size()];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for &(i, p) in &self.columns[j] {
                    out[i] += p * xj;
                }
            }
        }
        out
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &StochasticMatrix) -> StochasticMatrix {
        let m = self.size();
        let mut scratch = vec![0.0; m];
        let columns = rhs
            .columns
            .iter()
            .map(|rcol| {
                for &(k, q) in rcol {
                    for &(i, p) in &self.columns[k] {
                        scratch[i] += p * q;
                    }
                }
                let col: Vec<(usize, f64)> = scratch
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(i, &v)| (i, v))
                    .collect();
                scratch.iter_mut().for_each(|v| *v = 0.0);
                col
            })
            .collect();
        StochasticMatrix { columns }
    }

    /// Dense text dump: line `j` lists column `j` top to bottom, 17
    /// significant digits per entry.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for j in 0..self.size() {
            let mut dense = vec![0.0; self.size()];
            for &(i, p) in &self.columns[j] {
                dense[i] = p;
            }
            let line: Vec<String> = dense.iter().map(|p| format!("{p:.16e}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, MarkovError> {
        let columns: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|e| MarkovError::Parse(e.to_string())))
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        let size = columns.len();
        if let Some(c) = columns.iter().find(|c| c.len() != size) {
            return Err(MarkovError::DimensionMismatch {
                expected: size,
                found: c.len(),
            });
        }
        Self::from_columns(
            columns
                .into_iter()
                .map(|c| c.into_iter().enumerate().collect())
                .collect(),
        )
    }
}

/// One step of the density dynamics, `M x`.
pub fn propagate(matrix: &StochasticMatrix, x: &DensityVector) -> Result<DensityVector, MarkovError> {
    if matrix.size() != x.len() {
        return Err(MarkovError::DimensionMismatch {
            expected: matrix.size(),
            found: x.len(),
        });
    }
    Ok(DensityVector::from_raw(matrix.apply(x.values())))
}

/// Forward product of a time-ordered chain written left to right as it
/// multiplies: `compose(m, [M2, M1])` is `M2 * M1`, i.e. `M1` acts first.
/// The empty list gives the identity of size `size`.
pub fn compose(size: usize, matrices: &[StochasticMatrix]) -> Result<StochasticMatrix, MarkovError> {
    if let Some(bad) = matrices.iter().find(|m| m.size() != size) {
        return Err(MarkovError::DimensionMismatch {
            expected: size,
            found: bad.size(),
        });
    }
    Ok(matrices
        .iter()
        .rev()
        .fold(StochasticMatrix::identity(size), |acc, m| m.mul(&acc)))
}

/// Columns listed in `absorbing` become unit vectors; all others are kept.
pub fn make_absorbing(matrix: &StochasticMatrix, absorbing: &BTreeSet<usize>) -> StochasticMatrix {
    let columns = matrix
        .columns
        .iter()
        .enumerate()
        .map(|(j, col)| {
            if absorbing.contains(&j) {
                vec![(j, 1.0)]
            } else {
                col.clone()
            }
        })
        .collect();
    StochasticMatrix { columns }
}

/// Total variation distance `sum over x[i] > y[i] of (x[i] - y[i])`.
pub fn tv_distance(x: impl AsRef<[f64]>, y: impl AsRef<[f64]>) -> f64 {
    let (x, y) = (x.as_ref(), y.as_ref());
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| (a - b).max(0.0)).sum()
}

pub fn l1_distance(x: impl AsRef<[f64]>, y: impl AsRef<[f64]>) -> f64 {
    let (x, y) = (x.as_ref(), y.as_ref());
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
}

/// Recurrent bins carry target mass; transient bins are the other free bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateClassification {
    pub recurrent: BTreeSet<usize>,
    pub transient: BTreeSet<usize>,
}

pub fn classify(
    target: &DensityVector,
    adjacency: &AdjacencyMatrix,
) -> Result<StateClassification, MarkovError> {
    if target.len() != adjacency.size() {
        return Err(MarkovError::DimensionMismatch {
            expected: adjacency.size(),
            found: target.len(),
        });
    }
    let mut recurrent = BTreeSet::new();
    let mut transient = BTreeSet::new();
    for (i, &v) in target.values().iter().enumerate() {
        if adjacency.is_blocked(i) {
            if v > ZERO_MASS {
                return Err(MarkovError::MassOnObstacle(i));
            }
        } else if v > ZERO_MASS {
            recurrent.insert(i);
        } else {
            transient.insert(i);
        }
    }
    Ok(StateClassification {
        recurrent,
        transient,
    })
}

/// Synthesizes a chain with stationary distribution `target` whose recurrent
/// bins form one strongly connected set. From any start on free bins the
/// density converges to `target`.
pub fn synthesize(
    target: &DensityVector,
    adjacency: &AdjacencyMatrix,
) -> Result<StochasticMatrix, MarkovError> {
    let classes = classify(target, adjacency)?;
    if !adjacency.is_strongly_connected(&classes.recurrent) {
        let components = adjacency
            .strongly_connected_components(&classes.recurrent)
            .len();
        return Err(MarkovError::DisconnectedRecurrentStates { components });
    }
    let mut columns = base_columns(adjacency.size());
    fill_recurrent(&mut columns, target, adjacency, &classes.recurrent);
    fill_default_hops(&mut columns, adjacency, &classes)?;
    Ok(StochasticMatrix { columns })
}

/// Like [`synthesize`], but also accepts a target whose recurrent bins split
/// into several strongly connected components. Transient bins split their
/// outflow so that, started from `initial`, every component collects exactly
/// the target mass it needs (as far as the graph allows). The split is a
/// min-cost transport of the initial transient mass to the components' unmet
/// demand, routed along shortest paths through transient bins. Bins no flow
/// passes through keep a plain shortest-path hop. With a connected target the
/// result equals [`synthesize`].
pub fn synthesize_from(
    target: &DensityVector,
    adjacency: &AdjacencyMatrix,
    initial: &DensityVector,
) -> Result<StochasticMatrix, MarkovError> {
    let classes = classify(target, adjacency)?;
    if initial.len() != adjacency.size() {
        return Err(MarkovError::DimensionMismatch {
            expected: adjacency.size(),
            found: initial.len(),
        });
    }
    let components = adjacency.strongly_connected_components(&classes.recurrent);
    let mut columns = base_columns(adjacency.size());
    for comp in &components {
        fill_recurrent(&mut columns, target, adjacency, comp);
    }

    let recurrent = &classes.recurrent;
    let hops: Vec<Vec<Option<usize>>> = components
        .iter()
        .map(|comp| {
            let dist = adjacency.distances_to_within(comp, |b| !recurrent.contains(&b));
            adjacency.next_hops_from_distances(&dist)
        })
        .collect();
    let dists: Vec<Vec<Option<usize>>> = components
        .iter()
        .map(|comp| adjacency.distances_to_within(comp, |b| !recurrent.contains(&b)))
        .collect();

    let demand: Vec<f64> = components
        .iter()
        .map(|comp| (target.mass_on(comp) - initial.mass_on(comp)).max(0.0))
        .collect();
    let sources: Vec<usize> = classes
        .transient
        .iter()
        .copied()
        .filter(|&j| initial[j] > ZERO_MASS)
        .collect();
    let supply: Vec<f64> = sources.iter().map(|&j| initial[j]).collect();
    let cost: Vec<Vec<Option<usize>>> = sources
        .iter()
        .map(|&j| dists.iter().map(|d| d[j]).collect())
        .collect();
    let plan = transport::solve(&supply, &demand, &cost);

    let mut outflow: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); adjacency.size()];
    let mut route = |from: usize, comp: usize, amount: f64| {
        let mut cur = from;
        while !components[comp].contains(&cur) {
            let next = hops[comp][cur].expect("routed bins have a finite distance");
            *outflow[cur].entry(next).or_default() += amount;
            cur = next;
        }
    };
    for (s, &j) in sources.iter().enumerate() {
        for (c, &q) in plan.flows[s].iter().enumerate() {
            if q > 0.0 {
                route(j, c, q);
            }
        }
        if plan.unshipped[s] > ZERO_MASS {
            let nearest = (0..components.len())
                .filter_map(|c| dists[c][j].map(|d| (d, c)))
                .min()
                .ok_or(MarkovError::Unreachable(j))?;
            route(j, nearest.1, plan.unshipped[s]);
        }
    }
    for (j, out) in outflow.iter().enumerate() {
        let total: f64 = out.values().sum();
        if total > 0.0 {
            columns[j] = out.iter().map(|(&i, &q)| (i, q / total)).collect();
        }
    }
    let pending = StateClassification {
        recurrent: classes.recurrent.clone(),
        transient: classes
            .transient
            .iter()
            .copied()
            .filter(|&j| outflow[j].is_empty())
            .collect(),
    };
    fill_default_hops(&mut columns, adjacency, &pending)?;
    Ok(StochasticMatrix { columns })
}

fn base_columns(size: usize) -> Vec<Vec<(usize, f64)>> {
    (0..size).map(|j| vec![(j, 1.0)]).collect()
}

/// Metropolis-Hastings over `component`: propose a uniformly chosen neighbour
/// inside the component, accept with `min(1, v[j] K[i,j] / (v[i] K[j,i]))`.
/// A periodic result is made lazy, `(M + I) / 2`, which keeps `target` fixed.
fn fill_recurrent(
    columns: &mut [Vec<(usize, f64)>],
    target: &DensityVector,
    adjacency: &AdjacencyMatrix,
    component: &BTreeSet<usize>,
) {
    let neighbours = |i: usize| -> Vec<usize> {
        adjacency
            .successors(i)
            .iter()
            .copied()
            .filter(|&j| j != i && component.contains(&j))
            .collect()
    };
    let degree: BTreeMap<usize, usize> = component.iter().map(|&i| (i, neighbours(i).len())).collect();
    for &i in component {
        let mut col = Vec::new();
        let mut moved = 0.0;
        for j in neighbours(i) {
            if !adjacency.allows(j, i) {
                continue;
            }
            let p = (1.0 / degree[&i] as f64).min(target[j] / (target[i] * degree[&j] as f64));
            moved += p;
            col.push((j, p));
        }
        col.push((i, (1.0 - moved).max(0.0)));
        col.sort_by_key(|&(r, _)| r);
        col.retain(|&(_, p)| p > 0.0);
        columns[i] = col;
    }

    if component.len() > 1 && period(columns, component) > 1 {
        for &i in component {
            let mut col: Vec<(usize, f64)> = columns[i].iter().map(|&(r, p)| (r, p * 0.5)).collect();
            match col.iter_mut().find(|(r, _)| *r == i) {
                Some(entry) => entry.1 += 0.5,
                None => col.push((i, 0.5)),
            }
            col.sort_by_key(|&(r, _)| r);
            columns[i] = col;
        }
    }
}

/// Period of the chain restricted to `component` (assumed irreducible).
fn period(columns: &[Vec<(usize, f64)>], component: &BTreeSet<usize>) -> usize {
    let Some(&root) = component.iter().next() else {
        return 1;
    };
    let mut level: BTreeMap<usize, usize> = BTreeMap::from([(root, 0)]);
    let mut queue = std::collections::VecDeque::from([root]);
    let mut g = 0usize;
    while let Some(u) = queue.pop_front() {
        let lu = level[&u];
        for &(w, p) in &columns[u] {
            if p <= 0.0 || !component.contains(&w) {
                continue;
            }
            match level.get(&w) {
                Some(&lw) => g = gcd(g, (lu + 1).abs_diff(lw)),
                None => {
                    level.insert(w, lu + 1);
                    queue.push_back(w);
                }
            }
        }
    }
    g.max(1)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Every bin in `classes.transient` moves deterministically to its
/// shortest-path hop toward the recurrent set.
fn fill_default_hops(
    columns: &mut [Vec<(usize, f64)>],
    adjacency: &AdjacencyMatrix,
    classes: &StateClassification,
) -> Result<(), MarkovError> {
    if classes.transient.is_empty() {
        return Ok(());
    }
    let dist = adjacency.distances_to(&classes.recurrent);
    let hops = adjacency.next_hops_from_distances(&dist);
    for &j in &classes.transient {
        let next = hops[j].ok_or(MarkovError::Unreachable(j))?;
        columns[j] = vec![(next, 1.0)];
    }
    Ok(())
}
