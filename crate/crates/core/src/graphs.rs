//! Random graph sampling, node features, graph operators and edge-drop
//! sparsification.
//!
//! Graphs are simple and undirected, stored as sorted neighbor lists. A graph
//! sampled from the kernel model carries its latent grid coordinates and the
//! sparsity parameter used at sampling time.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::kernels::Kernel;
use crate::rng::stream_rng;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("node count must be at least 2, got {0}")]
    TooFewNodes(usize),
    #[error("sparsity parameter must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("edge ({u}, {v}) out of range for {n} nodes")]
    EdgeOutOfRange { u: usize, v: usize, n: usize },
    #[error("self-loop at node {0} not allowed in a simple graph")]
    SelfLoop(usize),
    #[error("block matrix must be square with one row per community, got {rows}x{cols} for {k} communities")]
    BlockMatrixShape { rows: usize, cols: usize, k: usize },
    #[error("block matrix is not symmetric")]
    BlockMatrixAsymmetric,
    #[error("block matrix entry {value} outside [0, 1]")]
    BlockMatrixRange { value: f64 },
    #[error("community label {label} out of range for {k} communities")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("row {row} of the assignment matrix is not one-hot")]
    NotOneHot { row: usize },
    #[error("expected one (mean, covariance) pair per community: {means} means, {covs} covariances, {k} communities")]
    MixtureComponentCount { means: usize, covs: usize, k: usize },
    #[error("mixture component {component} has inconsistent dimensions")]
    MixtureDimension { component: usize },
    #[error("covariance of component {component} is not positive semidefinite")]
    NonPsdCovariance { component: usize },
    #[error("drop fraction must lie in [0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("graph has no latent coordinates")]
    MissingLatent,
    #[error("feature matrix contains non-finite entries")]
    NonFiniteFeatures,
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Simple undirected graph with optional latent coordinates.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    neighbors: Vec<Vec<u32>>,
    latent: Option<Vec<f64>>,
    gamma: Option<f64>,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Duplicate edges are
    /// collapsed; self-loops and out-of-range endpoints are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut neighbors = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::EdgeOutOfRange { u, v, n });
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            neighbors[u].push(v as u32);
            neighbors[v].push(u as u32);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Graph {
            n,
            neighbors,
            latent: None,
            gamma: None,
        })
    }

    fn from_neighbor_lists(
        n: usize,
        mut neighbors: Vec<Vec<u32>>,
        latent: Option<Vec<f64>>,
        gamma: Option<f64>,
    ) -> Self {
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Graph {
            n,
            neighbors,
            latent,
            gamma,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.iter().map(|l| l.len()).sum::<usize>() / 2
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len()
    }

    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.neighbors[node]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors[u].binary_search(&(v as u32)).is_ok()
    }

    /// Undirected edges, each listed once with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for u in 0..self.n {
            for &v in &self.neighbors[u] {
                if (u as u32) < v {
                    out.push((u as u32, v));
                }
            }
        }
        out
    }

    pub fn latent(&self) -> Option<&[f64]> {
        self.latent.as_deref()
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn adjacency_dense(&self) -> Array2<f64> {
        let mut a = Array2::<f64>::zeros((self.n, self.n));
        for u in 0..self.n {
            for &v in &self.neighbors[u] {
                a[(u, v as usize)] = 1.0;
            }
        }
        a
    }

    /// Number of connected components (isolated nodes each count as one).
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &v in &self.neighbors[u] {
                    let v = v as usize;
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        count
    }

    /// Erdős–Rényi graph, used by demos and tests.
    pub fn sample_gnp(n: usize, p: f64, seed: u64) -> Self {
        let mut rng = stream_rng(seed, 0);
        let mut neighbors = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen::<f64>() < p {
                    neighbors[i].push(j as u32);
                    neighbors[j].push(i as u32);
                }
            }
        }
        Graph::from_neighbor_lists(n, neighbors, None, None)
    }
}

/// Node community labels with a fixed community count; rows of the implied
/// assignment matrix are one-hot.
#[derive(Debug, Clone)]
pub struct CommunityAssignment {
    labels: Vec<usize>,
    num_communities: usize,
}

impl CommunityAssignment {
    pub fn from_labels(labels: Vec<usize>, num_communities: usize) -> Result<Self, GraphError> {
        for &label in &labels {
            if label >= num_communities {
                return Err(GraphError::LabelOutOfRange {
                    label,
                    k: num_communities,
                });
            }
        }
        Ok(CommunityAssignment {
            labels,
            num_communities,
        })
    }

    /// Validates that every row has a single unit entry and zeros elsewhere.
    pub fn from_one_hot(matrix: &Array2<f64>) -> Result<Self, GraphError> {
        let (n, k) = matrix.dim();
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let mut hot = None;
            for j in 0..k {
                let v = matrix[(i, j)];
                if (v - 1.0).abs() < 1e-12 {
                    if hot.is_some() {
                        return Err(GraphError::NotOneHot { row: i });
                    }
                    hot = Some(j);
                } else if v.abs() > 1e-12 {
                    return Err(GraphError::NotOneHot { row: i });
                }
            }
            match hot {
                Some(j) => labels.push(j),
                None => return Err(GraphError::NotOneHot { row: i }),
            }
        }
        Ok(CommunityAssignment {
            labels,
            num_communities: k,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_communities(&self) -> usize {
        self.num_communities
    }

    pub fn one_hot(&self) -> Array2<f64> {
        let mut y = Array2::<f64>::zeros((self.labels.len(), self.num_communities));
        for (i, &label) in self.labels.iter().enumerate() {
            y[(i, label)] = 1.0;
        }
        y
    }

    pub fn community_sizes(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_communities];
        for &label in &self.labels {
            counts[label] += 1;
        }
        counts
    }
}

/// Node feature matrix: row `i` holds the features of node `i`.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self, GraphError> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(GraphError::NonFiniteFeatures);
        }
        Ok(FeatureMatrix { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }
}

/// Latent grid of the kernel graph model: `u_1 = -⌊n/2⌋γ + γ/2` and
/// `u_i = u_{i-1} + γ`.
pub fn latent_grid(n: usize, gamma: f64) -> Vec<f64> {
    let u1 = -((n / 2) as f64) * gamma + gamma / 2.0;
    (0..n).map(|i| u1 + i as f64 * gamma).collect()
}

/// Samples a graph from the kernel model: nodes on the latent grid, edge
/// `(i, j)`, `i < j`, present independently with probability `W(u_i, u_j)`.
pub fn sample_dsgm(kernel: &Kernel, n: usize, gamma: f64, seed: u64) -> Result<Graph, GraphError> {
    if n < 2 {
        return Err(GraphError::TooFewNodes(n));
    }
    if !(gamma > 0.0) {
        return Err(GraphError::NonPositiveGamma(gamma));
    }
    let grid = latent_grid(n, gamma);
    let mut rng = stream_rng(seed, 0);
    let mut neighbors = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let p = kernel.eval(grid[i], grid[j]);
            if rng.gen::<f64>() < p {
                neighbors[i].push(j as u32);
                neighbors[j].push(i as u32);
            }
        }
    }
    Ok(Graph::from_neighbor_lists(
        n,
        neighbors,
        Some(grid),
        Some(gamma),
    ))
}

/// Expected number of edges of the kernel model: `Σ_{i<j} W(u_i, u_j)`,
/// with the Bernoulli variance alongside.
pub fn dsgm_expected_edges(kernel: &Kernel, n: usize, gamma: f64) -> (f64, f64) {
    let grid = latent_grid(n, gamma);
    let mut mean = 0.0;
    let mut var = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let p = kernel.eval(grid[i], grid[j]);
            mean += p;
            var += p * (1.0 - p);
        }
    }
    (mean, var)
}

/// Samples a stochastic block model graph: edge `(i, j)`, `i < j`, present
/// with probability `B[c_i, c_j]`.
pub fn sample_sbm(
    assignment: &CommunityAssignment,
    block: &Array2<f64>,
    seed: u64,
) -> Result<Graph, GraphError> {
    let k = assignment.num_communities();
    let (rows, cols) = block.dim();
    if rows != k || cols != k {
        return Err(GraphError::BlockMatrixShape { rows, cols, k });
    }
    for i in 0..k {
        for j in 0..k {
            let v = block[(i, j)];
            if !(0.0..=1.0).contains(&v) {
                return Err(GraphError::BlockMatrixRange { value: v });
            }
            if (block[(i, j)] - block[(j, i)]).abs() > 1e-12 {
                return Err(GraphError::BlockMatrixAsymmetric);
            }
        }
    }
    let n = assignment.len();
    let mut rng = stream_rng(seed, 0);
    let mut neighbors = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let p = block[(assignment.label(i), assignment.label(j))];
            if rng.gen::<f64>() < p {
                neighbors[i].push(j as u32);
                neighbors[j].push(i as u32);
            }
        }
    }
    Ok(Graph::from_neighbor_lists(n, neighbors, None, None))
}

/// Lower-triangular Cholesky factor tolerant of semidefinite input: zero
/// pivots produce zero columns, negative pivots are rejected.
fn psd_cholesky(a: &Array2<f64>, component: usize) -> Result<Array2<f64>, GraphError> {
    let d = a.nrows();
    let scale = a.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(1.0);
    let tol = 1e-10 * scale;
    let mut l = Array2::<f64>::zeros((d, d));
    for j in 0..d {
        let mut s = a[(j, j)];
        for k in 0..j {
            s -= l[(j, k)] * l[(j, k)];
        }
        if s > tol {
            let pivot = s.sqrt();
            l[(j, j)] = pivot;
            for i in (j + 1)..d {
                let mut r = a[(i, j)];
                for k in 0..j {
                    r -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = r / pivot;
            }
        } else if s > -tol {
            // Zero pivot: the remaining column must vanish for PSD input.
            for i in (j + 1)..d {
                let mut r = a[(i, j)];
                for k in 0..j {
                    r -= l[(i, k)] * l[(j, k)];
                }
                if r.abs() > tol * 10.0 {
                    return Err(GraphError::NonPsdCovariance { component });
                }
            }
        } else {
            return Err(GraphError::NonPsdCovariance { component });
        }
    }
    Ok(l)
}

/// Draws row `i` from the Gaussian of node `i`'s community.
pub fn sample_gaussian_mixture_features(
    assignment: &CommunityAssignment,
    means: &[Array1<f64>],
    covariances: &[Array2<f64>],
    seed: u64,
) -> Result<FeatureMatrix, GraphError> {
    let k = assignment.num_communities();
    if means.len() != k || covariances.len() != k {
        return Err(GraphError::MixtureComponentCount {
            means: means.len(),
            covs: covariances.len(),
            k,
        });
    }
    let dim = means.first().map(|m| m.len()).unwrap_or(0);
    let mut factors = Vec::with_capacity(k);
    for c in 0..k {
        if means[c].len() != dim || covariances[c].dim() != (dim, dim) {
            return Err(GraphError::MixtureDimension { component: c });
        }
        let cov = &covariances[c];
        for i in 0..dim {
            for j in 0..dim {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-10 {
                    return Err(GraphError::MixtureDimension { component: c });
                }
            }
        }
        factors.push(psd_cholesky(cov, c)?);
    }
    let n = assignment.len();
    let mut rng = stream_rng(seed, 0);
    let mut x = Array2::<f64>::zeros((n, dim));
    let mut z = vec![0.0f64; dim];
    for i in 0..n {
        let c = assignment.label(i);
        for zj in z.iter_mut() {
            *zj = rng.sample(StandardNormal);
        }
        let l = &factors[c];
        for r in 0..dim {
            let mut v = means[c][r];
            for (col, &zc) in z.iter().enumerate().take(r + 1) {
                v += l[(r, col)] * zc;
            }
            x[(i, r)] = v;
        }
    }
    FeatureMatrix::new(x)
}

/// Degree-normalized adjacency `D^{-1/2} A D^{-1/2}` as a dense matrix.
/// Rows and columns of isolated nodes are zero.
pub fn normalized_adjacency(graph: &Graph) -> Array2<f64> {
    Operator::normalized_adjacency(graph).to_dense()
}

/// Removes exactly `round(fraction · m)` undirected edges, chosen uniformly
/// at random; the removal is symmetric and deterministic given the seed.
pub fn drop_edges(graph: &Graph, fraction: f64, seed: u64) -> Result<Graph, GraphError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(GraphError::InvalidFraction(fraction));
    }
    let mut edges = graph.edges();
    let m = edges.len();
    let drop = ((fraction * m as f64).round() as usize).min(m);
    let mut rng = stream_rng(seed, 0);
    for k in 0..drop {
        let pick = k + rng.gen_range(0..(m - k));
        edges.swap(k, pick);
    }
    let kept = &edges[drop..];
    let mut neighbors = vec![Vec::new(); graph.n()];
    for &(u, v) in kept {
        neighbors[u as usize].push(v);
        neighbors[v as usize].push(u);
    }
    Ok(Graph::from_neighbor_lists(
        graph.n(),
        neighbors,
        graph.latent.clone(),
        graph.gamma,
    ))
}

/// Exact degree statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeSummary {
    pub mean: f64,
    pub min: usize,
    pub max: usize,
    pub isolated: usize,
}

pub fn degree_summary(graph: &Graph) -> DegreeSummary {
    let n = graph.n();
    let mut min = usize::MAX;
    let mut max = 0usize;
    let mut sum = 0usize;
    let mut isolated = 0usize;
    for i in 0..n {
        let d = graph.degree(i);
        min = min.min(d);
        max = max.max(d);
        sum += d;
        if d == 0 {
            isolated += 1;
        }
    }
    if n == 0 {
        min = 0;
    }
    DegreeSummary {
        mean: if n == 0 { 0.0 } else { sum as f64 / n as f64 },
        min,
        max,
        isolated,
    }
}

/// Which graph operator a computation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum OperatorKind {
    Adjacency,
    NormalizedAdjacency,
}

impl OperatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            OperatorKind::Adjacency => "adj",
            OperatorKind::NormalizedAdjacency => "norm",
        }
    }
}

impl std::str::FromStr for OperatorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adj" | "adjacency" => Ok(OperatorKind::Adjacency),
            "norm" | "normalized" | "normalized-adjacency" => Ok(OperatorKind::NormalizedAdjacency),
            other => Err(format!("unknown operator '{other}' (expected adj|norm)")),
        }
    }
}

/// Sparse symmetric graph operator supporting matrix products without
/// densification. An optional scalar rescaling is folded into every product
/// (used to precondition raw-adjacency filters).
#[derive(Debug, Clone)]
pub struct Operator {
    kind: OperatorKind,
    n: usize,
    neighbors: Vec<Vec<u32>>,
    inv_sqrt_degree: Option<Vec<f64>>,
    scale: f64,
}

impl Operator {
    pub fn adjacency(graph: &Graph) -> Self {
        Operator {
            kind: OperatorKind::Adjacency,
            n: graph.n(),
            neighbors: graph.neighbors.clone(),
            inv_sqrt_degree: None,
            scale: 1.0,
        }
    }

    pub fn normalized_adjacency(graph: &Graph) -> Self {
        let weights = (0..graph.n())
            .map(|i| {
                let d = graph.degree(i);
                if d == 0 {
                    0.0
                } else {
                    1.0 / (d as f64).sqrt()
                }
            })
            .collect();
        Operator {
            kind: OperatorKind::NormalizedAdjacency,
            n: graph.n(),
            neighbors: graph.neighbors.clone(),
            inv_sqrt_degree: Some(weights),
            scale: 1.0,
        }
    }

    pub fn from_kind(kind: OperatorKind, graph: &Graph) -> Self {
        match kind {
            OperatorKind::Adjacency => Operator::adjacency(graph),
            OperatorKind::NormalizedAdjacency => Operator::normalized_adjacency(graph),
        }
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Returns the operator rescaled by `1/s`.
    pub fn rescaled(mut self, s: f64) -> Self {
        self.scale /= s;
        self
    }

    pub fn apply_vec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        match &self.inv_sqrt_degree {
            None => {
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for &j in &self.neighbors[i] {
                        acc += x[j as usize];
                    }
                    *o = acc * self.scale;
                }
            }
            Some(w) => {
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for &j in &self.neighbors[i] {
                        acc += w[j as usize] * x[j as usize];
                    }
                    *o = acc * w[i] * self.scale;
                }
            }
        }
    }

    /// `S · X` for a node-major matrix `X`.
    pub fn apply_mat(&self, x: &Array2<f64>) -> Array2<f64> {
        debug_assert_eq!(x.nrows(), self.n);
        let d = x.ncols();
        let mut out = Array2::<f64>::zeros((self.n, d));
        match &self.inv_sqrt_degree {
            None => {
                for i in 0..self.n {
                    let mut row = out.row_mut(i);
                    let row = row.as_slice_mut().unwrap();
                    for &j in &self.neighbors[i] {
                        let src = x.row(j as usize);
                        let src = src.as_slice().unwrap();
                        for (o, s) in row.iter_mut().zip(src) {
                            *o += s;
                        }
                    }
                    for o in row.iter_mut() {
                        *o *= self.scale;
                    }
                }
            }
            Some(w) => {
                for i in 0..self.n {
                    let mut row = out.row_mut(i);
                    let row = row.as_slice_mut().unwrap();
                    for &j in &self.neighbors[i] {
                        let wj = w[j as usize];
                        let src = x.row(j as usize);
                        let src = src.as_slice().unwrap();
                        for (o, s) in row.iter_mut().zip(src) {
                            *o += wj * s;
                        }
                    }
                    let c = w[i] * self.scale;
                    for o in row.iter_mut() {
                        *o *= c;
                    }
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::<f64>::zeros((self.n, self.n));
        match &self.inv_sqrt_degree {
            None => {
                for i in 0..self.n {
                    for &j in &self.neighbors[i] {
                        a[(i, j as usize)] = self.scale;
                    }
                }
            }
            Some(w) => {
                for i in 0..self.n {
                    for &j in &self.neighbors[i] {
                        a[(i, j as usize)] = w[i] * w[j as usize] * self.scale;
                    }
                }
            }
        }
        a
    }

    /// Power-iteration estimate of the spectral radius, deterministic and
    /// reported as-is (an underestimate for rough starts; 60 iterations is
    /// ample at the scales used here).
    pub fn spectral_radius_estimate(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let mut state = 0x8badf00d_u64;
        let mut v: Vec<f64> = (0..n)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) + 0.5
            })
            .collect();
        let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= norm0;
        }
        let mut w = vec![0.0; n];
        let mut lambda = 0.0;
        for _ in 0..60 {
            self.apply_vec(&v, &mut w);
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-300 {
                return 0.0;
            }
            lambda = norm;
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / norm;
            }
        }
        lambda
    }
}

/// Writes the edge-list text format: one `i j` pair per line, 0-based ids,
/// undirected edges listed once, with a node-count comment header.
pub fn write_edge_list(graph: &Graph, path: &Path) -> Result<(), GraphError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# nodes: {}", graph.n())?;
    for (u, v) in graph.edges() {
        writeln!(w, "{u} {v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the edge-list text format. Blank lines and `#` comments are
/// ignored. The node count is `num_nodes` when given, otherwise the largest
/// endpoint plus one.
pub fn read_edge_list(path: &Path, num_nodes: Option<usize>) -> Result<Graph, GraphError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut max_node = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let u: usize = parts
            .next()
            .ok_or_else(|| GraphError::Parse {
                line: lineno,
                message: "missing first endpoint".into(),
            })?
            .parse()
            .map_err(|e| GraphError::Parse {
                line: lineno,
                message: format!("bad node id: {e}"),
            })?;
        let v: usize = parts
            .next()
            .ok_or_else(|| GraphError::Parse {
                line: lineno,
                message: "missing second endpoint".into(),
            })?
            .parse()
            .map_err(|e| GraphError::Parse {
                line: lineno,
                message: format!("bad node id: {e}"),
            })?;
        if parts.next().is_some() {
            return Err(GraphError::Parse {
                line: lineno,
                message: "expected exactly two node ids".into(),
            });
        }
        max_node = max_node.max(u).max(v);
        edges.push((u, v));
    }
    let n = match num_nodes {
        Some(n) => n,
        None => {
            if edges.is_empty() {
                0
            } else {
                max_node + 1
            }
        }
    };
    Graph::from_edges(n, &edges)
}
