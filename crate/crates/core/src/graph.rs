//! Graph construction, Laplacian assembly, eigendecomposition and spectral
//! filtering.
//!
//! Everything here is restricted to weighted undirected graphs, so the
//! Laplacian is real symmetric, its eigenvector matrix is real orthonormal,
//! and every Hermitian transpose degenerates to a plain transpose.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A signal living on the nodes of a graph: one real value per node.
pub type GraphSignal = DVector<f64>;

/// Weighted undirected graph with a cached adjacency matrix.
///
/// Edges are stored as `(i, j, weight)` with `i < j` and `weight > 0`; the
/// adjacency matrix is symmetric with zero diagonal.
#[derive(Debug, Clone)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<(usize, usize, f64)>,
    adjacency: DMatrix<f64>,
}

impl Graph {
    /// Build a graph from an edge list. Edges may be given in either node
    /// order; duplicates of the same unordered pair are rejected.
    pub fn new(n_nodes: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::invalid("graph must have at least one node"));
        }
        let mut adjacency = DMatrix::zeros(n_nodes, n_nodes);
        let mut normalized = Vec::with_capacity(edges.len());
        for &(i, j, w) in &edges {
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::invalid(format!(
                    "edge ({i},{j}) out of range for {n_nodes} nodes"
                )));
            }
            if i == j {
                return Err(Error::invalid(format!("self-loop on node {i}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::invalid(format!(
                    "edge ({i},{j}) has non-positive or non-finite weight {w}"
                )));
            }
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            if adjacency[(a, b)] != 0.0 {
                return Err(Error::invalid(format!("duplicate edge ({a},{b})")));
            }
            adjacency[(a, b)] = w;
            adjacency[(b, a)] = w;
            normalized.push((a, b, w));
        }
        normalized.sort_by_key(|x| (x.0, x.1));
        Ok(Graph {
            n_nodes,
            edges: normalized,
            adjacency,
        })
    }

    /// Build from a symmetric nonnegative adjacency matrix with zero diagonal.
    pub fn from_adjacency(adjacency: DMatrix<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if n == 0 || adjacency.ncols() != n {
            return Err(Error::invalid("adjacency must be square and non-empty"));
        }
        let mut edges = Vec::new();
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::invalid(format!("nonzero diagonal at node {i}")));
            }
            for j in (i + 1)..n {
                let w = adjacency[(i, j)];
                if (w - adjacency[(j, i)]).abs() > 1e-12 * w.abs().max(1.0) {
                    return Err(Error::invalid(format!("adjacency not symmetric at ({i},{j})")));
                }
                if w != 0.0 {
                    if !(w.is_finite() && w > 0.0) {
                        return Err(Error::invalid(format!(
                            "adjacency entry ({i},{j}) = {w} must be finite and positive"
                        )));
                    }
                    edges.push((i, j, w));
                }
            }
        }
        Graph::new(n, edges)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }
}

/// Laplacian normalization variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `L = D - W`.
    Combinatorial,
    /// `L = (D - W) / lambda_max`, so the spectral norm is 1.
    UnitSpectralNorm,
}

/// Assemble the (optionally normalized) Laplacian of a graph.
pub fn laplacian(graph: &Graph, normalization: Normalization) -> Result<DMatrix<f64>> {
    let n = graph.n_nodes();
    let w = graph.adjacency();
    let mut l = -w.clone();
    for i in 0..n {
        l[(i, i)] = w.row(i).sum();
    }
    match normalization {
        Normalization::Combinatorial => Ok(l),
        Normalization::UnitSpectralNorm => {
            // Top eigenvalue from the same dense solver used everywhere else.
            let eigvals = l.clone().symmetric_eigen().eigenvalues;
            let lmax = eigvals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !(lmax.is_finite() && lmax > 1e-300) {
                return Err(Error::invalid(
                    "cannot normalize the Laplacian of an edgeless graph",
                ));
            }
            Ok(l / lmax)
        }
    }
}

/// Cached spectral decomposition of a graph Laplacian.
///
/// Columns of `eigenvectors` form a real orthonormal basis; `eigenvalues`
/// are nondecreasing and nonnegative, with the first equal to zero.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub eigenvectors: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    pub laplacian: DMatrix<f64>,
    pub normalization: Normalization,
}

impl SpectralBasis {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Laplacian assembly plus eigendecomposition in one step.
    pub fn from_graph(graph: &Graph, normalization: Normalization) -> Result<Self> {
        let l = laplacian(graph, normalization)?;
        eigendecompose(&l, normalization)
    }
}

fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.norm().max(1e-300);
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

/// Fix the sign of an eigenvector so its first non-negligible entry is
/// positive. Entries below `1e-9` of the largest magnitude are treated as
/// zero for the purpose of the rule.
fn fix_sign(col: &mut nalgebra::DVectorViewMut<f64>) {
    let max = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return;
    }
    let thr = 1e-9 * max;
    for v in col.iter() {
        if v.abs() > thr {
            if *v < 0.0 {
                col.neg_mut();
            }
            return;
        }
    }
}

/// Eigendecompose a symmetric Laplacian.
///
/// Eigenvalues are sorted ascending with tiny negative round-off clamped to
/// zero. Each eigenvector's sign is fixed (first nonzero entry positive) and
/// repeated eigenvalues are ordered lexicographically by their sign-fixed
/// eigenvectors, so two decompositions of the same matrix are bitwise equal.
pub fn eigendecompose(
    laplacian: &DMatrix<f64>,
    normalization: Normalization,
) -> Result<SpectralBasis> {
    let n = laplacian.nrows();
    if n == 0 || laplacian.ncols() != n {
        return Err(Error::invalid("laplacian must be square and non-empty"));
    }
    if relative_asymmetry(laplacian) > 1e-10 {
        return Err(Error::invalid("laplacian is not symmetric"));
    }
    let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (laplacian[(i, j)] + laplacian[(j, i)]));
    let eig = sym.symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("eigenvalue solver did not converge"));
    }

    let scale = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut lam = eig.eigenvalues[src];
        if lam < 0.0 {
            if lam < -1e-8 * scale {
                return Err(Error::numerical(format!(
                    "laplacian has a significantly negative eigenvalue {lam}"
                )));
            }
            lam = 0.0;
        }
        values[dst] = lam;
        vectors.column_mut(dst).copy_from(&eig.eigenvectors.column(src));
        fix_sign(&mut vectors.column_mut(dst));
    }

    // Within groups of numerically equal eigenvalues, order the sign-fixed
    // eigenvectors lexicographically.
    let tol = 1e-10 * scale;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end] - values[start] <= tol {
            end += 1;
        }
        if end - start > 1 {
            let mut cols: Vec<DVector<f64>> =
                (start..end).map(|c| vectors.column(c).into_owned()).collect();
            cols.sort_by(|a, b| {
                for (x, y) in a.iter().zip(b.iter()) {
                    match x.total_cmp(y) {
                        std::cmp::Ordering::Equal => continue,
                        o => return o,
                    }
                }
                std::cmp::Ordering::Equal
            });
            for (off, col) in cols.into_iter().enumerate() {
                vectors.column_mut(start + off).copy_from(&col);
            }
        }
        start = end;
    }

    Ok(SpectralBasis {
        eigenvectors: vectors,
        eigenvalues: values,
        laplacian: laplacian.clone(),
        normalization,
    })
}

/// Graph Fourier transform: projection onto the Laplacian eigenbasis.
pub fn gft(basis: &SpectralBasis, x: &GraphSignal) -> Result<DVector<f64>> {
    if x.len() != basis.n() {
        return Err(Error::dims(format!(
            "signal length {} does not match basis size {}",
            x.len(),
            basis.n()
        )));
    }
    Ok(basis.eigenvectors.transpose() * x)
}

/// Inverse graph Fourier transform.
pub fn igft(basis: &SpectralBasis, xhat: &DVector<f64>) -> Result<GraphSignal> {
    if xhat.len() != basis.n() {
        return Err(Error::dims(format!(
            "spectrum length {} does not match basis size {}",
            xhat.len(),
            basis.n()
        )));
    }
    Ok(&basis.eigenvectors * xhat)
}

/// Apply a spectral graph filter: `U diag(h(lambda)) U^T x`.
pub fn apply_graph_filter<F>(basis: &SpectralBasis, response: F, x: &GraphSignal) -> Result<GraphSignal>
where
    F: Fn(f64) -> f64,
{
    let mut xhat = gft(basis, x)?;
    for n in 0..basis.n() {
        let h = response(basis.eigenvalues[n]);
        if !h.is_finite() {
            return Err(Error::numerical(format!(
                "filter response is not finite at eigenvalue {}",
                basis.eigenvalues[n]
            )));
        }
        xhat[n] *= h;
    }
    igft(basis, &xhat)
}

/// Sparse symmetric matrix in coordinate form, used so that Laplacian
/// polynomials can be applied as repeated mat-vecs in `O(|E|)` per product
/// without ever materializing a matrix power.
#[derive(Debug, Clone)]
pub struct SparseSym {
    n: usize,
    diag: Vec<f64>,
    // strictly lower-triangular nonzeros (i > j)
    off: Vec<(u32, u32, f64)>,
}

impl SparseSym {
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::invalid("matrix must be square"));
        }
        if relative_asymmetry(m) > 1e-10 {
            return Err(Error::invalid("matrix is not symmetric"));
        }
        let mut diag = Vec::with_capacity(n);
        let mut off = Vec::new();
        for i in 0..n {
            diag.push(m[(i, i)]);
            for j in 0..i {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                if v != 0.0 {
                    off.push((i as u32, j as u32, v));
                }
            }
        }
        Ok(SparseSym { n, diag, off })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz_off_diagonal(&self) -> usize {
        self.off.len()
    }

    pub fn matvec(&self, v: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(v.len(), self.n);
        let mut out = DVector::zeros(self.n);
        for i in 0..self.n {
            out[i] = self.diag[i] * v[i];
        }
        for &(i, j, w) in &self.off {
            let (i, j) = (i as usize, j as usize);
            out[i] += w * v[j];
            out[j] += w * v[i];
        }
        out
    }

    /// Evaluate `sum_l coeffs[l] * M^l * x` by Horner's rule.
    pub fn poly_apply(&self, coeffs: &[f64], x: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.n);
        if coeffs.is_empty() {
            return DVector::zeros(self.n);
        }
        let mut acc = x * coeffs[coeffs.len() - 1];
        for &c in coeffs.iter().rev().skip(1) {
            acc = self.matvec(&acc);
            acc += x * c;
        }
        acc
    }
}

/// Build a k-nearest-neighbor graph from point coordinates.
///
/// Two nodes are connected when either is among the other's `k` nearest
/// Euclidean neighbors, and the edge weight is `exp(-dist / mean_dist)` with
/// `mean_dist` the average distance over all point pairs. Coincident points
/// get weight 1.
pub fn build_knn_graph(coords: &[Vec<f64>], k: usize) -> Result<Graph> {
    let n = coords.len();
    if n < 2 {
        return Err(Error::invalid("need at least 2 points"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if n < k + 1 {
        return Err(Error::invalid(format!("need at least k+1 = {} points, got {n}", k + 1)));
    }
    let dim = coords[0].len();
    if dim == 0 {
        return Err(Error::invalid("points must have at least one coordinate"));
    }
    for (idx, p) in coords.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::invalid(format!(
                "point {idx} has {} coordinates, expected {dim}",
                p.len()
            )));
        }
        if p.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("point {idx} has non-finite coordinates")));
        }
    }

    let mut dist = DMatrix::zeros(n, n);
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = coords[i]
                .iter()
                .zip(&coords[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            dist[(i, j)] = d;
            dist[(j, i)] = d;
            total += d;
        }
    }
    let mean_dist = total / (n * (n - 1) / 2) as f64;

    let mut connected = vec![false; n * n];
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        // ties broken by node index for reproducibility
        order.sort_by(|&a, &b| dist[(i, a)].total_cmp(&dist[(i, b)]).then(a.cmp(&b)));
        for &j in order.iter().take(k) {
            connected[i * n + j] = true;
        }
    }

    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if connected[i * n + j] || connected[j * n + i] {
                let d = dist[(i, j)];
                let w = if d == 0.0 { 1.0 } else { (-d / mean_dist).exp() };
                edges.push((i, j, w));
            }
        }
    }
    Graph::new(n, edges)
}
