//! Weighted graphs, connectivity masks and generalized graph Laplacians.
//!
//! Grid vertices are numbered in raster order: vertex `i * side + j` is the
//! pixel in row `i`, column `j`.

use crate::error::{Error, Result};
use crate::matrix::{Cholesky, Mat, SymMatrix};

/// Undirected graph with nonnegative edge weights and self-loops.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    weights: Mat,
    self_loops: Vec<f64>,
}

impl WeightedGraph {
    pub fn new(weights: Mat, self_loops: Vec<f64>) -> Result<Self> {
        let n = self_loops.len();
        if weights.rows() != n || weights.cols() != n {
            return Err(Error::InvalidShape(format!(
                "{}x{} adjacency with {n} self-loops",
                weights.rows(),
                weights.cols()
            )));
        }
        if n == 0 {
            return Err(Error::InvalidShape("graph has no vertices".into()));
        }
        for i in 0..n {
            check_weight(self_loops[i], "self-loop")?;
            if weights[(i, i)] != 0.0 {
                return Err(Error::InvalidWeight(format!("adjacency diagonal at {i} must be zero")));
            }
            for j in 0..i {
                check_weight(weights[(i, j)], "edge")?;
                if weights[(i, j)] != weights[(j, i)] {
                    return Err(Error::InvalidWeight(format!("asymmetric weight at ({i}, {j})")));
                }
            }
        }
        Ok(WeightedGraph { weights, self_loops })
    }

    pub fn n(&self) -> usize {
        self.self_loops.len()
    }

    pub fn weights(&self) -> &Mat {
        &self.weights
    }

    pub fn self_loops(&self) -> &[f64] {
        &self.self_loops
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.weights.row(i).iter().sum()).collect()
    }

    pub fn edge_count(&self) -> usize {
        let n = self.n();
        (0..n).map(|i| (0..i).filter(|&j| self.weights[(i, j)] != 0.0).count()).sum()
    }

    pub fn connectivity(&self) -> Connectivity {
        let n = self.n();
        let mask = (0..n * n).map(|k| self.weights.as_slice()[k] != 0.0).collect();
        Connectivity { n, mask }
    }
}

fn check_weight(w: f64, what: &str) -> Result<()> {
    if !w.is_finite() || w < 0.0 {
        return Err(Error::InvalidWeight(format!("{what} weight {w} must be finite and nonnegative")));
    }
    Ok(())
}

/// Path graph `v1-v2-…-vn`.
pub fn build_line_graph(weights: &[f64], self_loops: &[f64]) -> Result<WeightedGraph> {
    let n = self_loops.len();
    if n == 0 || weights.len() + 1 != n {
        return Err(Error::InvalidShape(format!(
            "line graph needs n-1 = {} edge weights, got {}",
            n.saturating_sub(1),
            weights.len()
        )));
    }
    let mut w = Mat::zeros(n, n);
    for (i, &wi) in weights.iter().enumerate() {
        check_weight(wi, "edge")?;
        w[(i, i + 1)] = wi;
        w[(i + 1, i)] = wi;
    }
    WeightedGraph::new(w, self_loops.to_vec())
}

/// Edge weights for one direction of a grid: a single constant or one value per edge.
#[derive(Clone, Debug, PartialEq)]
pub enum GridWeights {
    Uniform(f64),
    /// Row-major: horizontal edges are `side × (side-1)`, vertical edges `(side-1) × side`.
    PerEdge(Vec<f64>),
}

impl GridWeights {
    fn get(&self, k: usize) -> f64 {
        match self {
            GridWeights::Uniform(w) => *w,
            GridWeights::PerEdge(v) => v[k],
        }
    }

    fn check_len(&self, expected: usize, what: &str) -> Result<()> {
        if let GridWeights::PerEdge(v) = self {
            if v.len() != expected {
                return Err(Error::InvalidShape(format!(
                    "{what} weights: expected {expected}, got {}",
                    v.len()
                )));
            }
        }
        Ok(())
    }
}

/// 4-neighbour `side × side` grid with `2·side·(side-1)` edges.
pub fn build_grid_graph(
    side: usize,
    horizontal: &GridWeights,
    vertical: &GridWeights,
    self_loops: &[f64],
) -> Result<WeightedGraph> {
    let n = side * side;
    if side == 0 || self_loops.len() != n {
        return Err(Error::InvalidShape(format!(
            "grid of side {side} needs {n} self-loops, got {}",
            self_loops.len()
        )));
    }
    let edges = side * (side - 1);
    horizontal.check_len(edges, "horizontal")?;
    vertical.check_len(edges, "vertical")?;

    let mut w = Mat::zeros(n, n);
    for i in 0..side {
        for j in 0..side - 1 {
            let wt = horizontal.get(i * (side - 1) + j);
            check_weight(wt, "edge")?;
            let (a, b) = (i * side + j, i * side + j + 1);
            w[(a, b)] = wt;
            w[(b, a)] = wt;
        }
    }
    for i in 0..side - 1 {
        for j in 0..side {
            let wt = vertical.get(i * side + j);
            check_weight(wt, "edge")?;
            let (a, b) = (i * side + j, (i + 1) * side + j);
            w[(a, b)] = wt;
            w[(b, a)] = wt;
        }
    }
    WeightedGraph::new(w, self_loops.to_vec())
}

/// Symmetric 0/1 mask of allowed edges, zero diagonal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Connectivity {
    n: usize,
    mask: Vec<bool>,
}

impl Connectivity {
    pub fn new(n: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != n * n {
            return Err(Error::InvalidShape(format!("mask of {} for n = {n}", mask.len())));
        }
        for i in 0..n {
            if mask[i * n + i] {
                return Err(Error::InvalidShape(format!("diagonal entry {i} set")));
            }
            for j in 0..i {
                if mask[i * n + j] != mask[j * n + i] {
                    return Err(Error::InvalidShape(format!("asymmetric mask at ({i}, {j})")));
                }
            }
        }
        Ok(Connectivity { n, mask })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut mask = vec![false; n * n];
        for &(i, j) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidShape(format!("bad edge ({i}, {j}) for n = {n}")));
            }
            mask[i * n + j] = true;
            mask[j * n + i] = true;
        }
        Ok(Connectivity { n, mask })
    }

    pub fn line(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Connectivity::from_edges(n, &edges).expect("line edges are valid")
    }

    pub fn grid(side: usize) -> Self {
        let mut edges = Vec::with_capacity(2 * side * side.saturating_sub(1));
        for i in 0..side {
            for j in 0..side {
                let v = i * side + j;
                if j + 1 < side {
                    edges.push((v, v + 1));
                }
                if i + 1 < side {
                    edges.push((v, v + side));
                }
            }
        }
        Connectivity::from_edges(side * side, &edges).expect("grid edges are valid")
    }

    pub fn full(n: usize) -> Self {
        let mask = (0..n * n).map(|k| k / n != k % n).collect();
        Connectivity { n, mask }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.n + j]
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.has_edge(i, j)).collect()
    }

    /// Edges as `(i, j)` with `i < j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Generalized graph Laplacian: symmetric, nonpositive off-diagonals, PSD.
///
/// Positive semidefiniteness is checked with tolerance: the smallest
/// eigenvalue may be as low as `-1e-9 · trace/n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ggl(SymMatrix);

impl Ggl {
    pub fn new(m: SymMatrix) -> Result<Self> {
        let n = m.n();
        for i in 0..n {
            for j in 0..n {
                if i != j && m[(i, j)] > 0.0 {
                    return Err(Error::InvalidMatrix(format!(
                        "positive off-diagonal {} at ({i}, {j})",
                        m[(i, j)]
                    )));
                }
            }
        }
        let trace = m.trace();
        if trace < 0.0 {
            return Err(Error::InvalidMatrix("negative trace".into()));
        }
        if trace > 0.0 {
            // λmin ≥ -δ  ⇔  L + 2δI is positive definite (up to the pivot floor)
            let delta = 1e-9 * trace / n as f64;
            let shifted = m.add_diagonal(2.0 * delta)?;
            if Cholesky::new(&shifted).is_err() {
                return Err(Error::InvalidMatrix("not positive semidefinite".into()));
            }
        }
        Ok(Ggl(m))
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> SymMatrix {
        self.0
    }

    /// Edge weight `-L_ij`.
    pub fn edge_weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            -self.0[(i, j)]
        }
    }

    /// Vertex weights `V_ii = Σ_j L_ij`.
    pub fn self_loops(&self) -> Vec<f64> {
        let m = self.0.as_mat();
        (0..self.n()).map(|i| m.row(i).iter().sum()).collect()
    }

    /// Checks that every derived self-loop is at least `-1e-9 · max(1, max L_ii)`.
    pub fn validate_nonnegative_loops(&self) -> Result<()> {
        let scale = self.0.diagonal().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (i, v) in self.self_loops().into_iter().enumerate() {
            if v < -1e-9 * scale {
                return Err(Error::InvalidMatrix(format!("negative self-loop {v} at vertex {i}")));
            }
        }
        Ok(())
    }

    pub fn to_graph(&self) -> Result<WeightedGraph> {
        let n = self.n();
        let w = Mat::from_fn(n, n, |i, j| self.edge_weight(i, j));
        let loops = self.self_loops().into_iter().map(|v| v.max(0.0)).collect();
        WeightedGraph::new(w, loops)
    }
}

/// `L = D - W + V`.
pub fn ggl_from_graph(g: &WeightedGraph) -> Ggl {
    let n = g.n();
    let deg = g.degrees();
    let w = g.weights();
    let m = Mat::from_fn(n, n, |i, j| if i == j { deg[i] + g.self_loops()[i] } else { -w[(i, j)] });
    // A graph Laplacian with nonnegative weights is diagonally dominant, hence PSD.
    Ggl(SymMatrix::new(m).expect("graph weights are symmetric and finite"))
}

/// `Σ V_ii r_i² + Σ_(i<j) W_ij (r_i - r_j)²`, the weighted-graph form of `rᵀ L r`.
pub fn laplacian_quadratic(l: &Ggl, r: &[f64]) -> Result<f64> {
    let n = l.n();
    if r.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: r.len() });
    }
    let loops = l.self_loops();
    let mut total: f64 = loops.iter().zip(r).map(|(v, x)| v * x * x).sum();
    for i in 0..n {
        for j in (i + 1)..n {
            let w = l.edge_weight(i, j);
            if w != 0.0 {
                let d = r[i] - r[j];
                total += w * d * d;
            }
        }
    }
    Ok(total)
}

/// Self-loop weight at an end vertex of a uniformly weighted path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EndLoop {
    Zero,
    C,
    TwoC,
}

impl EndLoop {
    pub const ALL: [EndLoop; 3] = [EndLoop::Zero, EndLoop::C, EndLoop::TwoC];

    pub fn weight(self, c: f64) -> f64 {
        match self {
            EndLoop::Zero => 0.0,
            EndLoop::C => c,
            EndLoop::TwoC => 2.0 * c,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EndLoop::Zero => "0",
            EndLoop::C => "c",
            EndLoop::TwoC => "2c",
        }
    }
}

/// Uniform path with edge weight `c` and self-loops only at the two ends.
pub fn dctdst_line_graph(first: EndLoop, last: EndLoop, n: usize, c: f64) -> Result<Ggl> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidWeight(format!("edge weight c = {c} must be positive")));
    }
    if n == 0 {
        return Err(Error::InvalidShape("empty line graph".into()));
    }
    let mut loops = vec![0.0; n];
    loops[0] += first.weight(c);
    loops[n - 1] += last.weight(c);
    let g = build_line_graph(&vec![c; n - 1], &loops)?;
    Ok(ggl_from_graph(&g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::eig_sym;

    #[test]
    fn two_vertex_laplacians() {
        let l = ggl_from_graph(&build_line_graph(&[1.0], &[0.0, 0.0]).unwrap());
        assert_eq!(l.matrix().as_mat().to_rows(), vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
        let l = ggl_from_graph(&build_line_graph(&[1.0], &[1.0, 0.0]).unwrap());
        assert_eq!(l.matrix().as_mat().to_rows(), vec![vec![2.0, -1.0], vec![-1.0, 1.0]]);
    }

    #[test]
    fn small_grid_laplacian() {
        let g = build_grid_graph(2, &GridWeights::Uniform(1.0), &GridWeights::Uniform(1.0), &[0.0; 4])
            .unwrap();
        assert_eq!(g.edge_count(), 4);
        assert_eq!(g.degrees(), vec![2.0; 4]);
        let l = ggl_from_graph(&g);
        let m = l.matrix();
        for i in 0..4 {
            assert_eq!(m[(i, i)], 2.0);
        }
        for (a, b) in [(0, 1), (2, 3), (0, 2), (1, 3)] {
            assert_eq!(m[(a, b)], -1.0);
        }
        assert_eq!(m[(0, 3)], 0.0);
        assert_eq!(m[(1, 2)], 0.0);
    }

    #[test]
    fn grid_edge_count() {
        let g = build_grid_graph(8, &GridWeights::Uniform(0.5), &GridWeights::Uniform(2.0), &[0.0; 64])
            .unwrap();
        assert_eq!(g.edge_count(), 112);
        assert_eq!(Connectivity::grid(8).edges().len(), 112);
    }

    #[test]
    fn negative_weights_are_rejected() {
        assert!(matches!(build_line_graph(&[1.0, -1.0], &[0.0; 3]), Err(Error::InvalidWeight(_))));
        assert!(matches!(
            build_grid_graph(2, &GridWeights::Uniform(-1.0), &GridWeights::Uniform(1.0), &[0.0; 4]),
            Err(Error::InvalidWeight(_))
        ));
        assert!(matches!(
            build_grid_graph(2, &GridWeights::PerEdge(vec![1.0]), &GridWeights::Uniform(1.0), &[0.0; 4]),
            Err(Error::InvalidShape(_))
        ));
    }

    #[test]
    fn single_vertex_line() {
        let g = build_line_graph(&[], &[0.5]).unwrap();
        assert_eq!(g.n(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn quadratic_examples() {
        let l = Ggl::new(SymMatrix::from_rows(&[vec![1.5, -1.0], vec![-1.0, 1.0]]).unwrap()).unwrap();
        assert!((laplacian_quadratic(&l, &[1.0, 2.0]).unwrap() - 1.5).abs() < 1e-15);
        let cgl = dctdst_line_graph(EndLoop::Zero, EndLoop::Zero, 5, 2.0).unwrap();
        assert_eq!(laplacian_quadratic(&cgl, &[3.0; 5]).unwrap(), 0.0);
        assert_eq!(laplacian_quadratic(&cgl, &[0.0; 5]).unwrap(), 0.0);
        assert!(laplacian_quadratic(&cgl, &[0.0; 4]).is_err());
    }

    #[test]
    fn cgl_has_constant_null_vector() {
        let g = build_grid_graph(3, &GridWeights::Uniform(1.0), &GridWeights::Uniform(0.3), &[0.0; 9])
            .unwrap();
        let l = ggl_from_graph(&g);
        let e = eig_sym(l.matrix()).unwrap();
        assert!(e.values[0].abs() < 1e-9);
        let c = 1.0 / 3.0;
        for r in 0..9 {
            assert!((e.vectors[(r, 0)] - c).abs() < 1e-9);
        }
    }

    #[test]
    fn table_cells_have_expected_diagonals() {
        let dct2 = dctdst_line_graph(EndLoop::Zero, EndLoop::Zero, 4, 1.0).unwrap();
        assert_eq!(dct2.matrix().diagonal(), vec![1.0, 2.0, 2.0, 1.0]);
        let dst7 = dctdst_line_graph(EndLoop::C, EndLoop::Zero, 4, 1.0).unwrap();
        assert_eq!(dst7.matrix().diagonal(), vec![2.0, 2.0, 2.0, 1.0]);
        let dst2 = dctdst_line_graph(EndLoop::TwoC, EndLoop::TwoC, 4, 1.0).unwrap();
        assert_eq!(dst2.matrix().diagonal(), vec![3.0, 2.0, 2.0, 3.0]);
        assert_eq!(dst2.self_loops(), vec![2.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn ggl_rejects_positive_off_diagonal_and_indefinite() {
        let pos = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        assert!(Ggl::new(pos).is_err());
        let indef = SymMatrix::from_rows(&[vec![1.0, -2.0], vec![-2.0, 1.0]]).unwrap();
        assert!(Ggl::new(indef).is_err());
    }

    #[test]
    fn negative_self_loop_detected() {
        // PD with a negative row sum
        let m = SymMatrix::from_rows(&[vec![6.0, -10.0], vec![-10.0, 20.0]]).unwrap();
        let l = Ggl::new(m).unwrap();
        assert!(l.validate_nonnegative_loops().is_err());
    }
}
