//! Edge-adaptive GBTs: per-block Prewitt edge detection, a grid graph with
//! weakened edges across detected discontinuities, and the side-information
//! rate of the edge map.

use crate::error::{Error, Result};
use crate::graph::{build_grid_graph, ggl_from_graph, Ggl, GridWeights};
use crate::matrix::Mat;
use crate::transforms::{gbt_from_ggl, Transform};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EagbtParams {
    pub t_edge: f64,
    pub s_edge: f64,
    pub w_c: f64,
}

impl Default for EagbtParams {
    fn default() -> Self {
        EagbtParams { t_edge: 10.0, s_edge: 10.0, w_c: 1.0 }
    }
}

impl EagbtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_edge >= 0.0) || !self.t_edge.is_finite() {
            return Err(Error::InvalidInput(format!("T_edge = {} must be nonnegative", self.t_edge)));
        }
        if !(self.s_edge >= 1.0) || !self.s_edge.is_finite() {
            return Err(Error::InvalidInput(format!("s_edge = {} must be at least 1", self.s_edge)));
        }
        if !(self.w_c > 0.0) || !self.w_c.is_finite() {
            return Err(Error::InvalidWeight(format!("w_c = {} must be positive", self.w_c)));
        }
        Ok(())
    }

    /// Weight of a cut edge, `w_c / s_edge`.
    pub fn w_e(&self) -> f64 {
        self.w_c / self.s_edge
    }
}

/// Cut flags for the grid edges of an `N × N` block, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EdgeMap {
    n: usize,
    /// Edge `(i, j)-(i, j+1)` at `i * (N-1) + j`.
    h_cut: Vec<bool>,
    /// Edge `(i, j)-(i+1, j)` at `i * N + j`.
    v_cut: Vec<bool>,
}

impl EdgeMap {
    pub fn empty(n: usize) -> Self {
        let m = n * n.saturating_sub(1);
        EdgeMap { n, h_cut: vec![false; m], v_cut: vec![false; m] }
    }

    pub fn from_cuts(n: usize, h_cut: Vec<bool>, v_cut: Vec<bool>) -> Result<Self> {
        let m = n * n.saturating_sub(1);
        if h_cut.len() != m || v_cut.len() != m {
            return Err(Error::InvalidShape(format!(
                "edge map for N = {n} needs {m} + {m} flags, got {} + {}",
                h_cut.len(),
                v_cut.len()
            )));
        }
        Ok(EdgeMap { n, h_cut, v_cut })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h_cut(&self) -> &[bool] {
        &self.h_cut
    }

    pub fn v_cut(&self) -> &[bool] {
        &self.v_cut
    }

    pub fn is_h_cut(&self, i: usize, j: usize) -> bool {
        self.h_cut[i * (self.n - 1) + j]
    }

    pub fn is_v_cut(&self, i: usize, j: usize) -> bool {
        self.v_cut[i * self.n + j]
    }

    pub fn cut_count(&self) -> usize {
        self.h_cut.iter().chain(&self.v_cut).filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.cut_count() == 0
    }

    /// All `2N(N-1)` flags: horizontal edges first, then vertical, each row-major.
    pub fn symbols(&self) -> impl Iterator<Item = bool> + '_ {
        self.h_cut.iter().chain(&self.v_cut).copied()
    }

    /// Pixels as `o`, cut horizontal-neighbour edges as `|`, cut vertical ones as `-`.
    pub fn to_ascii(&self) -> String {
        let n = self.n;
        let mut out = String::new();
        for i in 0..n {
            for j in 0..n {
                out.push('o');
                if j + 1 < n {
                    out.push(if self.is_h_cut(i, j) { '|' } else { ' ' });
                }
            }
            out.push('\n');
            if i + 1 < n {
                for j in 0..n {
                    out.push(if self.is_v_cut(i, j) { '-' } else { ' ' });
                    if j + 1 < n {
                        out.push(' ');
                    }
                }
                out.push('\n');
            }
        }
        out
    }

    /// Plain PBM of size `(2N-1) × (2N-1)`; black marks a cut edge.
    pub fn to_pbm(&self) -> String {
        let n = self.n;
        let s = 2 * n - 1;
        let mut out = format!("P1\n{s} {s}\n");
        for r in 0..s {
            let row: Vec<&str> = (0..s)
                .map(|c| {
                    let cut = match (r % 2, c % 2) {
                        (0, 1) => self.is_h_cut(r / 2, c / 2),
                        (1, 0) => self.is_v_cut(r / 2, c / 2),
                        _ => false,
                    };
                    if cut { "1" } else { "0" }
                })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Prewitt gradients with border replication, scaled by 1/3 so that a step
/// of height `h` gives magnitude `h` next to it.
pub fn prewitt_gradients(block: &Mat) -> Result<(Mat, Mat)> {
    let n = block.rows();
    if !block.is_square() || n < 2 {
        return Err(Error::InvalidShape(format!("Prewitt needs a square block of side >= 2, got {}x{}", n, block.cols())));
    }
    let at = |i: isize, j: isize| {
        let c = |v: isize| v.clamp(0, n as isize - 1) as usize;
        block[(c(i), c(j))]
    };
    let gx = Mat::from_fn(n, n, |i, j| {
        let (i, j) = (i as isize, j as isize);
        (-1..=1).map(|d| at(i + d, j + 1) - at(i + d, j - 1)).sum::<f64>() / 3.0
    });
    let gy = Mat::from_fn(n, n, |i, j| {
        let (i, j) = (i as isize, j as isize);
        (-1..=1).map(|d| at(i + 1, j + d) - at(i - 1, j + d)).sum::<f64>() / 3.0
    });
    Ok((gx, gy))
}

/// An edge is cut when both endpoint gradients (across the edge) and the
/// pixel difference itself exceed `T_edge`.
pub fn detect_edge_map(block: &Mat, params: &EagbtParams) -> Result<EdgeMap> {
    params.validate()?;
    let (gx, gy) = prewitt_gradients(block)?;
    let n = block.rows();
    let t = params.t_edge;
    let mut h_cut = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in 0..n - 1 {
            let g = gx[(i, j)].abs().min(gx[(i, j + 1)].abs());
            h_cut.push(g > t && (block[(i, j)] - block[(i, j + 1)]).abs() > t);
        }
    }
    let mut v_cut = Vec::with_capacity(n * (n - 1));
    for i in 0..n - 1 {
        for j in 0..n {
            let g = gy[(i, j)].abs().min(gy[(i + 1, j)].abs());
            v_cut.push(g > t && (block[(i, j)] - block[(i + 1, j)]).abs() > t);
        }
    }
    EdgeMap::from_cuts(n, h_cut, v_cut)
}

/// Grid CGL with weight `w_c`, cut edges at `w_c / s_edge`.
pub fn eagbt_graph(map: &EdgeMap, params: &EagbtParams) -> Result<Ggl> {
    params.validate()?;
    let (wc, we) = (params.w_c, params.w_e());
    let pick = |cut: &[bool]| GridWeights::PerEdge(cut.iter().map(|&c| if c { we } else { wc }).collect());
    let g = build_grid_graph(map.n, &pick(&map.h_cut), &pick(&map.v_cut), &vec![0.0; map.n * map.n])?;
    Ok(ggl_from_graph(&g))
}

/// Adaptive binary code length in bits with the estimate
/// `p(b) = (c_b + 1/2) / (c_0 + c_1 + 1)` from the counts so far.
pub fn kt_code_length(symbols: impl IntoIterator<Item = bool>) -> f64 {
    let mut counts = [0.0f64; 2];
    let mut bits = 0.0;
    for s in symbols {
        let b = s as usize;
        bits -= ((counts[b] + 0.5) / (counts[0] + counts[1] + 1.0)).log2();
        counts[b] += 1.0;
    }
    bits
}

/// Side-information bits of an edge map, symbols in [`EdgeMap::symbols`]
/// order with counts starting from zero for every block.
pub fn edge_map_rate(map: &EdgeMap) -> f64 {
    kt_code_length(map.symbols())
}

/// Edge map and EA-GBT of one block.
pub fn eagbt_transform(block: &Mat, params: &EagbtParams) -> Result<(EdgeMap, Transform)> {
    let map = detect_edge_map(block, params)?;
    let t = gbt_from_ggl(&eagbt_graph(&map, params)?)?;
    Ok((map, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(n: usize, col: usize, h: f64) -> Mat {
        Mat::from_fn(n, n, |_, j| if j < col { 0.0 } else { h })
    }

    #[test]
    fn gradients_of_a_step() {
        let (gx, gy) = prewitt_gradients(&step(6, 3, 100.0)).unwrap();
        for i in 0..6 {
            assert_eq!(gx[(i, 2)], 100.0);
            assert_eq!(gx[(i, 3)], 100.0);
            assert_eq!(gx[(i, 0)], 0.0);
        }
        assert_eq!(gy.max_abs(), 0.0);
        let (gx, gy) = prewitt_gradients(&Mat::from_fn(4, 4, |_, _| 7.0)).unwrap();
        assert_eq!(gx.max_abs() + gy.max_abs(), 0.0);
        assert!(prewitt_gradients(&Mat::zeros(1, 1)).is_err());
    }

    #[test]
    fn step_cuts_one_column_of_edges() {
        let p = EagbtParams::default();
        let map = detect_edge_map(&step(8, 4, 100.0), &p).unwrap();
        assert_eq!(map.cut_count(), 8);
        assert!((0..8).all(|i| map.is_h_cut(i, 3)));
        assert!(detect_edge_map(&step(8, 4, 5.0), &p).unwrap().is_empty());
        assert!(detect_edge_map(&Mat::zeros(8, 8), &p).unwrap().is_empty());
    }

    #[test]
    fn graph_weights() {
        let p = EagbtParams::default();
        let mut h = vec![false; 6];
        h[0] = true;
        let map = EdgeMap::from_cuts(3, h, vec![false; 6]).unwrap();
        let l = eagbt_graph(&map, &p).unwrap();
        assert!((l.matrix()[(0, 1)] + 0.1).abs() < 1e-15);
        assert_eq!(l.matrix()[(1, 2)], -1.0);
        let flat = EagbtParams { s_edge: 1.0, ..p };
        let uniform = eagbt_graph(&EdgeMap::empty(3), &p).unwrap();
        assert_eq!(eagbt_graph(&map, &flat).unwrap(), uniform);
    }

    #[test]
    fn two_zero_symbols() {
        assert!((kt_code_length([false, false]) - (1.0 - 0.75f64.log2())).abs() < 1e-15);
        assert!((kt_code_length([false, false]) - 1.415).abs() < 1e-3);
    }

    #[test]
    fn rate_of_four_zeros() {
        let map = EdgeMap::from_cuts(2, vec![false; 2], vec![false; 2]).unwrap();
        // four zeros: 1/2, 3/4, 5/6, 7/8
        let expected = -(0.5f64.log2() + 0.75f64.log2() + (5.0f64 / 6.0).log2() + 0.875f64.log2());
        assert!((edge_map_rate(&map) - expected).abs() < 1e-12);
    }

    #[test]
    fn ascii_and_pbm() {
        let map = detect_edge_map(&step(3, 1, 50.0), &EagbtParams::default()).unwrap();
        assert_eq!(map.to_ascii(), "o|o o\n     \no|o o\n     \no|o o\n");
        let pbm = map.to_pbm();
        assert!(pbm.starts_with("P1\n5 5\n0 1 0 0 0\n"));
    }
}
