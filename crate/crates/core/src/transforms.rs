//! Orthogonal block transforms: graph-based (GBT), KLT and the closed-form
//! DCT/DST family, applied separably to rows and columns or to the
//! row-major vectorized block.

use std::fmt;
use std::io::{BufRead, Cursor, Write};
use std::str::FromStr;

use crate::dataset::BlockDataset;
use crate::error::{Error, Result};
use crate::graph::{Connectivity, EndLoop, Ggl};
use crate::learn::{estimate_ggl_normalized, sample_covariance, CovarianceMode, SolverOptions};
use crate::matrix::{eig_sym, fix_sign, Mat, SymMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransformKind {
    Gbt,
    Klt,
    Dct2,
    Dst7,
    Dst4,
    Dct8,
    Dst1,
    Dst6,
    Dct4,
    Dst5,
    Dst2,
}

impl TransformKind {
    pub const TRIGONOMETRIC: [TransformKind; 9] = [
        TransformKind::Dct2,
        TransformKind::Dst7,
        TransformKind::Dst4,
        TransformKind::Dct8,
        TransformKind::Dst1,
        TransformKind::Dst6,
        TransformKind::Dct4,
        TransformKind::Dst5,
        TransformKind::Dst2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Gbt => "GBT",
            TransformKind::Klt => "KLT",
            TransformKind::Dct2 => "DCT2",
            TransformKind::Dst7 => "DST7",
            TransformKind::Dst4 => "DST4",
            TransformKind::Dct8 => "DCT8",
            TransformKind::Dst1 => "DST1",
            TransformKind::Dst6 => "DST6",
            TransformKind::Dct4 => "DCT4",
            TransformKind::Dst5 => "DST5",
            TransformKind::Dst2 => "DST2",
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase().replace('-', "");
        [TransformKind::Gbt, TransformKind::Klt]
            .into_iter()
            .chain(TransformKind::TRIGONOMETRIC)
            .find(|k| k.name() == up)
            .ok_or_else(|| Error::UnsupportedKind(s.to_owned()))
    }
}

/// Transform named by the line graph with end self-loops `(first, last)`,
/// each in `{0, c, 2c}` relative to the uniform edge weight `c`.
pub fn line_graph_transform(first: EndLoop, last: EndLoop) -> TransformKind {
    use EndLoop::*;
    match (first, last) {
        (Zero, Zero) => TransformKind::Dct2,
        (C, Zero) => TransformKind::Dst7,
        (TwoC, Zero) => TransformKind::Dst4,
        (Zero, C) => TransformKind::Dct8,
        (C, C) => TransformKind::Dst1,
        (TwoC, C) => TransformKind::Dst6,
        (Zero, TwoC) => TransformKind::Dct4,
        (C, TwoC) => TransformKind::Dst5,
        (TwoC, TwoC) => TransformKind::Dst2,
    }
}

/// Orthonormal basis stored as columns, lowest frequency / highest energy first.
#[derive(Clone, Debug, PartialEq)]
pub struct Transform {
    kind: TransformKind,
    basis: Mat,
    ordering_key: Vec<f64>,
}

impl Transform {
    /// Checks orthonormality to `1e-10` and applies the canonical sign rule.
    pub fn new(kind: TransformKind, mut basis: Mat, ordering_key: Vec<f64>) -> Result<Self> {
        let n = basis.rows();
        if !basis.is_square() || n == 0 {
            return Err(Error::InvalidShape(format!("{}x{} basis", basis.rows(), basis.cols())));
        }
        if ordering_key.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: ordering_key.len() });
        }
        let dev = basis.t_matmul(&basis)?.max_abs_diff(&Mat::identity(n));
        if !(dev < 1e-10) {
            return Err(Error::InvalidMatrix(format!("basis is not orthonormal (deviation {dev:e})")));
        }
        for c in 0..n {
            fix_sign(&mut basis, c);
        }
        Ok(Transform { kind, basis, ordering_key })
    }

    pub fn identity(n: usize) -> Self {
        Transform { kind: TransformKind::Gbt, basis: Mat::identity(n), ordering_key: vec![0.0; n] }
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.basis.rows()
    }

    pub fn basis(&self) -> &Mat {
        &self.basis
    }

    pub fn ordering_key(&self) -> &[f64] {
        &self.ordering_key
    }

    /// `Uᵀ x`
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.basis.t_matvec(x)
    }

    /// `U c`
    pub fn inverse(&self, c: &[f64]) -> Result<Vec<f64>> {
        self.basis.matvec(c)
    }

    /// Header line `KIND n`, the basis in matrix text format, then one line
    /// with the ordering keys.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.kind, self.n())?;
        self.basis.write_text(&mut w)?;
        let keys: Vec<String> = self.ordering_key.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", keys.join(" "))?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let lines: Vec<String> = r
            .lines()
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .filter(|l| !l.trim().is_empty())
            .collect();
        let header = lines.first().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
        let mut parts = header.split_whitespace();
        let kind: TransformKind = parts
            .next()
            .ok_or(Error::Parse { line: 1, msg: "header must be `kind n`".into() })?
            .parse()?;
        let n: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or(Error::Parse { line: 1, msg: "header must be `kind n`".into() })?;
        if parts.next().is_some() {
            return Err(Error::Parse { line: 1, msg: "header must be `kind n`".into() });
        }
        if lines.len() != n + 3 {
            return Err(Error::Parse { line: lines.len(), msg: format!("expected {} lines", n + 3) });
        }
        let basis = Mat::read_text(Cursor::new(lines[1..n + 2].join("\n")))?;
        if basis.rows() != n || basis.cols() != n {
            return Err(Error::Parse { line: 2, msg: format!("basis must be {n}x{n}") });
        }
        let keys = lines[n + 2]
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse { line: n + 3, msg: e.to_string() })?;
        Transform::new(kind, basis, keys)
    }
}

/// GBT: eigenvectors of `L` by ascending eigenvalue.
pub fn gbt_from_ggl(l: &Ggl) -> Result<Transform> {
    gbt_from_matrix(l.matrix())
}

/// GBT of any symmetric matrix, for Laplacian-like inputs that are not PD.
pub fn gbt_from_matrix(l: &SymMatrix) -> Result<Transform> {
    let e = eig_sym(l)?;
    Transform::new(TransformKind::Gbt, e.vectors, e.values)
}

/// KLT: eigenvectors of `S` by descending eigenvalue; columns within a tie
/// keep the ascending decomposition's order, so `S = I` gives the identity.
pub fn klt_from_covariance(s: &SymMatrix) -> Result<Transform> {
    let e = eig_sym(s)?;
    let n = s.n();
    let scale = e.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        match groups.last_mut() {
            Some(g) if (e.values[i] - e.values[g[0]]).abs() < 1e-9 * scale => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    let order: Vec<usize> = groups.into_iter().rev().flatten().collect();
    let basis = Mat::from_fn(n, n, |r, c| e.vectors[(r, order[c])]);
    Transform::new(TransformKind::Klt, basis, order.iter().map(|&i| e.values[i]).collect())
}

/// Standard trigonometric bases; column `k` is frequency `k`, row `l` is sample `l`.
pub fn closed_form_dct_dst(kind: TransformKind, n: usize) -> Result<Transform> {
    use std::f64::consts::PI;
    use TransformKind::*;
    if n == 0 {
        return Err(Error::InvalidShape("transform size must be positive".into()));
    }
    let nf = n as f64;
    let f: fn(f64, f64, f64) -> f64 = match kind {
        Dct2 => |k, l, n| (PI * k * (l + 0.5) / n).cos(),
        Dst7 => |k, l, n| (PI * (k + 0.5) * (l + 1.0) / (n + 0.5)).sin(),
        Dst4 => |k, l, n| (PI * (k + 0.5) * (l + 0.5) / n).sin(),
        Dct8 => |k, l, n| (PI * (k + 0.5) * (l + 0.5) / (n + 0.5)).cos(),
        Dst1 => |k, l, n| (PI * (k + 1.0) * (l + 1.0) / (n + 1.0)).sin(),
        Dst6 => |k, l, n| (PI * (k + 1.0) * (l + 0.5) / (n + 0.5)).sin(),
        Dct4 => |k, l, n| (PI * (k + 0.5) * (l + 0.5) / n).cos(),
        Dst5 => |k, l, n| (PI * (k + 1.0) * (l + 1.0) / (n + 0.5)).sin(),
        Dst2 => |k, l, n| (PI * (k + 1.0) * (l + 0.5) / n).sin(),
        Gbt | Klt => return Err(Error::UnsupportedKind(kind.to_string())),
    };
    let mut basis = Mat::from_fn(n, n, |l, k| f(k as f64, l as f64, nf));
    for k in 0..n {
        let norm = basis.column(k).iter().map(|v| v * v).sum::<f64>().sqrt();
        for l in 0..n {
            basis[(l, k)] /= norm;
        }
    }
    Transform::new(kind, basis, (0..n).map(|k| k as f64).collect())
}

/// Row and column transforms of a separable block transform.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparablePair {
    pub u_row: Transform,
    pub u_col: Transform,
}

impl SeparablePair {
    pub fn new(u_row: Transform, u_col: Transform) -> Result<Self> {
        if u_row.n() != u_col.n() {
            return Err(Error::DimensionMismatch { expected: u_row.n(), found: u_col.n() });
        }
        Ok(SeparablePair { u_row, u_col })
    }

    pub fn n(&self) -> usize {
        self.u_row.n()
    }

    /// Equivalent nonseparable transform `U_col ⊗ U_row` for row-major vectors.
    pub fn to_nonseparable(&self) -> Transform {
        let basis = self.u_col.basis.kron(&self.u_row.basis);
        let keys = self
            .u_col
            .ordering_key
            .iter()
            .flat_map(|a| self.u_row.ordering_key.iter().map(move |b| a + b))
            .collect();
        Transform { kind: self.u_row.kind, basis, ordering_key: keys }
    }
}

fn check_block(x: &Mat, n: usize) -> Result<()> {
    if x.rows() != n || x.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: if x.rows() != n { x.rows() } else { x.cols() } });
    }
    Ok(())
}

/// `X̂ = U_colᵀ X U_row`
pub fn gbst_forward(x: &Mat, p: &SeparablePair) -> Result<Mat> {
    check_block(x, p.n())?;
    p.u_col.basis.t_matmul(&x.matmul(&p.u_row.basis)?)
}

/// `X = U_col X̂ U_rowᵀ`
pub fn gbst_inverse(c: &Mat, p: &SeparablePair) -> Result<Mat> {
    check_block(c, p.n())?;
    p.u_col.basis.matmul(&c.matmul(&p.u_row.basis.transpose())?)
}

fn block_side(t: &Transform) -> Result<usize> {
    let side = (t.n() as f64).sqrt().round() as usize;
    if side * side != t.n() {
        return Err(Error::InvalidShape(format!("transform of size {} is not for square blocks", t.n())));
    }
    Ok(side)
}

/// `X̂ = block(Uᵀ vec(X))`, row-major vectorization.
pub fn gbnt_forward(x: &Mat, t: &Transform) -> Result<Mat> {
    let side = block_side(t)?;
    check_block(x, side)?;
    Mat::from_vec(side, side, t.forward(x.as_slice())?)
}

pub fn gbnt_inverse(c: &Mat, t: &Transform) -> Result<Mat> {
    let side = block_side(t)?;
    check_block(c, side)?;
    Mat::from_vec(side, side, t.inverse(c.as_slice())?)
}

/// Learned line-graph Laplacians for rows and columns.
#[derive(Clone, Debug)]
pub struct SeparableModel {
    pub pair: SeparablePair,
    pub l_row: Ggl,
    pub l_col: Ggl,
}

/// Separable GL-GBT: line-graph GGLs estimated from the row samples and the
/// column samples of every block.
pub fn train_gbst_model(d: &BlockDataset, opts: SolverOptions) -> Result<SeparableModel> {
    let line = Connectivity::line(d.n());
    let s_row = sample_covariance(d, CovarianceMode::Rows)?;
    let s_col = sample_covariance(d, CovarianceMode::Cols)?;
    let l_row = estimate_ggl_normalized(&s_row, &line, opts)?.laplacian;
    let l_col = estimate_ggl_normalized(&s_col, &line, opts)?.laplacian;
    let pair = SeparablePair::new(gbt_from_ggl(&l_row)?, gbt_from_ggl(&l_col)?)?;
    Ok(SeparableModel { pair, l_row, l_col })
}

pub fn train_gbst(d: &BlockDataset, opts: SolverOptions) -> Result<SeparablePair> {
    Ok(train_gbst_model(d, opts)?.pair)
}

/// Nonseparable GL-GBT from a grid-graph GGL over the vectorized blocks.
pub fn train_gbnt_model(d: &BlockDataset, opts: SolverOptions) -> Result<(Transform, Ggl)> {
    let s = sample_covariance(d, CovarianceMode::Block)?;
    let l = estimate_ggl_normalized(&s, &Connectivity::grid(d.n()), opts)?.laplacian;
    Ok((gbt_from_ggl(&l)?, l))
}

pub fn train_gbnt(d: &BlockDataset, opts: SolverOptions) -> Result<Transform> {
    Ok(train_gbnt_model(d, opts)?.0)
}

/// Nonseparable KLT of the vectorized blocks.
pub fn train_klt(d: &BlockDataset) -> Result<Transform> {
    klt_from_covariance(&sample_covariance(d, CovarianceMode::Block)?)
}

/// Largest entry difference between two bases after flipping each column
/// of `b` to agree in sign with `a`.
pub fn aligned_deviation(a: &Mat, b: &Mat) -> f64 {
    let n = a.rows();
    (0..a.cols())
        .map(|c| {
            let dot: f64 = (0..n).map(|r| a[(r, c)] * b[(r, c)]).sum();
            let s = if dot < 0.0 { -1.0 } else { 1.0 };
            (0..n).map(|r| (a[(r, c)] - s * b[(r, c)]).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CatalogEntry {
    pub first: EndLoop,
    pub last: EndLoop,
    pub kind: TransformKind,
    pub n: usize,
    pub c: f64,
    pub deviation: f64,
}

/// GBT of every end-loop line graph against its closed-form transform.
pub fn verify_line_graph_catalog(sizes: &[usize], weights: &[f64]) -> Result<Vec<CatalogEntry>> {
    let mut out = Vec::new();
    for first in EndLoop::ALL {
        for last in EndLoop::ALL {
            let kind = line_graph_transform(first, last);
            for &n in sizes {
                let reference = closed_form_dct_dst(kind, n)?;
                for &c in weights {
                    let g = gbt_from_ggl(&crate::graph::dctdst_line_graph(first, last, n, c)?)?;
                    let deviation = aligned_deviation(g.basis(), reference.basis());
                    out.push(CatalogEntry { first, last, kind, n, c, deviation });
                }
            }
        }
    }
    Ok(out)
}
