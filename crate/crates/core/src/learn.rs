//! Sample covariances and constrained maximum-likelihood GGL estimation.
//!
//! The estimation problem is
//!
//! ```text
//! minimize   tr(L S) - logdet(L)
//! subject to L_ij <= 0 where A_ij = 1,  L_ij = 0 where A_ij = 0 (i != j)
//! ```
//!
//! and is solved by block coordinate descent over vertices. Fixing every row
//! and column except vertex `u`, the objective separates into a scalar part
//! (minimized in closed form, giving `(L⁻¹)_uu = S_uu`) and a nonnegative
//! quadratic program in the edge weights of `u`. The inverse `C = L⁻¹` is
//! carried along with rank-one updates and refreshed after every pass.

use crate::dataset::BlockDataset;
use crate::error::{Error, Result};
use crate::graph::{Connectivity, Ggl};
use crate::matrix::{inv_spd, Cholesky, Mat, SymMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovarianceMode {
    /// Vectorized blocks, `N² × N²`.
    Block,
    /// Every block row is a sample, `N × N`.
    Rows,
    /// Every block column is a sample, `N × N`.
    Cols,
}

/// Zero-mean sample covariance `(1/k) Σ r rᵀ`.
pub fn covariance_from_samples<'a, I>(dim: usize, samples: I) -> Result<SymMatrix>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc = Mat::zeros(dim, dim);
    let mut k = 0usize;
    for r in samples {
        if r.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: r.len() });
        }
        for i in 0..dim {
            if r[i] == 0.0 {
                continue;
            }
            for j in i..dim {
                acc[(i, j)] += r[i] * r[j];
            }
        }
        k += 1;
    }
    if k == 0 {
        return Err(Error::EmptyDataset);
    }
    let inv_k = 1.0 / k as f64;
    let m = Mat::from_fn(dim, dim, |i, j| if i <= j { acc[(i, j)] } else { acc[(j, i)] } * inv_k);
    SymMatrix::new(m)
}

pub fn sample_covariance(d: &BlockDataset, mode: CovarianceMode) -> Result<SymMatrix> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = d.n();
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for b in d.blocks() {
        let v: Vec<f64> = b.values.iter().map(|&x| x as f64).collect();
        match mode {
            CovarianceMode::Block => samples.push(v),
            CovarianceMode::Rows => samples.extend(v.chunks(n).map(<[f64]>::to_vec)),
            CovarianceMode::Cols => {
                samples.extend((0..n).map(|j| (0..n).map(|i| v[i * n + j]).collect()))
            }
        }
    }
    let dim = if mode == CovarianceMode::Block { n * n } else { n };
    covariance_from_samples(dim, samples.iter().map(Vec::as_slice))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Relative objective change per pass below which the solver may stop.
    pub tol_obj: f64,
    /// Bound on the KKT residual at termination.
    pub tol_kkt: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol_obj: 1e-9, tol_kkt: 1e-6, max_iters: 1000 }
    }
}

#[derive(Clone, Debug)]
pub struct GglProblem {
    pub s: SymMatrix,
    pub connectivity: Connectivity,
    pub options: SolverOptions,
}

impl GglProblem {
    pub fn new(s: SymMatrix, connectivity: Connectivity, options: SolverOptions) -> Result<Self> {
        if s.n() != connectivity.n() {
            return Err(Error::DimensionMismatch { expected: s.n(), found: connectivity.n() });
        }
        if let Some(i) = (0..s.n()).find(|&i| !(s[(i, i)] > 0.0)) {
            return Err(Error::InvalidInput(format!("sample variance at {i} is {}", s[(i, i)])));
        }
        Ok(GglProblem { s, connectivity, options })
    }
}

#[derive(Clone, Debug)]
pub struct GglSolution {
    pub laplacian: Ggl,
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    /// Amount added to the diagonal of a singular `S`, if any.
    pub diagonal_loading: Option<f64>,
    /// Objective after initialization and after each pass.
    pub objective_trace: Vec<f64>,
}

/// `tr(L S) - logdet(L)`; fails if `L` is not positive definite.
pub fn objective(l: &SymMatrix, s: &SymMatrix) -> Result<f64> {
    let chol = Cholesky::new(l)?;
    Ok(trace_product(l, s) - chol.log_det())
}

fn trace_product(a: &SymMatrix, b: &SymMatrix) -> f64 {
    a.as_mat().as_slice().iter().zip(b.as_mat().as_slice()).map(|(x, y)| x * y).sum()
}

/// Largest violation of the optimality conditions of the estimation problem:
///
/// * `|(L⁻¹)_ii - S_ii|` for every vertex,
/// * `|(L⁻¹)_ij - S_ij|` on edges with `L_ij < 0`,
/// * `max(0, S_ij - (L⁻¹)_ij)` on edges with `L_ij = 0`.
pub fn kkt_residual(l: &Ggl, s: &SymMatrix, a: &Connectivity) -> Result<f64> {
    let n = l.n();
    if s.n() != n || a.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: s.n().max(a.n()) });
    }
    let c = inv_spd(l.matrix())?;
    Ok(kkt_with_inverse(l.matrix(), &c, s, a))
}

fn kkt_with_inverse(l: &SymMatrix, c: &SymMatrix, s: &SymMatrix, a: &Connectivity) -> f64 {
    let n = l.n();
    let mut worst = 0.0f64;
    for i in 0..n {
        worst = worst.max((c[(i, i)] - s[(i, i)]).abs());
        for j in (i + 1)..n {
            if !a.has_edge(i, j) {
                continue;
            }
            let v = if l[(i, j)] < 0.0 {
                (c[(i, j)] - s[(i, j)]).abs()
            } else {
                (s[(i, j)] - c[(i, j)]).max(0.0)
            };
            worst = worst.max(v);
        }
    }
    worst
}

/// Adds `1e-6 · trace(S)/n` to the diagonal when `S` is numerically singular.
fn load_if_singular(s: &SymMatrix) -> Result<(SymMatrix, Option<f64>)> {
    if Cholesky::new(s).is_ok() {
        return Ok((s.clone(), None));
    }
    let delta = 1e-6 * s.trace() / s.n() as f64;
    Ok((s.add_diagonal(delta)?, Some(delta)))
}

/// Nonnegative QP `min ½ βᵀQβ - bᵀβ, β ≥ 0` by cyclic coordinate descent.
fn nonneg_qp(q: &Mat, b: &[f64], beta: &mut [f64]) {
    let k = b.len();
    for _ in 0..100_000 {
        let mut delta = 0.0f64;
        let mut size = 0.0f64;
        for i in 0..k {
            let mut r = b[i];
            for j in 0..k {
                if j != i {
                    r -= q[(i, j)] * beta[j];
                }
            }
            let new = (r / q[(i, i)]).max(0.0);
            delta = delta.max((new - beta[i]).abs());
            size = size.max(new.abs());
            beta[i] = new;
        }
        if delta <= 1e-15 * (1.0 + size) {
            break;
        }
    }
}

struct CoordinateDescent<'a> {
    s: &'a SymMatrix,
    neighbors: Vec<Vec<usize>>,
    l: Mat,
    c: Mat,
}

impl CoordinateDescent<'_> {
    fn update_vertex(&mut self, u: usize) {
        let n = self.l.rows();
        let nb = &self.neighbors[u];
        let s_uu = self.s[(u, u)];
        let c_uu = self.c[(u, u)];

        // P⁻¹ = C₋ᵤ₋ᵤ - C₋ᵤᵤ Cᵤ₋ᵤ / C_uu, needed on the neighbour block.
        let pinv = |c: &Mat, a: usize, b: usize| c[(a, b)] - c[(a, u)] * c[(u, b)] / c_uu;

        let k = nb.len();
        let mut beta: Vec<f64> = nb.iter().map(|&v| (-self.l[(v, u)]).max(0.0)).collect();
        if k > 0 {
            let q = Mat::from_fn(k, k, |i, j| pinv(&self.c, nb[i], nb[j]));
            let b: Vec<f64> = nb.iter().map(|&v| self.s[(v, u)] / s_uu).collect();
            nonneg_qp(&q, &b, &mut beta);
        }

        // g = P⁻¹ β over all vertices except u
        let mut g = vec![0.0; n];
        for a in 0..n {
            if a == u {
                continue;
            }
            g[a] = nb.iter().zip(&beta).map(|(&v, &bv)| pinv(&self.c, a, v) * bv).sum();
        }
        let quad: f64 = nb.iter().zip(&beta).map(|(&v, &bv)| g[v] * bv).sum();

        for a in 0..n {
            if a != u {
                self.l[(a, u)] = 0.0;
                self.l[(u, a)] = 0.0;
            }
        }
        for (&v, &bv) in nb.iter().zip(&beta) {
            self.l[(v, u)] = -bv;
            self.l[(u, v)] = -bv;
        }
        self.l[(u, u)] = 1.0 / s_uu + quad;

        let cu: Vec<f64> = (0..n).map(|a| self.c[(a, u)]).collect();
        for a in 0..n {
            if a == u {
                continue;
            }
            for b in 0..n {
                if b == u {
                    continue;
                }
                self.c[(a, b)] = self.c[(a, b)] - cu[a] * cu[b] / c_uu + s_uu * g[a] * g[b];
            }
        }
        for a in 0..n {
            if a != u {
                self.c[(a, u)] = s_uu * g[a];
                self.c[(u, a)] = s_uu * g[a];
            }
        }
        self.c[(u, u)] = s_uu;
    }
}

/// Moves further along the displacement of the last pass, `L_prev + t (L - L_prev)`
/// for `t = 2, 4, 8, ...`, while the point stays feasible, positive definite and
/// keeps lowering the objective. Ill-conditioned `S` makes plain passes creep
/// along a nearly constant direction; this recovers most of that distance.
fn extrapolate(prev: &Mat, cur: &SymMatrix, f_cur: f64, s: &SymMatrix) -> Result<Option<(SymMatrix, f64)>> {
    let d = cur.as_mat().sub(prev)?;
    if d.max_abs() == 0.0 {
        return Ok(None);
    }
    let n = cur.n();
    let mut best: Option<(SymMatrix, f64)> = None;
    let mut f_best = f_cur;
    let mut t = 2.0;
    for _ in 0..40 {
        let cand = prev.add(&d.scale(t))?;
        let feasible = (0..n).all(|i| (0..n).all(|j| i == j || cand[(i, j)] <= 0.0));
        if !feasible {
            break;
        }
        let cand = to_sym(&cand)?;
        match objective(&cand, s) {
            Ok(fc) if fc < f_best => {
                f_best = fc;
                best = Some((cand, fc));
            }
            _ => break,
        }
        t *= 2.0;
    }
    Ok(best)
}

fn to_sym(m: &Mat) -> Result<SymMatrix> {
    SymMatrix::symmetrize(m)
}

/// Relative floating-point error allowed when comparing successive objectives.
pub const OBJECTIVE_SLACK: f64 = 1e-12;

/// Evaluation error bound for `tr(LS) - logdet(L)`; the trace term cancels
/// heavily when `L` is large and `S` nearly singular.
pub fn objective_slack(l: &SymMatrix, s: &SymMatrix, f: f64) -> f64 {
    let mass: f64 = l.as_mat().as_slice().iter().zip(s.as_mat().as_slice()).map(|(x, y)| (x * y).abs()).sum();
    OBJECTIVE_SLACK * mass.max(f.abs()).max(1.0)
}

/// Constrained ML estimate of a GGL by block coordinate descent.
///
/// Returns `MaxItersExceeded` carrying the last (best) iterate when the KKT
/// bound is not reached within `max_iters` passes.
pub fn estimate_ggl(p: &GglProblem) -> Result<GglSolution> {
    if !p.s.as_mat().is_finite() {
        return Err(Error::InvalidInput("sample covariance has non-finite entries".into()));
    }
    let (s, loading) = load_if_singular(&p.s)?;
    let n = s.n();
    let a = &p.connectivity;
    let opts = p.options;

    let l0 = Mat::diag(&s.diagonal().iter().map(|v| 1.0 / v).collect::<Vec<_>>());
    let c0 = Mat::diag(&s.diagonal());
    let mut cd = CoordinateDescent {
        s: &s,
        neighbors: (0..n).map(|u| a.neighbors(u)).collect(),
        l: l0,
        c: c0,
    };

    let mut f_prev = objective(&to_sym(&cd.l)?, &s)?;
    let mut trace = vec![f_prev];
    let mut kkt = kkt_with_inverse(&to_sym(&cd.l)?, &to_sym(&cd.c)?, &s, a);
    let mut iterations = 0;

    while iterations < opts.max_iters {
        let l_before = cd.l.clone();
        let c_before = cd.c.clone();
        for u in 0..n {
            cd.update_vertex(u);
        }
        let mut l_sym = to_sym(&cd.l)?;
        let f_pass = Cholesky::new(&l_sym).ok().map(|ch| trace_product(&l_sym, &s) - ch.log_det());
        let mut f = match f_pass {
            Some(f) if f <= f_prev + objective_slack(&l_sym, &s, f_prev) => f,
            // An increase beyond evaluation error; keep the previous iterate.
            _ => {
                cd.l = l_before;
                cd.c = c_before;
                break;
            }
        };
        iterations += 1;
        if let Some((l_ext, f_ext)) = extrapolate(&l_before, &l_sym, f, &s)? {
            cd.l = l_ext.as_mat().clone();
            l_sym = l_ext;
            f = f_ext;
        }
        let c_sym = inv_spd(&l_sym)?;
        cd.c = c_sym.as_mat().clone();
        trace.push(f);
        kkt = kkt_with_inverse(&l_sym, &c_sym, &s, a);
        let rel = (f_prev - f).abs() / f.abs().max(1.0);
        f_prev = f;
        if kkt <= opts.tol_kkt && rel <= opts.tol_obj {
            break;
        }
    }

    let laplacian = Ggl::new(to_sym(&cd.l)?)?;
    let solution = GglSolution {
        laplacian,
        objective: f_prev,
        iterations,
        kkt_residual: kkt,
        diagonal_loading: loading,
        objective_trace: trace,
    };
    if kkt <= opts.tol_kkt {
        Ok(solution)
    } else {
        Err(Error::MaxItersExceeded(Box::new(solution)))
    }
}

/// Solves on `S / mean(diag S)` and rescales, which keeps absolute KKT
/// tolerances meaningful for residual data with large variances.
pub fn estimate_ggl_normalized(
    s: &SymMatrix,
    a: &Connectivity,
    options: SolverOptions,
) -> Result<GglSolution> {
    let scale = s.trace() / s.n() as f64;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidInput("degenerate sample covariance".into()));
    }
    let p = GglProblem::new(s.scale(1.0 / scale)?, a.clone(), options)?;
    let rescale = |mut sol: GglSolution| -> Result<GglSolution> {
        // L(cS) = L(S) / c
        sol.laplacian = Ggl::new(sol.laplacian.matrix().scale(1.0 / scale)?)?;
        sol.diagonal_loading = sol.diagonal_loading.map(|d| d * scale);
        let n = s.n() as f64;
        sol.objective += n * scale.ln();
        for f in &mut sol.objective_trace {
            *f += n * scale.ln();
        }
        let loaded = match sol.diagonal_loading {
            Some(d) => s.add_diagonal(d)?,
            None => s.clone(),
        };
        sol.kkt_residual = kkt_residual(&sol.laplacian, &loaded, a)?;
        Ok(sol)
    };
    match estimate_ggl(&p) {
        Ok(sol) => rescale(sol),
        Err(Error::MaxItersExceeded(sol)) => Err(Error::MaxItersExceeded(Box::new(rescale(*sol)?))),
        Err(e) => Err(e),
    }
}

/// `f(L + Δ) - f(L)` evaluated without cancellation, `None` if `L + Δ` is
/// not positive definite. Uses `logdet(L + Δ) - logdet(L) = logdet(I + M)`
/// with `M = R⁻¹ Δ R⁻ᵀ`, factoring `I + M` while tracking pivots minus one.
fn objective_change(chol: &Cholesky, delta: &Mat, s: &SymMatrix) -> Option<f64> {
    let n = chol.n();
    let x: Vec<Vec<f64>> = (0..n).map(|j| chol.solve_lower(&delta.column(j))).collect();
    // x[j] is column j of R⁻¹Δ; row i of R⁻¹Δ is then (x[0][i], ..., x[n-1][i]).
    let m: Vec<Vec<f64>> = (0..n)
        .map(|i| chol.solve_lower(&(0..n).map(|j| x[j][i]).collect::<Vec<_>>()))
        .collect();
    // m[i] is column i of M.
    let mut f = vec![vec![0.0; n]; n];
    let mut log_det = 0.0;
    for j in 0..n {
        let mut pm1 = 0.5 * (m[j][j] + m[j][j]);
        for k in 0..j {
            pm1 -= f[j][k] * f[j][k];
        }
        if !(pm1 > -1.0) {
            return None;
        }
        log_det += pm1.ln_1p();
        let d = (1.0 + pm1).sqrt();
        f[j][j] = d;
        for i in (j + 1)..n {
            let mut v = 0.5 * (m[i][j] + m[j][i]);
            for k in 0..j {
                v -= f[i][k] * f[j][k];
            }
            f[i][j] = v / d;
        }
    }
    let tr: f64 = delta.as_slice().iter().zip(s.as_mat().as_slice()).map(|(a, b)| a * b).sum();
    Some(tr - log_det)
}

/// Projected-gradient reference solver for small problems (n ≤ 6).
///
/// Independent of [`estimate_ggl`]: it walks along a diagonally scaled `S - L⁻¹`, projects onto
/// the sign and sparsity constraints and backtracks until the Armijo
/// condition holds and the iterate stays positive definite.
pub fn estimate_ggl_oracle(p: &GglProblem) -> Result<GglSolution> {
    const TARGET_KKT: f64 = 1e-8;
    const MAX_STEPS: usize = 2_000_000;
    let n = p.s.n();
    if n > 6 {
        return Err(Error::InvalidInput(format!("oracle is limited to n <= 6, got {n}")));
    }
    let (s, loading) = load_if_singular(&p.s)?;
    let a = &p.connectivity;

    let project = |m: &Mat| -> Mat {
        Mat::from_fn(n, n, |i, j| {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            if i == j {
                v
            } else if a.has_edge(i, j) {
                v.min(0.0)
            } else {
                0.0
            }
        })
    };

    let mut l = project(&Mat::diag(&s.diagonal().iter().map(|v| 1.0 / v).collect::<Vec<_>>()));
    let mut f = objective(&SymMatrix::new(l.clone())?, &s)?;
    let mut trace = vec![f];
    let mut step = 1.0;
    let mut kkt = f64::INFINITY;
    let mut iterations = 0;

    while iterations < MAX_STEPS {
        let l_sym = SymMatrix::new(l.clone())?;
        let c = inv_spd(&l_sym)?;
        kkt = kkt_with_inverse(&l_sym, &c, &s, a);
        if kkt < TARGET_KKT {
            break;
        }
        iterations += 1;
        let grad = s.as_mat().sub(c.as_mat())?;
        // Entrywise metric 1/(C_ii C_jj) approximates the inverse Hessian
        // diagonal; the constraints are entrywise, so projection stays exact.
        let scaled = Mat::from_fn(n, n, |i, j| grad[(i, j)] / (c[(i, i)] * c[(j, j)]));
        let chol = Cholesky::new(&l_sym)?;
        let mut accepted = false;
        while step > 1e-30 {
            let cand = project(&l.sub(&scaled.scale(step))?);
            let dir = cand.sub(&l)?;
            let slope: f64 = grad.as_slice().iter().zip(dir.as_slice()).map(|(g, d)| g * d).sum();
            if let Some(df) = objective_change(&chol, &dir, &s) {
                if df <= 1e-4 * slope && slope < 0.0 {
                    l = cand;
                    f += df;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(f);
        step = (step * 2.0).min(1e6);
    }

    let solution = GglSolution {
        laplacian: Ggl::new(SymMatrix::new(l)?)?,
        objective: f,
        iterations,
        kkt_residual: kkt,
        diagonal_loading: loading,
        objective_trace: trace,
    };
    if kkt < TARGET_KKT {
        Ok(solution)
    } else {
        Err(Error::MaxItersExceeded(Box::new(solution)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ResidualBlock;

    fn sym(rows: &[&[f64]]) -> SymMatrix {
        SymMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn solve(s: SymMatrix, a: Connectivity) -> GglSolution {
        let opts = SolverOptions { tol_kkt: 1e-9, ..Default::default() };
        estimate_ggl(&GglProblem::new(s, a, opts).unwrap()).unwrap()
    }

    #[test]
    fn inactive_constraint_gives_inverse() {
        let sol = solve(sym(&[&[1.0, 0.5], &[0.5, 1.0]]), Connectivity::full(2));
        let expected = Mat::from_rows(&[vec![4.0 / 3.0, -2.0 / 3.0], vec![-2.0 / 3.0, 4.0 / 3.0]]).unwrap();
        assert!(sol.laplacian.matrix().as_mat().max_abs_diff(&expected) < 1e-8);
        assert!(sol.kkt_residual < 1e-9);
    }

    #[test]
    fn active_constraint_clips_edge() {
        let s = sym(&[&[1.0, -0.25], &[-0.25, 1.0]]);
        let sol = solve(s.clone(), Connectivity::full(2));
        assert_eq!(sol.laplacian.matrix()[(0, 1)], 0.0);
        assert!(sol.laplacian.matrix().as_mat().max_abs_diff(&Mat::identity(2)) < 1e-12);
        assert_eq!(kkt_residual(&sol.laplacian, &s, &Connectivity::full(2)).unwrap(), 0.0);
    }

    #[test]
    fn non_edges_are_exactly_zero() {
        let s = sym(&[&[2.0, 0.7, 0.4], &[0.7, 1.5, 0.6], &[0.4, 0.6, 1.0]]);
        let a = Connectivity::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let sol = solve(s, a);
        assert_eq!(sol.laplacian.matrix()[(0, 2)], 0.0);
        assert_eq!(sol.laplacian.matrix()[(2, 0)], 0.0);
    }

    #[test]
    fn kkt_examples() {
        let id = Ggl::new(SymMatrix::identity(2)).unwrap();
        assert_eq!(kkt_residual(&id, &SymMatrix::identity(2), &Connectivity::full(2)).unwrap(), 0.0);
        let s = sym(&[&[1.0, 0.5], &[0.5, 1.0]]);
        assert!((kkt_residual(&id, &s, &Connectivity::full(2)).unwrap() - 0.5).abs() < 1e-15);
        let opt = Ggl::new(sym(&[&[4.0 / 3.0, -2.0 / 3.0], &[-2.0 / 3.0, 4.0 / 3.0]])).unwrap();
        assert!(kkt_residual(&opt, &s, &Connectivity::full(2)).unwrap() < 1e-9);
    }

    #[test]
    fn oracle_on_identity() {
        let p = GglProblem::new(SymMatrix::identity(3), Connectivity::full(3), SolverOptions::default()).unwrap();
        let sol = estimate_ggl_oracle(&p).unwrap();
        assert!(sol.laplacian.matrix().as_mat().max_abs_diff(&Mat::identity(3)) < 1e-12);
    }

    #[test]
    fn bad_inputs() {
        let zero_var = sym(&[&[0.0, 0.0], &[0.0, 1.0]]);
        assert!(matches!(
            GglProblem::new(zero_var, Connectivity::full(2), SolverOptions::default()),
            Err(Error::InvalidInput(_))
        ));
        assert!(GglProblem::new(SymMatrix::identity(3), Connectivity::full(2), SolverOptions::default()).is_err());
    }

    #[test]
    fn singular_covariance_is_loaded() {
        // two samples in three dimensions
        let a = [1.0, 2.0, 0.5];
        let b = [-1.0, 0.5, 1.5];
        let s = covariance_from_samples(3, [&a[..], &b[..]]).unwrap();
        let p = GglProblem::new(s, Connectivity::line(3), SolverOptions::default()).unwrap();
        let sol = estimate_ggl(&p).unwrap();
        let d = sol.diagonal_loading.expect("rank-two S must be loaded");
        assert!((d - 1e-6 * (1.0 + 2.125 + 1.25) / 3.0).abs() < 1e-18);
        assert!(sol.kkt_residual <= 1e-6);
    }

    #[test]
    fn max_iters_returns_iterate() {
        let s = sym(&[&[2.0, 0.7, 0.4], &[0.7, 1.5, 0.6], &[0.4, 0.6, 1.0]]);
        let opts = SolverOptions { tol_kkt: 0.0, tol_obj: 0.0, max_iters: 2 };
        match estimate_ggl(&GglProblem::new(s, Connectivity::full(3), opts).unwrap()) {
            Err(Error::MaxItersExceeded(sol)) => assert_eq!(sol.iterations, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn covariance_modes() {
        let zeros = BlockDataset::from_blocks(2, vec![ResidualBlock { class_id: 0, values: vec![0; 4] }], "").unwrap();
        assert_eq!(sample_covariance(&zeros, CovarianceMode::Block).unwrap().frobenius(), 0.0);

        let b = ResidualBlock { class_id: 0, values: vec![1, 2, 3, 4] };
        let d = BlockDataset::from_blocks(2, vec![b], "").unwrap();
        let s = sample_covariance(&d, CovarianceMode::Block).unwrap();
        assert_eq!(s[(1, 3)], 8.0);
        assert_eq!(s[(3, 3)], 16.0);
        let rows = sample_covariance(&d, CovarianceMode::Rows).unwrap();
        // rows (1,2) and (3,4)
        assert_eq!(rows.as_mat().to_rows(), vec![vec![5.0, 7.0], vec![7.0, 10.0]]);
        let cols = sample_covariance(&d, CovarianceMode::Cols).unwrap();
        // cols (1,3) and (2,4)
        assert_eq!(cols.as_mat().to_rows(), vec![vec![2.5, 5.5], vec![5.5, 12.5]]);

        let empty = BlockDataset::new(2, "").unwrap();
        assert!(matches!(sample_covariance(&empty, CovarianceMode::Rows), Err(Error::EmptyDataset)));
    }
}
