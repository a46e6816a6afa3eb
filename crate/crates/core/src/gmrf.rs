//! Attractive Gaussian-Markov random fields for predicted blocks.
//!
//! A [`JointGmrf`] holds the precision of block pixels followed by reference
//! pixels. MMSE prediction from the references leaves a residual whose
//! precision is the leading block of the joint precision.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dataset::{BlockDataset, ResidualBlock};
use crate::error::{Error, Result};
use crate::graph::{build_grid_graph, ggl_from_graph, Ggl, GridWeights, WeightedGraph};
use crate::matrix::{inv_spd, Cholesky, Mat, SymMatrix};

/// Residuals are clamped to the 9-bit signed range.
pub const RESIDUAL_LIMIT: f64 = 255.0;

/// Joint precision `[[Θx, Θxy], [Θyx, Θy]]`, block pixels first.
#[derive(Clone, Debug)]
pub struct JointGmrf {
    n: usize,
    n_ref: usize,
    theta: Ggl,
    theta_xy: Mat,
    chol: Cholesky,
}

impl JointGmrf {
    pub fn new(n: usize, n_ref: usize, theta: Ggl) -> Result<Self> {
        if theta.n() != n + n_ref || n == 0 {
            return Err(Error::InvalidShape(format!(
                "precision of size {} for {n} block + {n_ref} reference pixels",
                theta.n()
            )));
        }
        let chol = Cholesky::new(theta.matrix())?;
        let t = theta.matrix();
        let theta_xy = Mat::from_fn(n, n_ref, |i, j| t[(i, n + j)]);
        Ok(JointGmrf { n, n_ref, theta, theta_xy, chol })
    }

    pub fn from_graph(n: usize, n_ref: usize, g: &WeightedGraph) -> Result<Self> {
        JointGmrf::new(n, n_ref, ggl_from_graph(g))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_ref(&self) -> usize {
        self.n_ref
    }

    pub fn theta(&self) -> &Ggl {
        &self.theta
    }

    /// `Θxy` as an `n × n_ref` matrix.
    pub fn theta_xy(&self) -> &Mat {
        &self.theta_xy
    }

    /// Leading `n × n` block `Θx`: the residual precision under MMSE prediction.
    pub fn residual_precision(&self) -> Ggl {
        let idx: Vec<usize> = (0..self.n).collect();
        // A principal submatrix of a PD GGL is again a PD GGL.
        Ggl::new(self.theta.matrix().submatrix(&idx)).expect("principal submatrix of a GGL")
    }

    /// `p = -Θx⁻¹ Θxy y`.
    pub fn mmse_predict(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n_ref {
            return Err(Error::DimensionMismatch { expected: self.n_ref, found: y.len() });
        }
        let chol = Cholesky::new(self.residual_precision().matrix())?;
        self.predict_with(&chol, y)
    }

    fn predict_with(&self, chol_x: &Cholesky, y: &[f64]) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = self.theta_xy.matvec(y)?.into_iter().map(|v| -v).collect();
        chol_x.solve(&rhs)
    }

    /// Joint covariance `Θ⁻¹`.
    pub fn covariance(&self) -> SymMatrix {
        self.chol.inverse()
    }

    /// Draws joint samples `[x; y]` with one RNG stream per sample index.
    pub fn sample_joint(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        sample_with_factor(&self.chol, count, seed)
    }

    /// Draws `count` residual vectors `x - E[x | y]`.
    pub fn sample_residuals(&self, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let chol_x = Cholesky::new(self.residual_precision().matrix())?;
        (0..count)
            .into_par_iter()
            .map(|k| {
                let z = sample_with_factor_at(&self.chol, seed, k as u64);
                let (x, y) = z.split_at(self.n);
                let p = self.predict_with(&chol_x, y)?;
                Ok(x.iter().zip(&p).map(|(a, b)| a - b).collect())
            })
            .collect()
    }
}

fn check_model_weights(w: f64, w_ref: f64, eps: f64) -> Result<()> {
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::InvalidWeight(format!("grid weight {w} must be positive")));
    }
    if !(w_ref >= 0.0) || !w_ref.is_finite() {
        return Err(Error::InvalidWeight(format!("reference weight {w_ref} must be nonnegative")));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidWeight(format!("self-loop {eps} must be nonnegative")));
    }
    Ok(())
}

fn embed_grid(w_all: &mut Mat, offset: usize, side: usize, w: f64) -> Result<()> {
    let n = side * side;
    let g = build_grid_graph(side, &GridWeights::Uniform(w), &GridWeights::Uniform(w), &vec![0.0; n])?;
    for i in 0..n {
        for j in 0..n {
            w_all[(offset + i, offset + j)] = g.weights()[(i, j)];
        }
    }
    Ok(())
}

fn link(w_all: &mut Mat, a: usize, b: usize, w: f64) {
    w_all[(a, b)] = w;
    w_all[(b, a)] = w;
}

/// Intra model: `side × side` block grid with `2·side + 1` references.
///
/// Reference order: the corner pixel, then the row above (left to right),
/// then the column to the left (top to bottom). Each reference links to its
/// adjacent block pixel; the corner links to pixel (0, 0).
pub fn build_intra_model(side: usize, w: f64, w_ref: f64, eps: f64) -> Result<JointGmrf> {
    check_model_weights(w, w_ref, eps)?;
    if side == 0 {
        return Err(Error::InvalidShape("block side must be positive".into()));
    }
    let n = side * side;
    let n_ref = 2 * side + 1;
    let mut weights = Mat::zeros(n + n_ref, n + n_ref);
    embed_grid(&mut weights, 0, side, w)?;
    link(&mut weights, n, 0, w_ref);
    for j in 0..side {
        link(&mut weights, n + 1 + j, j, w_ref);
    }
    for i in 0..side {
        link(&mut weights, n + 1 + side + i, i * side, w_ref);
    }
    let g = WeightedGraph::new(weights, vec![eps; n + n_ref])?;
    JointGmrf::from_graph(n, n_ref, &g)
}

/// Inter model: block grid plus a co-located `side × side` reference grid,
/// each reference linked one-to-one to its block pixel.
pub fn build_inter_model(side: usize, w: f64, w_ref: f64, eps: f64) -> Result<JointGmrf> {
    check_model_weights(w, w_ref, eps)?;
    if side == 0 {
        return Err(Error::InvalidShape("block side must be positive".into()));
    }
    let n = side * side;
    let mut weights = Mat::zeros(2 * n, 2 * n);
    embed_grid(&mut weights, 0, side, w)?;
    embed_grid(&mut weights, n, side, w)?;
    for i in 0..n {
        link(&mut weights, i, n + i, w_ref);
    }
    let g = WeightedGraph::new(weights, vec![eps; 2 * n])?;
    JointGmrf::from_graph(n, n, &g)
}

fn sample_with_factor_at(chol: &Cholesky, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let z: Vec<f64> = (0..chol.n()).map(|_| rng.sample(StandardNormal)).collect();
    // Θ = R Rᵀ with R lower; x = R⁻ᵀ z has covariance Θ⁻¹.
    chol.solve_upper(&z)
}

fn sample_with_factor(chol: &Cholesky, count: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..count)
        .into_par_iter()
        .map(|k| sample_with_factor_at(chol, seed, k as u64))
        .collect()
}

/// Zero-mean samples with the given (positive definite) precision.
///
/// Sample `k` uses ChaCha stream `k` under `seed`, so output does not depend
/// on how the work is split across threads.
pub fn sample_gmrf(precision: &Ggl, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let chol = Cholesky::new(precision.matrix())?;
    Ok(sample_with_factor(&chol, count, seed))
}

/// Rounds half away from zero and clamps to the 9-bit signed residual range.
pub fn quantize_residual(v: f64) -> i16 {
    v.round().clamp(-RESIDUAL_LIMIT, RESIDUAL_LIMIT) as i16
}

/// Synthetic residual blocks from MMSE prediction under `model`.
pub fn generate_residual_dataset(
    model: &JointGmrf,
    count: usize,
    scale: f64,
    seed: u64,
    class_id: u16,
) -> Result<BlockDataset> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidInput(format!("scale {scale} must be positive")));
    }
    let side = (model.n() as f64).sqrt().round() as usize;
    if side * side != model.n() {
        return Err(Error::InvalidShape(format!("{} block pixels is not a square", model.n())));
    }
    let residuals = model.sample_residuals(count, seed)?;
    let blocks = residuals
        .into_iter()
        .map(|r| ResidualBlock { class_id, values: r.iter().map(|v| quantize_residual(v * scale)).collect() })
        .collect();
    BlockDataset::from_blocks(
        side,
        blocks,
        format!("gmrf n={} n_ref={} count={count} scale={scale} seed={seed} class={class_id}", model.n(), model.n_ref()),
    )
}

/// Mixture of `N - 1` path-graph GMRFs, each with one weakened edge.
#[derive(Clone, Debug)]
pub struct EdgeMixture1d {
    pub n: usize,
    pub components: Vec<SymMatrix>,
    pub priors: Vec<f64>,
}

impl EdgeMixture1d {
    pub fn m(&self) -> usize {
        self.components.len()
    }

    /// `Σ̄ = Σ_j π_j Σ_j`.
    pub fn mixture_covariance(&self) -> SymMatrix {
        let n = self.n;
        let mut acc = Mat::zeros(n, n);
        for (c, p) in self.components.iter().zip(&self.priors) {
            acc = acc.add(&c.as_mat().scale(*p)).expect("same shapes");
        }
        SymMatrix::symmetrize(&acc).expect("finite mixture")
    }
}

/// Self-loop used to regularize the otherwise singular path CGLs of the
/// edge mixture, relative to `w_c`.
pub const EDGE_MIXTURE_EPS: f64 = 1e-3;

/// Component `j` weights edge `(v_j, v_j+1)` by `w_c / s_edge`, all others by `w_c`,
/// with a uniform self-loop `eps`; `Σ_j = L_j⁻¹` and priors are uniform.
pub fn edge_mixture_1d(n: usize, w_c: f64, s_edge: f64, eps: f64) -> Result<EdgeMixture1d> {
    if n < 2 {
        return Err(Error::InvalidShape(format!("edge mixture needs N >= 2, got {n}")));
    }
    if !(w_c > 0.0) || !(s_edge >= 1.0) || !(eps > 0.0) {
        return Err(Error::InvalidWeight(format!("w_c = {w_c}, s_edge = {s_edge}, eps = {eps}")));
    }
    let m = n - 1;
    let components = (0..m)
        .map(|j| {
            let mut w = vec![w_c; m];
            w[j] = w_c / s_edge;
            let g = crate::graph::build_line_graph(&w, &vec![eps; n])?;
            inv_spd(ggl_from_graph(&g).matrix())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EdgeMixture1d { n, components, priors: vec![1.0 / m as f64; m] })
}
