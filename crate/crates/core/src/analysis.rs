//! Theory-side analysis and experiment drivers: high-rate distortion and
//! coding gain of edge-adaptive transforms, reverse water-filling, BD-rate,
//! residual variance maps, learned-weight exports and the sample-count
//! robustness experiment.

use std::io::Write;

use rayon::prelude::*;

use crate::coding::RdCurve;
use crate::dataset::BlockDataset;
use crate::error::{Error, Result};
use crate::gmrf::{sample_gmrf, EdgeMixture1d};
use crate::graph::{Connectivity, Ggl};
use crate::learn::{covariance_from_samples, estimate_ggl_normalized, SolverOptions};
use crate::matrix::{eig_sym, inv_spd, Cholesky, Mat, SymMatrix};

/// Gaussian source summarized by its dimension and log-determinant, which is
/// all the high-rate distortion needs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HighRateModel {
    n: usize,
    log2_det: f64,
}

impl HighRateModel {
    pub fn new(eigenvalues: &[f64]) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidInput("no eigenvalues".into()));
        }
        if let Some(v) = eigenvalues.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput(format!("eigenvalue {v} must be positive")));
        }
        Ok(HighRateModel { n: eigenvalues.len(), log2_det: eigenvalues.iter().map(|v| v.log2()).sum() })
    }

    /// Uses a Cholesky factorization; `s` must be positive definite.
    pub fn from_covariance(s: &SymMatrix) -> Result<Self> {
        Ok(HighRateModel { n: s.n(), log2_det: Cholesky::new(s)?.log_det() / std::f64::consts::LN_2 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Mean differential entropy per component, `(1/N) Σ ½ log₂(2πe λ_i)`.
    pub fn entropy_per_component(&self) -> f64 {
        let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
        0.5 * two_pi_e.log2() + 0.5 * self.log2_det / self.n as f64
    }
}

/// `D(R̄) = N/12 · 2^(2 H̄) · 2^(-2 R̄)` with `R̄` in bits per component.
pub fn high_rate_distortion(m: &HighRateModel, rbar: f64) -> f64 {
    m.n() as f64 / 12.0 * 2f64.powf(2.0 * m.entropy_per_component() - 2.0 * rbar)
}

/// Coding gain in dB of per-block EA-GBTs over the KLT of the mixture at total
/// rate `rate` bits per block; the EA branch pays `log₂ M` bits of side
/// information. Positive values mean the EA-GBT is worse.
pub fn high_rate_cg(mix: &EdgeMixture1d, rate: f64) -> Result<f64> {
    let n = mix.n as f64;
    let m = mix.m() as f64;
    let floor = m.log2();
    if rate < floor {
        return Err(Error::InsufficientRate { rate, floor });
    }
    let klt = HighRateModel::from_covariance(&mix.mixture_covariance())?;
    let d_klt = high_rate_distortion(&klt, rate / n);
    let mut d_ea = 0.0;
    for (c, p) in mix.components.iter().zip(&mix.priors) {
        d_ea += p * high_rate_distortion(&HighRateModel::from_covariance(c)?, (rate - floor) / n);
    }
    Ok(10.0 * (d_ea / d_klt).log10())
}

/// Reverse water-filling at level `theta`: `D_i = min(λ_i, θ)`,
/// `R = Σ ½ log₂(λ_i / D_i)`, returns `(R, D)` summed over components.
pub fn waterfill(eigenvalues: &[f64], theta: f64) -> (f64, f64) {
    let mut r = 0.0;
    let mut d = 0.0;
    for &l in eigenvalues {
        let di = l.min(theta);
        if di > 0.0 {
            r += 0.5 * (l / di).log2();
        }
        d += di;
    }
    (r, d)
}

/// Coding-gain samples over an abscissa (`s_edge` or bits per pixel).
#[derive(Clone, Debug, PartialEq)]
pub struct CgCurve {
    pub x: Vec<f64>,
    /// `None` where the EA branch cannot afford its side information.
    pub cg_db: Vec<Option<f64>>,
}

impl CgCurve {
    pub fn write_csv<W: Write>(&self, x_name: &str, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record([x_name, "cg_db"])?;
        for (x, cg) in self.x.iter().zip(&self.cg_db) {
            let v = cg.map_or_else(|| "NA".to_string(), |v| format!("{v:.10}"));
            out.write_record([format!("{x}"), v])?;
        }
        out.flush()?;
        Ok(())
    }

    /// First sign change from positive to nonpositive, linearly interpolated.
    pub fn zero_crossing(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self.x.iter().zip(&self.cg_db).filter_map(|(x, c)| c.map(|c| (*x, c))).collect();
        pts.windows(2).find(|w| w[0].1 > 0.0 && w[1].1 <= 0.0).map(|w| {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            x0 + (x1 - x0) * y0 / (y0 - y1)
        })
    }
}

/// High-rate `cg` at a fixed rate for each `s_edge`.
pub fn cg_vs_sedge(n: usize, s_values: &[f64], w_c: f64, eps: f64, rate_per_pixel: f64) -> Result<CgCurve> {
    let cg = s_values
        .par_iter()
        .map(|&s| {
            let mix = crate::gmrf::edge_mixture_1d(n, w_c, s, eps)?;
            match high_rate_cg(&mix, rate_per_pixel * n as f64) {
                Ok(v) => Ok(Some(v)),
                Err(Error::InsufficientRate { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CgCurve { x: s_values.to_vec(), cg_db: cg })
}

/// `R/N ∈ [0.5, 1.5]` in steps of 0.05.
pub fn default_rate_grid() -> Vec<f64> {
    (0..=20).map(|k| 0.5 + 0.05 * k as f64).collect()
}

/// `(R, ln D)` samples of an operational curve, rate increasing.
struct RdSamples {
    rate: Vec<f64>,
    log_d: Vec<f64>,
}

impl RdSamples {
    /// Piecewise linear interpolation of `ln D` in `R`.
    fn log_distortion_at(&self, r: f64) -> Option<f64> {
        let k = self.rate.partition_point(|&x| x < r);
        if k == 0 {
            return (self.rate[0] == r).then_some(self.log_d[0]);
        }
        if k == self.rate.len() {
            return None;
        }
        let (r0, r1) = (self.rate[k - 1], self.rate[k]);
        let t = if r1 > r0 { (r - r0) / (r1 - r0) } else { 0.0 };
        Some(self.log_d[k - 1] + t * (self.log_d[k] - self.log_d[k - 1]))
    }
}

fn theta_samples(spectra: &[&[f64]]) -> Vec<f64> {
    let hi = spectra.iter().flat_map(|s| s.iter()).fold(0.0f64, |m, &v| m.max(v));
    let lo = spectra.iter().flat_map(|s| s.iter()).fold(f64::INFINITY, |m, &v| m.min(v));
    let (lo, hi) = ((lo * 1e-8).ln(), (hi * 1.01).ln());
    let count = 4000;
    (0..=count).rev().map(|k| (lo + (hi - lo) * k as f64 / count as f64).exp()).collect()
}

/// Water-filling coding gain over a grid of bits per pixel.
///
/// KLT: water-filling on the mixture covariance. EA-GBT: water-filling on each
/// component at a common level, rate and distortion averaged over components,
/// plus `log₂ M` bits. Both curves are sampled on a dense level grid and
/// interpolated log-linearly at each target rate.
pub fn mixture_rd_curves(mix: &EdgeMixture1d, rate_grid: &[f64]) -> Result<CgCurve> {
    let n = mix.n as f64;
    let side = (mix.m() as f64).log2();
    let klt = eig_sym(&mix.mixture_covariance())?.values;
    let comps = mix.components.iter().map(|c| Ok(eig_sym(c)?.values)).collect::<Result<Vec<_>>>()?;

    let mut spectra: Vec<&[f64]> = comps.iter().map(Vec::as_slice).collect();
    spectra.push(&klt);
    let thetas = theta_samples(&spectra);

    let curve = |f: &dyn Fn(f64) -> (f64, f64)| {
        let (rate, log_d) = thetas.iter().map(|&t| {
            let (r, d) = f(t);
            (r, d.ln())
        }).unzip();
        RdSamples { rate, log_d }
    };
    let klt_curve = curve(&|t| waterfill(&klt, t));
    let ea_curve = curve(&|t| {
        let mut r = side;
        let mut d = 0.0;
        for (c, p) in comps.iter().zip(&mix.priors) {
            let (rc, dc) = waterfill(c, t);
            r += p * rc;
            d += p * dc;
        }
        (r, d)
    });

    let cg_db = rate_grid
        .iter()
        .map(|&bpp| {
            let r = bpp * n;
            if r < side {
                return None;
            }
            let dk = klt_curve.log_distortion_at(r)?;
            let de = ea_curve.log_distortion_at(r)?;
            Some(10.0 * (de - dk) / std::f64::consts::LN_10)
        })
        .collect();
    Ok(CgCurve { x: rate_grid.to_vec(), cg_db })
}

/// Least-squares polynomial fit of `y` on `x`, coefficients lowest degree first.
fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<Vec<f64>> {
    let k = degree + 1;
    let mut ata = Mat::zeros(k, k);
    let mut aty = vec![0.0; k];
    for (&xi, &yi) in x.iter().zip(y) {
        let pw: Vec<f64> = (0..k).map(|p| xi.powi(p as i32)).collect();
        for a in 0..k {
            aty[a] += pw[a] * yi;
            for b in 0..k {
                ata[(a, b)] += pw[a] * pw[b];
            }
        }
    }
    Cholesky::new(&SymMatrix::symmetrize(&ata)?)?.solve(&aty)
}

fn polyval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * x + v)
}

/// Average rate difference in percent of `test` against `reference` at equal
/// PSNR: cubic fits of `log₁₀ rate` against PSNR, integrated by the
/// trapezoidal rule on 1000 points over the common PSNR range.
pub fn bd_rate(reference: &RdCurve, test: &RdCurve) -> Result<f64> {
    for c in [reference, test] {
        if c.len() < 4 {
            return Err(Error::TooFewPoints(c.len()));
        }
    }
    let extract = |c: &RdCurve| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut p = Vec::new();
        let mut r = Vec::new();
        for pt in c.points() {
            if !(pt.rate_bpp > 0.0) || !pt.psnr_db.is_finite() {
                return Err(Error::InvalidInput(format!("RD point ({}, {}) is not usable", pt.rate_bpp, pt.psnr_db)));
            }
            p.push(pt.psnr_db);
            r.push(pt.rate_bpp.log10());
        }
        Ok((p, r))
    };
    let (p_ref, r_ref) = extract(reference)?;
    let (p_test, r_test) = extract(test)?;
    let range = |p: &[f64]| (p.iter().cloned().fold(f64::INFINITY, f64::min), p.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let (lo_a, hi_a) = range(&p_ref);
    let (lo_b, hi_b) = range(&p_test);
    let (lo, hi) = (lo_a.max(lo_b), hi_a.min(hi_b));
    if !(hi > lo) {
        return Err(Error::NonOverlapping);
    }

    // Centre and scale PSNR for a well-conditioned fit.
    let all: Vec<f64> = p_ref.iter().chain(&p_test).cloned().collect();
    let centre = all.iter().sum::<f64>() / all.len() as f64;
    let scale = all.iter().map(|p| (p - centre).abs()).fold(0.0f64, f64::max).max(1e-12);
    let norm = |p: &[f64]| p.iter().map(|v| (v - centre) / scale).collect::<Vec<_>>();
    let c_ref = polyfit(&norm(&p_ref), &r_ref, 3)?;
    let c_test = polyfit(&norm(&p_test), &r_test, 3)?;

    const SAMPLES: usize = 1000;
    let h = (hi - lo) / (SAMPLES - 1) as f64;
    let mut integral = 0.0;
    for k in 0..SAMPLES {
        let p = (lo + h * k as f64 - centre) / scale;
        let diff = polyval(&c_test, p) - polyval(&c_ref, p);
        let w = if k == 0 || k == SAMPLES - 1 { 0.5 } else { 1.0 };
        integral += w * diff * h;
    }
    let avg = integral / (hi - lo);
    Ok((10f64.powf(avg) - 1.0) * 100.0)
}

/// Per-pixel sample variance (mean removed, divisor k).
pub fn variance_map(d: &BlockDataset) -> Result<Mat> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = d.n();
    let k = d.len() as f64;
    let mut sum = vec![0.0; n * n];
    let mut sq = vec![0.0; n * n];
    for b in d.blocks() {
        for (i, &v) in b.values.iter().enumerate() {
            let v = v as f64;
            sum[i] += v;
            sq[i] += v * v;
        }
    }
    Ok(Mat::from_fn(n, n, |i, j| {
        let p = i * n + j;
        let mean = sum[p] / k;
        (sq[p] / k - mean * mean).max(0.0)
    }))
}

/// Horizontal `N × (N-1)`, vertical `(N-1) × N` edge weights and `N × N`
/// self-loops of a grid Laplacian.
pub fn grid_weight_maps(l: &Ggl) -> Result<(Mat, Mat, Mat)> {
    let side = (l.n() as f64).sqrt().round() as usize;
    if side * side != l.n() || side < 2 {
        return Err(Error::InvalidShape(format!("Laplacian of size {} is not a grid", l.n())));
    }
    let h = Mat::from_fn(side, side - 1, |i, j| l.edge_weight(i * side + j, i * side + j + 1));
    let v = Mat::from_fn(side - 1, side, |i, j| l.edge_weight(i * side + j, (i + 1) * side + j));
    let loops = l.self_loops();
    Ok((h, v, Mat::from_fn(side, side, |i, j| loops[i * side + j])))
}

/// Binary PGM with values mapped linearly from `[min, max]` to `[0, 255]`.
pub fn write_pgm<W: Write>(m: &Mat, mut w: W) -> Result<()> {
    let lo = m.as_slice().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = m.as_slice().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    write!(w, "P5\n{} {}\n255\n", m.cols(), m.rows())?;
    let bytes: Vec<u8> = m
        .as_slice()
        .iter()
        .map(|&v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 })
        .collect();
    w.write_all(&bytes)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobustnessRow {
    pub k: usize,
    pub trial: usize,
    /// `‖Θ - L̂‖_F` for the constrained estimate.
    pub ggl_error: f64,
    /// `‖Θ - S⁻¹‖_F`, with diagonal loading when `S` is singular.
    pub inverse_error: f64,
    pub loaded: bool,
}

fn trial_seed(seed: u64, k: usize, trial: usize) -> u64 {
    seed ^ ((k as u64) << 32 | trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Estimation error of the constrained GGL estimate and of the inverse sample
/// covariance for each sample count and trial.
pub fn robustness_experiment(
    truth: &Ggl,
    connectivity: &Connectivity,
    ks: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<RobustnessRow>> {
    let n = truth.n();
    if connectivity.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: connectivity.n() });
    }
    let jobs: Vec<(usize, usize)> = ks.iter().flat_map(|&k| (0..trials).map(move |t| (k, t))).collect();
    jobs.par_iter()
        .map(|&(k, trial)| {
            if k == 0 {
                return Err(Error::InvalidInput("sample count must be positive".into()));
            }
            let x = sample_gmrf(truth, k, trial_seed(seed, k, trial))?;
            let s = covariance_from_samples(n, x.iter().map(Vec::as_slice))?;
            let learned = match estimate_ggl_normalized(&s, connectivity, SolverOptions::default()) {
                Ok(sol) => sol.laplacian,
                Err(Error::MaxItersExceeded(sol)) => sol.laplacian,
                Err(e) => return Err(e),
            };
            let (inverse, loaded) = match inv_spd(&s) {
                Ok(m) => (m, false),
                Err(_) => (inv_spd(&s.add_diagonal(1e-6 * s.trace() / n as f64)?)?, true),
            };
            let dist = |m: &SymMatrix| m.as_mat().sub(truth.matrix().as_mat()).map(|d| d.frobenius());
            Ok(RobustnessRow {
                k,
                trial,
                ggl_error: dist(learned.matrix())?,
                inverse_error: dist(&inverse)?,
                loaded,
            })
        })
        .collect()
}

pub fn write_robustness_csv<W: Write>(rows: &[RobustnessRow], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(["k", "trial", "ggl_error", "inverse_error", "diagonal_loading"])?;
    for r in rows {
        out.write_record([
            r.k.to_string(),
            r.trial.to_string(),
            format!("{:.10e}", r.ggl_error),
            format!("{:.10e}", r.inverse_error),
            (r.loaded as u8).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmrf::edge_mixture_1d;

    #[test]
    fn high_rate_examples() {
        let m = HighRateModel::new(&[1.0; 4]).unwrap();
        let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
        assert!((high_rate_distortion(&m, 0.0) - 4.0 * two_pi_e / 12.0).abs() < 1e-12);
        assert!((high_rate_distortion(&m, 1.0) * 4.0 - high_rate_distortion(&m, 0.0)).abs() < 1e-12);
        let m4 = HighRateModel::new(&[4.0; 4]).unwrap();
        assert!((high_rate_distortion(&m4, 0.7) / high_rate_distortion(&m, 0.7) - 4.0).abs() < 1e-12);
        assert!(HighRateModel::new(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn waterfill_examples() {
        assert_eq!(waterfill(&[4.0, 1.0], 1.0), (1.0, 2.0));
        assert_eq!(waterfill(&[4.0, 1.0], 5.0), (0.0, 5.0));
        let (r, d) = waterfill(&[4.0, 1.0], 1e-9);
        assert!(r > 20.0 && d < 1e-8);
    }

    #[test]
    fn insufficient_rate() {
        let mix = edge_mixture_1d(8, 1.0, 10.0, 1e-3).unwrap();
        assert!(matches!(high_rate_cg(&mix, 2.0), Err(Error::InsufficientRate { .. })));
    }

    #[test]
    fn identical_components_only_pay_side_information() {
        let mix = edge_mixture_1d(8, 1.0, 1.0, 1e-3).unwrap();
        let cg = high_rate_cg(&mix, 8.0).unwrap();
        // D ratio is 2^(2 log2(7) / 8)
        assert!((cg - 10.0 * (2.0 * 7f64.log2() / 8.0) * 2f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn bd_rate_examples() {
        let base = [(0.5, 32.0), (1.0, 35.0), (2.0, 38.5), (4.0, 42.0)];
        let a = RdCurve::from_pairs(&base);
        assert!(bd_rate(&a, &a).unwrap().abs() < 1e-12);
        let double: Vec<(f64, f64)> = base.iter().map(|&(r, p)| (2.0 * r, p)).collect();
        assert!((bd_rate(&a, &RdCurve::from_pairs(&double)).unwrap() - 100.0).abs() < 1e-9);
        let half: Vec<(f64, f64)> = base.iter().map(|&(r, p)| (0.5 * r, p)).collect();
        assert!((bd_rate(&a, &RdCurve::from_pairs(&half)).unwrap() + 50.0).abs() < 1e-9);
        assert!(matches!(bd_rate(&a, &RdCurve::from_pairs(&base[..3])), Err(Error::TooFewPoints(3))));
        let far: Vec<(f64, f64)> = base.iter().map(|&(r, p)| (r, p + 50.0)).collect();
        assert!(matches!(bd_rate(&a, &RdCurve::from_pairs(&far)), Err(Error::NonOverlapping)));
    }

    #[test]
    fn constant_dataset_has_zero_variance() {
        use crate::dataset::ResidualBlock;
        let blocks = (0..5).map(|_| ResidualBlock { class_id: 0, values: vec![3; 4] }).collect();
        let d = BlockDataset::from_blocks(2, blocks, "").unwrap();
        assert_eq!(variance_map(&d).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn pgm_header() {
        let mut buf = Vec::new();
        write_pgm(&Mat::from_fn(2, 3, |i, j| (i + j) as f64), &mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(&buf[buf.len() - 6..], &[0, 85, 170, 85, 170, 255]);
    }
}
