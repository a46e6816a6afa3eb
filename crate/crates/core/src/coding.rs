//! Block transform-coding harness: uniform quantization, Exp-Golomb rate
//! model, Lagrangian transform selection and RD curves over datasets.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::sync::{Arc, RwLock};

use rayon::prelude::*;

use crate::dataset::BlockDataset;
use crate::eagbt::{detect_edge_map, eagbt_graph, edge_map_rate, EagbtParams, EdgeMap};
use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::transforms::{
    closed_form_dct_dst, gbnt_forward, gbnt_inverse, gbst_forward, gbst_inverse, gbt_from_ggl, SeparablePair,
    Transform, TransformKind,
};

/// 8-bit peak for PSNR.
pub const PEAK: f64 = 255.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantSpec {
    pub qp: i32,
    pub step: f64,
}

impl QuantSpec {
    /// Step `2^((qp - 4) / 6)`.
    pub fn new(qp: i32) -> Self {
        QuantSpec { qp, step: 2f64.powf((qp as f64 - 4.0) / 6.0) }
    }
}

/// Rounds half away from zero.
pub fn quantize(coeffs: &[f64], q: &QuantSpec) -> Vec<i64> {
    coeffs.iter().map(|c| (c / q.step).round() as i64).collect()
}

pub fn dequantize(indices: &[i64], q: &QuantSpec) -> Vec<f64> {
    indices.iter().map(|&i| i as f64 * q.step).collect()
}

/// Signed order-0 Exp-Golomb length of one index.
pub fn eg0_bits(q: i64) -> u32 {
    let v = if q > 0 { 2 * q as u64 - 1 } else { 2 * q.unsigned_abs() };
    2 * (v + 1).ilog2() + 1
}

pub fn coeff_rate(indices: &[i64]) -> f64 {
    indices.iter().map(|&q| eg0_bits(q) as f64).sum()
}

/// `0.85 · 2^((qp - 12) / 3)`
pub fn lambda_rd(qp: i32) -> f64 {
    0.85 * 2f64.powf((qp as f64 - 12.0) / 3.0)
}

/// Truncated unary length of index `i` among `t` candidates.
pub fn tu_bits(i: usize, t: usize) -> f64 {
    if t <= 1 {
        0.0
    } else {
        (i + 1).min(t - 1) as f64
    }
}

#[derive(Clone, Debug)]
pub enum Candidate {
    Separable(SeparablePair),
    Nonseparable(Transform),
    /// Per-block EA-GBT; the edge map is charged as side information.
    EdgeAdaptive(EagbtParams),
}

impl Candidate {
    pub fn dct(n: usize) -> Result<Self> {
        let d = closed_form_dct_dst(TransformKind::Dct2, n)?;
        Ok(Candidate::Separable(SeparablePair::new(d.clone(), d)?))
    }

    fn block_side(&self) -> Option<usize> {
        match self {
            Candidate::Separable(p) => Some(p.n()),
            Candidate::Nonseparable(t) => Some((t.n() as f64).sqrt().round() as usize),
            Candidate::EdgeAdaptive(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NamedCandidate {
    pub name: String,
    pub candidate: Candidate,
}

/// Ordered candidates; index 0 is the default transform.
#[derive(Clone, Debug)]
pub struct TransformSet {
    candidates: Vec<NamedCandidate>,
}

impl TransformSet {
    pub fn new(candidates: Vec<NamedCandidate>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::EmptySet);
        }
        Ok(TransformSet { candidates })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[NamedCandidate] {
        &self.candidates
    }

    pub fn names(&self) -> Vec<String> {
        self.candidates.iter().map(|c| c.name.clone()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockResult {
    /// Pixel-domain SSE of `reconstruction` against the input block.
    pub distortion_sse: f64,
    /// Quantization error measured on the coefficients.
    pub coeff_sse: f64,
    /// Coefficient, index and side-information bits.
    pub rate_bits: f64,
    pub coeff_bits: f64,
    pub index_bits: f64,
    pub side_bits: f64,
    pub chosen_index: usize,
    pub reconstruction: Mat,
    /// `distortion_sse + λ · rate_bits`
    pub cost: f64,
}

/// EA-GBT bases shared across blocks with the same edge map.
#[derive(Debug, Default)]
pub struct EagbtCache {
    map: RwLock<HashMap<(EdgeMap, u64, u64), Arc<Transform>>>,
}

impl EagbtCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn get(&self, map: &EdgeMap, p: &EagbtParams) -> Result<Arc<Transform>> {
        let key = (map.clone(), p.s_edge.to_bits(), p.w_c.to_bits());
        if let Some(t) = self.map.read().expect("cache lock poisoned").get(&key) {
            return Ok(t.clone());
        }
        let t = Arc::new(gbt_from_ggl(&eagbt_graph(map, p)?)?);
        self.map.write().expect("cache lock poisoned").entry(key).or_insert(t.clone());
        Ok(t)
    }
}

fn sse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Transform, quantize, count bits, reconstruct. `index_bits` is 0 here.
pub fn encode_block(block: &Mat, candidate: &Candidate, q: &QuantSpec) -> Result<BlockResult> {
    encode_block_cached(block, candidate, q, None)
}

pub fn encode_block_cached(
    block: &Mat,
    candidate: &Candidate,
    q: &QuantSpec,
    cache: Option<&EagbtCache>,
) -> Result<BlockResult> {
    if !block.is_square() {
        return Err(Error::InvalidShape(format!("{}x{} block", block.rows(), block.cols())));
    }
    if let Some(side) = candidate.block_side() {
        if side != block.rows() {
            return Err(Error::DimensionMismatch { expected: side, found: block.rows() });
        }
    }
    let n = block.rows();
    let (coeffs, side_bits, inverse): (Mat, f64, Box<dyn Fn(&Mat) -> Result<Mat>>) = match candidate {
        Candidate::Separable(p) => (gbst_forward(block, p)?, 0.0, Box::new(move |c| gbst_inverse(c, p))),
        Candidate::Nonseparable(t) => (gbnt_forward(block, t)?, 0.0, Box::new(move |c| gbnt_inverse(c, t))),
        Candidate::EdgeAdaptive(params) => {
            let map = detect_edge_map(block, params)?;
            let t = match cache {
                Some(c) => c.get(&map, params)?,
                None => Arc::new(gbt_from_ggl(&eagbt_graph(&map, params)?)?),
            };
            let coeffs = gbnt_forward(block, &t)?;
            (coeffs, edge_map_rate(&map), Box::new(move |c| gbnt_inverse(c, &t)))
        }
    };
    let idx = quantize(coeffs.as_slice(), q);
    let coeff_bits = coeff_rate(&idx);
    let deq = Mat::from_vec(n, n, dequantize(&idx, q))?;
    let reconstruction = inverse(&deq)?;
    let distortion_sse = sse(reconstruction.as_slice(), block.as_slice());
    let rate_bits = coeff_bits + side_bits;
    Ok(BlockResult {
        distortion_sse,
        coeff_sse: sse(coeffs.as_slice(), deq.as_slice()),
        rate_bits,
        coeff_bits,
        index_bits: 0.0,
        side_bits,
        chosen_index: 0,
        reconstruction,
        cost: distortion_sse + lambda_rd(q.qp) * rate_bits,
    })
}

/// Lowest `SSE + λ (coeff + index + side bits)` over the set; ties go to the
/// lower index.
pub fn rdot_select(block: &Mat, set: &TransformSet, q: &QuantSpec) -> Result<BlockResult> {
    rdot_select_cached(block, set, q, None)
}

pub fn rdot_select_cached(
    block: &Mat,
    set: &TransformSet,
    q: &QuantSpec,
    cache: Option<&EagbtCache>,
) -> Result<BlockResult> {
    let lambda = lambda_rd(q.qp);
    let t = set.len();
    let mut best: Option<BlockResult> = None;
    for (i, c) in set.candidates.iter().enumerate() {
        let mut r = encode_block_cached(block, &c.candidate, q, cache)?;
        r.index_bits = tu_bits(i, t);
        r.rate_bits += r.index_bits;
        r.cost = r.distortion_sse + lambda * r.rate_bits;
        r.chosen_index = i;
        if best.as_ref().is_none_or(|b| r.cost < b.cost) {
            best = Some(r);
        }
    }
    best.ok_or(Error::EmptySet)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Separable DCT-2 for every block.
    DctOnly,
    /// The class's trained transform (set index 1), no index bits.
    Mdt,
    /// Per-block choice from the class's set with truncated unary index.
    Rdot,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::DctOnly => "dct",
            Scheme::Mdt => "mdt",
            Scheme::Rdot => "rdot",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dct" | "dct-only" => Ok(Scheme::DctOnly),
            "mdt" => Ok(Scheme::Mdt),
            "rdot" => Ok(Scheme::Rdot),
            _ => Err(Error::InvalidInput(format!("unknown scheme `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RdPoint {
    pub qp: i32,
    pub rate_bpp: f64,
    pub psnr_db: f64,
    pub mse: f64,
    /// Mean Lagrangian cost per block.
    pub mean_cost: f64,
}

/// RD points sorted by rate.
#[derive(Clone, Debug, PartialEq)]
pub struct RdCurve {
    points: Vec<RdPoint>,
}

impl RdCurve {
    pub fn new(mut points: Vec<RdPoint>) -> Self {
        points.sort_by(|a, b| a.rate_bpp.total_cmp(&b.rate_bpp).then(b.qp.cmp(&a.qp)));
        RdCurve { points }
    }

    /// Curve from `(rate, psnr)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        RdCurve::new(
            pairs
                .iter()
                .map(|&(rate_bpp, psnr_db)| RdPoint {
                    qp: 0,
                    rate_bpp,
                    psnr_db,
                    mse: PEAK * PEAK / 10f64.powf(psnr_db / 10.0),
                    mean_cost: f64::NAN,
                })
                .collect(),
        )
    }

    pub fn points(&self) -> &[RdPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn psnr(mse: f64) -> f64 {
    10.0 * (PEAK * PEAK / mse).log10()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub scheme: Scheme,
    pub curve: RdCurve,
    /// Candidate names, in set order (the union over classes for RDOT).
    pub candidate_names: Vec<String>,
    /// Per QP (input order): percentage of blocks choosing each candidate index.
    pub selection: Vec<(i32, Vec<f64>)>,
}

struct Tally {
    sse: f64,
    bits: f64,
    cost: f64,
    index: usize,
}

/// Codes every block at every QP. Blocks run in parallel; sums are taken in
/// block order so results do not depend on the thread count.
pub fn evaluate_dataset(
    d: &BlockDataset,
    scheme: Scheme,
    sets: &BTreeMap<u16, TransformSet>,
    qps: &[i32],
) -> Result<Evaluation> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if qps.is_empty() {
        return Err(Error::InvalidInput("no QPs given".into()));
    }
    let n = d.n();
    let dct_set = TransformSet::new(vec![NamedCandidate { name: "dct".into(), candidate: Candidate::dct(n)? }])?;

    // Validate class coverage up front for a deterministic error.
    if scheme != Scheme::DctOnly {
        for b in d.blocks() {
            match sets.get(&b.class_id) {
                Some(s) if scheme == Scheme::Rdot || s.len() >= 2 => {}
                _ => return Err(Error::MissingTransform { class_id: b.class_id }),
            }
        }
    }
    let width = match scheme {
        Scheme::DctOnly => 1,
        _ => d.blocks().iter().map(|b| sets[&b.class_id].len()).max().unwrap_or(1),
    };
    let candidate_names: Vec<String> = match scheme {
        Scheme::DctOnly => dct_set.names(),
        _ => {
            let first = sets[&d.blocks()[0].class_id].names();
            (0..width).map(|i| first.get(i).cloned().unwrap_or_else(|| format!("candidate{i}"))).collect()
        }
    };

    let cache = EagbtCache::new();
    let pixels = (d.len() * n * n) as f64;
    let mut points = Vec::with_capacity(qps.len());
    let mut selection = Vec::with_capacity(qps.len());
    for &qp in qps {
        let q = QuantSpec::new(qp);
        let tallies: Vec<Tally> = d
            .blocks()
            .par_iter()
            .map(|b| {
                let x = b.to_mat(n);
                let r = match scheme {
                    Scheme::DctOnly => encode_block_cached(&x, &dct_set.candidates[0].candidate, &q, Some(&cache))?,
                    Scheme::Mdt => {
                        let mut r = encode_block_cached(&x, &sets[&b.class_id].candidates[1].candidate, &q, Some(&cache))?;
                        r.chosen_index = 1;
                        r
                    }
                    Scheme::Rdot => rdot_select_cached(&x, &sets[&b.class_id], &q, Some(&cache))?,
                };
                Ok(Tally { sse: r.distortion_sse, bits: r.rate_bits, cost: r.cost, index: r.chosen_index })
            })
            .collect::<Result<Vec<_>>>()?;
        let (mut sse, mut bits, mut cost) = (0.0, 0.0, 0.0);
        let mut counts = vec![0usize; width];
        for t in &tallies {
            sse += t.sse;
            bits += t.bits;
            cost += t.cost;
            counts[t.index] += 1;
        }
        let mse = sse / pixels;
        points.push(RdPoint { qp, rate_bpp: bits / pixels, psnr_db: psnr(mse), mse, mean_cost: cost / d.len() as f64 });
        selection.push((qp, counts.iter().map(|&c| 100.0 * c as f64 / d.len() as f64).collect()));
    }
    Ok(Evaluation { scheme, curve: RdCurve::new(points), candidate_names, selection })
}

/// One row per QP: `scheme,qp,rate_bpp,psnr_db,mse,mean_cost,sel_<name>...`.
pub fn write_report<W: Write>(e: &Evaluation, w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let mut header: Vec<String> =
        ["scheme", "qp", "rate_bpp", "psnr_db", "mse", "mean_cost"].iter().map(|s| s.to_string()).collect();
    header.extend(e.candidate_names.iter().map(|n| format!("sel_{n}")));
    out.write_record(&header)?;
    for (qp, sel) in &e.selection {
        let p = e.curve.points.iter().find(|p| p.qp == *qp).expect("every QP has a point");
        let mut row = vec![
            e.scheme.name().to_string(),
            qp.to_string(),
            format!("{:.10}", p.rate_bpp),
            format!("{:.10}", p.psnr_db),
            format!("{:.10}", p.mse),
            format!("{:.10}", p.mean_cost),
        ];
        row.extend(sel.iter().map(|s| format!("{s:.4}")));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads `rate_bpp` and `psnr_db` columns (and `qp` when present).
pub fn read_rd_curve<R: Read>(r: R) -> Result<RdCurve> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (rate, psnr_col) = match (col("rate_bpp"), col("psnr_db")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Parse { line: 1, msg: "missing rate_bpp or psnr_db column".into() }),
    };
    let qp_col = col("qp");
    let mut points = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|v| v.trim().parse().ok())
                .ok_or(Error::Parse { line: k + 2, msg: format!("bad value in column {}", i + 1) })
        };
        let psnr_db = num(psnr_col)?;
        points.push(RdPoint {
            qp: match qp_col {
                Some(i) => num(i)? as i32,
                None => 0,
            },
            rate_bpp: num(rate)?,
            psnr_db,
            mse: PEAK * PEAK / 10f64.powf(psnr_db / 10.0),
            mean_cost: f64::NAN,
        });
    }
    Ok(RdCurve::new(points))
}
