//! Command-line front end. Usage errors exit with 2, runtime errors with 1.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    bd_rate, cg_vs_sedge, default_rate_grid, grid_weight_maps, mixture_rd_curves, robustness_experiment,
    variance_map, write_pgm, write_robustness_csv,
};
use crate::coding::{evaluate_dataset, read_rd_curve, write_report, Candidate, NamedCandidate, Scheme, TransformSet};
use crate::dataset::{read_dataset, split_by_class, write_dataset};
use crate::eagbt::{detect_edge_map, EagbtParams};
use crate::error::{Error, Result};
use crate::gmrf::{build_inter_model, build_intra_model, edge_mixture_1d, generate_residual_dataset, EDGE_MIXTURE_EPS};
use crate::graph::{Connectivity, Ggl};
use crate::learn::SolverOptions;
use crate::matrix::{Mat, SymMatrix};
use crate::transforms::{train_gbnt_model, train_gbst_model, train_klt, verify_line_graph_catalog, SeparablePair, Transform};

#[derive(Parser, Debug)]
#[command(name = "gglt", version, about = "Graph-learned block transforms: training, coding and analysis")]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample a residual dataset from an intra or inter GMRF model.
    GenSynthetic(GenArgs),
    /// Learn one transform per class and write it to a directory.
    Train(TrainArgs),
    /// Code a dataset at several QPs and write an RD report.
    Eval(EvalArgs),
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// BD-rate of a test RD report against a reference one.
    Bdrate(BdrateArgs),
    /// Compare line-graph GBTs with the closed-form DCT/DST family.
    VerifyDctdst(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Intra,
    Inter,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "intra")]
    pub model: ModelKind,
    /// Block side N.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u16).range(1..=64))]
    pub n: u16,
    /// Grid edge weight.
    #[arg(long, default_value_t = 1.0)]
    pub w: f64,
    /// Reference link weight; 1 for intra and 4 for inter when omitted.
    #[arg(long)]
    pub w_ref: Option<f64>,
    /// Self-loop on every vertex.
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
}

impl ModelArgs {
    fn build(&self) -> Result<crate::gmrf::JointGmrf> {
        let n = self.n as usize;
        match self.model {
            ModelKind::Intra => build_intra_model(n, self.w, self.w_ref.unwrap_or(1.0), self.eps),
            ModelKind::Inter => build_inter_model(n, self.w, self.w_ref.unwrap_or(4.0), self.eps),
        }
    }
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub class_id: u16,
    /// Residual amplitude before rounding.
    #[arg(long, default_value_t = 64.0)]
    pub scale: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TrainKind {
    Gbst,
    Gbnt,
    Klt,
}

impl TrainKind {
    fn name(self) -> &'static str {
        match self {
            TrainKind::Gbst => "gbst",
            TrainKind::Gbnt => "gbnt",
            TrainKind::Klt => "klt",
        }
    }
}

#[derive(Args, Debug, Clone, Copy)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-6)]
    pub tol_kkt: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol_obj: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions { tol_obj: self.tol_obj, tol_kkt: self.tol_kkt, max_iters: self.max_iters }
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub kind: TrainKind,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Dct,
    Mdt,
    Rdot,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Scheme {
        match s {
            SchemeArg::Dct => Scheme::DctOnly,
            SchemeArg::Mdt => Scheme::Mdt,
            SchemeArg::Rdot => Scheme::Rdot,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SetMember {
    Dct,
    /// Trained graph-learned transform of the kind given by `--kind`.
    Glgbt,
    Klt,
    Eagbt,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct EdgeArgs {
    #[arg(long, default_value_t = 10.0)]
    pub t_edge: f64,
    #[arg(long, default_value_t = 10.0)]
    pub s_edge: f64,
    #[arg(long, default_value_t = 1.0)]
    pub w_c: f64,
}

impl EdgeArgs {
    fn params(&self) -> Result<EagbtParams> {
        let p = EagbtParams { t_edge: self.t_edge, s_edge: self.s_edge, w_c: self.w_c };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub scheme: SchemeArg,
    /// Candidate transforms in signaling order.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "dct,glgbt")]
    pub set: Vec<SetMember>,
    #[arg(long, value_delimiter = ',', default_value = "22,27,32,37", value_parser = clap::value_parser!(i32).range(0..=51))]
    pub qps: Vec<i32>,
    #[arg(long)]
    pub report: PathBuf,
    /// Directory written by `train`.
    #[arg(long)]
    pub transforms_dir: Option<PathBuf>,
    /// Trained kind used for `glgbt`.
    #[arg(long, value_enum, default_value = "gbnt")]
    pub kind: TrainKind,
    /// Write the edge map of every block with detected edges as PBM.
    #[arg(long)]
    pub dump_edges: Option<PathBuf>,
    #[command(flatten)]
    pub edge: EdgeArgs,
}

#[derive(Subcommand, Debug)]
pub enum AnalyzeCommand {
    /// High-rate coding gain of EA-GBTs against s_edge.
    CgSedge(CgSedgeArgs),
    /// Water-filling coding gain of EA-GBTs against bits per pixel.
    CgRate(CgRateArgs),
    /// Per-pixel residual variance as PGM (and optionally CSV).
    VarianceMap(VarianceArgs),
    /// Learned GGL against inverse sample covariance for several sample counts.
    Robustness(RobustnessArgs),
    /// Edge and self-loop weights of a trained grid Laplacian as PGM.
    Weights(WeightsArgs),
}

#[derive(Args, Debug)]
pub struct MixtureArgs {
    /// Signal length N.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u16).range(2..=256))]
    pub n: u16,
    #[arg(long, default_value_t = 1.0)]
    pub w_c: f64,
    #[arg(long, default_value_t = EDGE_MIXTURE_EPS)]
    pub eps: f64,
}

#[derive(Args, Debug)]
pub struct CgSedgeArgs {
    #[command(flatten)]
    pub mixture: MixtureArgs,
    #[arg(long, default_value_t = 1.0)]
    pub s_min: f64,
    #[arg(long, default_value_t = 100.0)]
    pub s_max: f64,
    #[arg(long, default_value_t = 1.0)]
    pub s_step: f64,
    /// Bits per pixel.
    #[arg(long, default_value_t = 1.5)]
    pub rate: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CgRateArgs {
    #[command(flatten)]
    pub mixture: MixtureArgs,
    #[arg(long, default_value_t = 10.0)]
    pub s_edge: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VarianceArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RobustnessArgs {
    /// The true GGL is the residual precision of this model.
    #[command(flatten)]
    pub model: ModelArgs,
    /// Sample counts.
    #[arg(long, value_delimiter = ',', required = true)]
    pub ks: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct WeightsArgs {
    /// Laplacian text file written by `train --kind gbnt`.
    #[arg(long)]
    pub laplacian: PathBuf,
    /// Writes `<prefix>_h.pgm`, `<prefix>_v.pgm` and `<prefix>_loops.pgm`.
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Args, Debug)]
pub struct BdrateArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
    pub sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,7.5")]
    pub c: Vec<f64>,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code. Normal output goes to `out`, diagnostics to stderr.
pub fn dispatch<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::InvalidInput("--threads must be positive".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut buf = Vec::new();
    let result = pool.install(|| execute(cli.command, &mut buf));
    out.write_all(&buf)?;
    result
}

fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::GenSynthetic(a) => gen_synthetic(a, out),
        Command::Train(a) => train(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Analyze(a) => analyze(a, out),
        Command::Bdrate(a) => {
            let r = read_rd_curve(File::open(&a.reference)?)?;
            let t = read_rd_curve(File::open(&a.test)?)?;
            let v = bd_rate(&r, &t)?;
            // Avoid printing "-0.00%".
            writeln!(out, "{:.2}%", if v.abs() < 0.005 { 0.0 } else { v })?;
            Ok(())
        }
        Command::VerifyDctdst(a) => verify(a, out),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn gen_synthetic(a: GenArgs, out: &mut dyn Write) -> Result<()> {
    let model = a.model.build()?;
    let d = generate_residual_dataset(&model, a.count, a.scale, a.seed, a.class_id)?;
    write_dataset(&d, &a.out)?;
    writeln!(out, "wrote {} blocks of {}x{} to {}", d.len(), d.n(), d.n(), a.out.display())?;
    Ok(())
}

fn transform_path(dir: &Path, class: u16, kind: TrainKind, part: &str) -> PathBuf {
    dir.join(format!("class_{class}_{}{part}.txt", kind.name()))
}

fn write_transform(t: &Transform, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    t.write_text(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_laplacian(l: &Ggl, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    l.matrix().as_mat().write_text(&mut w)?;
    w.flush()?;
    Ok(())
}

fn read_transform(path: &Path) -> Result<Transform> {
    Transform::read_text(BufReader::new(File::open(path)?))
}

fn train(a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let d = read_dataset(&a.dataset)?;
    fs::create_dir_all(&a.out_dir)?;
    let opts = a.solver.options();
    for (class, part) in split_by_class(&d) {
        let dir = &a.out_dir;
        match a.kind {
            TrainKind::Gbst => {
                let m = train_gbst_model(&part, opts)?;
                write_transform(&m.pair.u_row, &transform_path(dir, class, a.kind, "_row"))?;
                write_transform(&m.pair.u_col, &transform_path(dir, class, a.kind, "_col"))?;
                write_laplacian(&m.l_row, &transform_path(dir, class, a.kind, "_row_laplacian"))?;
                write_laplacian(&m.l_col, &transform_path(dir, class, a.kind, "_col_laplacian"))?;
            }
            TrainKind::Gbnt => {
                let (t, l) = train_gbnt_model(&part, opts)?;
                write_transform(&t, &transform_path(dir, class, a.kind, ""))?;
                write_laplacian(&l, &transform_path(dir, class, a.kind, "_laplacian"))?;
            }
            TrainKind::Klt => write_transform(&train_klt(&part)?, &transform_path(dir, class, a.kind, ""))?,
        }
        writeln!(out, "class {class}: {} blocks, {} written", part.len(), a.kind.name())?;
    }
    Ok(())
}

/// Loads a trained candidate; `None` when the class has no file.
fn load_trained(dir: &Path, class: u16, kind: TrainKind) -> Result<Option<Candidate>> {
    Ok(match kind {
        TrainKind::Gbst => {
            let (row, col) = (transform_path(dir, class, kind, "_row"), transform_path(dir, class, kind, "_col"));
            if !row.exists() || !col.exists() {
                return Ok(None);
            }
            Some(Candidate::Separable(SeparablePair::new(read_transform(&row)?, read_transform(&col)?)?))
        }
        TrainKind::Gbnt | TrainKind::Klt => {
            let p = transform_path(dir, class, kind, "");
            if !p.exists() {
                return Ok(None);
            }
            Some(Candidate::Nonseparable(read_transform(&p)?))
        }
    })
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let d = read_dataset(&a.dataset)?;
    let params = a.edge.params()?;
    let scheme: Scheme = a.scheme.into();
    let mut seen = Vec::new();
    for m in &a.set {
        if seen.contains(m) {
            return Err(Error::InvalidInput(format!("{m:?} appears twice in --set")));
        }
        seen.push(*m);
    }
    let needs_files = a.set.iter().any(|m| matches!(m, SetMember::Glgbt | SetMember::Klt));
    if scheme != Scheme::DctOnly && needs_files && a.transforms_dir.is_none() {
        return Err(Error::InvalidInput("--transforms-dir is required for trained set members".into()));
    }

    let mut sets = BTreeMap::new();
    if scheme != Scheme::DctOnly {
        let classes: std::collections::BTreeSet<u16> = d.blocks().iter().map(|b| b.class_id).collect();
        'class: for class in classes {
            let mut candidates = Vec::new();
            for m in &a.set {
                let (name, c) = match m {
                    SetMember::Dct => ("dct", Candidate::dct(d.n())?),
                    SetMember::Eagbt => ("eagbt", Candidate::EdgeAdaptive(params)),
                    SetMember::Glgbt | SetMember::Klt => {
                        let kind = if *m == SetMember::Klt { TrainKind::Klt } else { a.kind };
                        let dir = a.transforms_dir.as_deref().expect("checked above");
                        match load_trained(dir, class, kind)? {
                            Some(c) => (if *m == SetMember::Klt { "klt" } else { "glgbt" }, c),
                            // Leaving the class out makes evaluation report it as missing.
                            None => continue 'class,
                        }
                    }
                };
                candidates.push(NamedCandidate { name: name.into(), candidate: c });
            }
            sets.insert(class, TransformSet::new(candidates)?);
        }
    }

    let e = evaluate_dataset(&d, scheme, &sets, &a.qps)?;
    let mut w = create(&a.report)?;
    write_report(&e, &mut w)?;
    w.flush()?;
    for p in e.curve.points() {
        writeln!(out, "qp {:>2}: {:.4} bpp, {:.3} dB", p.qp, p.rate_bpp, p.psnr_db)?;
    }

    if let Some(dir) = a.dump_edges {
        fs::create_dir_all(&dir)?;
        let mut written = 0;
        for (k, b) in d.blocks().iter().enumerate() {
            let map = detect_edge_map(&b.to_mat(d.n()), &params)?;
            if !map.is_empty() {
                fs::write(dir.join(format!("block_{k:06}.pbm")), map.to_pbm())?;
                written += 1;
            }
        }
        writeln!(out, "{written} edge maps written to {}", dir.display())?;
    }
    Ok(())
}

fn analyze(a: AnalyzeCommand, out: &mut dyn Write) -> Result<()> {
    match a {
        AnalyzeCommand::CgSedge(a) => {
            if !(a.s_step > 0.0) || !(a.s_max >= a.s_min) {
                return Err(Error::InvalidInput("need s_step > 0 and s_max >= s_min".into()));
            }
            let count = ((a.s_max - a.s_min) / a.s_step + 1e-9).floor() as usize + 1;
            let s: Vec<f64> = (0..count).map(|k| a.s_min + a.s_step * k as f64).collect();
            let m = &a.mixture;
            let curve = cg_vs_sedge(m.n as usize, &s, m.w_c, m.eps, a.rate)?;
            curve.write_csv("s_edge", create(&a.out)?)?;
            match curve.zero_crossing() {
                Some(z) => writeln!(out, "cg crosses zero at s_edge = {z:.2}")?,
                None => writeln!(out, "cg does not cross zero in the sampled range")?,
            }
        }
        AnalyzeCommand::CgRate(a) => {
            let m = &a.mixture;
            let mix = edge_mixture_1d(m.n as usize, m.w_c, a.s_edge, m.eps)?;
            mixture_rd_curves(&mix, &default_rate_grid())?.write_csv("rate_bpp", create(&a.out)?)?;
            writeln!(out, "wrote {}", a.out.display())?;
        }
        AnalyzeCommand::VarianceMap(a) => {
            let v = variance_map(&read_dataset(&a.dataset)?)?;
            write_to(&a.out, |w| write_pgm(&v, w))?;
            if let Some(p) = &a.csv {
                write_to(p, |w| write_mat_csv(&v, w))?;
            }
            writeln!(out, "wrote {}", a.out.display())?;
        }
        AnalyzeCommand::Robustness(a) => {
            let truth = a.model.build()?.residual_precision();
            let conn = Connectivity::grid(a.model.n as usize);
            let rows = robustness_experiment(&truth, &conn, &a.ks, a.trials, a.seed)?;
            write_robustness_csv(&rows, create(&a.out)?)?;
            for &k in &a.ks {
                let sel: Vec<_> = rows.iter().filter(|r| r.k == k).collect();
                let mean = |f: fn(&&crate::analysis::RobustnessRow) -> f64| sel.iter().map(f).sum::<f64>() / sel.len() as f64;
                writeln!(
                    out,
                    "k {k}: mean error learned {:.4}, inverse covariance {:.4}",
                    mean(|r| r.ggl_error),
                    mean(|r| r.inverse_error)
                )?;
            }
        }
        AnalyzeCommand::Weights(a) => {
            let m = Mat::read_text(BufReader::new(File::open(&a.laplacian)?))?;
            let l = Ggl::new(SymMatrix::new(m)?)?;
            let (h, v, loops) = grid_weight_maps(&l)?;
            let prefix = a.out_prefix.to_string_lossy().into_owned();
            for (suffix, m) in [("h", &h), ("v", &v), ("loops", &loops)] {
                write_to(Path::new(&format!("{prefix}_{suffix}.pgm")), |w| write_pgm(m, w))?;
            }
            writeln!(out, "wrote {prefix}_{{h,v,loops}}.pgm")?;
        }
    }
    Ok(())
}

fn write_to(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_mat_csv<W: Write>(m: &Mat, w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    for i in 0..m.rows() {
        out.write_record(m.row(i).iter().map(|v| format!("{v:.10}")))?;
    }
    out.flush()?;
    Ok(())
}

fn verify(a: VerifyArgs, out: &mut dyn Write) -> Result<()> {
    let rows = verify_line_graph_catalog(&a.sizes, &a.c)?;
    let mut worst = 0.0f64;
    for first in crate::graph::EndLoop::ALL {
        for last in crate::graph::EndLoop::ALL {
            let cell: Vec<_> = rows.iter().filter(|r| r.first == first && r.last == last).collect();
            let dev = cell.iter().map(|r| r.deviation).fold(0.0, f64::max);
            worst = worst.max(dev);
            let kind = cell.first().map_or("?".to_string(), |r| r.kind.to_string());
            writeln!(out, "loops ({:>2}, {:>2}) -> {kind:<4} max deviation {dev:.3e}", first.label(), last.label())?;
        }
    }
    writeln!(out, "overall max deviation {worst:.3e} over {} cases", rows.len())?;
    if !(worst < 1e-8) {
        return Err(Error::InvalidMatrix(format!("catalog deviation {worst:.3e} exceeds 1e-8")));
    }
    Ok(())
}
