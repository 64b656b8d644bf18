use clap::{Args, Parser, Subcommand, ValueEnum};
use qcarea::beltrami::{neumann_solve, DilatationField, SolveOptions};
use qcarea::extremal::{feasible_pweights, k_from_big_k, pole_stretch, stacked_map};
use qcarea::geometry::pseudo_disk;
use qcarea::measure::{GridMask, QuadMethod, QuadSpec, Region};
use qcarea::transforms::GridSpec;
use qcarea::verifier::{
    calibrate_hilbert, grid_points, isometry_defect, parse_points, sweep, th1_i_family, th1_ii_family, verify_th1_iii,
    verify_th2_stacked, verify_th3, verify_th3_region, write_csv, write_json, CheckKind, DistortionReport, FramedRegion,
    MapSource, Point, TheoremId, DEFAULT_EQUALITY_FLOOR, ISOMETRY_TOL, STACK_SHRINK,
};
use qcarea::{Error, Exec};
use serde_json::json;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

/// Default output directory when `--output` is not given.
const OUTPUT_ENV: &str = "QCAREA_OUTPUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "qcarea", version, about = "Area distortion checks for quasiconformal maps with a pole")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check one theorem at a single parameter point.
    Verify {
        theorem: Theorem,
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        common: Common,
        /// Grid mask for the set (th3 only).
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Check a sharpness family over a parameter grid.
    Sweep {
        theorem: Theorem,
        /// File of `p r K` lines.
        #[arg(long, conflicts_with_all = ["ps", "rs", "ks"])]
        points: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        ps: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        rs: Vec<f64>,
        #[arg(long = "Ks", value_delimiter = ',')]
        ks: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Solve the Beltrami equation for a dilatation dump.
    Solve {
        /// Field dump of the Beltrami coefficient.
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        p: f64,
        /// Declared bound on |mu|; defaults to the observed maximum.
        #[arg(long)]
        k: Option<f64>,
        /// Absolute stopping tolerance on successive iterates.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        /// Output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Numerical self-checks.
    Selftest {
        target: SelftestTarget,
        #[arg(long, default_value_t = 512)]
        grid_n: usize,
        #[arg(long = "L", default_value_t = 4.0)]
        half_width: f64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Theorem {
    Th1i,
    Th1ii,
    Th1iii,
    Th2,
    Th3,
}

impl From<Theorem> for TheoremId {
    fn from(t: Theorem) -> Self {
        match t {
            Theorem::Th1i => TheoremId::Th1i,
            Theorem::Th1ii => TheoremId::Th1ii,
            Theorem::Th1iii => TheoremId::Th1iii,
            Theorem::Th2 => TheoremId::Th2,
            Theorem::Th3 => TheoremId::Th3,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SelftestTarget {
    Transforms,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum Method {
    #[default]
    Montecarlo,
    Tensor,
}

#[derive(Args, Debug)]
struct PointArgs {
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    #[arg(long, default_value_t = 0.5)]
    r: f64,
    /// Maximal dilatation K ≥ 1.
    #[arg(long = "K", conflicts_with = "small_k")]
    big_k: Option<f64>,
    /// Dilatation bound k in [0, 1).
    #[arg(long = "k")]
    small_k: Option<f64>,
}

impl PointArgs {
    fn big_k(&self) -> Result<f64, Error> {
        match (self.big_k, self.small_k) {
            (Some(big), _) => {
                k_from_big_k(big)?;
                Ok(big)
            }
            (None, Some(k)) if (0.0..1.0).contains(&k) => Ok((1.0 + k) / (1.0 - k)),
            (None, Some(k)) => Err(Error::Range(format!("k must lie in [0, 1), got {k}"))),
            (None, None) => Err(Error::Range("one of --K or --k is required".into())),
        }
    }

    fn point(&self) -> Result<Point, Error> {
        Point::new(self.p, self.r, self.big_k()?)
    }
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Method::Montecarlo)]
    method: Method,
    /// Points per axis for the transform grid and the tensor rule.
    #[arg(long, default_value_t = 512)]
    grid_n: usize,
    /// Half-width of the transform window.
    #[arg(long = "L", default_value_t = 4.0)]
    half_width: f64,
    /// Relative floor for equality checks.
    #[arg(long)]
    tol: Option<f64>,
    /// Sample the map side even where a closed form exists.
    #[arg(long)]
    sampled: bool,
    /// Run on a single thread.
    #[arg(long)]
    sequential: bool,
    /// Record wall-clock time in reports.
    #[arg(long)]
    timings: bool,
    /// Report file; defaults to standard output, or a file under $QCAREA_OUTPUT_DIR.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

impl Common {
    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    fn quad(&self) -> Result<QuadSpec, Error> {
        if self.samples < 10_000 && matches!(self.method, Method::Montecarlo) {
            return Err(Error::Range(format!("at least 10000 samples are required, got {}", self.samples)));
        }
        let mut q = QuadSpec {
            method: match self.method {
                Method::Montecarlo => QuadMethod::MonteCarlo,
                Method::Tensor => QuadMethod::TensorGrid,
            },
            samples: self.samples,
            seed: self.seed,
            grid_n: self.grid_n,
            ..QuadSpec::default()
        }
        .with_exec(self.exec());
        if self.sampled {
            q = q.sampled();
        }
        Ok(q)
    }

    fn grid(&self) -> Result<GridSpec, Error> {
        Ok(GridSpec::new(self.half_width, self.grid_n)?.with_exec(self.exec()))
    }

    fn equality(&self) -> Result<CheckKind, Error> {
        match self.tol {
            Some(t) if t > 0.0 => Ok(CheckKind::Equality(t)),
            Some(t) => Err(Error::Range(format!("tolerance must be positive, got {t}"))),
            None => Ok(CheckKind::Equality(DEFAULT_EQUALITY_FLOOR)),
        }
    }

    fn destination(&self, stem: &str) -> Option<PathBuf> {
        self.output.clone().or_else(|| {
            std::env::var_os(OUTPUT_ENV).map(|dir| {
                let ext = match self.format {
                    Format::Json => "json",
                    Format::Csv => "csv",
                };
                PathBuf::from(dir).join(format!("{stem}.{ext}"))
            })
        })
    }

    fn emit(&self, stem: &str, reports: &[DistortionReport], extra: Option<serde_json::Value>) -> Result<(), Error> {
        let mut buf = Vec::new();
        match (self.format, extra) {
            (Format::Json, Some(extra)) => {
                serde_json::to_writer_pretty(&mut buf, &json!({ "reports": reports, "sweep": extra }))?;
            }
            (Format::Json, None) => write_json(reports, &mut buf)?,
            (Format::Csv, _) => write_csv(reports, &mut buf)?,
        }
        if matches!(self.format, Format::Json) {
            buf.push(b'\n');
        }
        write_out(self.destination(stem).as_deref(), &buf)
    }
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<(), Error> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, bytes)?;
        }
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn verify(theorem: Theorem, pt: &PointArgs, common: &Common, mask: Option<&Path>) -> Result<bool, Error> {
    let q = common.quad()?;
    let start = Instant::now();
    let mut rep = match (theorem, mask) {
        (Theorem::Th3, Some(path)) => {
            qcarea::geometry::check_pole(pt.p)?;
            let m = GridMask::load(path)?;
            verify_th3_region(pt.p, &Region::Mask(m), common.grid()?, &q)?
        }
        (_, Some(_)) => return Err(Error::Unsupported("--mask applies to th3 only".into())),
        (Theorem::Th3, None) => verify_th3(pt.p, pt.r, common.grid()?)?,
        (Theorem::Th1i, None) => th1_i_family(pt.point()?, &q, common.equality()?)?,
        (Theorem::Th1ii, None) => th1_ii_family(pt.point()?, &q)?,
        (Theorem::Th1iii, None) => {
            let point = pt.point()?;
            let g = pole_stretch(point.params()?)?;
            let e = FramedRegion::Mirror(Region::Disk(pseudo_disk(point.p, point.r)?));
            verify_th1_iii(point.p, Some(point.r), point.big_k, &e, MapSource::Analytic(&g), &q, CheckKind::Inequality)?
        }
        (Theorem::Th2, None) => {
            let point = pt.point()?;
            let radii = [point.r, point.r];
            let s = stacked_map(point.p, point.big_k, &radii, &feasible_pweights(&radii, STACK_SHRINK)?)?;
            verify_th2_stacked(&s, &q, common.equality()?)?
        }
    };
    if common.timings {
        rep.runtime_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    let pass = rep.pass;
    common.emit(TheoremId::from(theorem).name(), &[rep], None)?;
    Ok(pass)
}

fn run_sweep(theorem: Theorem, points: Option<&Path>, lists: [&[f64]; 3], common: &Common) -> Result<bool, Error> {
    let pts = match points {
        Some(path) => parse_points(&fs::read_to_string(path)?)?,
        None => grid_points(lists[0], lists[1], lists[2])?,
    };
    if common.tol.is_some() {
        return Err(Error::Unsupported("--tol applies to single-point checks; sweeps use the default floors".into()));
    }
    let q = common.quad()?;
    let start = Instant::now();
    let result = sweep(theorem.into(), &pts, &q, common.grid()?, common.exec());
    for e in &result.entries {
        if let Some(err) = &e.error {
            eprintln!("point p={} r={} K={}: {err}", e.point.p, e.point.r, e.point.big_k);
        }
    }
    let mut reports = result.reports();
    if common.timings {
        let per = start.elapsed().as_secs_f64() * 1e3 / reports.len().max(1) as f64;
        for r in &mut reports {
            r.runtime_ms = Some(per);
        }
    }
    let errors: Vec<_> = result
        .entries
        .iter()
        .filter_map(|e| e.error.as_ref().map(|m| json!({ "point": e.point, "error": m })))
        .collect();
    let extra = json!({ "monotone": result.monotone, "errors": errors });
    common.emit(&format!("sweep_{}", TheoremId::from(theorem).name()), &reports, Some(extra))?;
    Ok(result.all_pass())
}

fn solve(mu: &Path, p: f64, k: Option<f64>, tol: Option<f64>, max_iter: usize, output: Option<PathBuf>) -> Result<bool, Error> {
    let field = DilatationField::load(mu, k)?;
    let dir = output
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let s = match neumann_solve(&field, p, SolveOptions { tol, max_iter }) {
        Ok(s) => s,
        Err(err @ Error::NonConvergence { .. }) => {
            eprintln!("{err}");
            return Ok(false);
        }
        Err(e) => return Err(e),
    };
    fs::create_dir_all(&dir)?;
    s.w.save(dir.join("w.dump"))?;
    s.dg.save(dir.join("dg.dump"))?;
    s.g.save(dir.join("g.dump"))?;
    let grid = s.grid();
    let summary = json!({
        "p": p,
        "k": s.mu.k,
        "K": (1.0 + s.mu.k) / (1.0 - s.mu.k),
        "grid_n": grid.n,
        "L": grid.half_width,
        "iterations": s.iterations,
        "residual": s.residual,
        "tol": s.tol,
        "history": s.history,
        "ratios": s.residual_ratios(),
        "edge_deviation": s.edge_deviation(),
    });
    let mut text = serde_json::to_vec_pretty(&summary)?;
    text.push(b'\n');
    write_out(Some(&dir.join("summary.json")), &text)?;
    Ok(true)
}

fn selftest(grid_n: usize, half_width: f64) -> Result<bool, Error> {
    let grid = GridSpec::new(half_width, grid_n)?;
    let cases = [(0.0, 0.5), (0.4, 0.5), (0.5, 0.7)]
        .iter()
        .map(|&(p, r)| calibrate_hilbert(p, r, grid))
        .collect::<Result<Vec<_>, _>>()?;
    let defect = isometry_defect(0, 10, grid)?;
    let pass = cases.iter().all(|c| c.pass) && defect < ISOMETRY_TOL;
    let out = json!({
        "grid_n": grid_n,
        "L": half_width,
        "calibration": cases,
        "isometry_defect": defect,
        "pass": pass,
    });
    let mut text = serde_json::to_vec_pretty(&out)?;
    text.push(b'\n');
    write_out(None, &text)?;
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Verify { theorem, point, common, mask } => verify(*theorem, point, common, mask.as_deref()),
        Command::Sweep { theorem, points, ps, rs, ks, common } => run_sweep(*theorem, points.as_deref(), [ps, rs, ks], common),
        Command::Solve { mu, p, k, tol, max_iter, output } => solve(mu, *p, *k, *tol, *max_iter, output.clone()),
        Command::Selftest { target: SelftestTarget::Transforms, grid_n, half_width } => selftest(*grid_n, *half_width),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
