//! Command-line front end.
//!
//! Subcommands mirror the library pipeline: `bounds` computes the constant
//! ladder, `certify` applies the ball certificates, `relax` runs the
//! embedded conic solver, `image` exports clouds (CSV + SVG), `oracle`
//! probes for nonconvexity, and `reproduce` recomputes the bundled
//! reference instances and compares against their expected values.
//!
//! Exit codes are stable: 0 success/certified, 1 usage or parse error,
//! 2 numerical failure, 3 not-certified/refuted.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    self, certify_ball, compute_report, estimate_lf, BoundChoice, BoundsReport, CertStatus,
    LfSearchConfig,
};
use crate::error::{Error, Result};
use crate::oracle::{self, ProbeConfig, SampleScheme};
use crate::plot;
use crate::quadmap::{BallSpec, QuadraticMap};
use crate::sdp;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_NOT_CERTIFIED: i32 = 3;

/// Bundled reference instances for `reproduce`.
pub const FIXTURE_POLYAK: &str = include_str!("../fixtures/polyak.json");
pub const FIXTURE_E1: &str = include_str!("../fixtures/e1.json");
pub const FIXTURE_E2: &str = include_str!("../fixtures/e2.json");
pub const FIXTURE_ZERO: &str = include_str!("../fixtures/zero.json");

#[derive(Parser, Debug)]
#[command(
    name = "quadconvex",
    about = "Certified local-convexity radii for quadratic transformations",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute the Lipschitz bound ladder and convexity radii for an instance
    Bounds(BoundsArgs),
    /// Certify convexity of a ball image via the radius tests
    Certify(CertifyArgs),
    /// Build and solve the lifted semidefinite relaxation
    Relax(RelaxArgs),
    /// Sample the image of a ball to CSV (and SVG for planar images)
    Image(ImageArgs),
    /// Probe a ball image for nonconvexity (raster scan + refinement)
    Oracle(OracleArgs),
    /// Recompute the bundled reference instances and compare
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundArg {
    L,
    LNew,
    LBar,
    LTilde,
    LfLower,
}

impl From<BoundArg> for BoundChoice {
    fn from(b: BoundArg) -> Self {
        match b {
            BoundArg::L => BoundChoice::L,
            BoundArg::LNew => BoundChoice::LNew,
            BoundArg::LBar => BoundChoice::LBar,
            BoundArg::LTilde => BoundChoice::LTilde,
            BoundArg::LfLower => BoundChoice::LfLower,
        }
    }
}

#[derive(clap::Args, Debug)]
pub struct BoundsArgs {
    /// Instance file (JSON)
    pub input: PathBuf,
    /// Also compute the relaxation bound and the exact-constant estimate
    #[arg(long)]
    pub full: bool,
    /// Conic solver tolerance for the relaxation bound
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Sphere-net size for the exact-constant search
    #[arg(long)]
    pub net: Option<usize>,
    /// Seed for the search direction stream
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the report as JSON
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct CertifyArgs {
    pub input: PathBuf,
    /// Ball radius
    #[arg(long)]
    pub eps: f64,
    /// Ball center as comma-separated coordinates (default: origin)
    #[arg(long)]
    pub center: Option<String>,
    /// Which bound the radius test uses
    #[arg(long, value_enum, default_value_t = BoundArg::LNew)]
    pub bound: BoundArg,
    /// Conic solver tolerance (l-tilde bound only)
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Sphere-net size (lf-lower bound only)
    #[arg(long)]
    pub net: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct RelaxArgs {
    pub input: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Dump the assembled problem in the plain-text conic format
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Grid,
    Random,
}

#[derive(clap::Args, Debug)]
pub struct ImageArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub center: Option<String>,
    /// Sampling scheme (grid for planar domains, random otherwise)
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Grid points per axis
    #[arg(long, default_value_t = 400)]
    pub resolution: usize,
    /// Random sample count
    #[arg(long, default_value_t = 1_000_000)]
    pub count: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// CSV output path (default: <input stem>_eps<eps>.csv)
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// SVG output path (default: CSV path with .svg; planar images only)
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct OracleArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub center: Option<String>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long, default_value_t = 400)]
    pub resolution: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub count: usize,
    /// Sampling seed
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Raster cells along the longer image axis
    #[arg(long, default_value_t = 256)]
    pub cells: usize,
    /// Gap tolerance of the raster walk, in cells
    #[arg(long, default_value_t = 2)]
    pub dilation: u32,
    /// Multistart count of the witness refinement
    #[arg(long, default_value_t = 64)]
    pub starts: usize,
    /// Refinement iteration cap
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
    /// Refutation threshold as a fraction of the image diameter
    #[arg(long, default_value_t = 1e-3)]
    pub threshold_frac: f64,
    /// Seed of the refinement multistart
    #[arg(long, default_value_t = 11)]
    pub refine_seed: u64,
    /// Raster candidates to refine before concluding
    #[arg(long, default_value_t = 8)]
    pub max_candidates: usize,
    /// Witness output path (written when a witness is confirmed)
    #[arg(long)]
    pub witness: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct ReproduceArgs {
    /// Run every section (default when --only is absent)
    #[arg(long)]
    pub all: bool,
    /// Run a single section: bounds | relax | lf
    #[arg(long)]
    pub only: Option<String>,
    /// Override every comparison tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    /// Report output path
    #[arg(long, default_value = "reproduce_report.json")]
    pub report: PathBuf,
}

fn classify(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Validation(_) | Error::Dimension(_) | Error::Io(_) => {
            EXIT_USAGE
        }
        Error::Numerical(_) | Error::Capacity(_) | Error::NonConvergence { .. } => EXIT_NUMERICAL,
    }
}

pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Bounds(args) => cmd_bounds(&args),
        Command::Certify(args) => cmd_certify(&args),
        Command::Relax(args) => cmd_relax(&args),
        Command::Image(args) => cmd_image(&args),
        Command::Oracle(args) => cmd_oracle(&args),
        Command::Reproduce(args) => cmd_reproduce(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            classify(&e)
        }
    }
}

fn load_map(path: &Path) -> Result<QuadraticMap> {
    let text = std::fs::read_to_string(path)?;
    QuadraticMap::parse_problem(&text)
}

fn parse_center(spec: &Option<String>, n: usize) -> Result<DVector<f64>> {
    match spec {
        None => Ok(DVector::zeros(n)),
        Some(s) => {
            let vals: std::result::Result<Vec<f64>, _> =
                s.split(',').map(|t| t.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::parse("center", e.to_string()))?;
            Ok(DVector::from_column_slice(&vals))
        }
    }
}

/// Fills the optional report fields behind `--full` or an explicit bound
/// choice that needs them.
fn extend_report(
    map: &QuadraticMap,
    report: &mut BoundsReport,
    want_tilde: bool,
    want_lf: bool,
    tol: f64,
    net: Option<usize>,
    seed: u64,
) -> Result<()> {
    if want_tilde {
        let sol = sdp::l_tilde(map, tol)?;
        report.l_tilde_new = Some(sol.l_tilde);
    }
    if want_lf {
        let config = LfSearchConfig {
            net_size: net,
            seed,
            ..LfSearchConfig::default()
        };
        let est = estimate_lf(map, &config)?;
        report.lf_lower = Some(est.value);
    }
    if let Some(lf) = report.lf_lower {
        if lf > report.l_new + 1e-6 {
            return Err(Error::Numerical(format!(
                "search estimate {lf} exceeds L_new {}: bound chain violated",
                report.l_new
            )));
        }
        if let Some(lt) = report.l_tilde_new {
            if lf > lt + 10.0 * tol * (1.0 + lt) {
                return Err(Error::Numerical(format!(
                    "search estimate {lf} exceeds the relaxation bound {lt}"
                )));
            }
        }
    }
    Ok(())
}

fn print_radius(label: &str, es: &bounds::EpsStar) {
    match es.regime {
        bounds::EpsStarRegime::Certifiable => println!("{label:<16} {:.6}", es.value),
        bounds::EpsStarRegime::LinearMap => {
            println!("{label:<16} inf (affine map: every ball image is convex)")
        }
        bounds::EpsStarRegime::SingularLinearPart => {
            println!("{label:<16} 0 (singular linear part: nothing certifiable)")
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn cmd_bounds(args: &BoundsArgs) -> Result<i32> {
    let map = load_map(&args.input)?;
    let mut report = compute_report(&map);
    if args.full {
        extend_report(&map, &mut report, true, true, args.tol, args.net, args.seed)?;
    }
    println!("instance: {} (n={}, m={})", args.input.display(), report.n, report.m);
    println!("{:<16} {:.6}", "L", report.l);
    println!("{:<16} {:.6}", "L_new", report.l_new);
    println!("{:<16} {:.6}", "L_bar_new", report.l_bar_new);
    if let Some(lt) = report.l_tilde_new {
        println!("{:<16} {:.6}", "L_tilde_new", lt);
    }
    if let Some(lf) = report.lf_lower {
        println!("{:<16} {:.6}", "Lf_lower", lf);
    }
    println!("{:<16} {:.6}", "nu", report.nu);
    print_radius("eps*(L)", &report.eps_star);
    print_radius("eps*(L_new)", &report.eps_star_new);
    if report.l_tilde_new.is_some() {
        let es = bounds::eps_star(&report, BoundChoice::LTilde)?;
        print_radius("eps*(L_tilde)", &es);
    }
    if let Some(path) = &args.json {
        write_json(path, &report)?;
    }
    Ok(EXIT_OK)
}

fn cmd_certify(args: &CertifyArgs) -> Result<i32> {
    let map = load_map(&args.input)?;
    let mut report = compute_report(&map);
    let choice: BoundChoice = args.bound.into();
    extend_report(
        &map,
        &mut report,
        matches!(choice, BoundChoice::LTilde),
        matches!(choice, BoundChoice::LfLower),
        args.tol,
        args.net,
        args.seed,
    )?;
    let center = parse_center(&args.center, map.n())?;
    let ball = BallSpec::new(center, args.eps)?;
    let cert = certify_ball(&report, &ball, choice)?;
    match cert.status {
        CertStatus::CertifiedConvex => println!(
            "CertifiedConvex via {} rule (bound {}, margin {:.6})",
            match cert.rule {
                Some(bounds::CertRule::CenteredBall) => "centered-ball",
                Some(bounds::CertRule::ShiftedCenter) => "shifted-center",
                None => "?",
            },
            cert.bound_used,
            cert.margin
        ),
        CertStatus::NotCertified => println!(
            "NotCertified (bound {}, margin {:.6})",
            cert.bound_used, cert.margin
        ),
        CertStatus::RefutedNumerically => println!("RefutedNumerically"),
    }
    if let Some(path) = &args.json {
        write_json(path, &cert)?;
    }
    Ok(if cert.status == CertStatus::CertifiedConvex {
        EXIT_OK
    } else {
        EXIT_NOT_CERTIFIED
    })
}

/// Machine-readable relaxation result.
#[derive(Debug, Serialize, Deserialize)]
pub struct RelaxReport {
    pub l_tilde: f64,
    pub objective: f64,
    pub s1: f64,
    pub s2: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual_primal: f64,
    pub residual_dual: f64,
    pub residual_gap: f64,
    pub max_constraint_violation: f64,
}

fn cmd_relax(args: &RelaxArgs) -> Result<i32> {
    let map = load_map(&args.input)?;
    let prob = sdp::build_relaxation(&map)?;
    if let Some(path) = &args.dump {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        sdp::dump_problem(&prob, &mut f)?;
        println!("problem dump written to {}", path.display());
    }
    let sol = sdp::solve_relaxation(&prob, args.tol)?;
    let viol = sol.constraint_violations(&prob);
    println!(
        "L_tilde_new = {:.6} (objective {:.6}, {} iterations)",
        sol.l_tilde, sol.objective, sol.iterations
    );
    println!(
        "residuals: primal {:.2e}, dual {:.2e}, gap {:.2e}; worst constraint violation {:.2e}",
        sol.residuals.primal,
        sol.residuals.dual,
        sol.residuals.gap,
        viol.max()
    );
    if let Some(path) = &args.json {
        write_json(
            path,
            &RelaxReport {
                l_tilde: sol.l_tilde,
                objective: sol.objective,
                s1: sol.s1,
                s2: sol.s2,
                iterations: sol.iterations,
                converged: sol.converged,
                residual_primal: sol.residuals.primal,
                residual_dual: sol.residuals.dual,
                residual_gap: sol.residuals.gap,
                max_constraint_violation: viol.max(),
            },
        )?;
    }
    Ok(EXIT_OK)
}

fn scheme_from(args_scheme: Option<SchemeArg>, n: usize, resolution: usize, count: usize, seed: u64) -> SampleScheme {
    let pick = args_scheme.unwrap_or(if n == 2 { SchemeArg::Grid } else { SchemeArg::Random });
    match pick {
        SchemeArg::Grid => SampleScheme::Grid { resolution },
        SchemeArg::Random => SampleScheme::Random { count, seed },
    }
}

fn default_stem(input: &Path, eps: f64) -> String {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into());
    format!("{stem}_eps{eps}")
}

fn cmd_image(args: &ImageArgs) -> Result<i32> {
    let map = load_map(&args.input)?;
    let center = parse_center(&args.center, map.n())?;
    let ball = BallSpec::new(center, args.eps)?;
    let scheme = scheme_from(args.scheme, map.n(), args.resolution, args.count, args.seed);
    let cloud = oracle::sample_image(&map, &ball, scheme)?;
    let csv_path = args
        .csv
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", default_stem(&args.input, args.eps))));
    oracle::export_csv(&cloud, &csv_path)?;
    println!("{} samples -> {}", cloud.len(), csv_path.display());
    if map.m() == 2 {
        let svg_path = args
            .svg
            .clone()
            .unwrap_or_else(|| csv_path.with_extension("svg"));
        plot::export_scatter_svg(&cloud, &svg_path)?;
        println!("scatter -> {}", svg_path.display());
    } else if args.svg.is_some() {
        return Err(Error::Dimension(format!(
            "SVG scatter needs a planar image (m = 2), this map has m = {} (CSV was written)",
            map.m()
        )));
    }
    Ok(EXIT_OK)
}

fn cmd_oracle(args: &OracleArgs) -> Result<i32> {
    let map = load_map(&args.input)?;
    let center = parse_center(&args.center, map.n())?;
    let ball = BallSpec::new(center, args.eps)?;
    let config = ProbeConfig {
        scheme: scheme_from(args.scheme, map.n(), args.resolution, args.count, args.seed),
        cells_per_axis: args.cells,
        dilation: args.dilation,
        refine_starts: args.starts,
        refine_iters: args.iters,
        threshold_frac: args.threshold_frac,
        seed: args.refine_seed,
        max_candidates: args.max_candidates,
    };
    let report = oracle::probe_convexity(&map, &ball, &config)?;
    match &report.witness {
        Some(w) => {
            println!(
                "NonconvexityWitness (numerical evidence): best residual {:.3e} > threshold {:.3e} after {} starts",
                w.best_residual, report.threshold, w.starts
            );
            let path = args
                .witness
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("{}_witness.json", default_stem(&args.input, args.eps))));
            write_json(&path, w)?;
            println!("witness -> {}", path.display());
            Ok(EXIT_NOT_CERTIFIED)
        }
        None => {
            if report.candidates == 0 {
                println!(
                    "ConvexLikely: no raster gap deeper than the dilation ({} occupied cells, {} samples)",
                    report.occupied_cells, report.samples
                );
            } else {
                println!(
                    "no confirmed witness: {} raster candidate(s) rejected by refinement (threshold {:.3e})",
                    report.rejected, report.threshold
                );
            }
            Ok(EXIT_OK)
        }
    }
}

/// One comparison row of the reproduction report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReproRow {
    pub name: String,
    pub computed: f64,
    pub reference: f64,
    pub tolerance: f64,
    /// `abs`: |computed - reference| <= tolerance;
    /// `upper`: computed <= reference + tolerance.
    pub kind: String,
    pub delta: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReproReport {
    pub rows: Vec<ReproRow>,
    pub passed: usize,
    pub failed: usize,
}

fn row_abs(name: &str, computed: f64, reference: f64, tol: f64, over: Option<f64>) -> ReproRow {
    let tolerance = over.unwrap_or(tol);
    let delta = computed - reference;
    ReproRow {
        name: name.into(),
        computed,
        reference,
        tolerance,
        kind: "abs".into(),
        delta,
        pass: delta.abs() <= tolerance,
    }
}

fn row_upper(name: &str, computed: f64, reference: f64, tol: f64, over: Option<f64>) -> ReproRow {
    let tolerance = over.unwrap_or(tol);
    let delta = computed - reference;
    ReproRow {
        name: name.into(),
        computed,
        reference,
        tolerance,
        kind: "upper".into(),
        delta,
        pass: computed <= reference + tolerance,
    }
}

fn cmd_reproduce(args: &ReproduceArgs) -> Result<i32> {
    let sections: Vec<&str> = match &args.only {
        Some(s) => {
            let s = s.as_str();
            if !["bounds", "relax", "lf"].contains(&s) {
                return Err(Error::Validation(format!(
                    "unknown section `{s}` (expected bounds, relax or lf)"
                )));
            }
            vec![s]
        }
        None => vec!["bounds", "relax", "lf"],
    };
    let over = args.tol;
    let polyak = QuadraticMap::parse_problem(FIXTURE_POLYAK)?;
    let e1 = QuadraticMap::parse_problem(FIXTURE_E1)?;
    let e2 = QuadraticMap::parse_problem(FIXTURE_E2)?;
    let mut rows = Vec::new();

    if sections.contains(&"bounds") {
        let rp = compute_report(&polyak);
        let sqrt2 = std::f64::consts::SQRT_2;
        rows.push(row_abs("polyak.L", rp.l, sqrt2, 1e-9, over));
        rows.push(row_abs("polyak.L_new", rp.l_new, sqrt2, 1e-9, over));
        rows.push(row_abs("polyak.nu", rp.nu, 1.0, 1e-9, over));
        rows.push(row_abs(
            "polyak.eps_star",
            rp.eps_star.value,
            0.5 / sqrt2,
            1e-9,
            over,
        ));
        for (tag, map, l, lnew, lbar) in [
            ("e1", &e1, 14.4166, 13.9094, 12.8849),
            ("e2", &e2, 13.8065, 13.8043, 14.5901),
        ] {
            let r = compute_report(map);
            rows.push(row_abs(&format!("{tag}.L"), r.l, l, 1e-3, over));
            rows.push(row_abs(&format!("{tag}.L_new"), r.l_new, lnew, 1e-3, over));
            rows.push(row_abs(&format!("{tag}.L_bar_new"), r.l_bar_new, lbar, 1e-3, over));
            rows.push(row_abs(&format!("{tag}.nu"), r.nu, 1.0, 1e-9, over));
        }
    }
    if sections.contains(&"relax") {
        for (tag, map, lt) in [("e1", &e1, 12.6747), ("e2", &e2, 13.8009)] {
            let sol = sdp::l_tilde(map, 1e-6)?;
            rows.push(row_abs(&format!("{tag}.L_tilde_new"), sol.l_tilde, lt, 5e-3, over));
        }
        let sol = sdp::l_tilde(&polyak, 1e-6)?;
        rows.push(row_abs(
            "polyak.L_tilde_new",
            sol.l_tilde,
            std::f64::consts::SQRT_2,
            1e-4,
            over,
        ));
    }
    if sections.contains(&"lf") {
        let est = estimate_lf(&polyak, &LfSearchConfig::default())?;
        rows.push(row_abs(
            "polyak.Lf",
            est.value,
            std::f64::consts::SQRT_2,
            1e-6,
            over,
        ));
        let est = estimate_lf(&e1, &LfSearchConfig::default())?;
        rows.push(row_upper("e1.Lf_lower_vs_L_tilde", est.value, 12.6747, 1e-2, over));
        let est2 = estimate_lf(&e2, &LfSearchConfig::default())?;
        rows.push(row_upper("e2.Lf_lower_vs_L_tilde", est2.value, 13.8009, 1e-2, over));
    }

    let passed = rows.iter().filter(|r| r.pass).count();
    let failed = rows.len() - passed;
    for r in &rows {
        println!(
            "{} {:<28} computed {:+.6} reference {:+.6} delta {:+.2e} (tol {:.1e}, {})",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.computed,
            r.reference,
            r.delta,
            r.tolerance,
            r.kind
        );
    }
    println!("{passed} passed, {failed} failed");
    let report = ReproReport { rows, passed, failed };
    write_json(&args.report, &report)?;
    println!("report -> {}", args.report.display());
    Ok(if failed == 0 { EXIT_OK } else { EXIT_NUMERICAL })
}
