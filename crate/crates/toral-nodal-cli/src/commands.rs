//! Subcommand definitions and dispatch.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use toral_nodal::classical;
use toral_nodal::eigenfun::{Eigenfunction, ShiftFrame};
use toral_nodal::fixtures;
use toral_nodal::lattice::{
    cluster_decompose, enumerate_shell, jarnik_scan, ClusterParams, LatticePoint, ShellDocument,
};
use toral_nodal::oscillatory::decay_fit;
use toral_nodal::restriction::{
    cap_propagate, frame_in_cap, lower_bound_certificate, mean_square, real_restriction_norm,
    restriction_sup, Cap, Certificate, CertificateParams, PropagateOptions, SurfaceSampling,
};
use toral_nodal::surface::{
    build_patch, find_admissible_cap, flat_control_patch, AdmissibleCapParams, BumpSpec,
    ComplexPatch, SurfaceHandle,
};
use toral_nodal::Error;

use crate::marching;
use crate::phi_source::PhiSource;

/// Lattice shells, toral eigenfunctions and nodal-set experiments.
#[derive(Debug, Parser)]
#[command(name = "toral-nodal", version, disable_help_subcommand = true)]
pub struct Cli {
    /// Read the argument list from a JSON file {"args": [...]}.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enumerate the lattice points on a sphere.
    Shell(ShellArgs),
    /// Cluster decomposition of a shell.
    Clusters(ClustersArgs),
    /// Scan point-centered caps for affine-rank violations.
    Jarnik(JarnikArgs),
    /// Nodal-line contours of a planar eigenfunction.
    Nodal(NodalArgs),
    /// Restriction of eigenfunctions to real curves.
    Restrict(RestrictArgs),
    /// Mean square on a complex patch plus the lower-bound certificate.
    Meansquare(MeansquareArgs),
    /// Oscillatory-integral decay table.
    Oscdecay(OscdecayArgs),
    /// Cap propagation trace.
    Capflow(CapflowArgs),
    /// Legendre gcd and zonal-parallel tables.
    Legendre(LegendreArgs),
    /// Laurent-polynomial conversion and the abc frequency-box check.
    Laurent(LaurentArgs),
}

/// Error wrapper mapping to process exit codes.
#[derive(Debug)]
pub enum CliError {
    Lib(Error),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    /// 1 for validation problems, 2 for numerical/operational failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(
                Error::InvalidArgument(_) | Error::OffShell(_, _) | Error::DegenerateInput(_),
            ) => 1,
            _ => 2,
        }
    }
}

type CliResult = Result<(), CliError>;

pub fn run(cli: Cli) -> CliResult {
    if let Some(path) = &cli.config {
        if cli.command.is_some() {
            return Err(Error::InvalidArgument(
                "--config replaces the command line; do not pass a subcommand with it".into(),
            )
            .into());
        }
        let text = std::fs::read_to_string(path)?;
        let doc: ConfigDoc = serde_json::from_str(&text).map_err(Error::from)?;
        let mut argv = vec!["toral-nodal".to_string()];
        argv.extend(doc.args);
        let inner = Cli::try_parse_from(&argv).map_err(|e| {
            Error::InvalidArgument(format!("config file arguments failed to parse: {e}"))
        })?;
        return run(inner);
    }
    let Some(command) = cli.command else {
        return Err(Error::InvalidArgument(
            "missing subcommand; run with --help for usage".into(),
        )
        .into());
    };
    match command {
        Command::Shell(a) => cmd_shell(a),
        Command::Clusters(a) => cmd_clusters(a),
        Command::Jarnik(a) => cmd_jarnik(a),
        Command::Nodal(a) => cmd_nodal(a),
        Command::Restrict(a) => cmd_restrict(a),
        Command::Meansquare(a) => cmd_meansquare(a),
        Command::Oscdecay(a) => cmd_oscdecay(a),
        Command::Capflow(a) => cmd_capflow(a),
        Command::Legendre(a) => cmd_legendre(a),
        Command::Laurent(a) => cmd_laurent(a),
    }
}

#[derive(Debug, serde::Deserialize)]
struct ConfigDoc {
    args: Vec<String>,
}

fn write_out(path: &PathBuf, contents: &str) -> CliResult {
    std::fs::write(path, contents)?;
    Ok(())
}

// ---------------------------------------------------------------- shell

#[derive(Debug, Args)]
pub struct ShellArgs {
    /// Dimension d >= 2.
    #[arg(short = 'd', long = "dim", default_value_t = 2)]
    pub d: usize,
    /// Squared radius R^2.
    #[arg(long)]
    pub r2: i64,
    /// Candidate-visit budget for the enumeration.
    #[arg(long, default_value_t = toral_nodal::lattice::DEFAULT_ENUMERATION_BUDGET)]
    pub budget: u64,
    /// Write the shell as JSON.
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

fn cmd_shell(a: ShellArgs) -> CliResult {
    let shell = toral_nodal::lattice::enumerate_shell_with_budget(a.d, a.r2, a.budget)?;
    println!("shell d={} r2={}: {} points", a.d, a.r2, shell.len());
    for p in &shell.points {
        let coords: Vec<String> = p.coords.iter().map(|c| c.to_string()).collect();
        println!("({})", coords.join(", "));
    }
    if let Some(path) = &a.json {
        let doc = serde_json::json!({
            "d": shell.d,
            "r2": shell.r2,
            "points": shell.points.iter().map(|p| p.coords.clone()).collect::<Vec<_>>(),
        });
        write_out(path, &serde_json::to_string_pretty(&doc).map_err(Error::from)?)?;
    }
    Ok(())
}

// ------------------------------------------------------------- clusters

#[derive(Debug, Args)]
pub struct ClustersArgs {
    #[arg(short = 'd', long = "dim", default_value_t = 2)]
    pub d: usize,
    #[arg(long)]
    pub r2: i64,
    /// Separation scale rho.
    #[arg(long)]
    pub rho: f64,
    /// delta(2) as an exact fraction "p/q" in (0, 1/3).
    #[arg(long, default_value = "1/4")]
    pub delta2: String,
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

fn parse_rational(text: &str) -> Result<num_rational::BigRational, Error> {
    let (p, q) = text
        .split_once('/')
        .ok_or_else(|| Error::InvalidArgument(format!("expected p/q, got '{text}'")))?;
    let p: num_bigint::BigInt = p
        .trim()
        .parse()
        .map_err(|e| Error::InvalidArgument(format!("bad numerator: {e}")))?;
    let q: num_bigint::BigInt = q
        .trim()
        .parse()
        .map_err(|e| Error::InvalidArgument(format!("bad denominator: {e}")))?;
    Ok(num_rational::BigRational::new(p, q))
}

fn cmd_clusters(a: ClustersArgs) -> CliResult {
    let shell = enumerate_shell(a.d, a.r2)?;
    let params = ClusterParams::new(a.d, parse_rational(&a.delta2)?, a.rho)?;
    let decomposition = cluster_decompose(&shell, &params)?;
    println!(
        "shell d={} r2={}: {} points, {} clusters at rho={}",
        a.d,
        a.r2,
        shell.len(),
        decomposition.clusters.len(),
        a.rho
    );
    println!(
        "constants: c={} delta={} (hypothesis rho < R^delta holds: {})",
        params.c,
        params.delta,
        params.hypothesis_holds(a.r2)
    );
    println!("min inter-cluster distance: {}", decomposition.min_intercluster_distance);
    for (k, (cluster, diam)) in decomposition
        .clusters
        .iter()
        .zip(&decomposition.diameters)
        .enumerate()
    {
        println!("cluster {k}: {} points, diameter {diam}", cluster.len());
    }
    if let Some(path) = &a.json {
        let doc = ShellDocument::new(&shell, &decomposition, &params);
        write_out(path, &serde_json::to_string_pretty(&doc).map_err(Error::from)?)?;
    }
    Ok(())
}

// --------------------------------------------------------------- jarnik

#[derive(Debug, Args)]
pub struct JarnikArgs {
    #[arg(short = 'd', long = "dim", default_value_t = 2)]
    pub d: usize,
    /// Scan a single shell.
    #[arg(long)]
    pub r2: Option<i64>,
    /// Or scan `count` random shells with r2 up to this bound.
    #[arg(long, default_value_t = 0)]
    pub count: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_r2: i64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Cap radius = scale * r2^(1/6) unless --cap-radius is given.
    #[arg(long, default_value_t = 0.5)]
    pub cap_scale: f64,
    #[arg(long)]
    pub cap_radius: Option<f64>,
}

fn cmd_jarnik(a: JarnikArgs) -> CliResult {
    let r2s: Vec<i64> = if let Some(r2) = a.r2 {
        vec![r2]
    } else if a.count > 0 {
        // Deterministic multiplicative-congruential draw; plain and
        // reproducible.
        let mut state = a.seed.max(1);
        (0..a.count)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                1 + (state >> 33) as i64 % a.max_r2
            })
            .collect()
    } else {
        return Err(Error::InvalidArgument("pass --r2 or --count".into()).into());
    };
    let reports: Vec<(i64, Result<_, Error>)> = r2s
        .par_iter()
        .map(|&r2| {
            let out = enumerate_shell(a.d, r2).and_then(|shell| {
                let radius =
                    a.cap_radius.unwrap_or(a.cap_scale * (r2 as f64).powf(1.0 / 6.0));
                jarnik_scan(&shell, radius).map(|rep| (shell.len(), radius, rep))
            });
            (r2, out)
        })
        .collect();
    let mut total_violations = 0;
    for (r2, rep) in reports {
        let (npts, radius, rep) = rep?;
        total_violations += rep.violations.len();
        println!(
            "r2={r2}: {npts} points, cap radius {radius}, largest cap {}, violations {}",
            rep.largest_cap,
            rep.violations.len()
        );
        for v in &rep.violations {
            println!(
                "  violation at point {}: {} members, affine rank {}",
                v.center_index,
                v.member_indices.len(),
                v.affine_rank
            );
        }
    }
    println!("total violations: {total_violations}");
    Ok(())
}

// ---------------------------------------------------------------- nodal

#[derive(Debug, Args)]
pub struct NodalArgs {
    #[command(flatten)]
    pub phi: PhiSource,
    /// Grid resolution per axis.
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
    /// Contour polylines as CSV.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    /// Optional SVG rendering.
    #[arg(long, value_name = "FILE")]
    pub svg: Option<PathBuf>,
}

fn cmd_nodal(a: NodalArgs) -> CliResult {
    let phi = a.phi.resolve(2)?;
    if phi.d != 2 {
        return Err(Error::InvalidArgument("nodal contours need d = 2".into()).into());
    }
    let grid = marching::NodalGrid::evaluate(&phi, a.grid);
    let lines = marching::contours(&grid);
    let vertices: usize = lines.iter().map(|l| l.len()).sum();
    println!(
        "nodal grid {}x{}: {} polylines, {} vertices, gradient bound {}",
        a.grid,
        a.grid,
        lines.len(),
        vertices,
        grid.gradient_bound()
    );
    if let Some(path) = &a.csv {
        write_out(path, &marching::contours_csv(&lines))?;
    }
    if let Some(path) = &a.svg {
        write_out(path, &marching::contours_svg(&lines))?;
    }
    Ok(())
}

// -------------------------------------------------------------- restrict

#[derive(Debug, Args)]
pub struct RestrictArgs {
    /// Shell for the random eigenfunctions.
    #[arg(long, default_value_t = 1105)]
    pub r2: i64,
    #[arg(long, default_value_t = 50)]
    pub trials: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Arc center.
    #[arg(long, default_value = "0.5,0.5", value_name = "X,Y")]
    pub center: String,
    #[arg(long, default_value_t = 0.23)]
    pub radius: f64,
    /// Arc angle range "a,b".
    #[arg(long, default_value = "0.4,2.1", value_name = "A,B")]
    pub arc: String,
    #[arg(long, default_value_t = 220)]
    pub order: usize,
    /// Ratio table as CSV.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

fn parse_pair(text: &str) -> Result<(f64, f64), Error> {
    let (a, b) = text
        .split_once(',')
        .ok_or_else(|| Error::InvalidArgument(format!("expected 'a,b', got '{text}'")))?;
    let a = a.trim().parse().map_err(|e| Error::InvalidArgument(format!("{e}")))?;
    let b = b.trim().parse().map_err(|e| Error::InvalidArgument(format!("{e}")))?;
    Ok((a, b))
}

fn cmd_restrict(a: RestrictArgs) -> CliResult {
    let shell = enumerate_shell(2, a.r2)?;
    let center = parse_pair(&a.center)?;
    let (t0, t1) = parse_pair(&a.arc)?;
    let arc = SurfaceSampling::circle_arc([center.0, center.1], a.radius, t0, t1, a.order);
    let mut rows = String::from("seed,ratio\n");
    let mut min_ratio = f64::INFINITY;
    let mut sum = 0.0;
    for k in 0..a.trials {
        let phi = Eigenfunction::random(&shell, a.seed.wrapping_add(k), 0, false)?;
        let ratio = real_restriction_norm(&arc, &phi); // ||phi||^2 = 1
        min_ratio = min_ratio.min(ratio);
        sum += ratio;
        rows.push_str(&format!("{},{}\n", a.seed.wrapping_add(k), ratio));
    }
    println!(
        "curved arc (radius {}): {} trials on shell (2, {}), min ratio {}, mean ratio {}",
        a.radius,
        a.trials,
        a.r2,
        min_ratio,
        sum / a.trials as f64
    );
    // Control: a geodesic vanisher restricted to its own line is zero.
    let vanisher =
        toral_nodal::eigenfun::make_geodesic_vanisher(&LatticePoint::new(vec![1, 0]), 0.0, 1)?;
    let line = SurfaceSampling::line_segment(&[0.0, 0.05], &[0.0, 0.95], 64);
    println!(
        "geodesic control: restriction norm {} (vanishing), sup {}",
        real_restriction_norm(&line, &vanisher),
        restriction_sup(&line, &vanisher)
    );
    if let Some(path) = &a.csv {
        write_out(path, &rows)?;
    }
    Ok(())
}

// ------------------------------------------------------------ meansquare

#[derive(Debug, Args)]
pub struct MeansquareArgs {
    /// Surface fixture: cylinder | parabola | paraboloid.
    #[arg(long, default_value = "parabola")]
    pub fixture: String,
    /// Cylinder mode n (fixture = cylinder).
    #[arg(long, default_value_t = 3)]
    pub cyl_n: u32,
    /// Shell for the random eigenfunction (parabola/paraboloid fixtures).
    #[arg(long, default_value_t = 5525)]
    pub r2: i64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub support: usize,
    /// Slab height tau; 0 selects a fixture-appropriate default.
    #[arg(long, default_value_t = 0.0)]
    pub tau: f64,
    /// Clustering rho for the certificate; 0 selects lambda^(delta(d)).
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    /// Short-sum threshold D; 0 selects ceil((log lambda)^2).
    #[arg(long, default_value_t = 0.0)]
    pub d_threshold: f64,
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

fn certificate_rho(rho_flag: f64, d: usize, r2: i64) -> Result<f64, Error> {
    if rho_flag > 0.0 {
        return Ok(rho_flag);
    }
    let params = ClusterParams::with_default_delta2(d, 1.0)?;
    let delta = toral_nodal::lattice::rational_to_f64(&params.delta);
    Ok((r2 as f64).sqrt().powf(delta).max(0.51))
}

fn cmd_meansquare(a: MeansquareArgs) -> CliResult {
    let (patch, phi, frame): (ComplexPatch, Eigenfunction, ShiftFrame) = match a.fixture.as_str() {
        "cylinder" => {
            let tau = if a.tau > 0.0 { a.tau } else { 0.02 };
            let (graph, phi, frame) = fixtures::cylinder_fixture(a.cyl_n)?;
            let surface: SurfaceHandle = Arc::new(graph);
            let bump = BumpSpec::centered(tau, 3, 0.025);
            let patch = build_patch(surface, &frame.v0, tau, bump, &[16, 12])?;
            (patch, phi, frame)
        }
        "parabola" => {
            let tau = if a.tau > 0.0 { a.tau } else { 0.05 };
            let surface: SurfaceHandle = Arc::new(fixtures::parabola());
            let cap = find_admissible_cap(surface.as_ref(), &AdmissibleCapParams::default())?;
            let shell = enumerate_shell(2, a.r2)?;
            let frame = frame_in_cap(&shell, &cap.cap)
                .ok_or_else(|| Error::CapNotFound(cap.cap.angle))?;
            let phi = Eigenfunction::random(&shell, a.seed, a.support, false)?;
            let bump = BumpSpec::centered(tau, 2, 0.3);
            let patch = build_patch(surface, &frame.v0, tau, bump, &[24])?;
            (patch, phi, frame)
        }
        "paraboloid" => {
            let tau = if a.tau > 0.0 { a.tau } else { 0.05 };
            let surface: SurfaceHandle = Arc::new(fixtures::paraboloid(3));
            let cap = find_admissible_cap(surface.as_ref(), &AdmissibleCapParams::default())?;
            let shell = enumerate_shell(3, a.r2)?;
            let frame = frame_in_cap(&shell, &cap.cap)
                .ok_or_else(|| Error::CapNotFound(cap.cap.angle))?;
            let phi = Eigenfunction::random(&shell, a.seed, a.support, false)?;
            let bump = BumpSpec::centered(tau, 3, 0.3);
            let patch = build_patch(surface, &frame.v0, tau, bump, &[16, 16])?;
            (patch, phi, frame)
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown fixture '{other}' (cylinder | parabola | paraboloid)"
            ))
            .into())
        }
    };
    let ms = mean_square(&patch, &phi, &frame)?;
    let params = CertificateParams {
        cluster: ClusterParams::with_default_delta2(
            frame.xi0.dim(),
            certificate_rho(a.rho, frame.xi0.dim(), frame.r2())?,
        )?,
        d_threshold: (a.d_threshold > 0.0).then_some(a.d_threshold),
    };
    let cert: Certificate = lower_bound_certificate(&patch, &phi, &frame, &params)?;
    println!(
        "fixture {}: xi0 = {:?}, |E| = {}, |E'| = {}",
        a.fixture,
        frame.xi0.coords,
        phi.support_len(),
        cert.short_support_size
    );
    println!("mean square: {} (refinement error {})", ms.value, ms.refinement_error);
    println!(
        "certificate: constant {} diagonal {} offdiag {} verdict {}",
        cert.constant, cert.diagonal_sum, cert.offdiag_bound, cert.verdict
    );
    println!(
        "soundness margin (mean square - verdict): {}",
        ms.value - cert.verdict
    );
    if let Some(path) = &a.json {
        let doc = serde_json::json!({
            "fixture": a.fixture,
            "xi0": frame.xi0.coords,
            "mean_square": ms.value,
            "refinement_error": ms.refinement_error,
            "certificate": cert,
        });
        write_out(path, &serde_json::to_string_pretty(&doc).map_err(Error::from)?)?;
    }
    Ok(())
}

// -------------------------------------------------------------- oscdecay

#[derive(Debug, Args)]
pub struct OscdecayArgs {
    /// Slab height tau for the curved fixture.
    #[arg(long, default_value_t = 0.15)]
    pub tau: f64,
    /// Use the flat control (constant phase) instead of the parabola.
    #[arg(long, default_value_t = false)]
    pub flat: bool,
    /// Slab height for the flat control.
    #[arg(long, default_value_t = 0.002)]
    pub flat_tau: f64,
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

/// The decay experiment frame on the shell (2, 5525): xi0 = (-73, -14)
/// and cap partners sorted by separation.
pub fn decay_pairs() -> (ShiftFrame, Vec<(LatticePoint, LatticePoint)>) {
    let frame = ShiftFrame::new(LatticePoint::new(vec![-73, -14])).unwrap();
    let partners = [
        [-74, -7],
        [-71, -22],
        [-70, -25],
        [-74, 7],
        [-73, 14],
        [-62, -41],
        [-71, 22],
        [-70, 25],
        [-55, -50],
    ];
    let pairs = partners
        .iter()
        .map(|p| (frame.xi0.clone(), LatticePoint::new(p.to_vec())))
        .collect();
    (frame, pairs)
}

/// Build the curved or flat-control patch for the decay experiment.
pub fn decay_patch(frame: &ShiftFrame, flat: bool, tau: f64) -> Result<ComplexPatch, Error> {
    if flat {
        // The line tangent to v0: f(x) = (w_d / omega) x.
        let slope = frame.v0[1] / frame.v0[0];
        let surface: SurfaceHandle = Arc::new(fixtures::linear_graph(2, 0.3, &[slope]));
        flat_control_patch(surface, &frame.v0, tau, BumpSpec::centered(tau, 2, 0.3), &[24])
    } else {
        let surface: SurfaceHandle = Arc::new(fixtures::parabola());
        build_patch(surface, &frame.v0, tau, BumpSpec::centered(tau, 2, 0.3), &[24])
    }
}

fn cmd_oscdecay(a: OscdecayArgs) -> CliResult {
    let (frame, pairs) = decay_pairs();
    let tau = if a.flat { a.flat_tau } else { a.tau };
    let patch = decay_patch(&frame, a.flat, tau)?;
    let fit = decay_fit(&patch, &frame, &pairs)?;
    println!(
        "{} fixture at tau={}: fitted slope {} over {} pairs",
        if a.flat { "flat" } else { "curved" },
        tau,
        fit.slope,
        fit.rows.len()
    );
    let mut csv = String::from("separation,|J|,refinement_error\n");
    for row in &fit.rows {
        println!(
            "separation {:>8.4}  |J| {:>12.6e}  refinement {:>10.3e}",
            row.separation, row.j_abs, row.refinement_error
        );
        csv.push_str(&format!("{},{},{}\n", row.separation, row.j_abs, row.refinement_error));
    }
    if let Some(path) = &a.csv {
        write_out(path, &csv)?;
    }
    Ok(())
}

// --------------------------------------------------------------- capflow

#[derive(Debug, Args)]
pub struct CapflowArgs {
    #[arg(short = 'd', long = "dim", default_value_t = 2)]
    pub d: usize,
    /// Normal-cap width delta1.
    #[arg(long, default_value_t = 0.8)]
    pub delta1: f64,
    /// Growth increment delta0; 0 picks 0.8 * epsilon/6 automatically.
    #[arg(long, default_value_t = 0.0)]
    pub delta0: f64,
    /// Seed cap angle theta0.
    #[arg(long, default_value_t = 0.6)]
    pub theta0: f64,
    #[arg(long, default_value_t = 10_000)]
    pub probes: usize,
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

fn cmd_capflow(a: CapflowArgs) -> CliResult {
    let mut u0 = vec![0.0; a.d];
    u0[0] = 1.0;
    let mut w0 = vec![0.0; a.d];
    w0[a.d - 1] = 1.0;
    let delta0 = if a.delta0 > 0.0 {
        a.delta0
    } else {
        // Probe the uniform epsilon and stay safely below /6.
        let mut eps_min = f64::INFINITY;
        for w in [&w0, &u0] {
            let est = toral_nodal::restriction::estimate_epsilon(&u0, a.delta1 / 2.0, w)?;
            eps_min = eps_min.min(est.epsilon);
        }
        let basis = vec![0.0; a.d];
        let _ = basis;
        0.8 * eps_min / 6.0
    };
    let omega0 = Cap::new(w0, a.theta0)?;
    let opts = PropagateOptions { coverage_probes: a.probes, ..Default::default() };
    let flow = cap_propagate(&omega0, &u0, a.delta1, delta0, &opts)?;
    println!(
        "cap flow d={} delta1={} delta0={delta0}: {} steps, full sphere: {}",
        a.d,
        a.delta1,
        flow.steps.len(),
        flow.reached_full_sphere
    );
    for (k, step) in flow.steps.iter().enumerate() {
        println!(
            "step {k}: angle {:.6} epsilon {:.6} growth {:.6} uncovered {}",
            step.angle, step.epsilon, step.growth, step.uncovered_probes
        );
    }
    if let Some(path) = &a.json {
        write_out(path, &serde_json::to_string_pretty(&flow).map_err(Error::from)?)?;
    }
    Ok(())
}

// -------------------------------------------------------------- legendre

#[derive(Debug, Args)]
pub struct LegendreArgs {
    /// Tabulate gcd(P_m, P_n) for all 1 <= m < n <= pairs.
    #[arg(long, default_value_t = 0)]
    pub pairs: usize,
    /// List the zonal nodal parallels of degree n.
    #[arg(long, default_value_t = 0)]
    pub parallels: usize,
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

fn cmd_legendre(a: LegendreArgs) -> CliResult {
    let mut csv = String::new();
    if a.pairs >= 2 {
        csv.push_str("m,n,gcd\n");
        let mut trivial = 0usize;
        let mut shared_zero = 0usize;
        let x = classical::RationalPoly::x();
        let one = classical::RationalPoly::one();
        for m in 1..=a.pairs {
            for n in (m + 1)..=a.pairs {
                let g = classical::common_roots(m, n)?;
                let label = if g == one {
                    trivial += 1;
                    "1"
                } else if g == x {
                    shared_zero += 1;
                    "x"
                } else {
                    "OTHER"
                };
                csv.push_str(&format!("{m},{n},{label}\n"));
                if label == "OTHER" {
                    println!("unexpected gcd at ({m}, {n}): degree {}", g.degree());
                }
            }
        }
        println!(
            "gcd table for 1 <= m < n <= {}: {} coprime pairs, {} share only x = 0",
            a.pairs, trivial, shared_zero
        );
    }
    if a.parallels >= 1 {
        let thetas = classical::zonal_parallels(a.parallels)?;
        println!("zonal parallels for n = {}:", a.parallels);
        if !csv.is_empty() {
            csv.push('\n');
        }
        csv.push_str("n,j,theta\n");
        for (j, th) in thetas.iter().enumerate() {
            println!("theta_{{{}, {}}} = {th}", a.parallels, j + 1);
            csv.push_str(&format!("{},{},{th}\n", a.parallels, j + 1));
        }
    }
    if a.pairs < 2 && a.parallels < 1 {
        return Err(Error::InvalidArgument("pass --pairs N and/or --parallels N".into()).into());
    }
    if let Some(path) = &a.csv {
        write_out(path, &csv)?;
    }
    Ok(())
}

// --------------------------------------------------------------- laurent

#[derive(Debug, Args)]
pub struct LaurentArgs {
    #[command(flatten)]
    pub phi: PhiSource,
    /// Curve genus for the abc bound (user-supplied).
    #[arg(long, default_value_t = 0)]
    pub genus: i64,
    /// Number of places #S (user-supplied).
    #[arg(long, default_value_t = 3)]
    pub s: i64,
    /// Height-comparison constant c_S (user-supplied).
    #[arg(long, default_value_t = 1.0)]
    pub c_s: f64,
    /// Distinguished frequency "p,q"; defaults to the lexicographically
    /// largest frequency of the support.
    #[arg(long, value_name = "P,Q")]
    pub xi0: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

fn cmd_laurent(a: LaurentArgs) -> CliResult {
    let phi = a.phi.resolve(2)?;
    let laurent = classical::to_laurent(&phi)?;
    let consistency = laurent.consistency_error(&phi, 100, 7);
    let xi0 = match &a.xi0 {
        Some(t) => {
            let coords: Result<Vec<i64>, _> =
                t.split(',').map(|s| s.trim().parse::<i64>()).collect();
            LatticePoint::new(coords.map_err(|e| Error::InvalidArgument(format!("{e}")))?)
        }
        None => phi.coeffs().last().map(|(xi, _)| xi.clone()).unwrap(),
    };
    let frame = ShiftFrame::new(xi0)?;
    let report = classical::frequency_box_check(&phi, &frame, a.genus, a.s, a.c_s)?;
    println!(
        "Laurent form: shifts ({}, {}), {} terms, evaluation consistency {consistency:.3e}",
        laurent.shifts.0,
        laurent.shifts.1,
        laurent.terms.len()
    );
    match (&report.bound, &report.pass, &report.note) {
        (Some(bound), Some(pass), _) => println!(
            "frequency box: r={} observed {} vs bound {} -> {}",
            report.r,
            report.observed,
            bound,
            if *pass { "PASS" } else { "FAIL" }
        ),
        (_, _, Some(note)) => println!("frequency box: r={} -- {note}", report.r),
        _ => {}
    }
    if let Some(path) = &a.json {
        let doc = serde_json::json!({
            "laurent": laurent.to_document(),
            "consistency_error": consistency,
            "box_check": report,
        });
        write_out(path, &serde_json::to_string_pretty(&doc).map_err(Error::from)?)?;
    }
    Ok(())
}
