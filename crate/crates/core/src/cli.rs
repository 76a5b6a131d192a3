//! Command-line front end: `rough-domain <smooth|verify|degree|torus|probe|flow>`.
//!
//! Every command writes its artifacts plus a `report.json` into `--out` and
//! exits 0 when every check passes, 1 on an audit failure and 2 on a usage
//! error.

use crate::approximation::{
    extract_level_domain, roundtrip_audit, Deformation, DeformationMap, LevelDomain, LevelOptions, MapKind,
};
use crate::distance::{Mollifier, RegularizedDistance, RhoGrid, RhoOptions};
use crate::domain::DomainSpec;
use crate::export::Svg;
use crate::flow::Flow;
use crate::geometry::{p2, Aabb, Point};
use crate::mesh::TriMesh;
use crate::regularity::{lipschitz_probe, partial_regularity_scan, unique_direction_detector, ScanOptions};
use crate::topology::{
    band_cover_audit, degree, euler_characteristic_of, planar_euler_characteristic, surjectivity_audit,
    torus_band_audit, torus_inward_normal, torus_pseudonormal, FieldLabel, SphereField,
};
use crate::{C0Domain, Error, FixtureId};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_AUDIT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "rough-domain", version, about = "Smoothing and certificates for rough bounded domains")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Built-in fixture name (UnitDisk, UnitSquare, Annulus, Ball3D, SolidTorus, ...).
    #[arg(long, global = true)]
    fixture: Option<String>,
    /// Domain-spec JSON file.
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// JSON run configuration; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Level values, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    eps: Vec<f64>,
    /// Nodes per axis of the level-set lattice (torus: θ, φ grid).
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Fixed-point tolerance for ρ.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Integrator absolute tolerance.
    #[arg(long, global = true)]
    ode_tol: Option<f64>,
    /// Root refinement tolerance in time.
    #[arg(long, global = true)]
    root_tol: Option<f64>,
    /// Angular resolution in degrees.
    #[arg(long, global = true)]
    angular_res: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Level-set approximations ∂Ω_ε, a ρ grid and a summary.
    Smooth,
    /// Full invariant suite.
    Verify {
        /// Samples for the flow and round-trip audits.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Degree of a unit field on a closed curve or surface.
    Degree {
        #[arg(long, value_enum)]
        mesh: Option<MeshKind>,
        #[arg(long, value_enum)]
        field: Option<FieldKind>,
    },
    /// Torus pseudonormal family ñ^γ.
    Torus {
        #[arg(long, value_delimiter = ',')]
        gamma: Vec<f64>,
        /// Half-width of the equatorial band E_δ.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Lipschitz certificates: one point, or a scan of every component.
    Probe {
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        point: Vec<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Probe every n-th boundary sample of each component.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Trajectories of the cut-off field and the monotonicity audit.
    Flow {
        #[arg(long)]
        seed_points: Option<usize>,
        /// Integration time (default ε̄).
        #[arg(long)]
        time: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshKind {
    Sphere,
    Torus,
    Level,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Normal,
    Antipodal,
    Canonical,
}

/// Every flag has an entry here; a config file fills what the flags leave
/// unset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub fixture: Option<String>,
    pub spec: Option<PathBuf>,
    pub eps: Vec<f64>,
    pub grid: Option<usize>,
    pub tol: Option<f64>,
    pub ode_tol: Option<f64>,
    pub root_tol: Option<f64>,
    /// Degrees.
    pub angular_res: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub samples: Option<usize>,
    pub mesh: Option<MeshKind>,
    pub field: Option<FieldKind>,
    pub gamma: Vec<f64>,
    pub delta: Option<f64>,
    pub point: Vec<f64>,
    pub stride: Option<usize>,
    pub seed_points: Option<usize>,
    pub time: Option<f64>,
}

impl RunConfig {
    /// Entries of `flags` replace those of `self`.
    pub fn overridden_by(mut self, flags: RunConfig) -> RunConfig {
        macro_rules! take {
            ($($f:ident),*) => { $( if flags.$f.is_some() { self.$f = flags.$f; } )* };
        }
        macro_rules! take_vec {
            ($($f:ident),*) => { $( if !flags.$f.is_empty() { self.$f = flags.$f; } )* };
        }
        take!(fixture, spec, grid, tol, ode_tol, root_tol, angular_res, out, seed, threads, samples, mesh, field);
        take!(delta, stride, seed_points, time);
        take_vec!(eps, gamma, point);
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("tol", self.tol), ("ode-tol", self.ode_tol), ("root-tol", self.root_tol)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(format!("--{name} must be positive, got {v}"));
                }
            }
        }
        if let Some(a) = self.angular_res {
            if !(a > 0.0 && a <= 90.0) {
                return Err(format!("--angular-res must lie in (0, 90] degrees, got {a}"));
            }
        }
        if let Some(d) = self.delta {
            if !(d.is_finite() && d > 0.0) {
                return Err(format!("--delta must be positive, got {d}"));
            }
        }
        if let Some(g) = self.grid {
            if g < 8 {
                return Err(format!("--grid must be at least 8, got {g}"));
            }
        }
        if self.eps.iter().chain(&self.gamma).chain(&self.point).any(|v| !v.is_finite()) {
            return Err("non-finite numeric argument".into());
        }
        if self.fixture.is_some() && self.spec.is_some() {
            return Err("give either --fixture or --spec, not both".into());
        }
        if let Some(f) = &self.fixture {
            if FixtureId::from_name(f).is_none() {
                return Err(format!("unknown fixture {f:?}; known: {}", FixtureId::NAMES.join(", ")));
            }
        }
        Ok(())
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(7)
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    fn angular_res_rad(&self, default_deg: f64) -> f64 {
        self.angular_res.unwrap_or(default_deg).to_radians()
    }
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(m) => Failure::Usage(m),
            Error::NotC0(m) => Failure::Usage(m),
            e => Failure::Run(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.into())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: Value,
}

/// Summary written as `report.json`.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub domain: Option<String>,
    pub dim: Option<usize>,
    pub eps_bar: Option<f64>,
    pub eps0: Option<f64>,
    /// Some requested ε lies outside (−ε₀, ε₀).
    pub exploratory: bool,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl RunReport {
    fn new(command: &str) -> Self {
        RunReport {
            command: command.into(),
            domain: None,
            dim: None,
            eps_bar: None,
            eps0: None,
            exploratory: false,
            checks: Vec::new(),
            pass: true,
        }
    }

    fn check(&mut self, name: impl Into<String>, pass: bool, detail: Value) {
        self.pass &= pass;
        self.checks.push(Check { name: name.into(), pass, detail });
    }

    fn error(&mut self, name: impl Into<String>, e: &Error) {
        self.check(name, false, json!({ "error": e.to_string() }));
    }

    fn describe(&mut self, domain: &C0Domain, label: &str) {
        self.domain = Some(label.into());
        self.dim = Some(domain.dim);
    }

    fn describe_flow(&mut self, flow: &Flow) {
        self.eps_bar = Some(flow.eps_bar());
        self.eps0 = Some(flow.eps0());
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match execute(cli) {
        Ok(report) => {
            for c in &report.checks {
                println!("{} {}", if c.pass { "pass" } else { "FAIL" }, c.name);
            }
            if report.pass {
                EXIT_PASS
            } else {
                EXIT_AUDIT
            }
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            EXIT_AUDIT
        }
    }
}

fn execute(cli: Cli) -> Result<RunReport, Failure> {
    let c = cli.common;
    let mut flags = RunConfig {
        fixture: c.fixture,
        spec: c.spec,
        eps: c.eps,
        grid: c.grid,
        tol: c.tol,
        ode_tol: c.ode_tol,
        root_tol: c.root_tol,
        angular_res: c.angular_res,
        out: c.out,
        seed: c.seed,
        threads: c.threads,
        ..Default::default()
    };
    let name = match &cli.command {
        Command::Smooth => "smooth",
        Command::Verify { samples } => {
            flags.samples = *samples;
            "verify"
        }
        Command::Degree { mesh, field } => {
            flags.mesh = *mesh;
            flags.field = *field;
            "degree"
        }
        Command::Torus { gamma, delta } => {
            flags.gamma = gamma.clone();
            flags.delta = *delta;
            "torus"
        }
        Command::Probe { point, delta, stride } => {
            flags.point = point.clone();
            flags.delta = *delta;
            flags.stride = *stride;
            "probe"
        }
        Command::Flow { seed_points, time } => {
            flags.seed_points = *seed_points;
            flags.time = *time;
            "flow"
        }
    };
    let base = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<RunConfig>(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    let cfg = base.overridden_by(flags);
    cfg.validate().map_err(Failure::Usage)?;
    if let Some(n) = cfg.threads {
        // A pool may already exist when run is called more than once in a
        // process; keep it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out)?;
    let report = match name {
        "smooth" => cmd_smooth(&cfg, &out)?,
        "verify" => cmd_verify(&cfg, &out)?,
        "degree" => cmd_degree(&cfg, &out)?,
        "torus" => cmd_torus(&cfg, &out)?,
        "probe" => cmd_probe(&cfg, &out)?,
        _ => cmd_flow(&cfg, &out)?,
    };
    write(&out, "report.json", &(serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n"))?;
    Ok(report)
}

fn write(dir: &Path, name: &str, content: &str) -> Result<(), Failure> {
    std::fs::write(dir.join(name), content)?;
    Ok(())
}

fn has_domain(cfg: &RunConfig) -> bool {
    cfg.fixture.is_some() || cfg.spec.is_some()
}

fn load_domain(cfg: &RunConfig) -> Result<(Arc<C0Domain>, String), Failure> {
    if let Some(name) = &cfg.fixture {
        let f = FixtureId::from_name(name).ok_or_else(|| Failure::Usage(format!("unknown fixture {name:?}")))?;
        return Ok((Arc::new(C0Domain::fixture(f)?), name.clone()));
    }
    if let Some(p) = &cfg.spec {
        let spec = DomainSpec::read(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
        return Ok((Arc::new(C0Domain::from_spec(&spec)?), p.display().to_string()));
    }
    Err(Failure::Usage("a domain is required: pass --fixture or --spec".into()))
}

fn build_flow(domain: Arc<C0Domain>, cfg: &RunConfig) -> crate::Result<Flow> {
    let mut flow = Flow::for_domain(domain.clone())?;
    if let Some(tol) = cfg.tol {
        let opts = RhoOptions { tol, ..Default::default() };
        flow.rho = Arc::new(RegularizedDistance::with_options(domain.clone(), Mollifier::default_for(domain.dim), opts));
        flow.opts.rho_tol = tol;
    }
    if let Some(t) = cfg.ode_tol {
        flow.opts.ode.atol = t;
    }
    if let Some(t) = cfg.root_tol {
        flow.opts.root.tol = t;
    }
    Ok(flow)
}

fn level_options(dim: usize, cfg: &RunConfig, default_grid: usize) -> LevelOptions {
    let mut o = LevelOptions::for_dim(dim);
    o.grid = cfg.grid.unwrap_or(default_grid);
    o
}

fn expected_chi(domain: &C0Domain) -> Option<i64> {
    domain.fixture.as_ref().map(|f| f.euler_characteristic())
}

fn coords(p: &Point, dim: usize) -> Vec<f64> {
    (0..dim).map(|k| p[k]).collect()
}

fn csv_row(p: &Point, dim: usize) -> String {
    coords(p, dim).iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn level_loops(level: &LevelDomain) -> Vec<Vec<Point>> {
    level.loops().iter().map(|l| l.iter().map(|&v| level.vertices[v as usize]).collect()).collect()
}

/// Topology of a level mesh against the domain: χ of the surface in 3D
/// (twice χ(Ω)), nested-loop χ in 2D.
fn level_topology(level: &LevelDomain, domain: &C0Domain) -> crate::Result<(i64, Option<i64>)> {
    let (chi, expected) = if level.dim == 3 {
        (euler_characteristic_of(3, level.vertices.len(), &level.cells)?, expected_chi(domain).map(|c| 2 * c))
    } else {
        (planar_euler_characteristic(&level_loops(level)), expected_chi(domain))
    };
    Ok((chi, expected))
}

fn boundary_svg(domain: &C0Domain, bbox: Aabb) -> Svg {
    let mut svg = Svg::new(bbox, 640.0);
    let m = domain.mesh();
    for e in &m.elements {
        svg.polyline(&[m.vertices[e[0] as usize], m.vertices[e[1] as usize]], false, "black", 1.5);
    }
    svg
}

fn cmd_smooth(cfg: &RunConfig, out: &Path) -> Result<RunReport, Failure> {
    let (domain, label) = load_domain(cfg)?;
    let mut report = RunReport::new("smooth");
    report.describe(&domain, &label);
    let flow = build_flow(domain.clone(), cfg)?;
    report.describe_flow(&flow);
    let eps0 = flow.eps0();
    let eps = if cfg.eps.is_empty() { vec![0.5 * eps0] } else { cfg.eps.clone() };
    report.exploratory = eps.iter().any(|e| e.abs() >= eps0);
    let dim = domain.dim;
    let opts = level_options(dim, cfg, if dim == 2 { 256 } else { 48 });

    let mut levels: Vec<LevelDomain> = Vec::new();
    for (k, &e) in eps.iter().enumerate() {
        if e == 0.0 {
            // Ω₀ = Ω: the deformation is the identity.
            let cloud = domain.boundary_cloud();
            let dfm = Deformation::new(Arc::new(flow.clone()));
            let step = (cloud.len() / 32).max(1);
            let moved = cloud
                .iter()
                .step_by(step)
                .map(|p| dfm.global_map(0.0, p).map(|q| (q - p).norm()))
                .collect::<crate::Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            report.check(format!("identity[{k}]"), moved == 0.0, json!({ "eps": 0.0, "max_displacement": moved }));
            continue;
        }
        match extract_level_domain(&flow.rho, e, &opts) {
            Ok(level) => {
                let ext = if dim == 2 { "csv" } else { "off" };
                write(out, &format!("level_{k}.{ext}"), &level.export())?;
                let (chi, expected) = level_topology(&level, &domain)?;
                let pass = level.is_closed() && expected.is_none_or(|x| x == chi);
                report.check(
                    format!("level[{k}]"),
                    pass,
                    json!({
                        "eps": e,
                        "closed": level.is_closed(),
                        "components": level.components(),
                        "euler_characteristic": chi,
                        "expected_euler_characteristic": expected,
                        "vertices": level.vertices.len(),
                        "cells": level.cells.len(),
                        "max_residual": level.max_residual,
                        "min_slope": level.min_slope,
                        "grid": level.grid,
                    }),
                );
                levels.push(level);
            }
            Err(err) => report.error(format!("level[{k}]"), &err),
        }
    }

    if levels.len() > 1 {
        // Each level set must lie strictly inside the sets of every smaller level.
        let mut sorted: Vec<&LevelDomain> = levels.iter().collect();
        sorted.sort_by(|a, b| a.level.total_cmp(&b.level));
        let mut violations = 0;
        for w in sorted.windows(2) {
            violations += w[1].nesting_violations(&flow.rho, w[0].level)?;
        }
        report.check("nesting", violations == 0, json!({ "violations": violations }));
    }

    let reach = eps.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let bbox = domain.bounding_box().inflate(2.5 * reach + 0.05);
    let n = if dim == 2 { opts.grid.min(128) } else { 16 };
    let grid: RhoGrid = flow.rho.grid(&bbox, n)?;
    write(out, "rho_grid.csv", &grid.to_csv())?;

    if dim == 2 {
        let mut svg = boundary_svg(&domain, bbox);
        for level in &levels {
            let colour = if level.level > 0.0 { "#1f77b4" } else { "#d62728" };
            for l in level_loops(level) {
                svg.polyline(&l, true, colour, 1.0);
            }
        }
        write(out, "levels.svg", &svg.finish())?;
    }
    Ok(report)
}

fn cmd_verify(cfg: &RunConfig, out: &Path) -> Result<RunReport, Failure> {
    let (domain, label) = load_domain(cfg)?;
    let mut report = RunReport::new("verify");
    report.describe(&domain, &label);
    let dim = domain.dim;

    let gap = domain.cover_gap();
    report.check("cover", gap.is_none(), json!({ "patches": domain.atlas.len(), "uncovered_point": gap }));

    let flow = match build_flow(domain.clone(), cfg) {
        Ok(f) => f,
        Err(e) => {
            report.error("flow_setup", &e);
            return Ok(report);
        }
    };
    report.describe_flow(&flow);
    let eps0 = flow.eps0();
    let eps = cfg.eps.first().copied().unwrap_or(0.5 * eps0);
    report.exploratory = eps.abs() >= eps0;

    let n = if dim == 2 { 48 } else { 12 };
    let pts = RhoGrid::layout(dim, &domain.bounding_box().inflate(0.25), n).points();
    match flow.rho.equivalence_audit(&pts, 0.02) {
        Ok(r) => {
            report.check(
                "sandwich",
                r.pass,
                json!({ "points": r.points, "min_ratio": r.min_ratio, "max_ratio": r.max_ratio, "sign_violations": r.sign_violations }),
            );
            report.check(
                "contraction",
                r.max_contraction <= 0.6,
                json!({ "max_contraction": r.max_contraction, "max_iterations": r.max_iterations }),
            );
        }
        Err(e) => report.error("sandwich", &e),
    }

    let samples = cfg.samples.unwrap_or(if dim == 2 { 64 } else { 16 });
    let mono = flow
        .collar_sample(samples, cfg.seed())
        .and_then(|starts| flow.monotonicity_audit(&starts, flow.eps_bar(), 1e-10));
    match mono {
        Ok(r) => report.check("flow_monotonicity", r.pass, serde_json::to_value(&r).map_err(Error::from)?),
        Err(e) => report.error("flow_monotonicity", &e),
    }

    let flow = Arc::new(flow);
    let threshold = if dim == 2 { 1e-5 } else { 1e-4 };
    let map = DeformationMap::new(Deformation::new(flow.clone()), MapKind::Global, eps, 0.0);
    match roundtrip_audit(&map, samples, cfg.seed(), threshold) {
        Ok(r) => report.check("round_trip", r.pass, serde_json::to_value(&r).map_err(Error::from)?),
        Err(e) => report.error("round_trip", &e),
    }

    let opts = level_options(dim, cfg, if dim == 2 { 128 } else { 32 });
    let level = extract_level_domain(&flow.rho, eps, &opts);
    match level {
        Ok(level) => {
            let topo = level_topology(&level, &domain);
            let deg = SphereField::level_normals(&level).and_then(|f| degree(&f));
            match (topo, deg) {
                (Ok((chi, expected)), Ok(d)) => {
                    // Gauss map degree equals χ(Ω) = χ(∂Ω)/2 in 3D and χ(Ω) in 2D.
                    let from_chi = if dim == 3 { chi / 2 } else { chi };
                    let pass = level.is_closed() && d.degree == from_chi && expected.is_none_or(|x| x == chi);
                    report.check(
                        "degree_euler",
                        pass,
                        json!({
                            "eps": eps,
                            "closed": level.is_closed(),
                            "euler_characteristic": chi,
                            "expected_euler_characteristic": expected,
                            "degree": d.degree,
                            "degree_residual": d.residual,
                        }),
                    );
                }
                (Err(e), _) | (_, Err(e)) => report.error("degree_euler", &e),
            }
        }
        Err(e) => report.error("degree_euler", &e),
    }

    let res = cfg.angular_res_rad(5.0);
    match SphereField::canonical(&domain, &flow.field) {
        Ok(f) => {
            let s = surjectivity_audit(&f, res);
            let detail = json!({
                "degree": s.degree,
                "cover_route": s.cover_route,
                "uncovered": s.uncovered,
                "grid_directions": s.grid_directions,
                "angular_res": s.angular_res,
            });
            report.check("surjectivity", !s.disagreement, detail);
        }
        Err(e) => report.error("surjectivity", &e),
    }
    let _ = out;
    Ok(report)
}

fn cmd_degree(cfg: &RunConfig, out: &Path) -> Result<RunReport, Failure> {
    let mut report = RunReport::new("degree");
    let mesh = cfg.mesh.unwrap_or(if has_domain(cfg) { MeshKind::Level } else { MeshKind::Sphere });
    let kind = cfg.field.unwrap_or(FieldKind::Normal);
    let field = match (mesh, kind) {
        (MeshKind::Level, _) | (_, FieldKind::Canonical) => {
            let (domain, label) = load_domain(cfg)?;
            report.describe(&domain, &label);
            let flow = build_flow(domain.clone(), cfg)?;
            report.describe_flow(&flow);
            let eps = cfg.eps.first().copied().unwrap_or(0.5 * flow.eps0());
            report.exploratory = eps.abs() >= flow.eps0();
            if kind == FieldKind::Canonical {
                if mesh == MeshKind::Level {
                    let opts = level_options(domain.dim, cfg, if domain.dim == 2 { 128 } else { 32 });
                    let level = extract_level_domain(&flow.rho, eps, &opts)?;
                    let g = flow.field.clone();
                    SphereField::on_level(&level, move |x| g.eval(x)?.ok_or(Error::CollarTooThin { distance: 0.0, required: 0.0 }), FieldLabel::Canonical)?
                } else {
                    SphereField::canonical(&domain, &flow.field)?
                }
            } else {
                let opts = level_options(domain.dim, cfg, if domain.dim == 2 { 128 } else { 32 });
                let level = extract_level_domain(&flow.rho, eps, &opts)?;
                SphereField::level_normals(&level)?
            }
        }
        (MeshKind::Sphere, _) => SphereField::mesh_normals(&TriMesh::icosphere(4))?,
        (MeshKind::Torus, _) => SphereField::mesh_normals(&TriMesh::torus(2.0, 1.0, 96, 48))?,
    };
    let field = if kind == FieldKind::Antipodal {
        let values = field.values.iter().map(|v| -v).collect();
        SphereField::new(field.dim, field.positions.clone(), field.cells.clone(), values, FieldLabel::Custom("antipodal".into()))?
    } else {
        field
    };
    write(out, "field.csv", &field.to_csv())?;
    match degree(&field) {
        Ok(d) => report.check(
            "degree",
            true,
            json!({ "mesh": mesh, "field": kind, "degree": d.degree, "raw": d.raw, "residual": d.residual, "cells": d.cells, "max_jump": d.max_jump }),
        ),
        Err(e) => report.error("degree", &e),
    }
    Ok(report)
}

fn cmd_torus(cfg: &RunConfig, out: &Path) -> Result<RunReport, Failure> {
    let mut report = RunReport::new("torus");
    let mut gammas = if cfg.gamma.is_empty() { vec![0.5, 1.0, 1.4] } else { cfg.gamma.clone() };
    gammas.sort_by(f64::total_cmp);
    let grid = cfg.grid.unwrap_or(512);
    let res = cfg.angular_res_rad(2.0);
    let delta = cfg.delta.unwrap_or(0.5);
    let mut bands = Vec::new();
    for (k, &g) in gammas.iter().enumerate() {
        let field = torus_pseudonormal(g)?;
        let band = torus_band_audit(&field, grid);
        write(out, &format!("torus_field_{k}.csv"), &field.to_csv(64))?;
        let cover = band_cover_audit(|t, p| field.eval(t, p), grid.min(256), delta, res);
        bands.push(band.max_e3);
        report.check(
            format!("pseudonormal[gamma={g}]"),
            band.valid,
            json!({
                "min_alignment": band.min_alignment,
                "max_e3": band.max_e3,
                "band_bound": band.band_bound,
                "max_defect": band.max_defect,
                "grid": band.grid,
                "image_covers_band": cover.covered,
                "largest_covered_band": cover.largest_covered_band,
            }),
        );
    }
    if bands.len() > 1 {
        let decreasing = bands.windows(2).all(|w| w[1] < w[0]);
        report.check("band_monotone", decreasing, json!({ "gamma": gammas, "max_e3": bands }));
    }
    let normal = band_cover_audit(|t, p| -torus_inward_normal(t, p), grid.min(256), delta, res);
    report.check("normal_covers_band", normal.covered, serde_json::to_value(&normal).map_err(Error::from)?);
    Ok(report)
}

fn cmd_probe(cfg: &RunConfig, out: &Path) -> Result<RunReport, Failure> {
    let (domain, label) = load_domain(cfg)?;
    let mut report = RunReport::new("probe");
    report.describe(&domain, &label);
    let dim = domain.dim;
    let mut scan_opts = ScanOptions::for_dim(dim);
    if let Some(a) = cfg.angular_res {
        scan_opts.angular_res = a.to_radians();
    }
    if let Some(s) = cfg.stride {
        scan_opts.stride = s.max(1);
    }
    if let Some(d) = cfg.delta {
        scan_opts.deltas = vec![d, 0.5 * d, 0.25 * d];
    }
    let res = scan_opts.angular_res;

    if !cfg.point.is_empty() {
        if cfg.point.len() != dim {
            return Err(Failure::Usage(format!("--point needs {dim} coordinates")));
        }
        let mut p = Point::zeros();
        for (k, v) in cfg.point.iter().enumerate() {
            p[k] = *v;
        }
        let delta = match cfg.delta {
            Some(d) => d,
            None => {
                let r = domain.atlas.iter().map(|q| q.delta).fold(f64::INFINITY, f64::min);
                if !r.is_finite() {
                    return Err(Failure::Usage("the domain has no atlas; pass --delta".into()));
                }
                0.5 * r
            }
        };
        let outcome = lipschitz_probe(&domain, &p, delta, res)?;
        let unique = unique_direction_detector(&domain, &p, delta, res)?;
        let detail = json!({ "outcome": outcome, "unique_direction": unique });
        write(out, "probe.json", &(serde_json::to_string_pretty(&detail).map_err(Error::from)? + "\n"))?;
        report.check("probe", true, json!({ "certified": outcome.certificate().is_some(), "unique_direction": unique }));
        return Ok(report);
    }

    let scan = partial_regularity_scan(&domain, &scan_opts)?;
    write(out, "certificates.jsonl", &scan.to_jsonl(dim))?;
    let mut csv = String::from(if dim == 2 { "component,index,x,y" } else { "component,index,x,y,z" });
    csv.push_str(",outcome,delta,L,margin,unique_direction,rank\n");
    for comp in &scan.components {
        for p in &comp.points {
            let (outcome, delta, l, margin) = match &p.certificate {
                Some(c) => ("Certificate", c.delta.to_string(), c.lipschitz.to_string(), c.margin.to_string()),
                None => ("NoCertificate", String::new(), String::new(), String::new()),
            };
            let _ = writeln!(
                csv,
                "{},{},{},{outcome},{delta},{l},{margin},{},{}",
                comp.label,
                p.index,
                csv_row(&p.point, dim),
                p.unique_direction,
                p.rank
            );
        }
        let certified = comp.certificates().count();
        report.check(
            format!("component[{}]", comp.label),
            comp.diagnostic.is_none(),
            json!({
                "outer": comp.outer,
                "points": comp.points.len(),
                "certificates": certified,
                "unique_direction": comp.points.iter().filter(|p| p.unique_direction).count(),
                "diagnostic": comp.diagnostic,
            }),
        );
    }
    write(out, "points.csv", &csv)?;
    Ok(report)
}

fn cmd_flow(cfg: &RunConfig, out: &Path) -> Result<RunReport, Failure> {
    let (domain, label) = load_domain(cfg)?;
    let mut report = RunReport::new("flow");
    report.describe(&domain, &label);
    let dim = domain.dim;
    let flow = build_flow(domain.clone(), cfg)?;
    report.describe_flow(&flow);
    let count = cfg.seed_points.unwrap_or(if dim == 2 { 200 } else { 40 });
    let t = cfg.time.unwrap_or(flow.eps_bar());
    if !(t.is_finite() && t > 0.0) {
        return Err(Failure::Usage(format!("--time must be positive, got {t}")));
    }
    let starts = flow.collar_sample(count, cfg.seed())?;
    let trajectories = starts
        .par_iter()
        .map(|x| flow.integrate(x, t, flow.opts.ode.atol))
        .collect::<crate::Result<Vec<_>>>()?;
    let mut csv = String::from(if dim == 2 { "trajectory,t,x,y,rho\n" } else { "trajectory,t,x,y,z,rho\n" });
    for (k, tr) in trajectories.iter().enumerate() {
        for ((time, p), r) in tr.times.iter().zip(&tr.points).zip(&tr.rho) {
            let _ = writeln!(csv, "{k},{time},{},{r}", csv_row(p, dim));
        }
    }
    write(out, "trajectories.csv", &csv)?;
    let mono = flow.monotonicity_audit(&starts, t, 1e-10)?;
    write(out, "monotonicity.json", &(serde_json::to_string_pretty(&mono).map_err(Error::from)? + "\n"))?;
    report.check("flow_monotonicity", mono.pass, serde_json::to_value(&mono).map_err(Error::from)?);

    if dim == 2 {
        let bbox = domain.bounding_box().inflate(0.1);
        let mut svg = boundary_svg(&domain, bbox);
        for tr in &trajectories {
            svg.polyline(&tr.points, false, "#1f77b4", 0.8);
            svg.dot(&tr.x0, 1.5, "#1f77b4");
        }
        let m = 24;
        let e = bbox.extent();
        let arrow = 0.4 * e.x.max(e.y) / m as f64;
        let nodes: Vec<Point> = (0..m * m)
            .map(|k| bbox.min + p2(e.x * ((k % m) as f64 + 0.5) / m as f64, e.y * ((k / m) as f64 + 0.5) / m as f64))
            .collect();
        let vel: Vec<Option<Point>> = nodes.par_iter().map(|x| flow.velocity(x).ok()).collect();
        let vmax = vel.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
        if vmax > 0.0 {
            for (x, v) in nodes.iter().zip(&vel) {
                if let Some(v) = v {
                    if v.norm() > 1e-3 * vmax {
                        svg.arrow(x, &(v * (arrow / vmax)), "#555555");
                    }
                }
            }
        }
        write(out, "flow.svg", &svg.finish())?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let base = RunConfig { grid: Some(64), eps: vec![0.01], seed: Some(3), ..Default::default() };
        let flags = RunConfig { grid: Some(32), ..Default::default() };
        let c = base.overridden_by(flags);
        assert_eq!(c.grid, Some(32));
        assert_eq!(c.eps, vec![0.01]);
        assert_eq!(c.seed, Some(3));
    }

    #[test]
    fn validation_rejects_bad_values() {
        assert!(RunConfig { tol: Some(-1.0), ..Default::default() }.validate().is_err());
        assert!(RunConfig { fixture: Some("Nope".into()), ..Default::default() }.validate().is_err());
        assert!(RunConfig { angular_res: Some(0.0), ..Default::default() }.validate().is_err());
        assert!(RunConfig { fixture: Some("UnitDisk".into()), ..Default::default() }.validate().is_ok());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"grdi": 3}"#).is_err());
        let c: RunConfig = serde_json::from_str(r#"{"fixture": "UnitDisk", "eps": [0.01, -0.01]}"#).unwrap();
        assert_eq!(c.eps.len(), 2);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["rough-domain", "smooth", "--fixture", "Nope"]), EXIT_USAGE);
        assert_eq!(run(["rough-domain", "bogus"]), EXIT_USAGE);
        assert_eq!(run(["rough-domain", "smooth"]), EXIT_USAGE);
    }
}
