//! Command-line driver: config parsing, the six verbs and their artifacts.

use std::fmt::Write as _;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::coefficients::{coefficients, CoefficientRecord};
use crate::curveflow::{circle_ode, evolve, write_markers_csv, ClosedCurve, EvolveOptions, FlowEvent, FlowLaw};
use crate::interface::{write_contours_csv, Event, Sample};
use crate::line1d::LineGrid;
use crate::params::{scale_params, unscale_params, ParamError, PhysicalParams, ScaledParams};
use crate::pnls2d::{
    initial_radius, perturbed_circle_ic, simulate, write_png, write_raw, PeriodicGrid2D, RunEvent, RunRecord,
    SolverConfig,
};
use crate::spectra::{lambda_ess, point_spectrum, rho_star, SpectrumReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Coeffs,
    Spectrum,
    Pde,
    Curve,
    Xval,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Coeffs => "coeffs",
            Mode::Spectrum => "spectrum",
            Mode::Pde => "pde",
            Mode::Curve => "curve",
            Mode::Xval => "xval",
        }
    }
}

// ---------------------------------------------------------------- config file

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<Mode>,
    #[serde(default)]
    params: RawParams,
    #[serde(default)]
    line: LineSettings,
    #[serde(default)]
    grid: GridSettings,
    #[serde(default)]
    solver: SolverSettings,
    #[serde(default)]
    curve: CurveSettings,
    #[serde(default)]
    coeffs: CoeffSettings,
    #[serde(default)]
    spectrum: PointList,
    #[serde(default)]
    xval: XvalSettings,
    #[serde(default)]
    sweep: SweepSettings,
    #[serde(default)]
    output: OutputSettings,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    a: Option<f64>,
    gamma: Option<f64>,
    beta: Option<f64>,
    mu: Option<f64>,
    eps: Option<f64>,
    #[serde(rename = "box")]
    box_len: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LineSettings {
    /// half-width `Z` of the line `[−Z, Z]`
    pub z: f64,
    pub n: usize,
}

impl Default for LineSettings {
    fn default() -> Self {
        Self { z: 20.0, n: 2048 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSettings {
    pub n: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self { n: 256 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: f64,
    pub dealias: bool,
    /// end the run at the first self-intersection or collapse
    pub stop_on_event: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let c = SolverConfig::default();
        Self { dt: c.dt, t_end: c.t_end, snapshot_every: c.snapshot_every, dealias: c.dealias, stop_on_event: false }
    }
}

impl SolverSettings {
    pub fn solver(&self) -> SolverConfig {
        SolverConfig { dt: self.dt, t_end: self.t_end, snapshot_every: self.snapshot_every, dealias: self.dealias }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveInit {
    /// the perturbed circle `r(θ) = 3 + (sin 3θ − sin² 7θ)/10`
    Perturbed,
    Circle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveSettings {
    pub markers: usize,
    pub init: CurveInit,
    /// radius for `init = "circle"`
    pub radius: f64,
    /// largest step in `T`
    pub dt: f64,
    pub t_end: f64,
    pub record_every: f64,
    /// zero disables marker dumps
    pub snapshot_every: f64,
}

impl Default for CurveSettings {
    fn default() -> Self {
        Self {
            markers: 256,
            init: CurveInit::Perturbed,
            radius: 3.0,
            dt: 1.0,
            t_end: 100.0,
            record_every: 1.0,
            snapshot_every: 10.0,
        }
    }
}

/// A list of `(μ, β)` points. Without `mu` the run uses the single point
/// from `[params]`; without `beta`, `β = (3 − μ)/a`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointList {
    pub mu: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub a: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffSettings {
    #[serde(flatten)]
    pub points: PointList,
    /// also compute the dense spectral gap (slow at large `n`)
    #[serde(default)]
    pub gap: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct XvalSettings {
    /// PDE time after which the interface is treated as a relaxed circle
    pub transient: f64,
    pub radius_tol: f64,
    pub trajectory_tol: f64,
}

impl Default for XvalSettings {
    fn default() -> Self {
        Self { transient: 200.0, radius_tol: 0.10, trajectory_tol: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub mode: Mode,
    #[serde(flatten)]
    pub points: PointList,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self { mode: Mode::Coeffs, points: PointList::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSettings {
    pub dir: PathBuf,
    pub png: bool,
    pub raw: bool,
    pub contours: bool,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), png: true, raw: true, contours: false }
    }
}

/// Which parameter pair the config supplied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Parameterization {
    Physical { a: f64, gamma: f64 },
    Scaled { beta: f64, mu: f64 },
}

/// A validated, fully defaulted configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub parameterization: Parameterization,
    pub params: ScaledParams,
    pub physical: PhysicalParams,
    pub line: LineSettings,
    pub grid: GridSettings,
    pub solver: SolverSettings,
    pub curve: CurveSettings,
    pub coeffs: CoeffSettings,
    pub spectrum: PointList,
    pub xval: XvalSettings,
    pub sweep: SweepSettings,
    pub output: OutputSettings,
}

fn parse_override(s: &str) -> Result<(Vec<String>, toml::Value)> {
    let (key, val) = s.split_once('=').with_context(|| format!("override `{s}` is not KEY=VALUE"))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(String::is_empty) {
        bail!("override `{s}` has an empty key segment");
    }
    let val = val.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {val}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(val.to_string()));
    Ok((path, parsed))
}

fn apply_override(table: &mut toml::Table, path: &[String], val: toml::Value) -> Result<()> {
    let (last, head) = path.split_last().expect("non-empty key");
    let mut t = table;
    for k in head {
        let entry = t.entry(k.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry.as_table_mut().with_context(|| format!("`{k}` is not a section"))?;
    }
    t.insert(last.clone(), val);
    Ok(())
}

/// Parse config text, apply `section.key=value` overrides and validate.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    // first pass on the file alone keeps line numbers in error messages
    let raw: RawConfig = toml::from_str(text).map_err(|e| anyhow::anyhow!("config: {e}"))?;
    let raw = if overrides.is_empty() {
        raw
    } else {
        let mut table: toml::Table = toml::from_str(text)?;
        for o in overrides {
            let (path, val) = parse_override(o)?;
            apply_override(&mut table, &path, val)?;
        }
        toml::Table::try_into(table).map_err(|e| anyhow::anyhow!("config after overrides: {e}"))?
    };
    validate(raw)
}

/// Read and validate a config file.
pub fn validate_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text, &[]).with_context(|| format!("in {}", path.display()))
}

fn check_mu(mu: f64) -> Result<(), ParamError> {
    if (-1.0..=3.0).contains(&mu) {
        Ok(())
    } else {
        Err(ParamError::MuOutOfRange(mu))
    }
}

fn validate(raw: RawConfig) -> Result<RunConfig> {
    let p = &raw.params;
    let eps = p.eps.context("params.eps is required")?;
    let box_len = p.box_len.unwrap_or(12.0);
    let (parameterization, params, physical) = match (p.a, p.gamma, p.beta, p.mu) {
        (Some(a), Some(gamma), None, None) => {
            let phys = PhysicalParams { a, gamma, eps, box_len };
            let sp = scale_params(&phys)?;
            check_mu(sp.mu)?;
            (Parameterization::Physical { a, gamma }, sp, phys)
        }
        (None, None, Some(beta), Some(mu)) => {
            let phys = unscale_params(beta, mu, eps, box_len)?;
            (Parameterization::Scaled { beta, mu }, ScaledParams::from_beta_mu(beta, mu, eps, box_len)?, phys)
        }
        (None, None, None, None) => bail!("params: give either `a` and `gamma` or `beta` and `mu`"),
        (a, g, b, m) if (a.is_some() || g.is_some()) && (b.is_some() || m.is_some()) => {
            bail!("params: `a, gamma` and `beta, mu` are exclusive, give exactly one pair")
        }
        _ => bail!("params: incomplete pair, give both `a` and `gamma` or both `beta` and `mu`"),
    };
    if raw.line.n < 16 || !(raw.line.z > 0.0) {
        bail!("line: need n >= 16 and z > 0");
    }
    PeriodicGrid2D::new(box_len, raw.grid.n, eps).context("grid")?;
    raw.solver.solver().validate().context("solver")?;
    let c = &raw.curve;
    if c.markers < crate::curveflow::MIN_MARKERS {
        bail!("curve.markers must be at least {}", crate::curveflow::MIN_MARKERS);
    }
    if !(c.dt > 0.0 && c.t_end >= 0.0 && c.record_every > 0.0 && c.snapshot_every >= 0.0 && c.radius > 0.0) {
        bail!("curve: dt, record_every and radius must be positive");
    }
    for (name, list) in [("coeffs", &raw.coeffs.points), ("spectrum", &raw.spectrum), ("sweep", &raw.sweep.points)] {
        check_points(list).with_context(|| name.to_string())?;
    }
    Ok(RunConfig {
        mode: raw.mode,
        parameterization,
        params,
        physical,
        line: raw.line,
        grid: raw.grid,
        solver: raw.solver,
        curve: raw.curve,
        coeffs: raw.coeffs,
        spectrum: raw.spectrum,
        xval: raw.xval,
        sweep: raw.sweep,
        output: raw.output,
    })
}

fn check_points(list: &PointList) -> Result<()> {
    if let Some(mus) = &list.mu {
        for &mu in mus {
            check_mu(mu)?;
        }
        if let Some(b) = &list.beta {
            if b.len() != mus.len() {
                bail!("beta list has {} entries, mu has {}", b.len(), mus.len());
            }
        }
    } else if list.beta.is_some() {
        bail!("beta list given without mu");
    }
    if let Some(a) = list.a {
        if !(a > 0.0) {
            bail!("a must be positive");
        }
    }
    Ok(())
}

impl RunConfig {
    /// `(μ, β)` pairs of a point list, falling back to the configured point.
    pub fn points(&self, list: &PointList) -> Vec<(f64, f64)> {
        match &list.mu {
            None => vec![(self.params.mu, self.params.beta)],
            Some(mus) => match &list.beta {
                Some(b) => mus.iter().copied().zip(b.iter().copied()).collect(),
                None => {
                    let a = list.a.unwrap_or(1.0);
                    mus.iter().map(|&mu| (mu, (3.0 - mu) / a)).collect()
                }
            },
        }
    }

    pub fn line_grid(&self) -> Result<LineGrid> {
        Ok(LineGrid::new(self.line.z, self.line.n)?)
    }

    pub fn pde_grid(&self) -> Result<PeriodicGrid2D> {
        Ok(PeriodicGrid2D::new(self.params.box_len, self.grid.n, self.params.eps)?)
    }

    /// Same config at another `(μ, β)`.
    pub fn at_point(&self, mu: f64, beta: f64) -> Result<RunConfig> {
        let sp = ScaledParams::from_beta_mu(beta, mu, self.params.eps, self.params.box_len)?;
        let phys = unscale_params(beta, mu, self.params.eps, self.params.box_len)?;
        Ok(RunConfig { parameterization: Parameterization::Scaled { beta, mu }, params: sp, physical: phys, ..self.clone() })
    }
}

// ---------------------------------------------------------------- outcomes

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.to_string(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// completed, but a collapse or self-intersection occurred
    Event,
    Failed,
}

impl Status {
    pub fn code(&self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Event => 2,
            Status::Failed => 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub status: Status,
    pub checks: Vec<Check>,
    pub events: Vec<String>,
}

impl Outcome {
    fn from_checks(checks: Vec<Check>, events: Vec<String>) -> Self {
        let status = if checks.iter().any(|c| !c.passed) {
            Status::Failed
        } else if events.is_empty() {
            Status::Ok
        } else {
            Status::Event
        };
        Self { status, checks, events }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    program: &'static str,
    version: &'static str,
    verb: &'a str,
    config: &'a RunConfig,
    n_line: usize,
    z: f64,
    n_grid: usize,
    box_len: f64,
    outcome: &'a Outcome,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

fn write_manifest(dir: &Path, verb: &str, cfg: &RunConfig, outcome: &Outcome) -> Result<()> {
    let m = Manifest {
        program: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        verb,
        config: cfg,
        n_line: cfg.line.n,
        z: cfg.line.z,
        n_grid: cfg.grid.n,
        box_len: cfg.params.box_len,
        outcome,
    };
    write_json(&dir.join("manifest.json"), &m)
}

// ---------------------------------------------------------------- coeffs

/// One row of the coefficient table.
#[derive(Debug, Clone, Serialize)]
pub struct CoeffRow {
    pub record: CoefficientRecord,
    pub rho_star: Option<f64>,
    pub lambda_ess: f64,
    pub gap: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

pub fn coeffs_csv(rows: &[CoeffRow], grid: &LineGrid) -> String {
    let mut s = String::from("mu,beta,alpha0,nu,zeta,rho_star,lambda_ess,gap,n,Z\n");
    for r in rows {
        let c = &r.record;
        let _ = writeln!(
            s,
            "{},{},{:.12e},{:.12e},{:.12e},{},{:.12e},{},{},{}",
            c.mu,
            c.beta,
            c.alpha0,
            c.nu,
            c.zeta,
            opt(r.rho_star),
            r.lambda_ess,
            opt(r.gap),
            grid.n,
            grid.half_width
        );
    }
    s
}

/// Residual bounds on the inner-expansion diagnostics.
const DIAG_TOL: f64 = 1e-6;

fn run_coeffs(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    use rayon::prelude::*;
    let grid = cfg.line_grid()?;
    let pts = cfg.points(&cfg.coeffs.points);
    let rows: Vec<Result<CoeffRow>> = pts
        .par_iter()
        .map(|&(mu, beta)| {
            let record = coefficients(mu, beta, &grid).with_context(|| format!("coefficients at mu = {mu}"))?;
            let gap = if cfg.coeffs.gap { Some(point_spectrum(mu, beta, &grid)?.gap) } else { None };
            Ok(CoeffRow { record, rho_star: rho_star(mu, &grid).ok(), lambda_ess: lambda_ess(mu, beta), gap })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    std::fs::write(dir.join("coefficients.csv"), coeffs_csv(&rows, &grid))?;
    write_json(&dir.join("coefficients.json"), &rows)?;
    let mut checks = Vec::new();
    for r in &rows {
        let d = &r.record.diagnostics;
        let worst = [d.alpha0_identity, d.parity, d.c_solvability, d.u1_residual, d.u2_residual]
            .into_iter()
            .fold(0.0f64, f64::max);
        checks.push(Check::new(
            &format!("diagnostics mu={}", r.record.mu),
            worst < DIAG_TOL && r.record.nu.is_finite() && r.record.zeta.is_finite(),
            format!("largest residual {worst:.3e}"),
        ));
        println!(
            "mu {:>8} beta {:>8}  alpha0 {:+.8e}  nu {:.8e}  zeta {:+.8e}",
            r.record.mu, r.record.beta, r.record.alpha0, r.record.nu, r.record.zeta
        );
    }
    Ok(Outcome::from_checks(checks, Vec::new()))
}

// ---------------------------------------------------------------- spectrum

#[derive(Serialize)]
struct SpectrumFile<'a> {
    #[serde(flatten)]
    report: &'a SpectrumReport,
    z: f64,
    grid_spacing: f64,
    certified: bool,
}

fn point_tag(mu: f64) -> String {
    format!("mu_{mu:+.4}").replace('.', "p")
}

fn run_spectrum(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    use rayon::prelude::*;
    let grid = cfg.line_grid()?;
    let pts = cfg.points(&cfg.spectrum);
    let reports: Vec<Result<SpectrumReport>> =
        pts.par_iter().map(|&(mu, beta)| Ok(point_spectrum(mu, beta, &grid)?)).collect();
    let mut checks = Vec::new();
    for r in reports {
        let r = r?;
        let file = SpectrumFile { report: &r, z: grid.half_width, grid_spacing: grid.h, certified: r.certified() };
        write_json(&dir.join(format!("spectrum_{}.json", point_tag(r.mu))), &file)?;
        println!(
            "mu {:>8} beta {:>8}  kernel {}  gap {:+.6e}  lambda_ess {:+.6e}  rho* {}",
            r.mu,
            r.beta,
            r.kernel_dim,
            r.gap,
            r.lambda_ess,
            opt(r.rho_star)
        );
        checks.push(Check::new(
            &format!("gap mu={}", r.mu),
            r.certified(),
            format!("kernel_dim {} gap {:.6e}", r.kernel_dim, r.gap),
        ));
    }
    Ok(Outcome::from_checks(checks, Vec::new()))
}

// ---------------------------------------------------------------- pde

fn event_name(e: &RunEvent) -> String {
    match e {
        RunEvent::Buckling { tau } => format!("buckling at tau={tau}"),
        RunEvent::SelfIntersection { tau } => format!("self_intersection at tau={tau}"),
        RunEvent::Collapse { tau } => format!("collapse at tau={tau}"),
        RunEvent::BlowUp { tau, max } => format!("blow_up at tau={tau} (max |U| = {max:.3e})"),
    }
}

/// Run the PDE from the perturbed circle, writing snapshots as they come.
pub fn pde_run(cfg: &RunConfig, dir: &Path) -> Result<RunRecord> {
    let grid = cfg.pde_grid()?;
    let sp = cfg.params;
    let ic = perturbed_circle_ic(&sp, &grid)?;
    let snaps = dir.join("snapshots");
    std::fs::create_dir_all(&snaps)?;
    let out = &cfg.output;
    let mut index = 0usize;
    let mut io_err = None;
    let stop = cfg.solver.stop_on_event;
    let record = simulate(&ic, &sp, &grid, &cfg.solver.solver(), |s, sample: &Sample| {
        let stem = snaps.join(format!("snap_{index:05}"));
        index += 1;
        let res: Result<()> = (|| {
            if out.png {
                write_png(&stem.with_extension("png"), s, &sp)?;
            }
            if out.raw {
                write_raw(&stem.with_extension("bin"), s)?;
            }
            if out.contours {
                write_contours_csv(&stem.with_extension("csv"), &sample.contours)?;
            }
            Ok(())
        })();
        if let Err(e) = res {
            io_err = Some(e);
            return ControlFlow::Break(());
        }
        if stop && matches!(sample.event, Some(Event::SelfIntersection | Event::Collapse)) {
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    })?;
    record.series.write_csv(&dir.join("interface.csv"))?;
    record.write_json(&dir.join("run.json"))?;
    if let Some(e) = io_err {
        return Err(e);
    }
    Ok(record)
}

fn pde_outcome(record: &RunRecord) -> Outcome {
    let blow = record.events.iter().find(|e| matches!(e, RunEvent::BlowUp { .. }));
    let checks = vec![Check::new(
        "no blow-up",
        blow.is_none(),
        blow.map(event_name).unwrap_or_else(|| format!("reached tau={}", record.final_tau)),
    )];
    let events = record
        .events
        .iter()
        .filter(|e| matches!(e, RunEvent::SelfIntersection { .. } | RunEvent::Collapse { .. }))
        .map(event_name)
        .collect();
    Outcome::from_checks(checks, events)
}

fn run_pde(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let record = pde_run(cfg, dir)?;
    for e in &record.events {
        println!("{}", event_name(e));
    }
    println!("final tau {} in {:.1} s", record.final_tau, record.wall_seconds);
    Ok(pde_outcome(&record))
}

// ---------------------------------------------------------------- curve

pub fn initial_curve(cfg: &RunConfig) -> ClosedCurve {
    let c = cfg.params.box_len / 2.0;
    match cfg.curve.init {
        CurveInit::Perturbed => ClosedCurve::polar(initial_radius, cfg.curve.markers, [c, c]),
        CurveInit::Circle => ClosedCurve::circle(cfg.curve.radius, cfg.curve.markers, [c, c]),
    }
}

fn flow_law(cfg: &RunConfig) -> Result<(FlowLaw, CoefficientRecord)> {
    let rec = coefficients(cfg.params.mu, cfg.params.beta, &cfg.line_grid()?)?;
    Ok((FlowLaw::from(&rec), rec))
}

#[derive(Serialize)]
struct CurveReport {
    law: FlowLaw,
    eps: f64,
    equilibrium_radius: Option<f64>,
    final_time: f64,
    final_length: f64,
    final_radius: f64,
    event: Option<(f64, FlowEvent)>,
}

fn run_curve(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let (law, _) = flow_law(cfg)?;
    let eps = cfg.params.eps;
    let c = &cfg.curve;
    let opts = EvolveOptions { dt: c.dt, t_end: c.t_end, record_every: c.record_every, snapshot_every: c.snapshot_every };
    let traj = evolve(&initial_curve(cfg), &law, eps, &opts)?;
    traj.write_csv(&dir.join("trajectory.csv"))?;
    if c.snapshot_every > 0.0 {
        write_markers_csv(&dir.join("markers.csv"), &traj.snapshots)?;
    }
    let last = traj.rows.last().expect("initial row");
    write_json(
        &dir.join("curve.json"),
        &CurveReport {
            law,
            eps,
            equilibrium_radius: law.equilibrium_radius(eps),
            final_time: last.t,
            final_length: last.length,
            final_radius: last.radius,
            event: traj.event,
        },
    )?;
    println!("T {} length {:.6} radius {:.6}", last.t, last.length, last.radius);
    let mut checks = Vec::new();
    let mut events = Vec::new();
    match traj.event {
        Some((t, FlowEvent::NonFinite)) => checks.push(Check::new("finite markers", false, format!("non-finite at T={t}"))),
        Some((t, e)) => events.push(format!("{} at T={t}", e.name())),
        None => checks.push(Check::new("finite markers", true, "")),
    }
    for e in &events {
        println!("{e}");
    }
    Ok(Outcome::from_checks(checks, events))
}

// ---------------------------------------------------------------- xval

/// One matched time of the PDE / sharp-interface comparison.
#[derive(Debug, Clone, Serialize)]
pub struct XvalRow {
    pub tau: f64,
    pub t: f64,
    pub pde_length: f64,
    pub pde_radius: Option<f64>,
    pub curve_length: Option<f64>,
    pub curve_radius: Option<f64>,
    pub ode_radius: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct XvalReport {
    pub law: FlowLaw,
    pub eps: f64,
    pub equilibrium_radius: Option<f64>,
    pub pde_final_radius: Option<f64>,
    /// `|R_pde − R*| / R*` at the end of the run
    pub radius_error: Option<f64>,
    /// largest `|R_pde − R_ode| / R_ode` after the transient, the ODE being
    /// started from the PDE radius at the end of the transient
    pub trajectory_error: Option<f64>,
    pub transient: f64,
    pub radius_tol: f64,
    pub trajectory_tol: f64,
    pub rows: Vec<XvalRow>,
}

impl XvalReport {
    pub fn radius_ok(&self) -> bool {
        self.radius_error.is_some_and(|e| e <= self.radius_tol)
    }

    pub fn trajectory_ok(&self) -> bool {
        self.trajectory_error.is_some_and(|e| e <= self.trajectory_tol)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut s = String::from("tau,T,pde_length,pde_radius,curve_length,curve_radius,ode_radius\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{:.10e},{},{},{},{}",
                r.tau,
                r.t,
                r.pde_length,
                opt(r.pde_radius),
                opt(r.curve_length),
                opt(r.curve_radius),
                opt(r.ode_radius)
            );
        }
        std::fs::write(path, s)?;
        Ok(())
    }
}

/// Compare a PDE run against the sharp-interface flow and the circle ODE,
/// mapping `T = ε²τ`.
pub fn compare(
    record: &RunRecord,
    pde_radius: &[Option<f64>],
    curve: Option<&crate::curveflow::Trajectory>,
    law: &FlowLaw,
    eps: f64,
    settings: &XvalSettings,
) -> Result<XvalReport> {
    let e2 = eps * eps;
    let series = &record.series;
    // ODE from the PDE radius once the shape has relaxed
    let start = series.times.iter().position(|&t| t >= settings.transient);
    let ode = match start.and_then(|i| pde_radius[i].map(|r| (i, r))) {
        Some((i, r0)) => {
            let t0 = series.times[i];
            let span = e2 * (record.final_tau - t0);
            let dt_out = (e2 * record.config.snapshot_every / 4.0).max(1e-6);
            Some((t0, circle_ode(r0, law, eps, span, dt_out)?))
        }
        None => None,
    };
    let mut rows = Vec::with_capacity(series.len());
    let mut traj_err: Option<f64> = None;
    for (i, &tau) in series.times.iter().enumerate() {
        let t = e2 * tau;
        let crow = curve.and_then(|c| c.rows.iter().find(|r| (r.t - t).abs() <= 1e-9 * t.max(1.0)));
        let ode_radius = ode.as_ref().and_then(|(t0, sol)| (tau >= *t0).then(|| sol.radius_at(e2 * (tau - t0))).flatten());
        if let (Some(rp), Some(ro)) = (pde_radius[i], ode_radius) {
            let e = (rp - ro).abs() / ro;
            traj_err = Some(traj_err.map_or(e, |m: f64| m.max(e)));
        }
        rows.push(XvalRow {
            tau,
            t,
            pde_length: series.lengths[i],
            pde_radius: pde_radius[i],
            curve_length: crow.map(|r| r.length),
            curve_radius: crow.map(|r| r.radius),
            ode_radius,
        });
    }
    let r_star = law.equilibrium_radius(eps);
    let r_final = pde_radius.last().copied().flatten();
    Ok(XvalReport {
        law: *law,
        eps,
        equilibrium_radius: r_star,
        pde_final_radius: r_final,
        radius_error: r_star.zip(r_final).map(|(rs, rf)| (rf - rs).abs() / rs),
        trajectory_error: traj_err,
        transient: settings.transient,
        radius_tol: settings.radius_tol,
        trajectory_tol: settings.trajectory_tol,
        rows,
    })
}

fn run_xval(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let (law, _) = flow_law(cfg)?;
    let eps = cfg.params.eps;
    let pde_dir = dir.join("pde");
    std::fs::create_dir_all(&pde_dir)?;
    let mut radii = Vec::new();
    let record = {
        let grid = cfg.pde_grid()?;
        let sp = cfg.params;
        let ic = perturbed_circle_ic(&sp, &grid)?;
        let rec = simulate(&ic, &sp, &grid, &cfg.solver.solver(), |s, sample| {
            radii.push(sample.radius());
            if cfg.output.png {
                let _ = write_png(&pde_dir.join(format!("snap_{:05}.png", radii.len() - 1)), s, &sp);
            }
            ControlFlow::Continue(())
        })?;
        rec.series.write_csv(&pde_dir.join("interface.csv"))?;
        rec.write_json(&pde_dir.join("run.json"))?;
        rec
    };
    let e2 = eps * eps;
    let opts = EvolveOptions {
        dt: cfg.curve.dt,
        t_end: e2 * record.final_tau,
        record_every: e2 * cfg.solver.snapshot_every,
        snapshot_every: 0.0,
    };
    let mut curve_cfg = cfg.clone();
    curve_cfg.curve.init = CurveInit::Perturbed;
    let traj = evolve(&initial_curve(&curve_cfg), &law, eps, &opts)?;
    let curve_dir = dir.join("curve");
    std::fs::create_dir_all(&curve_dir)?;
    traj.write_csv(&curve_dir.join("trajectory.csv"))?;
    let report = compare(&record, &radii, Some(&traj), &law, eps, &cfg.xval)?;
    report.write_csv(&dir.join("comparison.csv"))?;
    write_json(&dir.join("xval.json"), &report)?;
    println!(
        "R* {}  PDE final radius {}  radius error {}  trajectory error {}",
        opt(report.equilibrium_radius),
        opt(report.pde_final_radius),
        opt(report.radius_error),
        opt(report.trajectory_error)
    );
    let mut outcome = pde_outcome(&record);
    if report.equilibrium_radius.is_some() {
        outcome.checks.push(Check::new(
            "limit radius vs R*",
            report.radius_ok(),
            format!("relative error {}", opt(report.radius_error)),
        ));
        outcome.checks.push(Check::new(
            "radius trajectory vs circle ODE",
            report.trajectory_ok(),
            format!("largest relative deviation {}", opt(report.trajectory_error)),
        ));
    }
    if let Some((t, e)) = traj.event {
        outcome.events.push(format!("curve {} at T={t}", e.name()));
    }
    Ok(Outcome::from_checks(outcome.checks, outcome.events))
}

// ---------------------------------------------------------------- dispatch

/// Run one mode into `dir` and write its manifest.
pub fn run(mode: Mode, cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let outcome = match mode {
        Mode::Coeffs => run_coeffs(cfg, dir),
        Mode::Spectrum => run_spectrum(cfg, dir),
        Mode::Pde => run_pde(cfg, dir),
        Mode::Curve => run_curve(cfg, dir),
        Mode::Xval => run_xval(cfg, dir),
    };
    let outcome = outcome.unwrap_or_else(|e| Outcome {
        status: Status::Failed,
        checks: vec![Check::new("run", false, format!("{e:#}"))],
        events: Vec::new(),
    });
    write_manifest(dir, mode.name(), cfg, &outcome)?;
    Ok(outcome)
}

/// Run `[sweep].mode` at every sweep point, one subdirectory per point.
pub fn run_sweep(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    use rayon::prelude::*;
    std::fs::create_dir_all(dir)?;
    let mode = cfg.sweep.mode;
    let pts = cfg.points(&cfg.sweep.points);
    let results: Vec<(f64, f64, Result<Outcome>)> = pts
        .par_iter()
        .map(|&(mu, beta)| {
            let sub = dir.join(point_tag(mu));
            let out = cfg.at_point(mu, beta).and_then(|c| run(mode, &c, &sub));
            (mu, beta, out)
        })
        .collect();
    let mut summary = String::from("mu,beta,status,dir\n");
    let mut checks = Vec::new();
    let mut events = Vec::new();
    for (mu, beta, r) in results {
        let (status, msg) = match r {
            Ok(o) => {
                events.extend(o.events.iter().map(|e| format!("mu={mu}: {e}")));
                (o.status, String::new())
            }
            Err(e) => (Status::Failed, format!("{e:#}")),
        };
        let tag = match status {
            Status::Ok => "ok",
            Status::Event => "event",
            Status::Failed => "failed",
        };
        let _ = writeln!(summary, "{mu},{beta},{tag},{}", point_tag(mu));
        checks.push(Check::new(&format!("point mu={mu}"), status != Status::Failed, msg));
    }
    std::fs::write(dir.join("sweep.csv"), summary)?;
    let outcome = Outcome::from_checks(checks, events);
    write_manifest(dir, "sweep", cfg, &outcome)?;
    Ok(outcome)
}

// ---------------------------------------------------------------- command line

#[derive(Debug, Parser)]
#[command(name = "pnls", version, about = "Dark-soliton interfaces of the 2D parametric NLS equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Curvature-flow coefficients alpha0, nu, zeta over a list of points
    Coeffs(CommonArgs),
    /// Point spectrum and spectral gap of the front linearization
    Spectrum(CommonArgs),
    /// Full PDE run from the perturbed circle
    Pde(CommonArgs),
    /// Sharp-interface curve flow
    Curve(CommonArgs),
    /// Paired PDE and sharp-interface run with a comparison report
    Xval(CommonArgs),
    /// Run `[sweep].mode` over `[sweep].mu`
    Sweep(CommonArgs),
    /// Parse and validate a config, print the effective values
    Check(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML config file
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`)
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Override any config key, e.g. `--set grid.n=512`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eps: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub t_end: Option<f64>,
}

impl CommonArgs {
    fn overrides(&self) -> Vec<String> {
        let mut o = Vec::new();
        for (k, v) in [
            ("params.mu", self.mu),
            ("params.beta", self.beta),
            ("params.a", self.a),
            ("params.gamma", self.gamma),
            ("params.eps", self.eps),
        ] {
            if let Some(v) = v {
                o.push(format!("{k}={v:?}"));
            }
        }
        o.extend(self.set.iter().cloned());
        o
    }

    pub fn load(&self, mode: Option<Mode>) -> Result<RunConfig> {
        let text = match &self.config {
            Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            None => String::new(),
        };
        let mut o = self.overrides();
        if let Some(t) = self.t_end {
            let key = if mode == Some(Mode::Curve) { "curve.t_end" } else { "solver.t_end" };
            o.push(format!("{key}={t:?}"));
        }
        let mut cfg = parse_config(&text, &o).with_context(|| match &self.config {
            Some(p) => format!("in {}", p.display()),
            None => "in command-line parameters".to_string(),
        })?;
        if let Some(d) = &self.out {
            cfg.output.dir = d.clone();
        }
        if let (Some(m), Some(want)) = (cfg.mode, mode) {
            if m != want {
                bail!("config declares mode `{}` but the `{}` verb was used", m.name(), want.name());
            }
        }
        Ok(cfg)
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let (args, mode) = match &cli.command {
        Command::Coeffs(a) => (a, Some(Mode::Coeffs)),
        Command::Spectrum(a) => (a, Some(Mode::Spectrum)),
        Command::Pde(a) => (a, Some(Mode::Pde)),
        Command::Curve(a) => (a, Some(Mode::Curve)),
        Command::Xval(a) => (a, Some(Mode::Xval)),
        Command::Sweep(a) | Command::Check(a) => (a, None),
    };
    let cfg = match args.load(mode) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return 1;
        }
    };
    let dir = cfg.output.dir.clone();
    let res = match (&cli.command, mode) {
        (Command::Check(_), _) => {
            println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
            return 0;
        }
        (_, Some(m)) => run(m, &cfg, &dir),
        (_, None) => run_sweep(&cfg, &dir),
    };
    match res {
        Ok(o) => {
            for c in o.checks.iter().filter(|c| !c.passed) {
                eprintln!("check failed: {} ({})", c.name, c.detail);
            }
            o.status.code()
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn main() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => main_with(cli),
        Err(e) => {
            let _ = e.print();
            // usage errors are failures, not numerical events
            if e.use_stderr() {
                1
            } else {
                0
            }
        }
    }
}
