//! Pseudo-spectral integrator for the scaled vector system
//!
//! ```text
//! p_τ = −(ε²Δ − 2|U|² + 1 − μ) q
//! q_τ =  (ε²Δ − 2|U|² + 2) p − β q
//! ```
//!
//! on the periodic box `[0, L)²`.
//!
//! Time stepping is second-order exponential time differencing (ETDRK2). The
//! linear part is the constant-coefficient linearization about the far field
//! `U = ±(1, 0)`,
//!
//! ```text
//! M_k = [[0, ε²|k|² + 1 + μ], [−ε²|k|² − 4, −β]],
//! ```
//!
//! integrated exactly per wavenumber; the remainder
//! `N(U) = ((s − 2) q, (6 − s) p)` with `s = 2|U|²` is explicit. Both uniform
//! states `±(1, 0)` are then exact fixed points of the discrete map.

use std::ops::ControlFlow;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::SMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::interface::{self, InterfaceSeries, Tracker};
use crate::params::ScaledParams;

/// Amplitude above which a run is declared blown up.
pub const BLOW_UP: f64 = 10.0;

#[derive(Debug, thiserror::Error)]
pub enum PdeError {
    #[error("grid size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("grid spacing {h} does not resolve eps = {eps} (need L/n <= eps/4)")]
    Underresolved { h: f64, eps: f64 },
    #[error("box length {box_len} too small for an initial curve of radius {radius}")]
    BoxTooSmall { box_len: f64, radius: f64 },
    #[error("field shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("non-finite field value at tau = {0}")]
    NonFinite(f64),
    #[error("blow-up at tau = {tau}: max |U| = {max}")]
    BlowUp { tau: f64, max: f64 },
    #[error("invalid solver config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicGrid2D {
    pub box_len: f64,
    pub n: usize,
    pub h: f64,
    /// signed mode number for each FFT index
    pub modes: Vec<i64>,
}

impl PeriodicGrid2D {
    pub fn new(box_len: f64, n: usize, eps: f64) -> Result<Self, PdeError> {
        if !n.is_power_of_two() || n < 8 {
            return Err(PdeError::NotPowerOfTwo(n));
        }
        let h = box_len / n as f64;
        if !(h <= eps / 4.0 * (1.0 + 1e-12)) {
            return Err(PdeError::Underresolved { h, eps });
        }
        let modes = (0..n as i64).map(|m| if m < n as i64 / 2 { m } else { m - n as i64 }).collect();
        Ok(Self { box_len, n, h, modes })
    }

    /// Node coordinate along one axis, in `[0, L)`.
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    /// Node coordinate relative to the box center `L/2`.
    pub fn centered(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.h
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.box_len
    }
}

/// Fields stored row-major, `p[iy * n + ix]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State2D {
    pub n: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub tau: f64,
}

impl State2D {
    pub fn uniform(n: usize, p: f64, q: f64) -> Self {
        Self { n, p: vec![p; n * n], q: vec![q; n * n], tau: 0.0 }
    }

    pub fn from_fn(grid: &PeriodicGrid2D, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let n = grid.n;
        let mut p = vec![0.0; n * n];
        let mut q = vec![0.0; n * n];
        for iy in 0..n {
            for ix in 0..n {
                let (a, b) = f(grid.coord(ix), grid.coord(iy));
                p[iy * n + ix] = a;
                q[iy * n + ix] = b;
            }
        }
        Self { n, p, q, tau: 0.0 }
    }

    pub fn max_abs(&self) -> f64 {
        self.p
            .iter()
            .zip(&self.q)
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, |m, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) })
    }

    /// `|Θ| = (2/√β)|U|` at every node.
    pub fn modulus(&self, sp: &ScaledParams) -> Vec<f64> {
        let s = 2.0 / sp.beta.sqrt();
        self.p.iter().zip(&self.q).map(|(a, b)| s * a.hypot(*b)).collect()
    }

    fn check(&self, grid: &PeriodicGrid2D) -> Result<(), PdeError> {
        let expected = grid.len();
        for got in [self.p.len(), self.q.len()] {
            if got != expected || self.n != grid.n {
                return Err(PdeError::Shape { expected, got });
            }
        }
        if self.p.iter().chain(&self.q).any(|v| !v.is_finite()) {
            return Err(PdeError::NonFinite(self.tau));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: f64,
    pub dealias: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { dt: 0.01, t_end: 100.0, snapshot_every: 10.0, dealias: true }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), PdeError> {
        if !(self.dt > 0.0) {
            return Err(PdeError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) {
            return Err(PdeError::Config(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if !(self.snapshot_every > 0.0) {
            return Err(PdeError::Config(format!("snapshot_every must be positive, got {}", self.snapshot_every)));
        }
        Ok(())
    }

    fn steps(&self, span: f64) -> usize {
        (span / self.dt).round() as usize
    }
}

/// 2D FFT on `n × n` complex data. The spectral array is stored transposed
/// (`[kx][ky]`), which is harmless since every spectral operator here depends
/// on `|k|²` only.
struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Fft2 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Self {
            n,
            fwd,
            inv,
            scratch: vec![Complex64::default(); len],
            tmp: vec![Complex64::default(); n * n],
        }
    }

    fn transpose(n: usize, src: &[Complex64], dst: &mut [Complex64]) {
        const B: usize = 32;
        for i0 in (0..n).step_by(B) {
            for j0 in (0..n).step_by(B) {
                for i in i0..(i0 + B).min(n) {
                    for j in j0..(j0 + B).min(n) {
                        dst[j * n + i] = src[i * n + j];
                    }
                }
            }
        }
    }

    fn forward(&mut self, buf: &mut [Complex64]) {
        self.fwd.process_with_scratch(buf, &mut self.scratch);
        Self::transpose(self.n, buf, &mut self.tmp);
        self.fwd.process_with_scratch(&mut self.tmp, &mut self.scratch);
        buf.copy_from_slice(&self.tmp);
    }

    /// Normalized inverse.
    fn inverse(&mut self, buf: &mut [Complex64]) {
        self.inv.process_with_scratch(buf, &mut self.scratch);
        Self::transpose(self.n, buf, &mut self.tmp);
        self.inv.process_with_scratch(&mut self.tmp, &mut self.scratch);
        let s = 1.0 / (self.n * self.n) as f64;
        for (b, t) in buf.iter_mut().zip(&self.tmp) {
            *b = t * s;
        }
    }
}

type M2 = [f64; 4];

fn far_field_block(e2k2: f64, mu: f64, beta: f64) -> SMatrix<f64, 2, 2> {
    SMatrix::<f64, 2, 2>::new(0.0, e2k2 + 1.0 + mu, -e2k2 - 4.0, -beta)
}

/// `(e^{hM}, φ₁(hM), φ₂(hM))` from the exponential of the augmented matrix
/// `[[hM, I, 0], [0, 0, I], [0, 0, 0]]`.
pub fn etd_coefficients(m: &SMatrix<f64, 2, 2>, h: f64) -> [SMatrix<f64, 2, 2>; 3] {
    let mut a = SMatrix::<f64, 6, 6>::zeros();
    a.fixed_view_mut::<2, 2>(0, 0).copy_from(&(m * h));
    a[(0, 2)] = 1.0;
    a[(1, 3)] = 1.0;
    a[(2, 4)] = 1.0;
    a[(3, 5)] = 1.0;
    let e = a.exp();
    [
        e.fixed_view::<2, 2>(0, 0).into_owned(),
        e.fixed_view::<2, 2>(0, 2).into_owned(),
        e.fixed_view::<2, 2>(0, 4).into_owned(),
    ]
}

fn flat(m: &SMatrix<f64, 2, 2>) -> M2 {
    [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
}

/// Split the packed transform `û = p̂ + i q̂` at one wavenumber into `(p̂, q̂)`.
#[inline]
fn unpack(a: Complex64, b_partner: Complex64) -> (Complex64, Complex64) {
    let b = b_partner.conj();
    ((a + b) * 0.5, (a - b) * Complex64::new(0.0, -0.5))
}

#[inline]
fn apply2(m: &M2, p: Complex64, q: Complex64) -> (Complex64, Complex64) {
    (p * m[0] + q * m[1], p * m[2] + q * m[3])
}

#[inline]
fn pack(p: Complex64, q: Complex64) -> Complex64 {
    p + Complex64::new(0.0, 1.0) * q
}

/// Precomputed spectral data for one `(grid, params, dt)`.
pub struct Stepper {
    grid: PeriodicGrid2D,
    cfg: SolverConfig,
    fft: Fft2,
    /// per spectral index: position of its `|m|²` in the tables
    table: Vec<u32>,
    partner: Vec<u32>,
    mask: Vec<f64>,
    block: Vec<M2>,
    expo: Vec<M2>,
    phi1: Vec<M2>,
    phi2: Vec<M2>,
    uhat: Vec<Complex64>,
    ahat: Vec<Complex64>,
    n1: Vec<Complex64>,
    work: Vec<Complex64>,
}

impl Stepper {
    pub fn new(grid: &PeriodicGrid2D, sp: &ScaledParams, cfg: &SolverConfig) -> Result<Self, PdeError> {
        cfg.validate()?;
        let n = grid.n;
        let k0 = grid.wavenumber();
        let mut slot = std::collections::BTreeMap::new();
        let mut table = vec![0u32; n * n];
        let mut partner = vec![0u32; n * n];
        let mut mask = vec![0.0; n * n];
        let cut = n as f64 / 3.0;
        for a in 0..n {
            for b in 0..n {
                let (ma, mb) = (grid.modes[a], grid.modes[b]);
                let m2 = ma * ma + mb * mb;
                let next = slot.len() as u32;
                table[a * n + b] = *slot.entry(m2).or_insert(next);
                partner[a * n + b] = (((n - a) % n) * n + (n - b) % n) as u32;
                let keep = !cfg.dealias || ((ma.abs() as f64) < cut && (mb.abs() as f64) < cut);
                mask[a * n + b] = if keep { 1.0 } else { 0.0 };
            }
        }
        let mut by_slot = vec![0i64; slot.len()];
        for (m2, s) in &slot {
            by_slot[*s as usize] = *m2;
        }
        let eps2 = sp.eps * sp.eps;
        let mut block = Vec::with_capacity(by_slot.len());
        let mut expo = Vec::with_capacity(by_slot.len());
        let mut phi1 = Vec::with_capacity(by_slot.len());
        let mut phi2 = Vec::with_capacity(by_slot.len());
        for &m2 in &by_slot {
            let m = far_field_block(eps2 * k0 * k0 * m2 as f64, sp.mu, sp.beta);
            let [e, f1, f2] = etd_coefficients(&m, cfg.dt);
            block.push(flat(&m));
            expo.push(flat(&e));
            phi1.push(flat(&f1));
            phi2.push(flat(&f2));
        }
        let z = vec![Complex64::default(); n * n];
        Ok(Self {
            grid: grid.clone(),
            cfg: *cfg,
            fft: Fft2::new(n),
            table,
            partner,
            mask,
            block,
            expo,
            phi1,
            phi2,
            uhat: z.clone(),
            ahat: z.clone(),
            n1: z.clone(),
            work: z,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &PeriodicGrid2D {
        &self.grid
    }

    fn pack_state(&self, s: &State2D, out: &mut [Complex64]) {
        for ((o, p), q) in out.iter_mut().zip(&s.p).zip(&s.q) {
            *o = Complex64::new(*p, *q);
        }
    }

    /// Transform of the explicit remainder of the packed field in `phys`.
    fn remainder_hat(&mut self, phys: &[Complex64], out: &mut [Complex64], dealias: bool) {
        for (o, u) in out.iter_mut().zip(phys) {
            let s = 2.0 * u.norm_sqr();
            *o = Complex64::new((s - 2.0) * u.im, (6.0 - s) * u.re);
        }
        self.fft.forward(out);
        if dealias {
            for (o, m) in out.iter_mut().zip(&self.mask) {
                *o *= m;
            }
        }
    }

    /// `F(U)` with the Laplacian in transform space.
    pub fn residual(&mut self, s: &State2D) -> Result<State2D, PdeError> {
        s.check(&self.grid)?;
        let len = self.grid.len();
        let mut u = vec![Complex64::default(); len];
        self.pack_state(s, &mut u);
        let mut nl = vec![Complex64::default(); len];
        self.remainder_hat(&u, &mut nl, self.cfg.dealias);
        self.fft.forward(&mut u);
        let mut f = vec![Complex64::default(); len];
        for (i, fi) in f.iter_mut().enumerate() {
            let j = self.partner[i] as usize;
            let (p, q) = unpack(u[i], u[j]);
            let (lp, lq) = apply2(&self.block[self.table[i] as usize], p, q);
            *fi = pack(lp, lq) + nl[i];
        }
        self.fft.inverse(&mut f);
        Ok(State2D {
            n: s.n,
            p: f.iter().map(|c| c.re).collect(),
            q: f.iter().map(|c| c.im).collect(),
            tau: s.tau,
        })
    }

    fn load(&mut self, s: &State2D) {
        let mut u = std::mem::take(&mut self.uhat);
        self.pack_state(s, &mut u);
        self.fft.forward(&mut u);
        self.uhat = u;
    }

    /// One ETDRK2 step of the transformed state; writes the physical field
    /// into `phys` and returns `max |U|`.
    fn advance(&mut self, phys: &mut [Complex64]) -> f64 {
        let dt = self.cfg.dt;
        let dealias = self.cfg.dealias;
        let mut n1 = std::mem::take(&mut self.n1);
        let mut work = std::mem::take(&mut self.work);
        let mut ahat = std::mem::take(&mut self.ahat);
        let mut uhat = std::mem::take(&mut self.uhat);

        self.remainder_hat(phys, &mut n1, dealias);
        for i in 0..ahat.len() {
            let j = self.partner[i] as usize;
            let t = self.table[i] as usize;
            let (p, q) = unpack(uhat[i], uhat[j]);
            let (ep, eq) = apply2(&self.expo[t], p, q);
            let (np, nq) = unpack(n1[i], n1[j]);
            let (fp, fq) = apply2(&self.phi1[t], np, nq);
            ahat[i] = pack(ep + fp * dt, eq + fq * dt);
        }
        phys.copy_from_slice(&ahat);
        self.fft.inverse(phys);
        self.remainder_hat(phys, &mut work, dealias);
        for w in work.iter_mut().zip(&n1) {
            *w.0 -= w.1;
        }
        for i in 0..uhat.len() {
            let j = self.partner[i] as usize;
            let (dp, dq) = unpack(work[i], work[j]);
            let (gp, gq) = apply2(&self.phi2[self.table[i] as usize], dp, dq);
            uhat[i] = ahat[i] + pack(gp, gq) * dt;
        }
        phys.copy_from_slice(&uhat);
        self.fft.inverse(phys);
        let mut max = 0.0f64;
        for u in phys.iter() {
            let a = u.norm();
            if !(a <= max) {
                max = if a.is_nan() { f64::INFINITY } else { a };
            }
        }
        self.n1 = n1;
        self.work = work;
        self.ahat = ahat;
        self.uhat = uhat;
        max
    }

    /// Advance `steps` steps of size `dt`. The imaginary part of the
    /// inverse transform is the `q` field, so no separate projection is needed.
    pub fn step_n(&mut self, s: &mut State2D, steps: usize) -> Result<(), PdeError> {
        s.check(&self.grid)?;
        if steps == 0 {
            return Ok(());
        }
        self.load(s);
        let mut phys = vec![Complex64::default(); self.grid.len()];
        self.pack_state(s, &mut phys);
        let tau0 = s.tau;
        let mut result = Ok(());
        for k in 1..=steps {
            let max = self.advance(&mut phys);
            let tau = tau0 + k as f64 * self.cfg.dt;
            if !(max <= BLOW_UP) {
                result = Err(if max.is_finite() {
                    PdeError::BlowUp { tau, max }
                } else {
                    PdeError::NonFinite(tau)
                });
                s.tau = tau;
                break;
            }
            s.tau = tau;
        }
        for ((p, q), u) in s.p.iter_mut().zip(s.q.iter_mut()).zip(&phys) {
            *p = u.re;
            *q = u.im;
        }
        result
    }

    pub fn step(&mut self, s: &mut State2D) -> Result<(), PdeError> {
        self.step_n(s, 1)
    }
}

/// `F(U)` for the scaled system.
pub fn residual(s: &State2D, sp: &ScaledParams, grid: &PeriodicGrid2D, dealias: bool) -> Result<State2D, PdeError> {
    let cfg = SolverConfig { dealias, ..SolverConfig::default() };
    Stepper::new(grid, sp, &cfg)?.residual(s)
}

/// Single step with a freshly built stepper. Prefer [`Stepper`] for loops.
pub fn step(s: &State2D, sp: &ScaledParams, grid: &PeriodicGrid2D, cfg: &SolverConfig) -> Result<State2D, PdeError> {
    let mut out = s.clone();
    Stepper::new(grid, sp, cfg)?.step(&mut out)?;
    Ok(out)
}

/// `r(θ) = 3 + (sin 3θ − sin² 7θ)/10`.
pub fn initial_radius(theta: f64) -> f64 {
    3.0 + 0.1 * ((3.0 * theta).sin() - (7.0 * theta).sin().powi(2))
}

pub fn initial_radius_derivative(theta: f64) -> f64 {
    0.1 * (3.0 * (3.0 * theta).cos() - 7.0 * (14.0 * theta).sin())
}

/// Field `tanh((|x| − r(θ))/ε)` centered in the box; `q = 0` since the
/// equilibrium phase is divided out.
pub fn radial_front(grid: &PeriodicGrid2D, eps: f64, r: impl Fn(f64) -> f64, r_max: f64) -> Result<State2D, PdeError> {
    let margin = 5.0 * eps;
    if r_max + margin >= grid.box_len / 2.0 {
        return Err(PdeError::BoxTooSmall { box_len: grid.box_len, radius: r_max });
    }
    let n = grid.n;
    let mut p = vec![0.0; n * n];
    for iy in 0..n {
        let y = grid.centered(iy);
        for ix in 0..n {
            let x = grid.centered(ix);
            p[iy * n + ix] = ((x.hypot(y) - r(y.atan2(x))) / eps).tanh();
        }
    }
    Ok(State2D { n, p, q: vec![0.0; n * n], tau: 0.0 })
}

pub fn perturbed_circle_ic(sp: &ScaledParams, grid: &PeriodicGrid2D) -> Result<State2D, PdeError> {
    radial_front(grid, sp.eps, initial_radius, 3.1)
}

pub fn circle_ic(sp: &ScaledParams, grid: &PeriodicGrid2D, radius: f64) -> Result<State2D, PdeError> {
    radial_front(grid, sp.eps, |_| radius, radius)
}

/// Pair of flat fronts at `x = L/2 ± half_width`, `p < 0` between them.
pub fn stripe_ic(grid: &PeriodicGrid2D, eps: f64, half_width: f64) -> State2D {
    let c = grid.box_len / 2.0;
    State2D::from_fn(grid, |x, _| {
        let xs = x - c;
        (((xs + half_width) / eps).tanh() * ((xs - half_width) / eps).tanh(), 0.0)
    })
}

#[derive(Debug, Clone, Serialize)]
pub enum RunEvent {
    Buckling { tau: f64 },
    SelfIntersection { tau: f64 },
    Collapse { tau: f64 },
    BlowUp { tau: f64, max: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub params: ScaledParams,
    pub config: SolverConfig,
    pub n: usize,
    pub box_len: f64,
    pub series: InterfaceSeries,
    pub events: Vec<RunEvent>,
    pub snapshot_times: Vec<f64>,
    pub final_tau: f64,
    pub completed: bool,
    pub wall_seconds: f64,
}

impl RunRecord {
    pub fn write_json(&self, path: &Path) -> Result<(), PdeError> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(f, self).map_err(std::io::Error::from)?;
        Ok(())
    }
}

/// Run from `ic` to `cfg.t_end`, measuring the interface at every snapshot.
/// `on_snapshot` may stop the run early. A blow-up ends the run with an
/// event rather than an error, so the partial record survives.
pub fn simulate(
    ic: &State2D,
    sp: &ScaledParams,
    grid: &PeriodicGrid2D,
    cfg: &SolverConfig,
    mut on_snapshot: impl FnMut(&State2D, &interface::Sample) -> ControlFlow<()>,
) -> Result<RunRecord, PdeError> {
    let started = Instant::now();
    let mut stepper = Stepper::new(grid, sp, cfg)?;
    let mut state = ic.clone();
    state.check(grid)?;
    let mut tracker = Tracker::new(grid.box_len);
    let mut events = Vec::new();
    let mut snapshot_times = Vec::new();
    let total = cfg.steps(cfg.t_end);
    let every = cfg.steps(cfg.snapshot_every).max(1);
    let mut done = 0usize;
    let mut completed = true;
    loop {
        let sample = tracker.push(&state, grid);
        snapshot_times.push(state.tau);
        if let Some(ev) = &sample.event {
            events.push(match ev {
                interface::Event::Buckling => RunEvent::Buckling { tau: state.tau },
                interface::Event::SelfIntersection => RunEvent::SelfIntersection { tau: state.tau },
                interface::Event::Collapse => RunEvent::Collapse { tau: state.tau },
            });
        }
        if on_snapshot(&state, &sample).is_break() {
            completed = done == total;
            break;
        }
        if done >= total {
            break;
        }
        let chunk = every.min(total - done);
        match stepper.step_n(&mut state, chunk) {
            Ok(()) => done += chunk,
            Err(PdeError::BlowUp { tau, max }) => {
                events.push(RunEvent::BlowUp { tau, max });
                completed = false;
                break;
            }
            Err(PdeError::NonFinite(tau)) => {
                events.push(RunEvent::BlowUp { tau, max: f64::INFINITY });
                completed = false;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RunRecord {
        params: *sp,
        config: *cfg,
        n: grid.n,
        box_len: grid.box_len,
        series: tracker.into_series(),
        events,
        snapshot_times,
        final_tau: state.tau,
        completed,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

/// 8-bit grayscale of `|Θ|` on the fixed scale `[0, |A|]`, black at zero.
pub fn modulus_image(s: &State2D, sp: &ScaledParams) -> Vec<u8> {
    let top = 2.0 / sp.beta.sqrt();
    let n = s.n;
    let m = s.modulus(sp);
    // image rows run top to bottom, field rows bottom to top
    let mut out = Vec::with_capacity(n * n);
    for iy in (0..n).rev() {
        for ix in 0..n {
            out.push(((m[iy * n + ix] / top).clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    out
}

pub fn write_png(path: &Path, s: &State2D, sp: &ScaledParams) -> Result<(), PdeError> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut enc = png::Encoder::new(f, s.n as u32, s.n as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header().map_err(std::io::Error::other)?;
    w.write_image_data(&modulus_image(s, sp)).map_err(std::io::Error::other)?;
    Ok(())
}

/// Raw dump: `n` as little-endian u64, `tau` as f64, then `p` and `q`
/// row-major as little-endian f64.
pub fn write_raw(path: &Path, s: &State2D) -> Result<(), PdeError> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&(s.n as u64).to_le_bytes())?;
    f.write_all(&s.tau.to_le_bytes())?;
    for v in s.p.iter().chain(&s.q) {
        f.write_all(&v.to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_raw(path: &Path) -> Result<State2D, PdeError> {
    let bytes = std::fs::read(path)?;
    let bad = || PdeError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, "truncated field dump"));
    if bytes.len() < 16 {
        return Err(bad());
    }
    let word = |k: usize| -> [u8; 8] { bytes[8 * k..8 * k + 8].try_into().unwrap() };
    let n = u64::from_le_bytes(word(0)) as usize;
    let tau = f64::from_le_bytes(word(1));
    if bytes.len() != 16 + 16 * n * n {
        return Err(bad());
    }
    let vals: Vec<f64> = (0..2 * n * n).map(|k| f64::from_le_bytes(word(2 + k))).collect();
    let (p, q) = vals.split_at(n * n);
    Ok(State2D { n, p: p.to_vec(), q: q.to_vec(), tau })
}
