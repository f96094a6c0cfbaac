//! Sharp-interface model: a closed marker curve moving with normal velocity
//! `V = −α₀κ + ε²(ν κ_ss + ζ κ³)` in the slow time `T = ε²τ`.
//!
//! Markers are kept at equal arclength. Derivatives are spectral in the
//! normalized arclength `σ ∈ [0, 1)`. The surface-diffusion part is stepped
//! implicitly through its linearization `−ε²ν ∂_s⁴` acting on the normal
//! displacement, with normal and metric frozen over a step (two-stage L-stable IMEX Runge–Kutta); everything else is
//! explicit.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use ode_solvers::{Dopri5, OutputType, System, Vector1};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientRecord;
use crate::interface::{polyline_self_intersects, resample_uniform, Contour};

#[derive(Debug, thiserror::Error)]
pub enum FlowError {
    #[error("need at least {need} markers, got {got}")]
    TooFewMarkers { got: usize, need: usize },
    #[error("curve self-intersects")]
    SelfIntersection,
    #[error("non-finite geometry at T = {0}")]
    NonFinite(f64),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("ode integration failed: {0}")]
    Ode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const MIN_MARKERS: usize = 64;

/// The three coefficients of the normal velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowLaw {
    pub alpha0: f64,
    pub nu: f64,
    pub zeta: f64,
}

impl From<&CoefficientRecord> for FlowLaw {
    fn from(r: &CoefficientRecord) -> Self {
        Self { alpha0: r.alpha0, nu: r.nu, zeta: r.zeta }
    }
}

impl FlowLaw {
    /// `R* = ε√(ζ/α₀)` when `α₀, ζ > 0`.
    pub fn equilibrium_radius(&self, eps: f64) -> Option<f64> {
        (self.alpha0 > 0.0 && self.zeta > 0.0).then(|| eps * (self.zeta / self.alpha0).sqrt())
    }

    pub fn circle_velocity(&self, eps: f64, r: f64) -> f64 {
        -self.alpha0 / r + eps * eps * self.zeta / r.powi(3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedCurve {
    pub markers: Vec<[f64; 2]>,
    pub time: f64,
}

impl ClosedCurve {
    pub fn circle(radius: f64, n: usize, center: [f64; 2]) -> Self {
        let markers = (0..n)
            .map(|j| {
                let t = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
                [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
            })
            .collect();
        Self { markers, time: 0.0 }
    }

    /// Polar curve `r(θ)`, redistributed to equal arclength.
    pub fn polar(r: impl Fn(f64) -> f64, n: usize, center: [f64; 2]) -> Self {
        let fine = 8 * n;
        let pts = (0..fine)
            .map(|j| {
                let t = 2.0 * std::f64::consts::PI * j as f64 / fine as f64;
                let rr = r(t);
                [center[0] + rr * t.cos(), center[1] + rr * t.sin()]
            })
            .collect();
        let mut c = Self { markers: pts, time: 0.0 };
        c.redistribute_to(n);
        c
    }

    /// Equal-arclength markers along a closed extracted contour.
    pub fn from_contour(c: &Contour, n: usize) -> Result<Self, FlowError> {
        if !c.closed {
            return Err(FlowError::Invalid("contour wraps the periodic box".into()));
        }
        let (xs, ys) = resample_uniform(c, n);
        Ok(Self { markers: xs.into_iter().zip(ys).map(|(x, y)| [x, y]).collect(), time: 0.0 })
    }

    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }

    pub fn as_contour(&self) -> Contour {
        Contour::from_points(self.markers.clone())
    }

    pub fn polygon_length(&self) -> f64 {
        crate::interface::curve_length(&self.as_contour())
    }

    pub fn signed_area(&self) -> f64 {
        self.as_contour().signed_area()
    }

    pub fn equivalent_radius(&self) -> f64 {
        self.as_contour().equivalent_radius()
    }

    pub fn self_intersects(&self) -> bool {
        polyline_self_intersects(&self.markers, [0.0, 0.0], None)
    }

    /// Re-interpolate to `n` markers at equal arclength.
    pub fn redistribute_to(&mut self, n: usize) {
        let (xs, ys) = resample_uniform(&self.as_contour(), n);
        self.markers = xs.into_iter().zip(ys).map(|(x, y)| [x, y]).collect();
    }

    pub fn redistribute(&mut self) {
        let n = self.len();
        self.redistribute_to(n);
    }

    /// Largest relative deviation of marker spacing from the mean.
    pub fn spacing_spread(&self) -> f64 {
        let n = self.len();
        let d: Vec<f64> = (0..n)
            .map(|i| {
                let (a, b) = (self.markers[i], self.markers[(i + 1) % n]);
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .collect();
        let mean = d.iter().sum::<f64>() / n as f64;
        d.iter().fold(0.0, |m, v| m.max((v - mean).abs() / mean))
    }

    fn ensure_ccw(&mut self) {
        if self.signed_area() < 0.0 {
            self.markers.reverse();
        }
    }
}

/// Spectral differentiation on `n` equispaced periodic samples of `σ ∈ [0, 1)`.
pub struct SpectralDiff {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl SpectralDiff {
    pub fn new(n: usize) -> Self {
        let mut p = FftPlanner::new();
        Self { n, fwd: p.plan_fft_forward(n), inv: p.plan_fft_inverse(n) }
    }

    fn wavenumber(&self, j: usize) -> f64 {
        let n = self.n as i64;
        let m = j as i64;
        let k = if m < n / 2 { m } else if m > n / 2 { m - n } else { 0 };
        2.0 * std::f64::consts::PI * k as f64
    }

    fn transform(&self, v: &[f64]) -> Vec<Complex64> {
        let mut b: Vec<Complex64> = v.iter().map(|x| Complex64::new(*x, 0.0)).collect();
        self.fwd.process(&mut b);
        b
    }

    fn back(&self, mut b: Vec<Complex64>) -> Vec<f64> {
        self.inv.process(&mut b);
        let s = 1.0 / self.n as f64;
        b.iter().map(|c| c.re * s).collect()
    }

    /// `d^order/dσ^order`; the Nyquist mode is dropped for odd orders.
    pub fn derivative(&self, v: &[f64], order: u32) -> Vec<f64> {
        let mut b = self.transform(v);
        for (j, c) in b.iter_mut().enumerate() {
            let k = self.wavenumber(j);
            let f = Complex64::new(0.0, k).powu(order);
            *c *= f;
        }
        self.back(b)
    }

    /// Two-thirds truncation: drops every mode with `|m| > n/3`, where
    /// products of derivatives alias back onto the resolved modes.
    pub fn filter(&self, v: &[f64]) -> Vec<f64> {
        let mut b = self.transform(v);
        let cut = self.n / 3;
        for (j, x) in b.iter_mut().enumerate() {
            let m = if j <= self.n / 2 { j } else { self.n - j };
            if m > cut {
                *x = Complex64::new(0.0, 0.0);
            }
        }
        self.back(b)
    }

    /// Solve `(1 + c k⁴) u = v` mode by mode.
    pub fn solve_biharmonic(&self, v: &[f64], c: f64) -> Vec<f64> {
        let mut b = self.transform(v);
        for (j, x) in b.iter_mut().enumerate() {
            let k = if 2 * j == self.n { std::f64::consts::PI * self.n as f64 } else { self.wavenumber(j) };
            *x /= 1.0 + c * k.powi(4);
        }
        self.back(b)
    }

    /// `k⁴ u` mode by mode (the σ-symbol of `∂_σ⁴`). Like [`Self::derivative`]
    /// it ignores the Nyquist mode, which [`Self::solve_biharmonic`] damps;
    /// the saw-tooth mode is otherwise invisible to the curvature and never
    /// decays.
    pub fn fourth(&self, v: &[f64]) -> Vec<f64> {
        self.derivative(v, 4)
    }
}

/// Per-marker geometry of a closed curve.
#[derive(Debug, Clone)]
pub struct Geometry {
    /// `|X_σ|`, the arclength density
    pub metric: Vec<f64>,
    pub kappa: Vec<f64>,
    pub kappa_s: Vec<f64>,
    pub kappa_ss: Vec<f64>,
    /// outward unit normal
    pub normal: Vec<[f64; 2]>,
    pub length: f64,
}

impl Geometry {
    pub fn new(curve: &ClosedCurve, d: &SpectralDiff) -> Self {
        let xs: Vec<f64> = curve.markers.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = curve.markers.iter().map(|p| p[1]).collect();
        let x1 = d.derivative(&xs, 1);
        let y1 = d.derivative(&ys, 1);
        let x2 = d.derivative(&xs, 2);
        let y2 = d.derivative(&ys, 2);
        let n = xs.len();
        let metric: Vec<f64> = (0..n).map(|i| x1[i].hypot(y1[i])).collect();
        let kappa: Vec<f64> = (0..n).map(|i| (x1[i] * y2[i] - y1[i] * x2[i]) / metric[i].powi(3)).collect();
        let ks: Vec<f64> = d.derivative(&kappa, 1).iter().zip(&metric).map(|(a, g)| a / g).collect();
        let kss: Vec<f64> = d.derivative(&ks, 1).iter().zip(&metric).map(|(a, g)| a / g).collect();
        let normal = (0..n).map(|i| [y1[i] / metric[i], -x1[i] / metric[i]]).collect();
        let length = metric.iter().sum::<f64>() / n as f64;
        Self { metric, kappa, kappa_s: ks, kappa_ss: kss, normal, length }
    }

    /// `∮ f ds` by the trapezoid rule in σ.
    pub fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        let n = self.metric.len();
        (0..n).map(|i| f(i) * self.metric[i]).sum::<f64>() / n as f64
    }

    pub fn total_curvature(&self) -> f64 {
        self.integrate(|i| self.kappa[i])
    }

    pub fn velocity(&self, law: &FlowLaw, eps: f64) -> Vec<f64> {
        let e2 = eps * eps;
        (0..self.kappa.len())
            .map(|i| {
                let k = self.kappa[i];
                -law.alpha0 * k + e2 * (law.nu * self.kappa_ss[i] + law.zeta * k * k * k)
            })
            .collect()
    }
}

fn check(curve: &ClosedCurve) -> Result<(), FlowError> {
    if curve.len() < MIN_MARKERS {
        return Err(FlowError::TooFewMarkers { got: curve.len(), need: MIN_MARKERS });
    }
    Ok(())
}

/// `V` at every marker.
pub fn normal_velocity(curve: &ClosedCurve, law: &FlowLaw, eps: f64) -> Result<Vec<f64>, FlowError> {
    check(curve)?;
    if curve.self_intersects() {
        return Err(FlowError::SelfIntersection);
    }
    let g = Geometry::new(curve, &SpectralDiff::new(curve.len()));
    Ok(g.velocity(law, eps))
}

/// `d|Γ|/dT = −∮(α₀κ² + ε²ν κ_s² − ε²ζκ⁴) ds`.
pub fn length_rate(curve: &ClosedCurve, law: &FlowLaw, eps: f64) -> Result<f64, FlowError> {
    check(curve)?;
    let g = Geometry::new(curve, &SpectralDiff::new(curve.len()));
    let e2 = eps * eps;
    Ok(-g.integrate(|i| {
        let k = g.kappa[i];
        law.alpha0 * k * k + e2 * law.nu * g.kappa_s[i].powi(2) - e2 * law.zeta * k.powi(4)
    }))
}

/// `d|Γ|/dT = ∮ V κ ds`, the form before integration by parts.
pub fn length_rate_direct(curve: &ClosedCurve, law: &FlowLaw, eps: f64) -> Result<f64, FlowError> {
    check(curve)?;
    let g = Geometry::new(curve, &SpectralDiff::new(curve.len()));
    let v = g.velocity(law, eps);
    Ok(g.integrate(|i| v[i] * g.kappa[i]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowEvent {
    /// the curve touched itself; the reduced model no longer applies
    SelfIntersection,
    Collapse,
    NonFinite,
}

impl FlowEvent {
    pub fn name(&self) -> &'static str {
        match self {
            FlowEvent::SelfIntersection => "self_intersection",
            FlowEvent::Collapse => "collapse",
            FlowEvent::NonFinite => "non_finite",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub length: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub radius: f64,
    pub event: Option<FlowEvent>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub event: Option<(f64, FlowEvent)>,
    pub snapshots: Vec<ClosedCurve>,
    pub last: ClosedCurve,
}

impl Trajectory {
    pub fn write_csv(&self, path: &Path) -> Result<(), FlowError> {
        let io = |e: csv::Error| FlowError::Io(e.into());
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(["T", "length", "kappa_min", "kappa_max", "radius", "event"]).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                format!("{}", r.t),
                format!("{:.10e}", r.length),
                format!("{:.10e}", r.kappa_min),
                format!("{:.10e}", r.kappa_max),
                format!("{:.10e}", r.radius),
                r.event.map(|e| e.name()).unwrap_or("").to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// largest step; each step is also capped by [`suggested_dt`]
    pub dt: f64,
    pub t_end: f64,
    /// spacing of trajectory rows in `T`
    pub record_every: f64,
    /// spacing of marker snapshots in `T`; zero disables them
    pub snapshot_every: f64,
}

/// Step size for the explicit part: a fraction of the diffusive limit
/// `h²/D`, where `D` bounds the second-order coefficients `|α₀|` and
/// `ε²(ν + 3|ζ|)κ²` of the linearized explicit terms.
pub fn suggested_dt(curve: &ClosedCurve, law: &FlowLaw, eps: f64) -> f64 {
    let h = curve.polygon_length() / curve.len() as f64;
    let kmax = Geometry::new(curve, &SpectralDiff::new(curve.len())).kappa.iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let diff = law.alpha0.abs().max(eps * eps * (law.nu + 3.0 * law.zeta.abs()) * kmax * kmax).max(1e-12);
    0.1 * h * h / diff
}

// ARS(2,2,2)
const GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
const DELTA: f64 = 1.0 - 1.0 / (2.0 * GAMMA);

struct Imex<'a> {
    d: SpectralDiff,
    law: &'a FlowLaw,
    eps: f64,
}

/// Linear stiff operator of one step: `A X = −c n⁰ ∂_σ⁴(n⁰·X)` with the
/// outward normal `n⁰` and `c = ε²ν/|Γ|⁴` frozen at the start of the step.
struct Frozen<'a> {
    d: &'a SpectralDiff,
    normal: Vec<[f64; 2]>,
    stiff: f64,
}

impl Frozen<'_> {
    fn project(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        (0..x.len()).map(|i| self.normal[i][0] * x[i] + self.normal[i][1] * y[i]).collect()
    }

    fn apply(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let f = self.d.fourth(&self.project(x, y));
        let ax = (0..x.len()).map(|i| -self.stiff * self.normal[i][0] * f[i]).collect();
        let ay = (0..x.len()).map(|i| -self.stiff * self.normal[i][1] * f[i]).collect();
        (ax, ay)
    }

    /// Solve `(I − h A) Y = R`: only the normal component is smoothed.
    fn solve(&self, rx: &[f64], ry: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
        let rn = self.project(rx, ry);
        let yn = self.d.solve_biharmonic(&rn, h * self.stiff);
        let x = (0..rx.len()).map(|i| rx[i] + (yn[i] - rn[i]) * self.normal[i][0]).collect();
        let y = (0..ry.len()).map(|i| ry[i] + (yn[i] - rn[i]) * self.normal[i][1]).collect();
        (x, y)
    }
}

impl Imex<'_> {
    /// Explicit part `V n − A X`.
    fn explicit(&self, xs: &[f64], ys: &[f64], a: &Frozen) -> (Vec<f64>, Vec<f64>) {
        let c = ClosedCurve { markers: xs.iter().zip(ys).map(|(x, y)| [*x, *y]).collect(), time: 0.0 };
        let g = Geometry::new(&c, &self.d);
        let v = g.velocity(self.law, self.eps);
        let (ax, ay) = a.apply(xs, ys);
        let ex = (0..xs.len()).map(|i| v[i] * g.normal[i][0] - ax[i]).collect();
        let ey = (0..ys.len()).map(|i| v[i] * g.normal[i][1] - ay[i]).collect();
        (ex, ey)
    }

    fn step(&self, curve: &ClosedCurve, dt: f64) -> ClosedCurve {
        let n = curve.len();
        let g0 = Geometry::new(curve, &self.d);
        let a = Frozen { d: &self.d, normal: g0.normal, stiff: self.eps * self.eps * self.law.nu / g0.length.powi(4) };
        let x0: Vec<f64> = curve.markers.iter().map(|p| p[0]).collect();
        let y0: Vec<f64> = curve.markers.iter().map(|p| p[1]).collect();
        let (e0x, e0y) = self.explicit(&x0, &y0, &a);
        let rx: Vec<f64> = (0..n).map(|i| x0[i] + GAMMA * dt * e0x[i]).collect();
        let ry: Vec<f64> = (0..n).map(|i| y0[i] + GAMMA * dt * e0y[i]).collect();
        let (k1x, k1y) = a.solve(&rx, &ry, GAMMA * dt);
        let (e1x, e1y) = self.explicit(&k1x, &k1y, &a);
        let (a1x, a1y) = a.apply(&k1x, &k1y);
        let w = 1.0 - GAMMA;
        let rx: Vec<f64> = (0..n)
            .map(|i| x0[i] + dt * (DELTA * e0x[i] + (1.0 - DELTA) * e1x[i] + w * a1x[i]))
            .collect();
        let ry: Vec<f64> = (0..n)
            .map(|i| y0[i] + dt * (DELTA * e0y[i] + (1.0 - DELTA) * e1y[i] + w * a1y[i]))
            .collect();
        let (xs, ys) = a.solve(&rx, &ry, GAMMA * dt);
        let xs = self.d.filter(&xs);
        let ys = self.d.filter(&ys);
        ClosedCurve { markers: xs.into_iter().zip(ys).map(|(x, y)| [x, y]).collect(), time: curve.time + dt }
    }
}

fn row(curve: &ClosedCurve, d: &SpectralDiff, event: Option<FlowEvent>) -> TrajectoryRow {
    let g = Geometry::new(curve, d);
    let (lo, hi) = g.kappa.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), k| (a.min(*k), b.max(*k)));
    TrajectoryRow {
        t: curve.time,
        length: g.length,
        kappa_min: lo,
        kappa_max: hi,
        radius: curve.equivalent_radius(),
        event,
    }
}

/// Evolve for `opts.t_end` or until the first event. Markers are
/// redistributed to equal arclength after every step.
pub fn evolve(curve: &ClosedCurve, law: &FlowLaw, eps: f64, opts: &EvolveOptions) -> Result<Trajectory, FlowError> {
    check(curve)?;
    if !(opts.dt > 0.0 && opts.t_end >= 0.0 && opts.record_every > 0.0) {
        return Err(FlowError::Invalid("dt and record_every must be positive".into()));
    }
    if curve.self_intersects() {
        return Err(FlowError::SelfIntersection);
    }
    let n = curve.len();
    let stepper = Imex { d: SpectralDiff::new(n), law, eps };
    let mut cur = curve.clone();
    cur.ensure_ccw();
    cur.redistribute();
    let start = cur.time;
    let stop = start + opts.t_end;
    let mut rows = vec![row(&cur, &stepper.d, None)];
    let mut snapshots = if opts.snapshot_every > 0.0 { vec![cur.clone()] } else { Vec::new() };
    let (mut n_rec, mut n_snap) = (1u64, 1u64);
    let collapse_len = 1e-3 * cur.polygon_length();
    let mut event = None;
    let tol = 1e-9 * opts.dt;
    while cur.time < stop - tol {
        let next_rec = start + n_rec as f64 * opts.record_every;
        let next_snap = if opts.snapshot_every > 0.0 { start + n_snap as f64 * opts.snapshot_every } else { f64::INFINITY };
        let target = stop.min(next_rec).min(next_snap);
        let h = opts.dt.min(suggested_dt(&cur, law, eps)).min(target - cur.time);
        let mut next = stepper.step(&cur, h);
        if (target - next.time).abs() <= tol {
            next.time = target;
        }
        if next.markers.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            event = Some((next.time, FlowEvent::NonFinite));
            break;
        }
        next.redistribute();
        let ev = if next.self_intersects() {
            Some(FlowEvent::SelfIntersection)
        } else if next.polygon_length() < collapse_len || next.signed_area() <= 0.0 {
            Some(FlowEvent::Collapse)
        } else {
            None
        };
        cur = next;
        if let Some(e) = ev {
            event = Some((cur.time, e));
            rows.push(row(&cur, &stepper.d, ev));
            break;
        }
        if cur.time >= next_rec - tol {
            rows.push(row(&cur, &stepper.d, None));
            n_rec += 1;
        }
        if cur.time >= next_snap - tol {
            snapshots.push(cur.clone());
            n_snap += 1;
        }
    }
    Ok(Trajectory { rows, event, snapshots, last: cur })
}

struct Radial {
    alpha0: f64,
    e2zeta: f64,
    floor: f64,
    collapsed: bool,
}

impl System<f64, Vector1<f64>> for Radial {
    fn system(&self, _t: f64, y: &Vector1<f64>, dy: &mut Vector1<f64>) {
        let r = y[0];
        dy[0] = -self.alpha0 / r + self.e2zeta / (r * r * r);
    }

    fn solout(&mut self, _t: f64, y: &Vector1<f64>, _dy: &Vector1<f64>) -> bool {
        self.collapsed = y[0] <= self.floor;
        self.collapsed
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CircleSolution {
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    /// time at which `R` fell below `1e-3·R0`
    pub collapse: Option<f64>,
}

impl CircleSolution {
    /// Linear interpolation of `R` at `t` inside the computed range.
    pub fn radius_at(&self, t: f64) -> Option<f64> {
        let i = self.t.partition_point(|x| *x <= t);
        if i == 0 || i >= self.t.len() {
            return (i == self.t.len() && (t - self.t[i - 1]).abs() < 1e-12).then(|| self.r[i - 1]);
        }
        let f = (t - self.t[i - 1]) / (self.t[i] - self.t[i - 1]);
        Some(self.r[i - 1] + f * (self.r[i] - self.r[i - 1]))
    }
}

/// `dR/dT = −α₀/R + ε²ζ/R³` by Dormand–Prince 5(4), relative tolerance
/// `1e-10`, sampled every `dt_out` and at `t_end`. Each sample is the end
/// point of its own integration segment, not an interpolant.
pub fn circle_ode(r0: f64, law: &FlowLaw, eps: f64, t_end: f64, dt_out: f64) -> Result<CircleSolution, FlowError> {
    if !(r0 > 0.0) {
        return Err(FlowError::Invalid(format!("R0 must be positive, got {r0}")));
    }
    if !(dt_out > 0.0 && t_end >= 0.0) {
        return Err(FlowError::Invalid("dt_out must be positive and t_end non-negative".into()));
    }
    let floor = 1e-3 * r0;
    let mut t = vec![0.0];
    let mut r = vec![r0];
    let mut collapse = None;
    let mut k = 0u64;
    while *t.last().unwrap() < t_end && collapse.is_none() {
        k += 1;
        let (a, b) = (*t.last().unwrap(), (k as f64 * dt_out).min(t_end));
        if b - a <= 1e-12 * dt_out {
            break;
        }
        let sys = Radial { alpha0: law.alpha0, e2zeta: eps * eps * law.zeta, floor, collapsed: false };
        let y0 = Vector1::new(*r.last().unwrap());
        let mut s = Dopri5::from_param(
            sys, a, b, 0.0, y0, 1e-10, 1e-12 * r0, 0.9, 0.04, 0.2, 10.0, b - a, 0.0, 100_000, 1000, OutputType::Sparse,
        );
        let res = s.integrate();
        let (ts, ys) = s.results().get();
        let (tl, yl) = (*ts.last().unwrap(), ys.last().unwrap()[0]);
        if yl < 1e-2 * r0 || !yl.is_finite() {
            // the 1/R terms stiffen without bound near R = 0
            let (tl, yl) = ts.iter().zip(ys).rev().find(|(_, y)| y[0].is_finite()).map(|(t, y)| (*t, y[0])).unwrap();
            t.push(tl);
            r.push(yl);
            collapse = Some(tl);
            break;
        }
        if let Err(e) = res {
            return Err(FlowError::Ode(format!("{e:?}")));
        }
        t.push(tl);
        r.push(yl);
    }
    Ok(CircleSolution { t, r, collapse })
}

pub fn write_markers_csv(path: &Path, curves: &[ClosedCurve]) -> Result<(), FlowError> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "T,index,x,y")?;
    for c in curves {
        for (i, p) in c.markers.iter().enumerate() {
            writeln!(f, "{},{i},{:.12e},{:.12e}", c.time, p[0], p[1])?;
        }
    }
    f.flush()?;
    Ok(())
}
