//! Zero contour of `p` on the periodic grid: extraction, length, curvature
//! and the per-snapshot series.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::pnls2d::{PeriodicGrid2D, State2D};

#[derive(Debug, thiserror::Error)]
pub enum InterfaceError {
    #[error("contour has {got} points, need at least {need}")]
    TooFewPoints { got: usize, need: usize },
    #[error("curvature needs a closed contour")]
    NotClosed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ordered points of one component, unwrapped by minimal-image continuation.
/// The closing segment runs from the last point to `points[0] + shift`;
/// `shift` is a nonzero lattice vector when the component wraps the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
    pub crossings_seam: bool,
    pub shift: [f64; 2],
}

impl Contour {
    /// Closed, non-wrapping contour through the given points.
    pub fn from_points(points: Vec<[f64; 2]>) -> Self {
        Self { points, closed: true, crossings_seam: false, shift: [0.0, 0.0] }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn next_point(&self, i: usize) -> [f64; 2] {
        if i + 1 < self.points.len() {
            self.points[i + 1]
        } else {
            let p = self.points[0];
            [p[0] + self.shift[0], p[1] + self.shift[1]]
        }
    }

    /// Shoelace area, positive for counter-clockwise order.
    pub fn signed_area(&self) -> f64 {
        let mut a = 0.0;
        for i in 0..self.points.len() {
            let p = self.points[i];
            let q = self.next_point(i);
            a += p[0] * q[1] - q[0] * p[1];
        }
        0.5 * a
    }

    pub fn centroid(&self) -> [f64; 2] {
        let (mut cx, mut cy, mut a) = (0.0, 0.0, 0.0);
        for i in 0..self.points.len() {
            let p = self.points[i];
            let q = self.next_point(i);
            let w = p[0] * q[1] - q[0] * p[1];
            a += w;
            cx += (p[0] + q[0]) * w;
            cy += (p[1] + q[1]) * w;
        }
        [cx / (3.0 * a), cy / (3.0 * a)]
    }

    /// Radius of the disc with the same enclosed area.
    pub fn equivalent_radius(&self) -> f64 {
        (self.signed_area().abs() / std::f64::consts::PI).sqrt()
    }
}

fn minimal_image(d: f64, period: f64) -> f64 {
    d - period * (d / period).round()
}

/// Root in `[0, 1]` of the cubic through `f(−1), f(0), f(1), f(2)`, where
/// `f(0)` and `f(1)` differ in sign. Falls back to the linear estimate if the
/// cubic is not monotone enough to bracket a single root.
fn refine_root(f: [f64; 4], linear: f64) -> f64 {
    let cubic = |t: f64| {
        let (a, b, c, d) = (t + 1.0, t, t - 1.0, t - 2.0);
        -f[0] * b * c * d / 6.0 + f[1] * a * c * d / 2.0 - f[2] * a * b * d / 2.0 + f[3] * a * b * c / 6.0
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let flo = cubic(lo);
    if flo == 0.0 {
        return 0.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (cubic(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    if (t - linear).abs() < 0.5 {
        t
    } else {
        linear
    }
}

/// Marching squares on the periodic `n × n` node field `v[iy * n + ix]` with
/// spacing `h`. Saddle cells are resolved by the sign of the cell-center
/// average. Edge crossings are located on the cubic through the four nodes
/// of the grid line. Closed components are oriented counter-clockwise.
pub fn extract_field(v: &[f64], n: usize, h: f64) -> Vec<Contour> {
    let pos = |ix: usize, iy: usize| v[(iy % n) * n + ix % n] > 0.0;
    let val = |ix: usize, iy: usize| v[(iy % n) * n + ix % n];
    let h_edge = |ix: usize, iy: usize| 2 * ((iy % n) * n + ix % n);
    let v_edge = |ix: usize, iy: usize| 2 * ((iy % n) * n + ix % n) + 1;
    const NONE: u32 = u32::MAX;
    let mut nb = vec![[NONE; 2]; 2 * n * n];
    let mut link = |a: usize, b: usize| {
        for (x, y) in [(a, b), (b, a)] {
            let slot = &mut nb[x];
            if slot[0] == NONE {
                slot[0] = y as u32;
            } else {
                slot[1] = y as u32;
            }
        }
    };
    for iy in 0..n {
        for ix in 0..n {
            let bl = pos(ix, iy);
            let br = pos(ix + 1, iy);
            let tr = pos(ix + 1, iy + 1);
            let tl = pos(ix, iy + 1);
            let bottom = h_edge(ix, iy);
            let right = v_edge(ix + 1, iy);
            let top = h_edge(ix, iy + 1);
            let left = v_edge(ix, iy);
            let mut crossed = [0usize; 4];
            let mut k = 0;
            for (c, e) in [(bl != br, bottom), (br != tr, right), (tr != tl, top), (tl != bl, left)] {
                if c {
                    crossed[k] = e;
                    k += 1;
                }
            }
            match k {
                0 => {}
                2 => link(crossed[0], crossed[1]),
                4 => {
                    let c = 0.25 * (val(ix, iy) + val(ix + 1, iy) + val(ix + 1, iy + 1) + val(ix, iy + 1));
                    if (c > 0.0) == bl {
                        link(bottom, right);
                        link(top, left);
                    } else {
                        link(bottom, left);
                        link(right, top);
                    }
                }
                _ => unreachable!("odd number of sign changes around a cell"),
            }
        }
    }
    let l = n as f64 * h;
    let raw_point = |e: usize| -> [f64; 2] {
        let node = e / 2;
        let (ix, iy) = (node % n, node / n);
        let v0 = val(ix, iy);
        let (v1, dx, dy) = if e % 2 == 0 { (val(ix + 1, iy), 1.0, 0.0) } else { (val(ix, iy + 1), 0.0, 1.0) };
        let t = refine_root(
            [
                val(ix + n - dx as usize, iy + n - dy as usize),
                v0,
                v1,
                val(ix + 2 * dx as usize, iy + 2 * dy as usize),
            ],
            v0 / (v0 - v1),
        );
        [(ix as f64 + t * dx) * h, (iy as f64 + t * dy) * h]
    };
    let mut visited = vec![false; 2 * n * n];
    let mut out = Vec::new();
    for start in 0..2 * n * n {
        if nb[start][0] == NONE || visited[start] {
            continue;
        }
        let mut raw = Vec::new();
        let mut prev = NONE as usize;
        let mut cur = start;
        loop {
            visited[cur] = true;
            raw.push(raw_point(cur));
            let [a, b] = nb[cur];
            let next = if a as usize != prev { a as usize } else { b as usize };
            if next == start || next == NONE as usize || visited[next] {
                break;
            }
            prev = cur;
            cur = next;
        }
        let mut pts: Vec<[f64; 2]> = Vec::with_capacity(raw.len());
        let mut seam = false;
        pts.push(raw[0]);
        let mut prev_raw = raw[0];
        // the last element closes the loop back to raw[0]
        for (k, r) in raw.iter().skip(1).chain(std::iter::once(&raw[0])).enumerate() {
            let last = *pts.last().unwrap();
            let mut p = [0.0; 2];
            for d in 0..2 {
                let diff = r[d] - prev_raw[d];
                let m = minimal_image(diff, l);
                seam |= (m - diff).abs() > 0.5 * l;
                p[d] = last[d] + m;
            }
            prev_raw = *r;
            if k + 1 == raw.len() {
                pts.push(p);
                break;
            }
            // a node value of exactly zero puts two crossings on one point
            if (p[0] - last[0]).hypot(p[1] - last[1]) > 1e-9 * h {
                pts.push(p);
            }
        }
        let end = pts.pop().unwrap();
        let shift = [l * ((end[0] - pts[0][0]) / l).round(), l * ((end[1] - pts[0][1]) / l).round()];
        while pts.len() > 1 {
            let b = pts[pts.len() - 1];
            let a = [pts[0][0] + shift[0], pts[0][1] + shift[1]];
            if (a[0] - b[0]).hypot(a[1] - b[1]) > 1e-9 * h {
                break;
            }
            pts.pop();
        }
        let closed = shift == [0.0, 0.0];
        let mut c = Contour { points: pts, closed, crossings_seam: seam, shift };
        if closed && c.signed_area() < 0.0 {
            c.points.reverse();
        }
        out.push(c);
    }
    out
}

/// Zero contours of `p`. Empty when `p` has one sign (collapse).
pub fn extract_contours(s: &State2D, grid: &PeriodicGrid2D) -> Vec<Contour> {
    extract_field(&s.p, grid.n, grid.h)
}

pub fn curve_length(c: &Contour) -> f64 {
    (0..c.points.len())
        .map(|i| {
            let p = c.points[i];
            let q = c.next_point(i);
            (q[0] - p[0]).hypot(q[1] - p[1])
        })
        .sum()
}

/// Periodic cubic spline through `y` at parameters `t` (increasing, period `period`).
struct PeriodicSpline {
    t: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
    period: f64,
}

impl PeriodicSpline {
    fn new(t: &[f64], y: &[f64], period: f64) -> Self {
        let n = t.len();
        let hs: Vec<f64> = (0..n).map(|i| if i + 1 < n { t[i + 1] - t[i] } else { t[0] + period - t[i] }).collect();
        let dy = |i: usize| (y[(i + 1) % n] - y[i]) / hs[i];
        // cyclic tridiagonal system for second derivatives m_i
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut r = vec![0.0; n];
        for i in 0..n {
            let im = (i + n - 1) % n;
            a[i] = hs[im];
            b[i] = 2.0 * (hs[im] + hs[i]);
            c[i] = hs[i];
            r[i] = 6.0 * (dy(i) - dy(im));
        }
        let m = cyclic_tridiagonal(&a, &b, &c, &r);
        Self { t: t.to_vec(), y: y.to_vec(), m, period }
    }

    fn eval(&self, s: f64) -> f64 {
        let n = self.t.len();
        let s = self.t[0] + (s - self.t[0]).rem_euclid(self.period);
        let i = match self.t.binary_search_by(|v| v.partial_cmp(&s).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let j = (i + 1) % n;
        let h = if j == 0 { self.t[0] + self.period - self.t[i] } else { self.t[j] - self.t[i] };
        let u = (s - self.t[i]) / h;
        let w = 1.0 - u;
        w * self.y[i]
            + u * self.y[j]
            + h * h / 6.0 * ((w * w * w - w) * self.m[i] + (u * u * u - u) * self.m[j])
    }
}

/// Solve a cyclic tridiagonal system (Sherman–Morrison on the Thomas algorithm).
fn cyclic_tridiagonal(a: &[f64], b: &[f64], c: &[f64], r: &[f64]) -> Vec<f64> {
    let n = b.len();
    let thomas = |a: &[f64], b: &[f64], c: &[f64], r: &[f64]| -> Vec<f64> {
        let mut cp = vec![0.0; n];
        let mut dp = vec![0.0; n];
        cp[0] = c[0] / b[0];
        dp[0] = r[0] / b[0];
        for i in 1..n {
            let den = b[i] - a[i] * cp[i - 1];
            cp[i] = c[i] / den;
            dp[i] = (r[i] - a[i] * dp[i - 1]) / den;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = dp[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = dp[i] - cp[i] * x[i + 1];
        }
        x
    };
    let gamma = -b[0];
    let mut bb = b.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= c[n - 1] * a[0] / gamma;
    let x = thomas(a, &bb, c, r);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = c[n - 1];
    let z = thomas(a, &bb, c, &u);
    let fact = (x[0] + a[0] * x[n - 1] / gamma) / (1.0 + z[0] + a[0] * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(x, z)| x - fact * z).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureProfile {
    /// arclength of each sample from the first point
    pub s: Vec<f64>,
    pub kappa: Vec<f64>,
    pub length: f64,
    pub self_intersecting: bool,
}

impl CurvatureProfile {
    pub fn max_abs(&self) -> f64 {
        self.kappa.iter().fold(0.0, |m, k| m.max(k.abs()))
    }

    /// `∮ κ ds` by the periodic trapezoid rule.
    pub fn total(&self) -> f64 {
        self.kappa.iter().sum::<f64>() * self.length / self.kappa.len() as f64
    }
}

/// Curvature along a closed contour: periodic cubic spline through the
/// points, uniform-arclength resampling at four times the input density, a
/// 5-sample moving average, then centered differences. Positive on a
/// counter-clockwise circle.
pub fn curvature_profile(c: &Contour) -> Result<CurvatureProfile, InterfaceError> {
    const NEED: usize = 32;
    if c.len() < NEED {
        return Err(InterfaceError::TooFewPoints { got: c.len(), need: NEED });
    }
    let (xs, ys) = resample_uniform(c, 4 * c.len());
    let m = xs.len();
    let period_len = polyline_len(&xs, &ys, c.shift);
    let ds = period_len / m as f64;
    let smooth = |v: &[f64], shift: f64| -> Vec<f64> {
        (0..m as isize)
            .map(|i| {
                (-2..=2)
                    .map(|d| {
                        let k = i + d;
                        v[k.rem_euclid(m as isize) as usize] + shift * k.div_euclid(m as isize) as f64
                    })
                    .sum::<f64>()
                    / 5.0
            })
            .collect()
    };
    let xs = smooth(&xs, c.shift[0]);
    let ys = smooth(&ys, c.shift[1]);
    let at = |v: &[f64], shift: f64, k: isize| v[k.rem_euclid(m as isize) as usize] + shift * k.div_euclid(m as isize) as f64;
    let mut kappa = Vec::with_capacity(m);
    for i in 0..m as isize {
        let (xm, x0, xp) = (at(&xs, c.shift[0], i - 1), xs[i as usize], at(&xs, c.shift[0], i + 1));
        let (ym, y0, yp) = (at(&ys, c.shift[1], i - 1), ys[i as usize], at(&ys, c.shift[1], i + 1));
        let x1 = (xp - xm) / (2.0 * ds);
        let y1 = (yp - ym) / (2.0 * ds);
        let x2 = (xp - 2.0 * x0 + xm) / (ds * ds);
        let y2 = (yp - 2.0 * y0 + ym) / (ds * ds);
        kappa.push((x1 * y2 - y1 * x2) / (x1 * x1 + y1 * y1).powf(1.5));
    }
    Ok(CurvatureProfile {
        s: (0..m).map(|i| i as f64 * ds).collect(),
        kappa,
        length: period_len,
        self_intersecting: polyline_self_intersects(&c.points, c.shift, None),
    })
}

fn polyline_len(xs: &[f64], ys: &[f64], shift: [f64; 2]) -> f64 {
    let m = xs.len();
    (0..m)
        .map(|i| {
            let (nx, ny) = if i + 1 < m { (xs[i + 1], ys[i + 1]) } else { (xs[0] + shift[0], ys[0] + shift[1]) };
            (nx - xs[i]).hypot(ny - ys[i])
        })
        .sum()
}

/// `m` points equally spaced in arclength along the periodic cubic spline
/// through the contour (chord-length parametrization).
pub fn resample_uniform(c: &Contour, m: usize) -> (Vec<f64>, Vec<f64>) {
    let n = c.len();
    let mut t = vec![0.0; n];
    for i in 1..n {
        let (p, q) = (c.points[i - 1], c.points[i]);
        t[i] = t[i - 1] + (q[0] - p[0]).hypot(q[1] - p[1]);
    }
    let period = curve_length(c);
    // splines of the periodic parts; the lattice drift is linear in t
    let drift = |d: usize, tt: f64| c.shift[d] * tt / period;
    let xp: Vec<f64> = (0..n).map(|i| c.points[i][0] - drift(0, t[i])).collect();
    let yp: Vec<f64> = (0..n).map(|i| c.points[i][1] - drift(1, t[i])).collect();
    let sx = PeriodicSpline::new(&t, &xp, period);
    let sy = PeriodicSpline::new(&t, &yp, period);
    let curve = |tt: f64| [sx.eval(tt) + drift(0, tt), sy.eval(tt) + drift(1, tt)];
    // arclength of the spline on a fine parameter grid, then invert
    let fine = 8 * m;
    let mut arc = vec![0.0; fine + 1];
    let mut prev = curve(0.0);
    for k in 1..=fine {
        let p = curve(period * k as f64 / fine as f64);
        arc[k] = arc[k - 1] + (p[0] - prev[0]).hypot(p[1] - prev[1]);
        prev = p;
    }
    let total = arc[fine];
    let mut xs = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    let mut k = 0;
    for j in 0..m {
        let target = total * j as f64 / m as f64;
        while k + 1 < fine && arc[k + 1] < target {
            k += 1;
        }
        let f = (target - arc[k]) / (arc[k + 1] - arc[k]);
        let p = curve(period * (k as f64 + f) / fine as f64);
        xs.push(p[0]);
        ys.push(p[1]);
    }
    (xs, ys)
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Crossing test for a closed polyline (closing segment to `points[0] + shift`)
/// by spatial hashing. With `period`, segment pairs are compared at their
/// minimal periodic image, which also detects contact with periodic copies.
pub fn polyline_self_intersects(points: &[[f64; 2]], shift: [f64; 2], period: Option<f64>) -> bool {
    let m = points.len();
    if m < 4 {
        return false;
    }
    let seg = |i: usize| -> ([f64; 2], [f64; 2]) {
        let a = points[i];
        let b = if i + 1 < m { points[i + 1] } else { [points[0][0] + shift[0], points[0][1] + shift[1]] };
        (a, b)
    };
    let mut longest: f64 = 0.0;
    for i in 0..m {
        let (a, b) = seg(i);
        longest = longest.max((b[0] - a[0]).abs()).max((b[1] - a[1]).abs());
    }
    let mut cell = (2.0 * longest).max(1e-12);
    let cells_per_period = period.map(|l| {
        let k = ((l / cell).floor() as i64).max(1);
        cell = l / k as f64;
        k
    });
    let key = |x: f64| -> i64 {
        let k = (x / cell).floor() as i64;
        match cells_per_period {
            Some(p) => k.rem_euclid(p),
            None => k,
        }
    };
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for i in 0..m {
        let (a, b) = seg(i);
        let (x0, x1) = (a[0].min(b[0]), a[0].max(b[0]));
        let (y0, y1) = (a[1].min(b[1]), a[1].max(b[1]));
        let (kx0, kx1) = ((x0 / cell).floor() as i64, (x1 / cell).floor() as i64);
        let (ky0, ky1) = ((y0 / cell).floor() as i64, (y1 / cell).floor() as i64);
        for kx in kx0..=kx1 {
            for ky in ky0..=ky1 {
                buckets.entry((key(kx as f64 * cell + 0.5 * cell), key(ky as f64 * cell + 0.5 * cell))).or_default().push(i);
            }
        }
    }
    for list in buckets.values() {
        for (u, &i) in list.iter().enumerate() {
            for &j in &list[u + 1..] {
                let gap = i.abs_diff(j);
                if gap <= 1 || gap == m - 1 {
                    continue;
                }
                let (a, b) = seg(i);
                let (mut c, mut d) = seg(j);
                if let Some(l) = period {
                    for k in 0..2 {
                        let mid_i = 0.5 * (a[k] + b[k]);
                        let mid_j = 0.5 * (c[k] + d[k]);
                        let off = minimal_image(mid_j - mid_i, l) - (mid_j - mid_i);
                        c[k] += off;
                        d[k] += off;
                    }
                }
                if segments_cross(a, b, c, d) {
                    return true;
                }
            }
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    Buckling,
    SelfIntersection,
    Collapse,
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::Buckling => "buckling",
            Event::SelfIntersection => "self_intersection",
            Event::Collapse => "collapse",
        }
    }
}

/// Interface measurements at one snapshot.
#[derive(Debug, Clone)]
pub struct Sample {
    pub tau: f64,
    pub length: f64,
    pub max_curvature: f64,
    pub components: usize,
    pub event: Option<Event>,
    pub contours: Vec<Contour>,
}

impl Sample {
    /// Area-equivalent radius of the largest closed component.
    pub fn radius(&self) -> Option<f64> {
        self.contours
            .iter()
            .filter(|c| c.closed)
            .map(|c| c.equivalent_radius())
            .max_by(|a, b| a.total_cmp(b))
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct InterfaceSeries {
    pub times: Vec<f64>,
    pub lengths: Vec<f64>,
    pub max_curvature: Vec<f64>,
    pub component_count: Vec<usize>,
    pub events: Vec<Option<Event>>,
}

impl InterfaceSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first_event(&self, e: Event) -> Option<f64> {
        self.events.iter().zip(&self.times).find(|(x, _)| **x == Some(e)).map(|(_, t)| *t)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), InterfaceError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| InterfaceError::Io(e.into()))?;
        let io = |e: csv::Error| InterfaceError::Io(e.into());
        w.write_record(["tau", "length", "max_curvature", "components", "event"]).map_err(io)?;
        for i in 0..self.len() {
            w.write_record([
                format!("{}", self.times[i]),
                format!("{:.10e}", self.lengths[i]),
                format!("{:.10e}", self.max_curvature[i]),
                self.component_count[i].to_string(),
                self.events[i].map(|e| e.name()).unwrap_or("").to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn write_contours_csv(path: &Path, contours: &[Contour]) -> Result<(), InterfaceError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "component,x,y")?;
    for (k, c) in contours.iter().enumerate() {
        for p in &c.points {
            writeln!(f, "{k},{:.10e},{:.10e}", p[0], p[1])?;
        }
    }
    f.flush()?;
    Ok(())
}

/// Measure one set of contours.
pub fn measure(tau: f64, contours: Vec<Contour>, period: f64) -> (Sample, bool) {
    let length = contours.iter().map(curve_length).sum();
    let mut max_curvature: f64 = 0.0;
    let mut crossing = false;
    for c in &contours {
        if c.closed {
            if let Ok(k) = curvature_profile(c) {
                max_curvature = max_curvature.max(k.max_abs());
            }
        }
        crossing |= polyline_self_intersects(&c.points, c.shift, Some(period));
    }
    let components = contours.len();
    (Sample { tau, length, max_curvature, components, event: None, contours }, crossing)
}

/// Streams snapshots into an [`InterfaceSeries`], flagging the first
/// buckling, self-intersection and collapse.
#[derive(Debug, Clone)]
pub struct Tracker {
    period: f64,
    series: InterfaceSeries,
    prev: Option<(usize, f64, bool)>,
    seen: Vec<Event>,
}

impl Tracker {
    pub fn new(period: f64) -> Self {
        Self { period, series: InterfaceSeries::default(), prev: None, seen: Vec::new() }
    }

    pub fn push(&mut self, s: &State2D, grid: &PeriodicGrid2D) -> Sample {
        self.push_contours(s.tau, extract_contours(s, grid))
    }

    pub fn push_contours(&mut self, tau: f64, contours: Vec<Contour>) -> Sample {
        let (mut sample, crossing) = measure(tau, contours, self.period);
        let wraps = sample.contours.iter().any(|c| !c.closed);
        let mut event = None;
        if sample.components == 0 {
            event = Some(Event::Collapse);
        } else if let Some((comps, len, prev_wraps)) = self.prev {
            if crossing || comps != sample.components || (wraps && !prev_wraps) {
                event = Some(Event::SelfIntersection);
            } else if sample.components == 1 && sample.length > len {
                event = Some(Event::Buckling);
            }
        }
        let event = event.filter(|e| !self.seen.contains(e));
        if let Some(e) = event {
            self.seen.push(e);
        }
        sample.event = event;
        self.prev = Some((sample.components, sample.length, wraps));
        self.series.times.push(tau);
        self.series.lengths.push(sample.length);
        self.series.max_curvature.push(sample.max_curvature);
        self.series.component_count.push(sample.components);
        self.series.events.push(event);
        sample
    }

    pub fn series(&self) -> &InterfaceSeries {
        &self.series
    }

    pub fn into_series(self) -> InterfaceSeries {
        self.series
    }
}

/// Series for a stored sequence of snapshots.
pub fn track(states: &[State2D], grid: &PeriodicGrid2D) -> InterfaceSeries {
    let mut t = Tracker::new(grid.box_len);
    for s in states {
        t.push(s, grid);
    }
    t.into_series()
}
