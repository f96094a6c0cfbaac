//! Line coordinate `z`, front profiles and the 1D operators `C`, `D`, `L`.
//!
//! Grid: cell-centred uniform nodes on `[−Z, Z]`, midpoint weights.
//! Derivatives: 8th-order centred stencils closed by even reflection
//! (homogeneous Neumann), which keeps the second-difference matrix exactly
//! symmetric.

use std::io::Write;
use std::path::Path;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LineError {
    #[error("truncation/resolution too coarse (Z = {half_width}, n = {n})")]
    TooCoarse { half_width: f64, n: usize },
    #[error("Fredholm solvability violated (relative kernel component {0:.3e})")]
    Fredholm(f64),
    #[error("near-singular D at mu = {0:.3e}; use the mu = 0 closed-form branch")]
    NearSingular(f64),
    #[error("singular pivot in banded LU at row {0}")]
    SingularPivot(usize),
    #[error("grid mismatch ({0} vs {1} nodes)")]
    GridMismatch(usize, usize),
}

/// Below this |μ| the D-solver switches to the μ = 0 pseudo-inverse.
pub const MU_BRANCH: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LineGrid {
    pub half_width: f64,
    pub n: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LineGrid {
    pub fn new(half_width: f64, n: usize) -> Result<Self, LineError> {
        let coarse = LineError::TooCoarse { half_width, n };
        if !(half_width >= 10.0) || n < 256 || n % 2 != 0 {
            return Err(coarse);
        }
        if (-2.0 * half_width).exp() >= 1e-12 {
            return Err(coarse);
        }
        let h = 2.0 * half_width / n as f64;
        let nodes = (0..n).map(|j| -half_width + (j as f64 + 0.5) * h).collect();
        Ok(LineGrid { half_width, n, h, nodes, weights: vec![h; n] })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&z| f(z)).collect()
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.n);
        debug_assert_eq!(b.len(), self.n);
        a.iter().zip(b).zip(&self.weights).map(|((x, y), w)| x * y * w).sum()
    }

    pub fn try_inner(&self, a: &[f64], b: &[f64]) -> Result<f64, LineError> {
        if a.len() != self.n {
            return Err(LineError::GridMismatch(a.len(), self.n));
        }
        if b.len() != self.n {
            return Err(LineError::GridMismatch(b.len(), self.n));
        }
        Ok(self.inner(a, b))
    }

    pub fn norm_sq(&self, a: &[f64]) -> f64 {
        self.inner(a, a)
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.norm_sq(a).sqrt()
    }

    /// Column index of `i + d` after even reflection about the end faces.
    pub fn reflect(&self, i: usize, d: isize) -> usize {
        let n = self.n as isize;
        let mut j = i as isize + d;
        if j < 0 {
            j = -1 - j;
        }
        if j >= n {
            j = 2 * n - 1 - j;
        }
        j as usize
    }

    /// Remove the `v` component (quadrature inner product).
    pub fn project_out(&self, x: &mut [f64], v: &[f64]) {
        let c = self.inner(x, v) / self.norm_sq(v);
        for (xi, vi) in x.iter_mut().zip(v) {
            *xi -= c * vi;
        }
    }
}

/// Quadrature-weighted inner product of two vector profiles.
pub fn inner_vec(g: &LineGrid, a: &VectorProfile, b: &VectorProfile) -> f64 {
    g.inner(&a.p, &b.p) + g.inner(&a.q, &b.q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorProfile {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl VectorProfile {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Self {
        assert_eq!(p.len(), q.len());
        VectorProfile { p, q }
    }

    pub fn scaled(&self, s: f64) -> Self {
        VectorProfile {
            p: self.p.iter().map(|x| x * s).collect(),
            q: self.q.iter().map(|x| x * s).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FrontProfiles {
    /// tanh z
    pub phi: Vec<f64>,
    /// sech z
    pub psi: Vec<f64>,
    /// sech² z
    pub dphi: Vec<f64>,
}

pub fn front_profiles(g: &LineGrid) -> FrontProfiles {
    FrontProfiles {
        phi: g.map(f64::tanh),
        psi: g.map(|z| 1.0 / z.cosh()),
        dphi: g.map(|z| {
            let s = 1.0 / z.cosh();
            s * s
        }),
    }
}

/// `(even, odd)` parts under `z ↦ −z`.
pub fn parity_split(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let even = (0..n).map(|j| 0.5 * (x[j] + x[n - 1 - j])).collect();
    let odd = (0..n).map(|j| 0.5 * (x[j] - x[n - 1 - j])).collect();
    (even, odd)
}

// ---------------------------------------------------------------------------
// banded matrices

const D2: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
const D1: [f64; 5] = [0.0, 4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
const HALF_BAND: usize = 4;

/// Square banded matrix, rows stored over columns `i−w ..= i+w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub n: usize,
    pub w: usize,
    data: Vec<f64>,
}

impl Band {
    pub fn zeros(n: usize, w: usize) -> Self {
        Band { n, w, data: vec![0.0; n * (2 * w + 1)] }
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.w as isize;
        (off >= 0 && off <= 2 * self.w as isize && j < self.n).then(|| i * (2 * self.w + 1) + off as usize)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.data[k])
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.slot(i, j).expect("entry outside band");
        self.data[k] += v;
    }

    pub fn add_diag(&mut self, d: &[f64]) {
        for (i, v) in d.iter().enumerate() {
            self.add(i, i, *v);
        }
    }

    pub fn scaled(&self, s: f64) -> Band {
        Band { n: self.n, w: self.w, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let (n, w) = (self.n, self.w);
        let mut y = vec![0.0; n];
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(w);
            let hi = (i + w).min(n - 1);
            let row = &self.data[i * (2 * w + 1)..];
            let mut s = 0.0;
            for j in lo..=hi {
                s += row[j + w - i] * x[j];
            }
            *yi = s;
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in i.saturating_sub(self.w)..=(i + self.w).min(self.n - 1) {
                m = m.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        m
    }

    pub fn lu(&self) -> Result<BandLu, LineError> {
        BandLu::factor(self)
    }
}

fn stencil_band(g: &LineGrid, coef: &[f64; 5], odd: bool, scale: f64) -> Band {
    let mut b = Band::zeros(g.n, HALF_BAND);
    for i in 0..g.n {
        for d in -(HALF_BAND as isize)..=(HALF_BAND as isize) {
            let c = coef[d.unsigned_abs()] * if odd && d < 0 { -1.0 } else { 1.0 };
            if c != 0.0 {
                b.add(i, g.reflect(i, d), c * scale);
            }
        }
    }
    b
}

/// Discrete `∂_z²`.
pub fn second_derivative(g: &LineGrid) -> Band {
    stencil_band(g, &D2, false, 1.0 / (g.h * g.h))
}

/// Discrete `∂_z`.
pub fn first_derivative(g: &LineGrid) -> Band {
    stencil_band(g, &D1, true, 1.0 / g.h)
}

/// LU factors of a banded matrix with partial pivoting (upper fill `2w`).
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    width: usize,
    data: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    pub fn factor(a: &Band) -> Result<Self, LineError> {
        let (n, kl) = (a.n, a.w);
        let width = 3 * kl + 1;
        let mut lu = BandLu { n, kl, width, data: vec![0.0; n * width], piv: vec![0; n] };
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + kl).min(n - 1) {
                let k = lu.idx(i, j);
                lu.data[k] = a.get(i, j);
            }
        }
        let scale = lu.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.data[lu.idx(k, k)].abs();
            for i in k + 1..=last {
                let v = lu.data[lu.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= scale * 1e-300 {
                return Err(LineError::SingularPivot(k));
            }
            lu.piv[k] = p;
            let jmax = (k + 2 * kl).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (a, b) = (lu.idx(k, j), lu.idx(p, j));
                    lu.data.swap(a, b);
                }
            }
            let pivot = lu.data[lu.idx(k, k)];
            for i in k + 1..=last {
                let ik = lu.idx(i, k);
                let l = lu.data[ik] / pivot;
                lu.data[ik] = l;
                if l != 0.0 {
                    for j in k + 1..=jmax {
                        let kj = lu.data[lu.idx(k, j)];
                        let ij = lu.idx(i, j);
                        lu.data[ij] -= l * kj;
                    }
                }
            }
        }
        Ok(lu)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, kl) = (self.n, self.kl);
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                x[i] -= self.data[self.idx(i, k)] * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + 2 * kl).min(n - 1) {
                s -= self.data[self.idx(k, j)] * x[j];
            }
            x[k] = s / self.data[self.idx(k, k)];
        }
        x
    }
}

// ---------------------------------------------------------------------------
// operators

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum OpKind {
    C,
    D,
    L,
}

/// `C = −∂² − 6ψ² + 4`
pub fn c_band(g: &LineGrid, f: &FrontProfiles) -> Band {
    let mut b = second_derivative(g).scaled(-1.0);
    b.add_diag(&f.psi.iter().map(|s| 4.0 - 6.0 * s * s).collect::<Vec<_>>());
    b
}

/// `D = −∂² − 2ψ² + μ + 1`
pub fn d_band(g: &LineGrid, f: &FrontProfiles, mu: f64) -> Band {
    let mut b = second_derivative(g).scaled(-1.0);
    b.add_diag(&f.psi.iter().map(|s| mu + 1.0 - 2.0 * s * s).collect::<Vec<_>>());
    b
}

#[derive(Debug, Clone)]
pub struct LineOperator {
    pub kind: OpKind,
    pub mu: f64,
    pub beta: f64,
    c: Band,
    d: Band,
}

/// Assemble `C`, `D`, or the block `L = [[0, D], [−C, −β]]`.
pub fn assemble(kind: OpKind, mu: f64, beta: f64, g: &LineGrid) -> LineOperator {
    let f = front_profiles(g);
    LineOperator { kind, mu, beta, c: c_band(g, &f), d: d_band(g, &f, mu) }
}

impl LineOperator {
    pub fn from_parts(kind: OpKind, mu: f64, beta: f64, c: Band, d: Band) -> Self {
        LineOperator { kind, mu, beta, c, d }
    }

    pub fn c(&self) -> &Band {
        &self.c
    }

    pub fn d(&self) -> &Band {
        &self.d
    }

    /// Scalar action for kinds `C` and `D`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self.kind {
            OpKind::C => self.c.apply(x),
            OpKind::D => self.d.apply(x),
            OpKind::L => panic!("L acts on vector profiles"),
        }
    }

    /// Action of `L` on `(P₁, P₂)`.
    pub fn apply_l(&self, u: &VectorProfile) -> VectorProfile {
        let dq = self.d.apply(&u.q);
        let cp = self.c.apply(&u.p);
        let q = cp.iter().zip(&u.q).map(|(c, q)| -c - self.beta * q).collect();
        VectorProfile { p: dq, q }
    }

    /// Action of `Lᵀ`: `(−C P₂, D P₁ − β P₂)`.
    pub fn apply_lt(&self, u: &VectorProfile) -> VectorProfile {
        let cq = self.c.apply(&u.q);
        let dp = self.d.apply(&u.p);
        VectorProfile {
            p: cq.iter().map(|x| -x).collect(),
            q: dp.iter().zip(&u.q).map(|(d, q)| d - self.beta * q).collect(),
        }
    }

    /// Dense row-major matrix (`n×n` for `C`, `D`; `2n×2n` for `L`).
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        match self.kind {
            OpKind::C => self.c.to_dense(),
            OpKind::D => self.d.to_dense(),
            OpKind::L => {
                let n = self.c.n;
                let mut m = vec![vec![0.0; 2 * n]; 2 * n];
                for i in 0..n {
                    for j in i.saturating_sub(self.c.w)..=(i + self.c.w).min(n - 1) {
                        m[i][n + j] = self.d.get(i, j);
                        m[n + i][j] = -self.c.get(i, j);
                    }
                    m[n + i][n + i] = -self.beta;
                }
                m
            }
        }
    }
}

// ---------------------------------------------------------------------------
// solvers

/// `D⁻¹`; pseudo-inverse on `ψ^⊥` when `|μ| < MU_BRANCH`.
#[derive(Debug, Clone)]
pub struct DSolver {
    pub mu: f64,
    band: Band,
    lu: BandLu,
    psi: Vec<f64>,
    grid: LineGrid,
}

impl DSolver {
    pub fn new(g: &LineGrid, mu: f64) -> Result<Self, LineError> {
        let f = front_profiles(g);
        let band = d_band(g, &f, mu);
        // at μ ≈ 0 the discrete ψ-eigenvalue is small but nonzero, so D still factors
        let lu = band.lu()?;
        Ok(DSolver { mu, band, lu, psi: f.psi, grid: g.clone() })
    }

    pub fn is_singular_branch(&self) -> bool {
        self.mu.abs() < MU_BRANCH
    }

    /// Generic solve; errors on the singular branch.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LineError> {
        if self.is_singular_branch() {
            return Err(LineError::NearSingular(self.mu));
        }
        let mut x = self.lu.solve(rhs);
        self.refine(&mut x, rhs, |v| self.lu.solve(v));
        Ok(x)
    }

    /// Solve on `ψ^⊥` with output orthogonal to `ψ` (the `μ = 0` branch).
    pub fn solve_perp(&self, rhs: &[f64]) -> Result<Vec<f64>, LineError> {
        let g = &self.grid;
        let ratio = g.inner(rhs, &self.psi).abs() / (g.norm(rhs) * g.norm(&self.psi)).max(1e-300);
        if ratio > 1e-8 {
            return Err(LineError::Fredholm(ratio));
        }
        let mut b = rhs.to_vec();
        g.project_out(&mut b, &self.psi);
        let mut x = self.lu.solve(&b);
        g.project_out(&mut x, &self.psi);
        for _ in 0..2 {
            let mut r: Vec<f64> = self.band.apply(&x).iter().zip(&b).map(|(a, b)| b - a).collect();
            g.project_out(&mut r, &self.psi);
            let mut dx = self.lu.solve(&r);
            g.project_out(&mut dx, &self.psi);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        Ok(x)
    }

    fn refine(&self, x: &mut [f64], rhs: &[f64], inv: impl Fn(&[f64]) -> Vec<f64>) {
        let r: Vec<f64> = self.band.apply(x).iter().zip(rhs).map(|(a, b)| b - a).collect();
        let dx = inv(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }

    pub fn band(&self) -> &Band {
        &self.band
    }
}

/// Pseudo-inverse of `C` with output orthogonal to `φ′`.
#[derive(Debug, Clone)]
pub struct CSolver {
    band: Band,
    lu: BandLu,
    dphi: Vec<f64>,
    grid: LineGrid,
}

impl CSolver {
    pub fn new(g: &LineGrid) -> Result<Self, LineError> {
        let f = front_profiles(g);
        let band = c_band(g, &f);
        // the discrete kernel is only approximate, so C itself factors
        let lu = band.lu()?;
        Ok(CSolver { band, lu, dphi: f.dphi, grid: g.clone() })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LineError> {
        let g = &self.grid;
        let nr = g.norm(rhs);
        if nr == 0.0 {
            return Ok(vec![0.0; g.n]);
        }
        let ratio = g.inner(rhs, &self.dphi).abs() / (nr * g.norm(&self.dphi));
        if ratio > 1e-8 {
            return Err(LineError::Fredholm(ratio));
        }
        let mut b = rhs.to_vec();
        g.project_out(&mut b, &self.dphi);
        let mut x = self.lu.solve(&b);
        g.project_out(&mut x, &self.dphi);
        for _ in 0..2 {
            let mut r: Vec<f64> = self.band.apply(&x).iter().zip(&b).map(|(a, b)| b - a).collect();
            g.project_out(&mut r, &self.dphi);
            let mut dx = self.lu.solve(&r);
            g.project_out(&mut dx, &self.dphi);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        Ok(x)
    }

    pub fn band(&self) -> &Band {
        &self.band
    }
}

/// Write a profile as two-column CSV `(z, value)`.
pub fn write_profile_csv(path: &Path, g: &LineGrid, values: &[f64]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "z,value")?;
    for (z, v) in g.nodes.iter().zip(values) {
        writeln!(w, "{z:.17e},{v:.17e}")?;
    }
    Ok(())
}
