//! Spectrum of the front linearization `L`: essential-spectrum bound,
//! the constrained quotient `ρ*`, dense point spectrum and kernel pair.

use faer::{Mat, Side};
use num_complex::Complex64;
use serde::Serialize;

use crate::line1d::{
    assemble, c_band, d_band, front_profiles, Band, DSolver, LineError, LineGrid, OpKind, VectorProfile,
};

#[derive(Debug, thiserror::Error)]
pub enum SpectrumError {
    #[error(transparent)]
    Line(#[from] LineError),
    #[error("eigensolver did not converge")]
    NoConvergence,
    #[error("D is not positive definite on the constraint space (rho* undefined)")]
    Indefinite,
}

/// Both roots `λ = (−β ± √(β² − 4(s²+1+μ)(s²+4)))/2`.
pub fn essential_dispersion(s: f64, mu: f64, beta: f64) -> (Complex64, Complex64) {
    let s2 = s * s;
    let disc = Complex64::new(beta * beta - 4.0 * (s2 + 1.0 + mu) * (s2 + 4.0), 0.0).sqrt();
    ((-beta + disc) / 2.0, (-beta - disc) / 2.0)
}

/// Largest real part over the essential spectrum (attained at `s = 0`).
pub fn lambda_ess(mu: f64, beta: f64) -> f64 {
    essential_dispersion(0.0, mu, beta).0.re
}

fn band_product(a: &Band, b: &Band) -> Band {
    let n = a.n;
    let w = a.w + b.w;
    let mut out = Band::zeros(n, w);
    for i in 0..n {
        for k in i.saturating_sub(a.w)..=(i + a.w).min(n - 1) {
            let aik = a.get(i, k);
            if aik == 0.0 {
                continue;
            }
            for j in k.saturating_sub(b.w)..=(k + b.w).min(n - 1) {
                out.add(i, j, aik * b.get(k, j));
            }
        }
    }
    out
}

fn band_to_mat(b: &Band) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(b.n, b.n);
    for i in 0..b.n {
        for j in i.saturating_sub(b.w)..=(i + b.w).min(b.n - 1) {
            m[(i, j)] = b.get(i, j);
        }
    }
    m
}

/// `Q̃ᵀ A Q̃` where `Q̃` spans the orthogonal complement of `u` (Householder).
fn restrict_symmetric(a: &Mat<f64>, u: &[f64]) -> Mat<f64> {
    let n = u.len();
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut v: Vec<f64> = u.iter().map(|x| x / nu).collect();
    v[0] += if v[0] >= 0.0 { 1.0 } else { -1.0 };
    let tau = 2.0 / v.iter().map(|x| x * x).sum::<f64>();
    let p: Vec<f64> = (0..n).map(|i| tau * (0..n).map(|j| a[(i, j)] * v[j]).sum::<f64>()).collect();
    let k = 0.5 * tau * v.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>();
    let w: Vec<f64> = p.iter().zip(&v).map(|(p, v)| p - k * v).collect();
    Mat::from_fn(n - 1, n - 1, |i, j| {
        let (i, j) = (i + 1, j + 1);
        a[(i, j)] - v[i] * w[j] - w[i] * v[j]
    })
}

/// Restricted pencil `(DCD, D)` on `φ′^⊥`; `x = Dy` turns the quotient
/// `⟨Cx,x⟩/⟨D⁻¹x,x⟩` over `x ⊥ D⁻¹φ′` into `⟨DCDy,y⟩/⟨Dy,y⟩` over `y ⊥ φ′`.
fn constrained_pencil(mu: f64, grid: &LineGrid) -> (Mat<f64>, Mat<f64>) {
    let f = front_profiles(grid);
    let c = c_band(grid, &f);
    let d = d_band(grid, &f, mu);
    let dcd = band_product(&band_product(&d, &c), &d);
    let k = restrict_symmetric(&band_to_mat(&dcd), &f.dphi);
    let m = restrict_symmetric(&band_to_mat(&d), &f.dphi);
    (k, m)
}

/// Eigenvalues (ascending) of the constrained quotient; the first is `ρ*`.
pub fn constrained_quotient_spectrum(mu: f64, grid: &LineGrid) -> Result<Vec<f64>, SpectrumError> {
    let (k, m) = constrained_pencil(mu, grid);
    let llt = m.llt(Side::Lower).map_err(|_| SpectrumError::Indefinite)?;
    let l = llt.L().to_owned();
    let par = faer::get_global_parallelism();
    // S = L⁻¹ K L⁻ᵀ
    let mut x = k;
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), x.as_mut(), par);
    let mut s = x.transpose().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), s.as_mut(), par);
    let n = s.nrows();
    let sym = Mat::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    sym.self_adjoint_eigenvalues(Side::Lower).map_err(|_| SpectrumError::NoConvergence)
}

/// `ρ*(μ) = min ⟨CP,P⟩/⟨D⁻¹P,P⟩` over `P ⊥ D⁻¹φ′`.
///
/// The dense pencil gives the estimate; forming `DCD` costs digits, so the
/// value is polished by shifted inverse iteration on
/// `(CD − σ)y = λD⁻¹φ′`, `y ⊥ φ′`, `P = Dy`.
pub fn rho_star(mu: f64, grid: &LineGrid) -> Result<f64, SpectrumError> {
    let est = constrained_quotient_spectrum(mu, grid)?[0];
    polish_rho(mu, grid, est)
}

fn polish_rho(mu: f64, grid: &LineGrid, estimate: f64) -> Result<f64, SpectrumError> {
    let f = front_profiles(grid);
    let c = c_band(grid, &f);
    let d = d_band(grid, &f, mu);
    let ds = DSolver::new(grid, mu)?;
    // direction of D⁻¹φ′ (ψ in the μ → 0 limit)
    let mut w = if ds.is_singular_branch() { f.psi.clone() } else { ds.solve(&f.dphi)? };
    let nw = grid.norm(&w);
    w.iter_mut().for_each(|x| *x /= nw);
    let mut a = band_product(&c, &d);
    let sigma = estimate - 1e-6 * estimate.abs().max(1.0);
    a.add_diag(&vec![-sigma; grid.n]);
    let lu = a.lu()?;
    let yw = lu.solve(&w);
    let yw_phi = grid.inner(&yw, &f.dphi);
    let mut y: Vec<f64> = grid.map(|z| (-z * z / 4.0).exp() * (1.0 + 0.3 * z));
    grid.project_out(&mut y, &f.dphi);
    let mut rho = estimate;
    for _ in 0..50 {
        let yb = lu.solve(&y);
        let lam = -grid.inner(&yb, &f.dphi) / yw_phi;
        let mut ny: Vec<f64> = yb.iter().zip(&yw).map(|(b, w)| b + lam * w).collect();
        let nn = grid.norm(&ny);
        ny.iter_mut().for_each(|v| *v /= nn);
        let x = d.apply(&ny);
        let next = grid.inner(&c.apply(&x), &x) / grid.inner(&x, &ny);
        let done = (next - rho).abs() <= 1e-14 * next.abs().max(1.0);
        rho = next;
        y = ny;
        if done {
            break;
        }
    }
    Ok(rho)
}

/// Smallest eigenvalue of `D` restricted to `φ′^⊥` (positivity check).
pub fn d_min_on_constraint(mu: f64, grid: &LineGrid) -> Result<f64, SpectrumError> {
    let (_, m) = constrained_pencil(mu, grid);
    Ok(m.self_adjoint_eigenvalues(Side::Lower).map_err(|_| SpectrumError::NoConvergence)?[0])
}

/// `L` with unknowns interleaved as `(p₀, q₀, p₁, q₁, …)`, half-bandwidth 9.
pub fn interleaved_l(mu: f64, beta: f64, grid: &LineGrid, shift: f64) -> Band {
    let f = front_profiles(grid);
    let c = c_band(grid, &f);
    let d = d_band(grid, &f, mu);
    let n = grid.n;
    let mut b = Band::zeros(2 * n, 2 * c.w + 1);
    for i in 0..n {
        for j in i.saturating_sub(c.w)..=(i + c.w).min(n - 1) {
            b.add(2 * i, 2 * j + 1, d.get(i, j));
            b.add(2 * i + 1, 2 * j, -c.get(i, j));
        }
        b.add(2 * i + 1, 2 * i + 1, -beta);
        b.add(2 * i, 2 * i, -shift);
        b.add(2 * i + 1, 2 * i + 1, -shift);
    }
    b
}

fn transpose_band(b: &Band) -> Band {
    let mut t = Band::zeros(b.n, b.w);
    for i in 0..b.n {
        for j in i.saturating_sub(b.w)..=(i + b.w).min(b.n - 1) {
            t.add(j, i, b.get(i, j));
        }
    }
    t
}

fn inverse_iteration(a: &Band, start: Vec<f64>) -> Result<Vec<f64>, SpectrumError> {
    let lu = a.lu()?;
    let mut x = start;
    for _ in 0..4 {
        x = lu.solve(&x);
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= nx);
    }
    Ok(x)
}

fn split(x: &[f64]) -> VectorProfile {
    VectorProfile::new(x.iter().step_by(2).copied().collect(), x.iter().skip(1).step_by(2).copied().collect())
}

fn unit(g: &LineGrid, v: VectorProfile) -> VectorProfile {
    let n = (g.norm_sq(&v.p) + g.norm_sq(&v.q)).sqrt();
    let s = if g.inner(&v.p, &v.p) >= g.inner(&v.q, &v.q) {
        v.p.iter().sum::<f64>().signum()
    } else {
        v.q.iter().sum::<f64>().signum()
    };
    v.scaled(s / n)
}

#[derive(Debug, Clone)]
pub struct KernelPair {
    /// unit `Ψ₀ ∝ (φ′, 0)`
    pub psi0: VectorProfile,
    /// unit `Ψ₀† ∝ (βD⁻¹φ′, φ′)`, or `(ψ, 0)` at `μ = 0`
    pub psi0_adj: VectorProfile,
    pub residual: f64,
    pub residual_adj: f64,
}

pub fn kernel_pair(mu: f64, beta: f64, grid: &LineGrid) -> Result<KernelPair, SpectrumError> {
    let f = front_profiles(grid);
    let zeros = vec![0.0; grid.n];
    let ds = DSolver::new(grid, mu)?;
    let psi0 = unit(grid, VectorProfile::new(f.dphi.clone(), zeros.clone()));
    let psi0_adj = if ds.is_singular_branch() {
        unit(grid, VectorProfile::new(f.psi.clone(), zeros))
    } else {
        let w = ds.solve(&f.dphi)?;
        unit(grid, VectorProfile::new(w.iter().map(|x| beta * x).collect(), f.dphi.clone()))
    };
    let op = assemble(OpKind::L, mu, beta, grid);
    let r = op.apply_l(&psi0);
    let ra = op.apply_lt(&psi0_adj);
    let nrm = |v: &VectorProfile| (grid.norm_sq(&v.p) + grid.norm_sq(&v.q)).sqrt();
    Ok(KernelPair { residual: nrm(&r), residual_adj: nrm(&ra), psi0, psi0_adj })
}

/// Kernel vectors of the discrete `L` and `Lᵀ` by inverse iteration.
pub fn discrete_kernel(mu: f64, beta: f64, grid: &LineGrid) -> Result<(VectorProfile, VectorProfile), SpectrumError> {
    let l = interleaved_l(mu, beta, grid, 0.0);
    let start: Vec<f64> = (0..2 * grid.n).map(|i| 1.0 + 1e-3 * (i % 7) as f64).collect();
    let right = inverse_iteration(&l, start.clone())?;
    let left = inverse_iteration(&transpose_band(&l), start)?;
    Ok((unit(grid, split(&right)), unit(grid, split(&left))))
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub mu: f64,
    pub beta: f64,
    pub n: usize,
    pub half_width: f64,
    pub lambda_ess: f64,
    pub rho_star: Option<f64>,
    /// max Re λ over eigenvalues outside the kernel
    pub gap: f64,
    pub kernel_dim: usize,
    /// an eigenvalue within 1e−6 of `−β` (the `P₁ ∝ φ′` branch)
    pub minus_beta: bool,
    /// `1 − |⟨v, Ψ₀⟩|` for the discrete kernel vector `v`
    pub kernel_alignment: f64,
    /// `[re, im]`, the 64 entries with largest real part
    pub eigenvalues: Vec<[f64; 2]>,
}

impl SpectrumReport {
    pub fn certified(&self) -> bool {
        self.kernel_dim == 1 && self.gap < 0.0
    }
}

/// Eigenvalues of the dense `2n×2n` discretized `L`.
pub fn dense_eigenvalues(mu: f64, beta: f64, grid: &LineGrid) -> Result<Vec<Complex64>, SpectrumError> {
    let op = assemble(OpKind::L, mu, beta, grid);
    let n = 2 * grid.n;
    let mut m = Mat::<f64>::zeros(n, n);
    let (c, d) = (op.c(), op.d());
    for i in 0..grid.n {
        for j in i.saturating_sub(c.w)..=(i + c.w).min(grid.n - 1) {
            m[(i, grid.n + j)] = d.get(i, j);
            m[(grid.n + i, j)] = -c.get(i, j);
        }
        m[(grid.n + i, grid.n + i)] = -beta;
    }
    let ev = m.eigenvalues().map_err(|_| SpectrumError::NoConvergence)?;
    Ok(ev.into_iter().map(|z| Complex64::new(z.re, z.im)).collect())
}

pub fn point_spectrum(mu: f64, beta: f64, grid: &LineGrid) -> Result<SpectrumReport, SpectrumError> {
    let mut ev = dense_eigenvalues(mu, beta, grid)?;
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let kernel_dim = ev.iter().filter(|z| z.norm() < 1e-6).count();
    let gap = ev.iter().filter(|z| z.norm() >= 1e-6).map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let minus_beta = ev.iter().any(|z| (z + beta).norm() < 1e-6);
    let rho = rho_star(mu, grid).ok();
    let (v, _) = discrete_kernel(mu, beta, grid)?;
    let k = kernel_pair(mu, beta, grid)?;
    let align = (grid.inner(&v.p, &k.psi0.p) + grid.inner(&v.q, &k.psi0.q)).abs();
    Ok(SpectrumReport {
        mu,
        beta,
        n: grid.n,
        half_width: grid.half_width,
        lambda_ess: lambda_ess(mu, beta),
        rho_star: rho,
        gap,
        kernel_dim,
        minus_beta,
        kernel_alignment: 1.0 - align,
        eigenvalues: ev.iter().take(64).map(|z| [z.re, z.im]).collect(),
    })
}
