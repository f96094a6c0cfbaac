//! Curvature-flow coefficients `α₀`, `ν`, `ζ` of the normal velocity
//! `V = −α₀κ₀ + ε²(νΔ_sκ₀ + ζκ₀³)`, built from the inner-expansion profiles.

use serde::Serialize;

use crate::line1d::{
    first_derivative, front_profiles, inner_vec, parity_split, Band, CSolver, DSolver, FrontProfiles,
    LineError, LineGrid, LineOperator, OpKind, VectorProfile, MU_BRANCH,
};

#[derive(Debug, thiserror::Error)]
pub enum CoefError {
    #[error(transparent)]
    Line(#[from] LineError),
    #[error("parity violation in {what}: {value:.3e}")]
    Parity { what: &'static str, value: f64 },
    #[error("nu routes disagree: {0:.3e}")]
    RouteMismatch(f64),
    #[error("mu = {0} outside the supported range")]
    MuOutOfRange(f64),
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    pub norm_u1: f64,
    pub norm_u2: f64,
    /// ν from the closed expansion (second route).
    pub nu_closed: f64,
    /// `|α₀ β⟨D⁻¹φ′,φ′⟩ − ‖φ′‖²|`
    pub alpha0_identity: f64,
    /// largest wrong-parity component over ω̄₁, ω̄₂, Ū₁, Ū₂
    pub parity: f64,
    /// `|⟨βD⁻¹ω̄₁ + ω̄₂, φ′⟩|`
    pub c_solvability: f64,
    /// `‖LŪ₁ − (α₀φ′, −φ′)‖`
    pub u1_residual: f64,
    /// `‖LŪ₂ − (ω̄₁, ω̄₂)‖`
    pub u2_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientRecord {
    pub mu: f64,
    pub beta: f64,
    pub alpha0: f64,
    pub nu: f64,
    pub zeta: f64,
    pub diagnostics: Diagnostics,
}

/// Adjoint kernel vector with the shared denominator: coefficients are
/// `⟨W, Ψ₀†⟩ / den`.
#[derive(Debug, Clone)]
pub struct Pairing {
    pub adjoint: VectorProfile,
    pub den: f64,
}

/// All inner-expansion profiles at one `(μ, β)`.
#[derive(Debug, Clone)]
pub struct InnerExpansion {
    pub grid: LineGrid,
    pub mu: f64,
    pub beta: f64,
    pub front: FrontProfiles,
    pub dz: Band,
    pub dsolve: DSolver,
    pub csolve: CSolver,
    /// `D⁻¹φ′` (absent on the μ = 0 branch)
    pub w: Option<Vec<f64>>,
    pub pairing: Pairing,
    pub alpha0: f64,
    pub u1: VectorProfile,
    pub omega1: Vec<f64>,
    pub omega2: Vec<f64>,
    pub u2: VectorProfile,
    pub w1: VectorProfile,
    pub w2: VectorProfile,
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(x, y)| a * x + y).collect()
}

fn mul(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a * b).collect()
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn wrong_parity(g: &LineGrid, x: &[f64], want_even: bool) -> f64 {
    let (e, o) = parity_split(x);
    let bad = if want_even { o } else { e };
    g.norm(&bad) / g.norm(x).max(1e-300)
}

impl InnerExpansion {
    pub fn new(mu: f64, beta: f64, grid: &LineGrid) -> Result<Self, CoefError> {
        if !(-1.0..=3.0).contains(&mu) || mu <= -1.0 {
            return Err(CoefError::MuOutOfRange(mu));
        }
        let g = grid.clone();
        let f = front_profiles(&g);
        let dz = first_derivative(&g);
        let dsolve = DSolver::new(&g, mu)?;
        let csolve = CSolver::new(&g)?;
        let n2 = g.norm_sq(&f.dphi);
        let zeros = vec![0.0; g.n];

        let (w, pairing, alpha0, q1) = if dsolve.is_singular_branch() {
            let c = n2 / (beta * g.inner(&f.dphi, &f.psi));
            let pairing = Pairing {
                adjoint: VectorProfile::new(f.psi.clone(), zeros.clone()),
                den: g.inner(&f.dphi, &f.psi),
            };
            (None, pairing, 0.0, f.psi.iter().map(|s| c * s).collect::<Vec<_>>())
        } else {
            let w = dsolve.solve(&f.dphi)?;
            let den = beta * g.inner(&w, &f.dphi);
            let alpha0 = n2 / den;
            let pairing = Pairing {
                adjoint: VectorProfile::new(w.iter().map(|x| beta * x).collect(), f.dphi.clone()),
                den,
            };
            let q1 = w.iter().map(|x| alpha0 * x).collect();
            (Some(w), pairing, alpha0, q1)
        };

        // Ū₁ = (C⁺(φ′ − βq̄₁), q̄₁)
        let mut rhs1: Vec<f64> = f.dphi.iter().zip(&q1).map(|(d, q)| d - beta * q).collect();
        // ⊥ φ′ by the choice of α₀; for tiny μ, w ~ 1/μ leaves cancellation noise
        g.project_out(&mut rhs1, &f.dphi);
        let p1 = csolve.solve(&rhs1)?;
        let u1 = VectorProfile::new(p1, q1);
        let (p1, q1) = (&u1.p, &u1.q);
        let u1sq: Vec<f64> = p1.iter().zip(q1).map(|(p, q)| p * p + q * q).collect();
        let z = &g.nodes;

        // ω̄₁ = ∂(q̄₁ + α₀p̄₁) − 4φp̄₁q̄₁
        let d1 = dz.apply(&axpy(alpha0, p1, q1));
        let omega1: Vec<f64> = (0..g.n).map(|i| d1[i] - 4.0 * f.phi[i] * p1[i] * q1[i]).collect();
        // ω̄₂ = ∂(α₀q̄₁ − p̄₁) + 4φp̄₁² + 2|Ū₁|²φ + zφ′
        let d2 = dz.apply(&axpy(alpha0, q1, &p1.iter().map(|x| -x).collect::<Vec<_>>()));
        let omega2: Vec<f64> = (0..g.n)
            .map(|i| d2[i] + 4.0 * f.phi[i] * p1[i] * p1[i] + 2.0 * u1sq[i] * f.phi[i] + z[i] * f.dphi[i])
            .collect();
        for (what, v) in [("omega1", &omega1), ("omega2", &omega2)] {
            let e = wrong_parity(&g, v, false);
            if e > 1e-8 {
                return Err(CoefError::Parity { what, value: e });
            }
        }
        // exact odd parts: D⁻¹ amplifies even roundoff along ψ by 1/μ
        let omega1 = parity_split(&omega1).1;
        let omega2 = parity_split(&omega2).1;

        // Ū₂ = (−C⁺(βq̄₂ + ω̄₂), D⁻¹ω̄₁)
        let q2 = if dsolve.is_singular_branch() { dsolve.solve_perp(&omega1)? } else { dsolve.solve(&omega1)? };
        let q2 = parity_split(&q2).1;
        let rhs2 = axpy(beta, &q2, &omega2);
        let p2: Vec<f64> = csolve.solve(&rhs2)?.iter().map(|x| -x).collect();
        let u2 = VectorProfile::new(p2, q2);
        let (p2, q2) = (&u2.p, &u2.q);

        let w1 = VectorProfile::new(axpy(alpha0, p1, q1), axpy(alpha0, q1, &p1.iter().map(|x| -x).collect::<Vec<_>>()));

        let dp1 = dz.apply(p1);
        let dq1 = dz.apply(q1);
        let dp2 = dz.apply(p2);
        let dq2 = dz.apply(q2);
        let u12: Vec<f64> = (0..g.n).map(|i| p1[i] * p2[i] + q1[i] * q2[i]).collect();
        let w2p: Vec<f64> = (0..g.n)
            .map(|i| {
                alpha0 * (dp2[i] + p1[i]) + dq2[i] - 4.0 * f.phi[i] * p1[i] * q2[i] - z[i] * dq1[i]
                    - 2.0 * u1sq[i] * q1[i]
            })
            .collect();
        let w2q: Vec<f64> = (0..g.n)
            .map(|i| {
                alpha0 * (dq2[i] + q1[i]) - dp2[i] + 4.0 * f.phi[i] * p1[i] * p2[i] + z[i] * dp1[i]
                    + 2.0 * u1sq[i] * p1[i]
                    - z[i] * f.dphi[i]
                    + 4.0 * u12[i] * f.phi[i]
            })
            .collect();
        let w2 = VectorProfile::new(w2p, w2q);

        Ok(InnerExpansion {
            grid: g,
            mu,
            beta,
            front: f,
            dz,
            dsolve,
            csolve,
            w,
            pairing,
            alpha0,
            u1,
            omega1,
            omega2,
            u2,
            w1,
            w2,
        })
    }

    fn pair(&self, v: &VectorProfile) -> f64 {
        inner_vec(&self.grid, v, &self.pairing.adjoint) / self.pairing.den
    }

    /// ν from the assembled `W̄₁`.
    pub fn nu(&self) -> f64 {
        self.pair(&self.w1)
    }

    /// ν from the closed expansion in `w = D⁻¹φ′`.
    pub fn nu_closed(&self) -> Result<f64, CoefError> {
        let g = &self.grid;
        let f = &self.front;
        let b = self.beta;
        let n2 = g.norm_sq(&f.dphi);
        match &self.w {
            None => {
                let s = g.inner(&f.dphi, &f.psi);
                Ok(n2 * g.norm_sq(&f.psi) / (b * s * s))
            }
            Some(w) => {
                let wd = g.inner(w, &f.dphi);
                let mut pw = w.clone();
                g.project_out(&mut pw, &f.dphi);
                let cpw = self.csolve.solve(&pw)?;
                Ok(-n2 * n2 * g.inner(&cpw, &pw) / (b * wd.powi(3))
                    + n2 * g.norm_sq(w) / (b * wd * wd)
                    + n2 * n2 / (b.powi(3) * wd * wd))
            }
        }
    }

    /// ζ from the assembled `W̄₂`.
    pub fn zeta(&self) -> f64 {
        self.pair(&self.w2)
    }

    /// Small-μ limit of ζ evaluated from this expansion's profiles:
    /// `(‖φ′‖²/(β⟨φ′,ψ⟩²))(−⟨D⁻¹ψ′,ψ′⟩ + 16⟨D⁻¹(φp̄₁ψ), φp̄₁ψ⟩ + ½‖ψ‖² − 2⟨|Ū₁|², ψ²⟩)`.
    pub fn zeta_limit(&self) -> Result<f64, CoefError> {
        let g = &self.grid;
        let f = &self.front;
        let t = self.limit_terms()?;
        let s = g.inner(&f.dphi, &f.psi);
        Ok(g.norm_sq(&f.dphi) / (self.beta * s * s) * (-t.dpsi + 16.0 * t.coupling + 0.5 * t.psi_sq - 2.0 * t.u1_psi))
    }

    /// The four pairings entering the small-μ limit of ζ.
    pub fn limit_terms(&self) -> Result<LimitTerms, CoefError> {
        let g = &self.grid;
        let f = &self.front;
        let dpsi = self.dz.apply(&f.psi);
        let fp = mul(&mul(&f.phi, &self.u1.p), &f.psi);
        let solve = |r: &[f64]| -> Result<Vec<f64>, CoefError> {
            Ok(if self.dsolve.is_singular_branch() { self.dsolve.solve_perp(r)? } else { self.dsolve.solve(r)? })
        };
        let u1sq: Vec<f64> = self.u1.p.iter().zip(&self.u1.q).map(|(p, q)| p * p + q * q).collect();
        Ok(LimitTerms {
            dpsi: g.inner(&solve(&dpsi)?, &dpsi),
            coupling: g.inner(&solve(&fp)?, &fp),
            psi_sq: g.norm_sq(&f.psi),
            u1_psi: g.inner(&u1sq, &mul(&f.psi, &f.psi)),
        })
    }

    pub fn diagnostics(&self) -> Result<Diagnostics, CoefError> {
        let g = &self.grid;
        let f = &self.front;
        let op = LineOperator::from_parts(OpKind::L, self.mu, self.beta, self.csolve.band().clone(), self.dsolve.band().clone());
        let lu1 = op.apply_l(&self.u1);
        let r1 = VectorProfile::new(
            (0..g.n).map(|i| lu1.p[i] - self.alpha0 * f.dphi[i]).collect(),
            (0..g.n).map(|i| lu1.q[i] + f.dphi[i]).collect(),
        );
        let lu2 = op.apply_l(&self.u2);
        let r2 = VectorProfile::new(
            (0..g.n).map(|i| lu2.p[i] - self.omega1[i]).collect(),
            (0..g.n).map(|i| lu2.q[i] - self.omega2[i]).collect(),
        );
        let parity = [
            wrong_parity(g, &self.omega1, false),
            wrong_parity(g, &self.omega2, false),
            wrong_parity(g, &self.u1.p, true),
            wrong_parity(g, &self.u1.q, true),
            wrong_parity(g, &self.u2.p, false),
            wrong_parity(g, &self.u2.q, false),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        let solv = axpy(self.beta, &self.u2.q, &self.omega2);
        let alpha0_identity = match &self.w {
            Some(w) => (self.alpha0 * self.beta * g.inner(w, &f.dphi) - g.norm_sq(&f.dphi)).abs(),
            None => 0.0,
        };
        Ok(Diagnostics {
            norm_u1: inner_vec(g, &self.u1, &self.u1).sqrt(),
            norm_u2: inner_vec(g, &self.u2, &self.u2).sqrt(),
            nu_closed: self.nu_closed()?,
            alpha0_identity,
            parity,
            c_solvability: g.inner(&solv, &f.dphi).abs(),
            u1_residual: max_abs(&r1.p).max(max_abs(&r1.q)),
            u2_residual: max_abs(&r2.p).max(max_abs(&r2.q)),
        })
    }

    pub fn record(&self) -> Result<CoefficientRecord, CoefError> {
        let diagnostics = self.diagnostics()?;
        let nu = self.nu();
        let gap = (nu - diagnostics.nu_closed).abs();
        if gap > 1e-6 * nu.abs().max(1.0) {
            return Err(CoefError::RouteMismatch(gap));
        }
        Ok(CoefficientRecord { mu: self.mu, beta: self.beta, alpha0: self.alpha0, nu, zeta: self.zeta(), diagnostics })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LimitTerms {
    /// `⟨D⁻¹ψ′, ψ′⟩`
    pub dpsi: f64,
    /// `⟨D⁻¹(φp̄₁ψ), φp̄₁ψ⟩`
    pub coupling: f64,
    /// `‖ψ‖²`
    pub psi_sq: f64,
    /// `⟨|Ū₁|², ψ²⟩`
    pub u1_psi: f64,
}

pub fn alpha0(mu: f64, beta: f64, grid: &LineGrid) -> Result<f64, CoefError> {
    if mu == 0.0 {
        return Ok(0.0);
    }
    let f = front_profiles(grid);
    let ds = DSolver::new(grid, mu)?;
    if ds.is_singular_branch() {
        return Ok(0.0);
    }
    let w = ds.solve(&f.dphi)?;
    Ok(grid.norm_sq(&f.dphi) / (beta * grid.inner(&w, &f.dphi)))
}

pub fn ubar1(mu: f64, beta: f64, grid: &LineGrid) -> Result<VectorProfile, CoefError> {
    Ok(InnerExpansion::new(mu, beta, grid)?.u1)
}

pub fn ubar2(mu: f64, beta: f64, grid: &LineGrid) -> Result<VectorProfile, CoefError> {
    Ok(InnerExpansion::new(mu, beta, grid)?.u2)
}

pub fn nu(mu: f64, beta: f64, grid: &LineGrid) -> Result<f64, CoefError> {
    Ok(InnerExpansion::new(mu, beta, grid)?.record()?.nu)
}

pub fn zeta(mu: f64, beta: f64, grid: &LineGrid) -> Result<f64, CoefError> {
    Ok(InnerExpansion::new(mu, beta, grid)?.zeta())
}

pub fn coefficients(mu: f64, beta: f64, grid: &LineGrid) -> Result<CoefficientRecord, CoefError> {
    InnerExpansion::new(mu, beta, grid)?.record()
}

/// How β accompanies μ in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BetaRule {
    Fixed(f64),
    /// Fixed phase rotation `a`: `β = (3 − μ)/a`.
    PhaseRotation(f64),
}

impl BetaRule {
    pub fn beta(&self, mu: f64) -> f64 {
        match *self {
            BetaRule::Fixed(b) => b,
            BetaRule::PhaseRotation(a) => (3.0 - mu) / a,
        }
    }
}

/// One record (or the failure) per μ, in input order.
pub fn coefficient_table(
    mus: &[f64],
    rule: BetaRule,
    grid: &LineGrid,
) -> Vec<(f64, f64, Result<CoefficientRecord, CoefError>)> {
    use rayon::prelude::*;
    mus.par_iter().map(|&mu| (mu, rule.beta(mu), coefficients(mu, rule.beta(mu), grid))).collect()
}

/// Sanity on μ branch constant for callers that switch explicitly.
pub fn on_singular_branch(mu: f64) -> bool {
    mu.abs() < MU_BRANCH
}
