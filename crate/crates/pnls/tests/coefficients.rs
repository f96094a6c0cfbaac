use std::f64::consts::PI;

use pnls::coefficients::*;
use pnls::line1d::LineGrid;
use proptest::prelude::*;

fn grid() -> LineGrid {
    LineGrid::new(20.0, 2048).unwrap()
}

// (μ, β, α₀, ν, ζ) from a Fourier pseudo-spectral discretization of the same
// inner problem on a periodic box [−30, 30), 768 modes.
const SPECTRAL: [(f64, f64, f64, f64, f64); 6] = [
    (0.0405, 2.96, 0.014764333985, 0.363808281002, 0.052144763108),
    (-0.503, 3.5, -0.159934388091, 0.345413064879, 0.054296702751),
    (0.5, 3.0, 0.177398407039, 0.359022949261, 0.063896378493),
    (-0.208, 3.21, -0.070693961656, 0.346799301640, 0.052403904046),
    (0.2, 3.0, 0.071543860475, 0.356091723361, 0.055020375113),
    (1e-3, 3.0, 0.000360238870, 0.360218049172, 0.052123071208),
];

#[test]
fn matches_spectral_oracle() {
    let g = grid();
    for &(mu, beta, a0, nu, zeta) in &SPECTRAL {
        let r = coefficients(mu, beta, &g).unwrap();
        assert!((r.alpha0 - a0).abs() < 1e-9, "{mu}: alpha0 {} vs {a0}", r.alpha0);
        assert!((r.nu - nu).abs() < 1e-9, "{mu}: nu {} vs {nu}", r.nu);
        assert!((r.zeta - zeta).abs() < 1e-9, "{mu}: zeta {} vs {zeta}", r.zeta);
    }
}

/// `α₀` with a plain second-order three-point Laplacian on the vertex grid
/// `z_j = −Z + jh`, Dirichlet ends, trapezoid quadrature.
fn alpha0_fd2(mu: f64, beta: f64, z_max: f64, n: usize) -> f64 {
    let h = 2.0 * z_max / n as f64;
    let m = n - 1;
    let z: Vec<f64> = (1..n).map(|j| -z_max + j as f64 * h).collect();
    let sech2: Vec<f64> = z.iter().map(|z| 1.0 / z.cosh().powi(2)).collect();
    let off = -1.0 / (h * h);
    let diag: Vec<f64> = sech2.iter().map(|s| 2.0 / (h * h) - 2.0 * s + mu + 1.0).collect();
    // Thomas algorithm
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = off / diag[0];
    d[0] = sech2[0] / diag[0];
    for i in 1..m {
        let den = diag[i] - off * c[i - 1];
        c[i] = off / den;
        d[i] = (sech2[i] - off * d[i - 1]) / den;
    }
    let mut w = vec![0.0; m];
    w[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        w[i] = d[i] - c[i] * w[i + 1];
    }
    let wd: f64 = w.iter().zip(&sech2).map(|(a, b)| a * b).sum::<f64>() * h;
    let dd: f64 = sech2.iter().map(|s| s * s).sum::<f64>() * h;
    dd / (beta * wd)
}

#[test]
fn alpha0_second_order_oracle() {
    let g = grid();
    for (mu, beta) in [(0.0405, 2.96), (-0.503, 3.5), (0.5, 3.0), (2.5, 0.5), (-0.6, 3.6)] {
        let coarse = alpha0_fd2(mu, beta, 20.0, 8000);
        let fine = alpha0_fd2(mu, beta, 20.0, 16000);
        let rich = (4.0 * fine - coarse) / 3.0;
        let a0 = alpha0(mu, beta, &g).unwrap();
        assert!((a0 - rich).abs() < 1e-9 * a0.abs().max(1e-3), "{mu}: {a0} vs {rich}");
    }
}

#[test]
fn alpha0_zero_and_slope() {
    let g = grid();
    assert_eq!(alpha0(0.0, 2.96, &g).unwrap(), 0.0);
    // α₀/μ → ‖φ′‖²‖ψ‖²/(β⟨φ′,ψ⟩²) = 32/(3π²β)
    for beta in [1.0, 2.96] {
        let slope = 32.0 / (3.0 * PI * PI * beta);
        for mu in [1e-3, -1e-3] {
            let r = alpha0(mu, beta, &g).unwrap() / mu;
            assert!((r / slope - 1.0).abs() < 1e-2, "{beta} {mu}: {r} vs {slope}");
        }
    }
}

#[test]
fn alpha0_identity_and_residuals() {
    let g = grid();
    for (mu, beta) in [(0.5, 3.0), (0.2, 3.0), (-0.503, 3.5), (0.0405, 2.96)] {
        let d = coefficients(mu, beta, &g).unwrap().diagnostics;
        assert!(d.alpha0_identity < 1e-10, "{mu}: {:e}", d.alpha0_identity);
        assert!(d.parity < 1e-10, "{mu}: {:e}", d.parity);
        assert!(d.c_solvability < 1e-9, "{mu}: {:e}", d.c_solvability);
        assert!(d.u1_residual < 1e-7, "{mu}: {:e}", d.u1_residual);
        assert!(d.u2_residual < 1e-7, "{mu}: {:e}", d.u2_residual);
    }
}

#[test]
fn ubar1_properties() {
    let g = grid();
    let e = InnerExpansion::new(0.5, 3.0, &g).unwrap();
    assert!(g.inner(&e.u1.p, &e.front.dphi).abs() < 1e-12);
    for v in [&e.u1.p, &e.u1.q] {
        let (_, odd) = pnls::line1d::parity_split(v);
        assert!(g.norm(&odd) < 1e-10);
    }
    let u2 = ubar2(0.5, 3.0, &g).unwrap();
    for v in [&u2.p, &u2.q] {
        let (even, _) = pnls::line1d::parity_split(v);
        assert!(g.norm(&even) < 1e-10);
    }

    let beta = 3.0;
    let u1 = ubar1(1e-5, beta, &g).unwrap();
    let c = (4.0 / 3.0) / (beta * PI / 2.0);
    let dev = u1.q.iter().zip(&e.front.psi).map(|(q, s)| (q - c * s).abs()).fold(0.0, f64::max);
    assert!(dev < 1e-4, "{dev:e}");
}

#[test]
fn nu_at_zero() {
    let g = grid();
    let lim = 32.0 / (3.0 * PI * PI);
    let r = coefficients(0.0, 1.0, &g).unwrap();
    assert!((r.nu - lim).abs() < 1e-3, "{}", r.nu);
    for mu in [1e-3, -1e-3] {
        assert!((nu(mu, 1.0, &g).unwrap() - r.nu).abs() < 1e-2);
    }
    // ν scales as 1/β at μ = 0
    let r3 = coefficients(0.0, 3.0, &g).unwrap();
    assert!((3.0 * r3.nu - r.nu).abs() < 1e-10);
}

#[test]
fn nu_routes_agree() {
    let g = grid();
    for (mu, beta) in [(0.0405, 2.96), (-0.503, 3.5), (0.0, 2.96), (1.5, 1.0), (-0.9, 3.9), (2.9, 0.1)] {
        let r = coefficients(mu, beta, &g).unwrap();
        assert!((r.nu - r.diagnostics.nu_closed).abs() < 1e-8, "{mu}: {} vs {}", r.nu, r.diagnostics.nu_closed);
    }
}

#[test]
fn nu_positive_window() {
    let g = grid();
    let mus: Vec<f64> = (0..=40).map(|k| -0.2 + 0.01 * k as f64).collect();
    for (mu, beta, r) in coefficient_table(&mus, BetaRule::PhaseRotation(1.0), &g) {
        let r = r.unwrap();
        assert!(r.nu > 0.0, "{mu} {beta}: {}", r.nu);
    }
}

#[test]
fn zeta_small_mu_limit() {
    let g = grid();
    let e = InnerExpansion::new(1e-3, 2.96, &g).unwrap();
    let lim = e.zeta_limit().unwrap();
    assert!((e.zeta() / lim - 1.0).abs() < 0.02, "{} vs {lim}", e.zeta());
    let e0 = InnerExpansion::new(0.0, 2.96, &g).unwrap();
    assert!((e0.zeta() - e0.zeta_limit().unwrap()).abs() < 1e-8);
}

#[test]
fn zeta_sign_report() {
    let g = grid();
    let mus: Vec<f64> = (0..=10).map(|k| -0.5 + 0.1 * k as f64).collect();
    for (mu, beta, r) in coefficient_table(&mus, BetaRule::Fixed(3.0), &g) {
        let z = r.unwrap().zeta;
        println!("mu {mu:+.2} beta {beta} zeta {z:+.6}");
        assert!(z.is_finite());
    }
}

#[test]
fn fig1_signs() {
    let g = grid();
    let mus = [-0.503, -0.208, 0.0405];
    let betas = [3.5, 3.21, 2.96];
    for (i, &mu) in mus.iter().enumerate() {
        let r = coefficients(mu, betas[i], &g).unwrap();
        assert_eq!(r.alpha0.signum(), mu.signum());
    }
}

#[test]
fn table_matches_direct_calls() {
    let g = grid();
    let t = coefficient_table(&[0.0405], BetaRule::Fixed(2.96), &g);
    let r = t[0].2.as_ref().unwrap();
    let d = coefficients(0.0405, 2.96, &g).unwrap();
    assert_eq!((r.alpha0, r.nu, r.zeta), (d.alpha0, d.nu, d.zeta));
    assert_eq!(BetaRule::PhaseRotation(1.0).beta(0.5), 2.5);
    // order kept, failures recorded without stopping the sweep
    let t = coefficient_table(&[0.3, -0.1, 0.2], BetaRule::Fixed(3.0), &g);
    assert_eq!(t.iter().map(|r| r.0).collect::<Vec<_>>(), vec![0.3, -0.1, 0.2]);
}

#[test]
fn refinement() {
    let g2 = LineGrid::new(20.0, 4096).unwrap();
    let g = grid();
    for (mu, beta) in [(0.0405, 2.96), (-0.503, 3.5)] {
        let a = coefficients(mu, beta, &g).unwrap();
        let b = coefficients(mu, beta, &g2).unwrap();
        assert!((a.alpha0 - b.alpha0).abs() < 1e-6);
        assert!((a.nu - b.nu).abs() < 1e-6);
        assert!((a.zeta - b.zeta).abs() < 1e-6);
    }
}

#[test]
fn smooth_across_zero() {
    let g = grid();
    let at = |mu: f64| {
        let r = coefficients(mu, 2.96, &g).unwrap();
        [r.alpha0, r.nu, r.zeta]
    };
    let f0 = at(0.0);
    let (fp, fm) = (at(1e-3), at(-1e-3));
    for k in 0..3 {
        let slope = ((fp[k] - fm[k]) / 2e-3).abs();
        for mu in [1e-3, -1e-3, 1e-4, -1e-4, 2e-6, -2e-6] {
            let jump = (at(mu)[k] - f0[k]).abs();
            assert!(jump <= 10.0 * slope * mu.abs() + 1e-12, "coef {k} at {mu}: {jump:e} vs slope {slope:e}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn alpha0_sign_follows_mu(mu in -0.3..0.3f64, beta in 0.5..5.0f64) {
        prop_assume!(mu.abs() > 1e-4);
        let g = LineGrid::new(20.0, 1024).unwrap();
        let r = coefficients(mu, beta, &g).unwrap();
        prop_assert_eq!(r.alpha0.signum(), mu.signum());
        prop_assert!((r.nu - r.diagnostics.nu_closed).abs() < 1e-8);
        // β enters every coefficient as 1/β
        let r2 = coefficients(mu, 2.0 * beta, &g).unwrap();
        prop_assert!((2.0 * r2.alpha0 - r.alpha0).abs() < 1e-12);
    }
}
