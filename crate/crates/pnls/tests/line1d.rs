use std::f64::consts::PI;

use pnls::line1d::*;
use proptest::prelude::*;

fn grid(n: usize) -> LineGrid {
    LineGrid::new(20.0, n).unwrap()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[test]
fn rejects_coarse_grids() {
    assert!(matches!(LineGrid::new(5.0, 1024), Err(LineError::TooCoarse { .. })));
    assert!(matches!(LineGrid::new(20.0, 128), Err(LineError::TooCoarse { .. })));
    assert!(matches!(LineGrid::new(20.0, 1025), Err(LineError::TooCoarse { .. })));
}

#[test]
fn quadrature_closed_forms() {
    for (z, n) in [(20.0, 1024), (20.0, 2048), (15.0, 512), (30.0, 4096)] {
        let g = LineGrid::new(z, n).unwrap();
        let f = front_profiles(&g);
        assert!((g.norm_sq(&f.psi) - 2.0).abs() < 1e-10);
        assert!((g.norm_sq(&f.dphi) - 4.0 / 3.0).abs() < 1e-10);
        assert!((g.inner(&f.dphi, &f.psi) - PI / 2.0).abs() < 1e-10);
    }
}

#[test]
fn grid_is_symmetric() {
    let g = grid(1024);
    for j in 0..g.n {
        assert_eq!(g.nodes[j], -g.nodes[g.n - 1 - j]);
    }
    assert!(g.weights.iter().all(|&w| w > 0.0));
}

#[test]
fn front_values() {
    let g = grid(1024);
    let f = front_profiles(&g);
    let last = g.n - 1;
    assert!((f.phi[last] - 1.0).abs() < 1e-15 + 4.0 * (-2.0 * g.nodes[last]).exp());
    assert_eq!(f.phi[0], -f.phi[last]);
    for (j, &z) in g.nodes.iter().enumerate() {
        let s = 1.0 / z.cosh();
        assert!((f.dphi[j] - s * s).abs() < 1e-12);
        assert!((f.psi[j] - s).abs() < 1e-15);
    }
}

#[test]
fn front_equation_residual() {
    let g = grid(1024);
    let f = front_profiles(&g);
    let d2 = second_derivative(&g).apply(&f.phi);
    let r: Vec<f64> = (0..g.n).map(|j| d2[j] - 2.0 * f.phi[j].powi(3) + 2.0 * f.phi[j]).collect();
    assert!(max_abs(&r) < 1e-6, "{:e}", max_abs(&r));
}

#[test]
fn operators_symmetric() {
    let g = grid(1024);
    let c = assemble(OpKind::C, 0.3, 3.0, &g);
    assert_eq!(c.c().max_asymmetry(), 0.0);
    assert_eq!(c.d().max_asymmetry(), 0.0);
}

#[test]
fn eigenpairs_of_c_and_d() {
    let g = grid(2048);
    let f = front_profiles(&g);
    let phipsi: Vec<f64> = f.phi.iter().zip(&f.psi).map(|(a, b)| a * b).collect();
    let c = assemble(OpKind::C, 0.0, 3.0, &g);
    let cpp = c.apply(&phipsi);
    let want: Vec<f64> = phipsi.iter().map(|x| 3.0 * x).collect();
    assert!(max_abs(&sub(&cpp, &want)) < 1e-6);
    for mu in [-0.503, 0.0405, 1.0] {
        let d = assemble(OpKind::D, mu, 3.0, &g);
        let dpsi = d.apply(&f.psi);
        let want: Vec<f64> = f.psi.iter().map(|x| mu * x).collect();
        assert!(max_abs(&sub(&dpsi, &want)) < 1e-6);
    }
}

#[test]
fn kernel_of_l() {
    for n in [1024, 2048] {
        let g = grid(n);
        let f = front_profiles(&g);
        let l = assemble(OpKind::L, 0.0405, 2.96, &g);
        let r = l.apply_l(&VectorProfile::new(f.dphi.clone(), vec![0.0; n]));
        let nr = (g.norm_sq(&r.p) + g.norm_sq(&r.q)).sqrt();
        assert!(nr < 1e-8, "{nr:e}");
    }
}

#[test]
fn adjoint_kernel() {
    let g = grid(2048);
    let f = front_profiles(&g);
    for (mu, beta) in [(0.0405, 2.96), (-0.503, 3.5), (1.5, 1.0)] {
        let w = DSolver::new(&g, mu).unwrap().solve(&f.dphi).unwrap();
        let adj = VectorProfile::new(w.iter().map(|x| beta * x).collect(), f.dphi.clone());
        let r = assemble(OpKind::L, mu, beta, &g).apply_lt(&adj);
        let nr = inner_vec(&g, &r, &r).sqrt() / inner_vec(&g, &adj, &adj).sqrt();
        assert!(nr < 1e-7, "{mu}: {nr:e}");
    }
    let adj = VectorProfile::new(f.psi.clone(), vec![0.0; g.n]);
    let r = assemble(OpKind::L, 0.0, 2.96, &g).apply_lt(&adj);
    assert!(inner_vec(&g, &r, &r).sqrt() < 1e-7);
}

#[test]
fn dense_matches_banded() {
    let g = grid(256);
    let l = assemble(OpKind::L, -0.2, 3.2, &g);
    let m = l.to_dense();
    let x = VectorProfile::new(g.map(|z| (-z * z).exp()), g.map(|z| z / z.cosh()));
    let y = l.apply_l(&x);
    for i in 0..g.n {
        let row = |r: &Vec<f64>| (0..g.n).map(|j| r[j] * x.p[j] + r[g.n + j] * x.q[j]).sum::<f64>();
        assert!((row(&m[i]) - y.p[i]).abs() < 1e-10);
        assert!((row(&m[g.n + i]) - y.q[i]).abs() < 1e-10);
    }
}

#[test]
fn d_solve_eigenfunction() {
    let g = grid(2048);
    let f = front_profiles(&g);
    for mu in [0.1, -0.25, 0.7] {
        let x = DSolver::new(&g, mu).unwrap().solve(&f.psi).unwrap();
        let want: Vec<f64> = f.psi.iter().map(|s| s / mu).collect();
        assert!(max_abs(&sub(&x, &want)) < 1e-6 / mu.abs());
        let back = d_band(&g, &f, mu).apply(&x);
        assert!(g.norm(&sub(&back, &f.psi)) < 1e-10 * g.norm(&f.psi));
    }
}

#[test]
fn d_solve_small_mu_leading_term() {
    // ⟨D⁻¹φ′, φ′⟩ ≈ ⟨φ′,ψ⟩²/(μ‖ψ‖²) + O(1)
    let g = grid(2048);
    let f = front_profiles(&g);
    let lead = (PI / 2.0).powi(2) / 2.0;
    let mut prev = f64::INFINITY;
    for mu in [0.1, 0.01, 0.001] {
        let x = DSolver::new(&g, mu).unwrap().solve(&f.dphi).unwrap();
        let dev = (mu * g.inner(&x, &f.dphi) - lead).abs();
        assert!(dev < 2.0 * mu, "{mu}: {dev}");
        assert!(dev < prev);
        prev = dev;
    }
}

#[test]
fn d_solve_bound_off_psi() {
    let g = grid(2048);
    let f = front_profiles(&g);
    let mu = -0.01;
    let mut rhs = g.map(|z| (-(z - 1.0).powi(2)).exp() + 0.3 * z * (-z * z / 8.0).exp());
    g.project_out(&mut rhs, &f.psi);
    let x = DSolver::new(&g, mu).unwrap().solve(&rhs).unwrap();
    assert!(g.norm(&x) <= g.norm(&rhs) / (1.0 + mu) * (1.0 + 1e-6));
}

#[test]
fn d_singular_branch() {
    let g = grid(1024);
    let f = front_profiles(&g);
    let ds = DSolver::new(&g, 1e-8).unwrap();
    assert!(ds.is_singular_branch());
    assert!(matches!(ds.solve(&f.dphi), Err(LineError::NearSingular(_))));
    assert!(matches!(ds.solve_perp(&f.psi), Err(LineError::Fredholm(_))));
    let mut rhs = f.dphi.clone();
    g.project_out(&mut rhs, &f.psi);
    let x = ds.solve_perp(&rhs).unwrap();
    assert!(g.inner(&x, &f.psi).abs() < 1e-12);
    let mut r = sub(&d_band(&g, &f, 1e-8).apply(&x), &rhs);
    g.project_out(&mut r, &f.psi);
    assert!(g.norm(&r) < 1e-9 * g.norm(&rhs), "{:e}", g.norm(&r) / g.norm(&rhs));
}

#[test]
fn c_solve_examples() {
    let g = grid(2048);
    let f = front_profiles(&g);
    let cs = CSolver::new(&g).unwrap();
    let phipsi: Vec<f64> = f.phi.iter().zip(&f.psi).map(|(a, b)| a * b).collect();
    let x = cs.solve(&phipsi).unwrap();
    let want: Vec<f64> = phipsi.iter().map(|v| v / 3.0).collect();
    assert!(max_abs(&sub(&x, &want)) < 1e-6);
    assert!(matches!(cs.solve(&f.dphi), Err(LineError::Fredholm(_))));

    let mut rhs = f.psi.clone();
    g.project_out(&mut rhs, &f.dphi);
    let x = cs.solve(&rhs).unwrap();
    assert!(g.inner(&x, &f.dphi).abs() < 1e-12);
    let mut r = sub(&c_band(&g, &f).apply(&x), &rhs);
    g.project_out(&mut r, &f.dphi);
    assert!(g.norm(&r) < 1e-9, "{:e}", g.norm(&r));
}

#[test]
fn block_inverse_identity() {
    // L = [[0, D], [−C, −β]]: Q = D⁻¹R₁, P = −C⁺(R₂ + βQ) when R ⊥ Ψ₀†
    let g = grid(2048);
    let f = front_profiles(&g);
    let (mu, beta) = (-0.208, 3.21);
    let ds = DSolver::new(&g, mu).unwrap();
    let w = ds.solve(&f.dphi).unwrap();
    let adj = VectorProfile::new(w.iter().map(|x| beta * x).collect(), f.dphi.clone());
    let r1 = g.map(|z| (-z * z).exp() * (1.0 + z));
    let mut r2 = g.map(|z| 0.5 * z * (-z * z / 2.0).exp() + (-(z - 2.0).powi(2)).exp());
    // remove the adjoint-kernel component through R₂
    let c = inner_vec(&g, &VectorProfile::new(r1.clone(), r2.clone()), &adj) / g.norm_sq(&f.dphi);
    r2.iter_mut().zip(&f.dphi).for_each(|(v, d)| *v -= c * d);
    let q = ds.solve(&r1).unwrap();
    let src: Vec<f64> = r2.iter().zip(&q).map(|(a, b)| a + beta * b).collect();
    let p: Vec<f64> = CSolver::new(&g).unwrap().solve(&src).unwrap().iter().map(|x| -x).collect();
    let lx = assemble(OpKind::L, mu, beta, &g).apply_l(&VectorProfile::new(p, q));
    let err = (g.norm_sq(&sub(&lx.p, &r1)) + g.norm_sq(&sub(&lx.q, &r2))).sqrt();
    assert!(err < 1e-8, "{err:e}");
}

#[test]
fn parity_examples() {
    let g = grid(1024);
    let f = front_profiles(&g);
    let (e, o) = parity_split(&f.psi);
    assert_eq!(e, f.psi);
    assert!(max_abs(&o) == 0.0);
    let (e, o) = parity_split(&f.phi);
    assert!(max_abs(&e) == 0.0);
    assert_eq!(o, f.phi);
    let zd: Vec<f64> = g.nodes.iter().zip(&f.dphi).map(|(z, d)| z * d).collect();
    let (e, o) = parity_split(&zd);
    assert!(max_abs(&e) < 1e-15);
    assert_eq!(o, zd);
    // ⟨φ′, odd⟩ = 0
    let odd = g.map(|z| z.sin() * (-z * z / 10.0).exp());
    assert!(g.inner(&f.dphi, &odd).abs() < 1e-12);
}

#[test]
fn inner_rejects_mismatch() {
    let g = grid(256);
    assert_eq!(g.try_inner(&[1.0; 10], &vec![1.0; 256]), Err(LineError::GridMismatch(10, 256)));
}

#[test]
fn profile_csv() {
    let g = grid(256);
    let f = front_profiles(&g);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("psi.csv");
    write_profile_csv(&path, &g, &f.psi).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("z,value"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), g.n);
    assert_eq!(rows[7], (g.nodes[7], f.psi[7]));
}

fn sample(seed: &[f64], g: &LineGrid) -> Vec<f64> {
    g.map(|z| seed.iter().enumerate().map(|(k, c)| c * (-(z - k as f64 + 2.0).powi(2)).exp()).sum())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn inner_bilinear(a in prop::collection::vec(-1.0..1.0f64, 5), b in prop::collection::vec(-1.0..1.0f64, 5), s in -3.0..3.0f64) {
        let g = grid(256);
        let (x, y) = (sample(&a, &g), sample(&b, &g));
        prop_assert_eq!(g.inner(&x, &y), g.inner(&y, &x));
        let sx: Vec<f64> = x.iter().map(|v| s * v).collect();
        prop_assert!((g.inner(&sx, &y) - s * g.inner(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn parity_reconstructs(a in prop::collection::vec(-1.0..1.0f64, 5)) {
        let g = grid(256);
        let x = sample(&a, &g);
        let (e, o) = parity_split(&x);
        let n = g.n;
        for j in 0..n {
            prop_assert!((e[j] + o[j] - x[j]).abs() < 1e-15);
            prop_assert_eq!(e[j], e[n - 1 - j]);
            prop_assert_eq!(o[j], -o[n - 1 - j]);
        }
    }

    #[test]
    fn c_solve_residual(a in prop::collection::vec(-1.0..1.0f64, 5)) {
        let g = grid(512);
        let f = front_profiles(&g);
        let mut rhs = sample(&a, &g);
        prop_assume!(g.norm(&rhs) > 1e-3);
        g.project_out(&mut rhs, &f.dphi);
        let x = CSolver::new(&g).unwrap().solve(&rhs).unwrap();
        let mut r = sub(&c_band(&g, &f).apply(&x), &rhs);
        g.project_out(&mut r, &f.dphi);
        prop_assert!(g.norm(&r) < 1e-9 * g.norm(&rhs).max(1.0));
    }
}
