use std::f64::consts::{PI, TAU};

use pnls::curveflow::*;
use pnls::interface::{extract_field, Contour};
use proptest::prelude::*;

const EPS: f64 = 0.1;

fn mean_radius(c: &ClosedCurve) -> f64 {
    let n = c.len() as f64;
    let cx = c.markers.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = c.markers.iter().map(|p| p[1]).sum::<f64>() / n;
    c.markers.iter().map(|p| (p[0] - cx).hypot(p[1] - cy)).sum::<f64>() / n
}

fn opts(dt: f64, t_end: f64) -> EvolveOptions {
    EvolveOptions { dt, t_end, record_every: t_end / 10.0, snapshot_every: 0.0 }
}

#[test]
fn circle_velocity_formula() {
    let law = FlowLaw { alpha0: 0.2, nu: 0.3, zeta: 0.05 };
    let r = 1.5;
    let c = ClosedCurve::circle(r, 128, [0.3, -0.2]);
    let v = normal_velocity(&c, &law, EPS).unwrap();
    let want = -0.2 / r + EPS * EPS * 0.05 / r.powi(3);
    assert!((law.circle_velocity(EPS, r) - want).abs() < 1e-15);
    for x in &v {
        assert!((x - want).abs() < 1e-10, "{x} vs {want}");
    }
    let rs = law.equilibrium_radius(EPS).unwrap();
    assert!((rs - EPS * 0.5).abs() < 1e-15);
    assert!(law.circle_velocity(EPS, rs).abs() < 1e-12);
    assert!(FlowLaw { alpha0: -0.1, ..law }.equilibrium_radius(EPS).is_none());
    assert!(FlowLaw { zeta: -0.1, ..law }.equilibrium_radius(EPS).is_none());
}

#[test]
fn length_rate_circle() {
    // −2πR(α₀/R² − ε²ζ/R⁴)
    let law = FlowLaw { alpha0: 0.2, nu: 0.3, zeta: 0.05 };
    for r in [0.5, 1.0, 2.0] {
        let c = ClosedCurve::circle(r, 256, [0.0, 0.0]);
        let want = -TAU * r * (0.2 / (r * r) - EPS * EPS * 0.05 / r.powi(4));
        assert!((length_rate(&c, &law, EPS).unwrap() - want).abs() < 1e-10);
        assert!((length_rate_direct(&c, &law, EPS).unwrap() - want).abs() < 1e-10);
    }
}

#[test]
fn length_rate_routes_agree() {
    let law = FlowLaw { alpha0: 0.05, nu: 0.36, zeta: 0.052 };
    let c = ClosedCurve::polar(|t| 3.0 + 0.1 * ((3.0 * t).sin() - (7.0 * t).sin().powi(2)), 512, [0.0, 0.0]);
    let a = length_rate(&c, &law, 0.3).unwrap();
    let b = length_rate_direct(&c, &law, 0.3).unwrap();
    assert!((a - b).abs() < 1e-10 * a.abs().max(1.0), "{a} vs {b}");
    // pure shortening: strictly negative away from circles
    let shorten = FlowLaw { alpha0: 0.1, nu: 0.0, zeta: 0.0 };
    assert!(length_rate(&c, &shorten, 0.3).unwrap() < 0.0);
}

#[test]
fn ellipse_geometry() {
    let n = 512;
    let c = ClosedCurve::polar(|t| 1.0 / ((t.cos() / 2.0).powi(2) + t.sin().powi(2)).sqrt(), n, [0.0, 0.0]);
    assert!(c.spacing_spread() < 1e-2);
    let g = Geometry::new(&c, &SpectralDiff::new(n));
    assert!((g.total_curvature() - TAU).abs() < 1e-10);
    let (lo, hi) = g.kappa.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &k| (a.min(k), b.max(k)));
    assert!((lo - 0.25).abs() < 1e-6 && (hi - 2.0).abs() < 1e-6, "{lo} {hi}");
    // Ramanujan's perimeter, error ~1e-10 at b/a = 1/2
    let h = (1.0f64 / 3.0).powi(2);
    let perim = PI * 3.0 * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()));
    assert!((g.length - perim).abs() < 1e-8);
    assert!((c.polygon_length() - perim).abs() / perim < 1e-4);
}

#[test]
fn spectral_derivatives() {
    let n = 64;
    let d = SpectralDiff::new(n);
    let v: Vec<f64> = (0..n).map(|i| (TAU * 3.0 * i as f64 / n as f64).sin()).collect();
    let dv = d.derivative(&v, 1);
    let d4 = d.fourth(&v);
    for i in 0..n {
        let s = TAU * 3.0 * i as f64 / n as f64;
        assert!((dv[i] - 6.0 * PI * s.cos()).abs() < 1e-10);
        assert!((d4[i] - (6.0 * PI).powi(4) * s.sin()).abs() < 1e-6);
    }
    // (1 + c∂⁴) u = v
    let u = d.solve_biharmonic(&v, 1e-4);
    let back: Vec<f64> = u.iter().zip(d.fourth(&u)).map(|(a, b)| a + 1e-4 * b).collect();
    assert!(back.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-10));
}

#[test]
fn circle_ode_matches_closed_form() {
    let law = FlowLaw { alpha0: 0.05, nu: 0.3, zeta: 0.0 };
    let sol = circle_ode(1.0, &law, EPS, 8.0, 0.5).unwrap();
    assert!(sol.collapse.is_none());
    for (t, r) in sol.t.iter().zip(&sol.r) {
        assert!((r * r - (1.0 - 0.1 * t)).abs() < 1e-9, "{t}: {r}");
    }
    assert!(sol.r.windows(2).all(|w| w[1] < w[0]));
    assert!((sol.radius_at(8.0).unwrap() - 0.2f64.sqrt()).abs() < 1e-9);
    // collapse at R0²/(2α₀) = 10
    let sol = circle_ode(1.0, &law, EPS, 20.0, 0.5).unwrap();
    let tc = sol.collapse.unwrap();
    assert!((tc - 10.0).abs() < 1e-3, "{tc}");
}

#[test]
fn circle_ode_relaxes_to_equilibrium() {
    let law = FlowLaw { alpha0: 0.0147, nu: 0.364, zeta: 0.0521 };
    let eps = 0.3;
    let rs = law.equilibrium_radius(eps).unwrap();
    for r0 in [0.5 * rs, 3.0] {
        let sol = circle_ode(r0, &law, eps, 2000.0, 10.0).unwrap();
        let up = r0 < rs;
        assert!(sol.r.windows(2).all(|w| (w[1] >= w[0]) == up || (w[1] - w[0]).abs() < 1e-9 * rs));
        assert!((sol.r.last().unwrap() - rs).abs() < 1e-3 * rs);
    }
    assert!(circle_ode(0.0, &law, eps, 1.0, 0.1).is_err());
}

#[test]
fn evolve_matches_circle_law() {
    let law = FlowLaw { alpha0: 0.05, nu: 0.3, zeta: 0.0 };
    let c = ClosedCurve::circle(1.0, 128, [0.5, 0.5]);
    let tr = evolve(&c, &law, EPS, &opts(1e-3, 5.0)).unwrap();
    assert!(tr.event.is_none());
    let r = mean_radius(&tr.last);
    assert!((r - 0.5f64.sqrt()).abs() < 1e-4, "{r}");
    assert!((tr.last.time - 5.0).abs() < 1e-12);
    assert_eq!(tr.rows.len(), 11);
    assert!(tr.rows.windows(2).all(|w| w[1].length < w[0].length));
    assert!(tr.last.spacing_spread() < 1e-2);
}

#[test]
fn equilibrium_circle_is_stationary() {
    let law = FlowLaw { alpha0: 0.02, nu: 0.36, zeta: 0.05 };
    let eps = 0.3;
    let rs = law.equilibrium_radius(eps).unwrap();
    let c = ClosedCurve::circle(rs, 128, [0.0, 0.0]);
    let tr = evolve(&c, &law, eps, &opts(1e-3, 1.0)).unwrap();
    assert!((mean_radius(&tr.last) - rs).abs() < 1e-8);
}

#[test]
fn evolve_length_rate_consistent() {
    let law = FlowLaw { alpha0: 0.05, nu: 0.36, zeta: 0.05 };
    let eps = 0.3;
    let c = ClosedCurve::polar(|t| 3.0 + 0.1 * ((3.0 * t).sin() - (7.0 * t).sin().powi(2)), 256, [0.0, 0.0]);
    let dt = 1e-3;
    let tr = evolve(&c, &law, eps, &EvolveOptions { dt: 1e-4, t_end: dt, record_every: dt, snapshot_every: 0.0 }).unwrap();
    let fd = (tr.rows[1].length - tr.rows[0].length) / dt;
    // trapezoid in time
    let rate = 0.5 * (length_rate(&c, &law, eps).unwrap() + length_rate(&tr.last, &law, eps).unwrap());
    assert!((fd - rate).abs() < 2e-3 * rate.abs(), "{fd} vs {rate}");
}

#[test]
fn collapse_event() {
    let law = FlowLaw { alpha0: 0.1, nu: 0.0, zeta: 0.0 };
    let c = ClosedCurve::circle(0.5, 64, [0.0, 0.0]);
    let tr = evolve(&c, &law, EPS, &opts(1e-3, 3.0)).unwrap();
    let (t, e) = tr.event.unwrap();
    assert_eq!(e, FlowEvent::Collapse);
    // R0²/(2α₀) = 1.25
    assert!((t - 1.25).abs() < 0.05, "{t}");
    assert_eq!(tr.rows.last().unwrap().event, Some(FlowEvent::Collapse));
}

#[test]
fn rejects_bad_input() {
    let law = FlowLaw { alpha0: 0.1, nu: 0.1, zeta: 0.0 };
    let small = ClosedCurve::circle(1.0, 32, [0.0, 0.0]);
    assert!(matches!(evolve(&small, &law, EPS, &opts(1e-3, 1.0)), Err(FlowError::TooFewMarkers { got: 32, need: 64 })));
    let eight = ClosedCurve {
        markers: (0..128)
            .map(|i| {
                let t = TAU * i as f64 / 128.0;
                [t.sin(), (2.0 * t).sin() / 2.0]
            })
            .collect(),
        time: 0.0,
    };
    assert!(eight.self_intersects());
    assert!(matches!(evolve(&eight, &law, EPS, &opts(1e-3, 1.0)), Err(FlowError::SelfIntersection)));
    assert!(matches!(normal_velocity(&eight, &law, EPS), Err(FlowError::SelfIntersection)));
    let c = ClosedCurve::circle(1.0, 64, [0.0, 0.0]);
    assert!(evolve(&c, &law, EPS, &opts(0.0, 1.0)).is_err());
}

#[test]
fn clockwise_input_is_reoriented() {
    let law = FlowLaw { alpha0: 0.05, nu: 0.3, zeta: 0.0 };
    let mut c = ClosedCurve::circle(1.0, 128, [0.0, 0.0]);
    c.markers.reverse();
    let tr = evolve(&c, &law, EPS, &opts(1e-3, 1.0)).unwrap();
    assert!(tr.last.signed_area() > 0.0);
    assert!((mean_radius(&tr.last) - 0.9f64.sqrt()).abs() < 1e-4);
}

#[test]
fn from_extracted_contour() {
    let n = 256;
    let l = 12.0;
    let h = l / n as f64;
    let mut v = vec![0.0; n * n];
    for iy in 0..n {
        for ix in 0..n {
            v[iy * n + ix] = (((ix as f64 * h - 6.0).hypot(iy as f64 * h - 6.0) - 2.0) / 0.3).tanh();
        }
    }
    let cs = extract_field(&v, n, h);
    let c = ClosedCurve::from_contour(&cs[0], 128).unwrap();
    assert_eq!(c.len(), 128);
    assert!(c.spacing_spread() < 1e-2);
    assert!((mean_radius(&c) - 2.0).abs() < 1e-3);
    let open = Contour { closed: false, ..cs[0].clone() };
    assert!(ClosedCurve::from_contour(&open, 128).is_err());
}

#[test]
fn redistribution_equalizes_spacing() {
    // crowd markers on one side
    let n = 200;
    let markers = (0..n)
        .map(|i| {
            let s = i as f64 / n as f64;
            let t = TAU * (s + 0.1 * (TAU * s).sin());
            [2.0 * t.cos(), t.sin()]
        })
        .collect();
    let mut c = ClosedCurve { markers, time: 0.0 };
    assert!(c.spacing_spread() > 0.3);
    let area = c.signed_area();
    c.redistribute();
    assert!(c.spacing_spread() < 1e-2, "{}", c.spacing_spread());
    assert!((c.signed_area() / area - 1.0).abs() < 1e-3);
}

#[test]
fn csv_outputs() {
    let law = FlowLaw { alpha0: 0.05, nu: 0.3, zeta: 0.0 };
    let c = ClosedCurve::circle(1.0, 64, [0.0, 0.0]);
    let tr = evolve(&c, &law, EPS, &EvolveOptions { dt: 1e-3, t_end: 0.1, record_every: 0.05, snapshot_every: 0.05 }).unwrap();
    assert_eq!(tr.snapshots.len(), 3);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("traj.csv");
    tr.write_csv(&p).unwrap();
    let mut rd = csv::Reader::from_path(&p).unwrap();
    assert_eq!(rd.headers().unwrap(), vec!["T", "length", "kappa_min", "kappa_max", "radius", "event"]);
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(&rows[2][0], "0.1");
    let q = dir.path().join("markers.csv");
    write_markers_csv(&q, &tr.snapshots).unwrap();
    let text = std::fs::read_to_string(&q).unwrap();
    assert!(text.starts_with("T,index,x,y\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 64);
}

#[test]
fn marker_convergence() {
    // equivalent-radius error against the circle law under refinement
    let law = FlowLaw { alpha0: 0.05, nu: 0.3, zeta: 0.0 };
    let exact = 0.8f64.sqrt();
    let err = |n: usize| {
        let tr = evolve(&ClosedCurve::circle(1.0, n, [0.0, 0.0]), &law, EPS, &opts(1e-3, 2.0)).unwrap();
        (tr.last.equivalent_radius() - exact).abs()
    };
    let (e1, e2) = (err(64), err(128));
    assert!(e1 / e2 > 3.5, "{e1:e} {e2:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gauss_bonnet_and_rate_agreement(a in 0.02..0.15f64, k in 2..6u32, r0 in 1.0..3.0f64) {
        let c = ClosedCurve::polar(|t| r0 * (1.0 + a * (k as f64 * t).cos()), 256, [0.1, -0.4]);
        let g = Geometry::new(&c, &SpectralDiff::new(256));
        prop_assert!((g.total_curvature() - TAU).abs() < 1e-8);
        let law = FlowLaw { alpha0: 0.03, nu: 0.35, zeta: 0.05 };
        let x = length_rate(&c, &law, 0.3).unwrap();
        let y = length_rate_direct(&c, &law, 0.3).unwrap();
        prop_assert!((x - y).abs() < 1e-8 * x.abs().max(1.0));
    }

    #[test]
    fn circle_law_radius(r in 0.5..3.0f64, alpha0 in 0.01..0.2f64) {
        let law = FlowLaw { alpha0, nu: 0.3, zeta: 0.0 };
        let t = 0.25 * r * r / alpha0;
        let sol = circle_ode(r, &law, EPS, t, t / 4.0).unwrap();
        let want = (r * r - 2.0 * alpha0 * t).sqrt();
        prop_assert!((sol.radius_at(t).unwrap() - want).abs() < 1e-8 * r);
    }
}
