use super::*;
use crate::sensing::{build_column_cache, coherence_bound};
use crate::spheregeom::equal_area_partition;
use crate::wavefield::radial::SeparableTerm;
use crate::wavefield::{forward_trace, TraceOptions, TraceSource};
use crate::wavelet3d::{build_dictionary, Filter1D, LatticeGeometry};

fn dict() -> Dictionary {
    let f = Filter1D::daubechies(2).unwrap();
    build_dictionary(&f, 1, 5, LatticeGeometry::centered(0.25, 3)).unwrap()
}

fn bump(points: usize) -> ScalarField3 {
    let g = Grid3::periodic(4.5, points).unwrap();
    let c = [0.15, 0.1, -0.05];
    ScalarField3::from_fn(g, |x| (-0.5 * crate::geom::dist(x, c).powi(2) / 0.04).exp())
}

#[test]
fn trace_identity_on_a_bump_and_refinement() {
    let u = bump(64);
    let rep = check_trace_identity(&u, 1.5, TimeGrid::new(3.0, 90).unwrap(), 24, 8).unwrap();
    assert!(rep.pass, "{}", rep.summary_line());
    // on the grid route the interpolation sets the floor
    let lo = check_trace_identity(&u, 1.5, TimeGrid::new(3.0, 90).unwrap(), 24, 4).unwrap();
    assert!((lo.measured["ratio"] - 1.0).abs() > (rep.measured["ratio"] - 1.0).abs());
    // on the radial route halving dt and doubling the rule converges
    let d = dict();
    let x = random_family(&d, 0, 8, "id", 1).remove(0);
    let mut last = f64::INFINITY;
    for (n, deg) in [(50, 6), (100, 12), (200, 24), (400, 48)] {
        let r = check_trace_identity_atoms(&d, &x, 1.5, TimeGrid::new(3.0, n).unwrap(), deg, 0.5).unwrap();
        let dev = (r.measured["ratio"] - 1.0).abs();
        assert!(dev < last, "{n} {deg}: {dev} after {last}");
        last = dev;
    }
    assert!(last < 2e-2, "{last}");
    let z = ScalarField3::zeros(u.grid);
    let rep = check_trace_identity(&z, 1.5, TimeGrid::new(3.0, 45).unwrap(), 12, 4).unwrap();
    assert!(rep.pass && rep.measured["lhs"] == 0.0);
    // a time step above half the grid spacing is flagged
    assert!(matches!(
        check_trace_identity(&u, 1.5, TimeGrid::new(3.0, 20).unwrap(), 12, 4),
        Err(PatError::UnderResolved(_))
    ));
}

#[test]
fn gradient_trace_identity_on_a_bump() {
    let u = bump(64);
    let coarse = check_gradient_trace_identity(&u, 1.5, TimeGrid::new(3.0, 90).unwrap(), 24, 4).unwrap();
    let fine = check_gradient_trace_identity(&u, 1.5, TimeGrid::new(3.0, 90).unwrap(), 24, 8).unwrap();
    let (rc, rf) = (coarse.measured["ratio"], fine.measured["ratio"]);
    assert!(fine.pass, "{}", fine.summary_line());
    assert!((rf - 1.0).abs() < (rc - 1.0).abs(), "{rc} -> {rf}");
    let z = ScalarField3::zeros(u.grid);
    assert!(check_gradient_trace_identity(&z, 1.5, TimeGrid::new(3.0, 45).unwrap(), 12, 4).unwrap().pass);
}

#[test]
fn sandwich_constants_pass_and_sabotage() {
    let d = dict();
    // the constants for d(K, Sigma) = 0.4 are 1/2 and sqrt(1.875)
    assert!(((1.5f64 / 6.0).sqrt() - 0.5).abs() < 1e-15);
    assert!(((1.5f64 / 0.8).sqrt() - 1.369_306_393_762_915_2).abs() < 1e-12);
    let fam = random_family(&d, 0, 4, "fam", 10);
    let time = TimeGrid::new(3.0, 150).unwrap();
    let rep = check_stability_sandwich(&d, 0, &fam, 1.5, time, 24, 0.5).unwrap();
    assert!(rep.pass, "{}", rep.summary_line());
    assert!(rep.measured["homogeneity_defect"] <= 1e-12);
    assert!((rep.measured["C"] - (1.5 / (2.0 * d.k_distance_to_sphere(1.5))).sqrt()).abs() < 1e-15);
    // a single atom sits between the two constants as well
    let one = [CoeffVec::unit(&d, 0, 13)];
    assert!(check_stability_sandwich(&d, 0, &one, 1.5, time, 24, 0.5).unwrap().pass);
    // T < 2R: the window misses part of the energy and the lower bound fails
    let short = TimeGrid::new(0.75, 38).unwrap();
    let bad = check_stability_sandwich(&d, 0, &fam, 1.5, short, 24, 0.5).unwrap();
    assert!(!bad.pass);
    assert!(bad.measured["min_ratio"] < 0.9 * bad.measured["c"]);
}

#[test]
fn seminorm_of_constant_and_linear_traces() {
    let r = 1.5;
    let q = SeminormNodes::equal_area(r, 1500).unwrap();
    let k = slobodeckij_kernel(&q, 1.5);
    let st = GradientStencil::new(&q, 2.5).unwrap();
    let time = TimeGrid::new(1.0, 10).unwrap();
    let mut tab = crate::wavefield::TraceTable::zeros(q.nodes.clone(), time);
    // every node carries the same series: constant in space
    for i in 0..q.nodes.len() {
        tab.row_mut(i).iter_mut().enumerate().for_each(|(k, v)| *v = 1.0 + k as f64);
    }
    assert!(slobodeckij_seminorm_sq(&tab, &q, &k, 1.5, &st) <= 1e-9);
    // u = z is a degree-1 harmonic; Funk-Hecke gives the seminorm 16 pi^2 R^3 / 3
    for (i, x) in q.nodes.iter().enumerate() {
        tab.row_mut(i).iter_mut().for_each(|v| *v = x[2]);
    }
    let want = 16.0 * std::f64::consts::PI.powi(2) * r.powi(3) / 3.0;
    let full = slobodeckij_seminorm_sq(&tab, &q, &k, 1.5, &st);
    let cut = slobodeckij_truncated_sq(&tab, &k);
    assert!((full / want - 1.0).abs() < 1e-2, "{full} vs {want}");
    assert!(cut < full);
}

#[test]
fn h_half_bound_across_levels() {
    let d = dict();
    let rep = check_h_half_bound(&d, 1, 1.5, TimeGrid::new(3.0, 150).unwrap(), 3000, 0.5, 1).unwrap();
    println!("{}", rep.summary_line());
    assert!(rep.pass, "{}", rep.summary_line());
}

#[test]
fn streaming_coherence_matches_cache() {
    let d = dict();
    let p = equal_area_partition(1.5, 10, crate::spheregeom::QuadSpec { spacing: 0.3, min_nodes: 3 }).unwrap();
    let time = TimeGrid::new(3.0, 100).unwrap();
    let cache = build_column_cache(&d, 1, &p, time, 0.5).unwrap();
    let a = coherence_bound(&cache, &d, d.count_upto(1)).unwrap();
    let b = scan_coherence(&d, 1, &p, time, 0.5);
    assert_eq!(a.argmax, b.argmax);
    assert!((a.b_raw - b.b_raw).abs() <= 1e-12 * a.b_raw);
    assert!((a.b_nu - b.b_nu).abs() <= 1e-12 * a.b_nu);
    assert!((a.huygens_fraction - b.huygens_fraction).abs() <= 1e-12);
    assert!(b.huygens_fraction < 1.0);
}

#[test]
fn dictionary_and_window_certificates() {
    let d = dict();
    assert!(check_gram(&d, 1).pass);
    let lp = check_littlewood_paley(&d, 1, 3).unwrap();
    assert!(lp.pass, "{}", lp.summary_line());
    let h = check_huygens_windows(&d, 1, 1.5, TimeGrid::new(3.0, 150).unwrap(), 16, 0.5).unwrap();
    assert!(h.pass, "{}", h.summary_line());
    // an atom trace is zero before the nearest support point reaches a node
    let t = [SeparableTerm::from_atom(&d.atoms[0])];
    let x = [0.0, 0.0, 1.5];
    let tab = forward_trace(TraceSource::Separable(&t), &[x], 1.5, TimeGrid::new(3.0, 150).unwrap(), TraceOptions::default())
        .unwrap();
    let first = d.atoms[0].support_box.dist_to_point(x);
    for (k, v) in tab.row(0).iter().enumerate() {
        if (k as f64 + 0.5) * 0.02 < first {
            assert_eq!(*v, 0.0);
        }
    }
}

#[test]
fn balancing_and_quasi_diagonal_at_j0_zero() {
    let d = dict();
    let time = TimeGrid::new(3.0, 150).unwrap();
    let quad = crate::spheregeom::QuadSpec { spacing: 0.15, min_nodes: 3 };
    let b = check_balancing_trend(&d, 0, 0.5, 1.5, time, 0.5, quad).unwrap();
    assert!(b.pass, "{}", b.summary_line());
    let fam = random_family(&d, 0, 1, "fam", 20);
    let q = check_quasi_diagonal(&d, 0, &fam, 0.5, 1.5, time, 0.5, quad).unwrap();
    assert!(q.pass, "{}", q.summary_line());
    // a coarse partition leaves too much energy off the averages
    assert!(!check_quasi_diagonal(&d, 0, &fam, 1.0, 1.5, time, 0.5, quad).unwrap().pass);
    assert!(q.measured["family_min"] >= q.measured["projected_lower"] * (1.0 - 1e-9));
}

#[test]
fn suite_selection() {
    let d = dict();
    let cfg = SuiteConfig {
        radius: 1.5,
        t_final: 3.0,
        n_steps: 100,
        grid_half_width: 4.5,
        grid_points: 64,
        sphere_degree: 16,
        interp_order: 4,
        kappa: 0.5,
        j0: 1,
        mu: 1.0,
        quad: crate::spheregeom::QuadSpec { spacing: 0.2, min_nodes: 3 },
        n_fields: 1,
        family_size: 5,
        seminorm_nodes: 300,
        atoms_per_level: 2,
        coherence_levels: vec![0, 1],
    };
    let prov = Provenance { config_hash: "abc".into(), seed: 3 };
    let empty = run_certificate_suite(&cfg, &d, Some(&[]), prov.clone()).unwrap();
    assert!(empty.reports.is_empty() && empty.coverage.is_empty() && empty.pass);
    assert!(run_certificate_suite(&cfg, &d, Some(&["nope".to_string()]), prov.clone()).is_err());
    let sel = vec!["gram".to_string(), "huygens".to_string()];
    let a = run_certificate_suite(&cfg, &d, Some(&sel), prov.clone()).unwrap();
    let b = run_certificate_suite(&cfg, &d, Some(&sel), prov).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.reports.iter().map(|r| r.name.as_str()).collect::<Vec<_>>(), ["gram", "huygens"]);
    assert!(a.reports.iter().all(|r| r.provenance.config_hash == "abc"));
}

