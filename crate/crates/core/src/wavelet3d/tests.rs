use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn db2_dict(j_max: u32) -> Dictionary {
    let f = Filter1D::daubechies(2).unwrap();
    build_dictionary(&f, j_max, j_max + 4, LatticeGeometry::centered(0.25, 3)).unwrap()
}

/// Independent enumeration: closest point of each candidate box by clamping.
fn brute_force_count(g: &LatticeGeometry, ls: i64, d: u32) -> usize {
    let w = g.step / (1u64 << d) as f64;
    let mut count = 0;
    let span = 40;
    for a in -span..span {
        for b in -span..span {
            for c in -span..span {
                let n = [a, b, c];
                let mut d2 = 0.0;
                for i in 0..3 {
                    let lo = g.origin[i] + w * n[i] as f64;
                    let hi = lo + w * ls as f64;
                    let p = g.ball_center[i].clamp(lo, hi);
                    d2 += (p - g.ball_center[i]).powi(2);
                }
                if d2 < g.ball_radius * g.ball_radius {
                    count += 1;
                }
            }
        }
    }
    count
}

#[test]
fn scale_zero_count_matches_enumeration() {
    let d = db2_dict(0);
    assert_eq!(d.len(), 27);
    assert_eq!(brute_force_count(&d.geometry, 3, 0), 27);
    assert!(d.atoms.iter().all(|a| a.index.eps == AtomType::Scaling));
}

#[test]
fn unit_ball_geometry_counts() {
    let f = Filter1D::daubechies(2).unwrap();
    let g = LatticeGeometry::unit_ball();
    let d = build_dictionary(&f, 2, 6, g).unwrap();
    assert_eq!(d.count_at(0), brute_force_count(&g, 3, 0));
    assert_eq!(d.count_at(1), 7 * brute_force_count(&g, 3, 0));
    assert_eq!(d.count_at(2), 7 * brute_force_count(&g, 3, 1));
    // measured constant in |Lambda_j| ~ C 2^{3j}
    let c2 = d.count_at(2) as f64 / 8.0;
    assert!(c2 > 7.0, "{c2}");
}

#[test]
fn default_level_counts() {
    let d = db2_dict(2);
    assert_eq!((d.count_at(0), d.count_at(1), d.count_at(2)), (27, 189, 189));
    assert_eq!(d.count_upto(1), 216);
    assert_eq!(d.count_upto(2), 405);
}

#[test]
fn gram_is_identity() {
    let d = db2_dict(2);
    assert!(d.gram_defect(2) < 1e-12, "{}", d.gram_defect(2));
    let f3 = Filter1D::daubechies(3).unwrap();
    let g = LatticeGeometry::centered(0.15, 5);
    let d3 = build_dictionary(&f3, 1, 5, g).unwrap();
    assert!(d3.gram_defect(1) < 1e-12);
}

#[test]
fn norms_means_and_supports() {
    let d = db2_dict(2);
    for a in &d.atoms {
        assert!((a.norm_sq() - 1.0).abs() < 1e-12);
        if a.index.eps != AtomType::Scaling {
            assert!(a.integral().abs() < 1e-12);
        }
        assert!(d.k_box.contains_box(&a.support_box, 1e-12));
    }
    // K is the centred cube of side 5 h0
    for i in 0..3 {
        assert!((d.k_box.lo[i] + 0.625).abs() < 1e-12 && (d.k_box.hi[i] - 0.625).abs() < 1e-12);
    }
    let dk = d.k_distance_to_sphere(1.5);
    assert!((dk - (1.5 - 0.625 * 3f64.sqrt())).abs() < 1e-12);
}

#[test]
fn under_resolved_rejected() {
    let f = Filter1D::daubechies(2).unwrap();
    let r = build_dictionary(&f, 2, 5, LatticeGeometry::centered(0.25, 3));
    assert!(matches!(r, Err(PatError::UnderResolved(_))));
}

#[test]
fn index_convention_enforced() {
    assert!(DictIndex::new(0, [0; 3], AtomType::Wavelet(3)).is_err());
    assert!(DictIndex::new(1, [0; 3], AtomType::Scaling).is_err());
    assert!(DictIndex::new(2, [0; 3], AtomType::Wavelet(7)).is_ok());
}

#[test]
fn synthesize_analyze_roundtrip() {
    let d = db2_dict(1);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut x = CoeffVec::zeros(&d, 1);
    for _ in 0..5 {
        let k = rng.random_range(0..x.len());
        x.values[k] = rng.random_range(-1.0..1.0);
    }
    let u = d.synthesize(&x).unwrap();
    let y = d.analyze(&u, 1).unwrap();
    for (a, b) in x.values.iter().zip(&y.values) {
        assert!((a - b).abs() < 1e-10);
    }
    // Parseval on the span
    assert!((u.l2_norm() - x.norm2()).abs() < 1e-10 * x.norm2());

    // adjoint consistency against an arbitrary field
    let v = ScalarField3::from_fn(u.grid, |p| (3.0 * p[0]).sin() * (1.0 + p[1] * p[2]));
    let av = d.analyze(&v, 1).unwrap();
    let lhs: f64 = av.values.iter().zip(&x.values).map(|(a, b)| a * b).sum();
    let rhs = v.dot(&u);
    assert!((lhs - rhs).abs() < 1e-8 * lhs.abs().max(1e-12));

    assert_eq!(d.analyze(&ScalarField3::zeros(u.grid), 1).unwrap().norm2(), 0.0);
}

#[test]
fn atom_analyzes_to_unit_vector() {
    let d = db2_dict(1);
    let k = 100;
    let e = CoeffVec::unit(&d, 1, k);
    let u = d.synthesize(&e).unwrap();
    let y = d.analyze(&u, 1).unwrap();
    for (i, v) in y.values.iter().enumerate() {
        let want = if i == k { 1.0 } else { 0.0 };
        assert!((v - want).abs() < 1e-10);
    }
    // finer aligned grid gives the same coefficients
    let g = d.raster_grid();
    let fine = Grid3::raster(
        std::array::from_fn(|i| g.origin[i] - 0.25 * g.spacing),
        g.spacing / 2.0,
        [2 * g.shape[0], 2 * g.shape[1], 2 * g.shape[2]],
    );
    let x = CoeffVec::unit(&d, 0, 3);
    let uf = d.synthesize_on(&x, fine).unwrap();
    let yf = d.analyze(&uf, 0).unwrap();
    assert!((yf.values[3] - 1.0).abs() < 1e-10);
}

#[test]
fn misaligned_grid_rejected() {
    let d = db2_dict(0);
    let g = Grid3::periodic(4.5, 64).unwrap();
    assert!(matches!(d.analyze(&ScalarField3::zeros(g), 0), Err(PatError::GridMismatch(_))));
}

#[test]
fn project_scales_splits() {
    let d = db2_dict(2);
    let mut x = CoeffVec::zeros(&d, 2);
    for (k, v) in x.values.iter_mut().enumerate() {
        *v = ((k * 37 % 11) as f64 - 5.0) / 7.0;
    }
    let (lo, hi) = project_scales(&d, &x, 1);
    assert!(lo.values[216..].iter().all(|v| *v == 0.0));
    assert!(hi.values[..216].iter().all(|v| *v == 0.0));
    for k in 0..x.len() {
        assert_eq!(lo.values[k] + hi.values[k], x.values[k]);
    }
    let e = lo.norm2().powi(2) + hi.norm2().powi(2) - x.norm2().powi(2);
    assert!(e.abs() < 1e-12);
    let (lo2, hi2) = project_scales(&d, &x, 2);
    assert_eq!(lo2, x);
    assert_eq!(hi2.norm2(), 0.0);
    let (lo0, _) = project_scales(&d, &x, 0);
    assert!(lo0.entries(&d).all(|(i, _)| i.eps == AtomType::Scaling));
}

#[test]
fn sparse_error_examples() {
    assert_eq!(sparse_error(&[3.0, -2.0, 1.0], 1), 3.0);
    assert_eq!(sparse_error(&[3.0, 0.0, 1.0], 2), 0.0);
    assert_eq!(sparse_error(&[1.0, 2.0], 5), 0.0);
}

#[test]
fn gradient_ratio_scales_dyadically() {
    let d = db2_dict(2);
    let mut per_level = Vec::new();
    for j in 0..=2 {
        let a = d.atoms.iter().find(|a| a.index.j == j && (j == 0 || a.index.eps.code() == 7)).unwrap();
        let r = d.gradient_ratio(a, 4) / (1u64 << a.index.dilation()) as f64;
        per_level.push(r);
    }
    let mx = per_level.iter().cloned().fold(0.0, f64::max);
    let mn = per_level.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(mx / mn < 4.0, "{per_level:?}");
}

#[test]
fn littlewood_paley_parseval_and_bracket() {
    let d = db2_dict(2);
    let mut x = CoeffVec::zeros(&d, 1);
    x.values[5] = 1.0;
    x.values[60] = -0.5;
    let (lo, hi) = littlewood_paley_ratio_coeffs(&x, 0.0, &d).unwrap();
    assert!((lo - 1.0).abs() < 1e-10 && (hi - 1.0).abs() < 1e-10);

    let mut ratios = Vec::new();
    for j in 0..=2 {
        let k = d.atoms.iter().position(|a| a.index.j == j).unwrap();
        let e = CoeffVec::unit(&d, 2, k);
        let (lo, hi) = littlewood_paley_ratio_coeffs(&e, 0.5, &d).unwrap();
        assert!(lo > 0.0 && hi >= lo);
        ratios.push(lo);
        ratios.push(hi);
    }
    let mx = ratios.iter().cloned().fold(0.0, f64::max);
    let mn = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(mx / mn <= 5.0, "{ratios:?}");
}

#[test]
fn field_and_separable_sobolev_norms_agree() {
    let d = db2_dict(1);
    let mut x = CoeffVec::zeros(&d, 1);
    x.values[2] = 0.7;
    x.values[150] = 1.3;
    let u = d.synthesize(&x).unwrap();
    let (a1, a2) = h_s_norm_sq(&u, 0.5);
    let (b1, b2) = lp::coeff_h_s_norm_sq(&x, 0.5, &d);
    assert!((a1 - b1).abs() < 1e-9 * a1 && (a2 - b2).abs() < 1e-9 * a2);
    let (lo, hi) = littlewood_paley_ratio(&u, 0.5, &d).unwrap();
    let (lo2, hi2) = littlewood_paley_ratio_coeffs(&x, 0.5, &d).unwrap();
    assert!((lo - lo2).abs() < 1e-8 && (hi - hi2).abs() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sparse_error_matches_subset_enumeration(v in proptest::collection::vec(-5.0f64..5.0, 1..=10), s in 0usize..11) {
        let n = v.len();
        let total: f64 = v.iter().map(|x| x.abs()).sum();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize > s { continue; }
            let kept: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| v[k].abs()).sum();
            best = best.min(total - kept);
        }
        prop_assert!((sparse_error(&v, s) - best).abs() < 1e-12);
    }

    #[test]
    fn random_atom_pairs_orthonormal(a in 0usize..405, b in 0usize..405) {
        let d = db2_dict(2);
        let want = if a == b { 1.0 } else { 0.0 };
        prop_assert!((d.atoms[a].inner(&d.atoms[b]) - want).abs() < 1e-12);
    }
}
