use super::*;
use crate::geom::scale;
use proptest::prelude::*;

const R: f64 = 1.5;

fn coarse() -> QuadSpec {
    QuadSpec { spacing: 0.2, min_nodes: 4 }
}

#[test]
fn two_hemispheres() {
    let p = equal_area_partition(R, 2, coarse()).unwrap();
    assert_eq!(p.len(), 2);
    for d in &p.detectors {
        assert!((d.area - 2.0 * PI * R * R).abs() < 1e-12);
        assert!((d.diameter - 2.0 * R).abs() < 1e-12);
    }
    assert!((p.c_ecc - (2.0 / PI).sqrt()).abs() < 1e-12);
    assert_eq!(sampling_distribution(&p), vec![0.5, 0.5]);
    p.validate().unwrap();
}

#[test]
fn six_cells_have_equal_area() {
    let p = equal_area_partition(R, 6, coarse()).unwrap();
    let want = 4.0 * PI * R * R / 6.0;
    for d in &p.detectors {
        assert!((d.area - want).abs() < 1e-3 * want);
        let ws: f64 = d.quad_nodes.iter().map(|(_, w)| w).sum();
        assert!((ws - want).abs() < 1e-10 * want);
    }
    p.validate().unwrap();
}

#[test]
fn diameter_scales_like_inverse_root_count() {
    let d: Vec<f64> = [24, 96, 384].iter().map(|&n| max_diameter(R, n).unwrap()).collect();
    for w in d.windows(2) {
        let q = w[0] / w[1];
        assert!((1.8..=2.2).contains(&q), "{d:?}");
    }
}

#[test]
fn eccentricity_stays_bounded() {
    for n in (2..400).chain([1000, 2500, 5000]) {
        let cells = zonal_cells(n).unwrap();
        assert_eq!(cells.len(), n);
        let worst = cells.iter().map(|c| c.diameter(R) / c.area(R).sqrt()).fold(0.0, f64::max);
        assert!(worst <= 4.0, "n={n}: {worst}");
        let total: f64 = cells.iter().map(|c| c.area(R)).sum();
        assert!((total - 4.0 * PI * R * R).abs() < 1e-10);
        for c in &cells {
            assert!((c.area(R) * n as f64 / (4.0 * PI * R * R) - 1.0).abs() < 1e-3);
        }
    }
}

#[test]
fn diameter_is_not_optimistic() {
    // brute force over a dense grid of each cell never exceeds the formula
    for n in [5, 17, 40] {
        for c in zonal_cells(n).unwrap() {
            let mut pts = Vec::new();
            for a in 0..=30 {
                let z = c.z_lo + (c.z_hi - c.z_lo) * a as f64 / 30.0;
                for b in 0..=60 {
                    pts.push(point(R, z, c.phi0 + c.width * b as f64 / 60.0));
                }
            }
            let mut best: f64 = 0.0;
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    best = best.max(dist(pts[i], pts[j]));
                }
            }
            let d = c.diameter(R);
            assert!(best <= d * (1.0 + 1e-12), "{best} > {d}");
            assert!(best >= d * (1.0 - 2e-3), "{best} << {d}");
        }
    }
}

#[test]
fn quadrature_integrates_constants_and_linear_tangentials() {
    let p = equal_area_partition(R, 30, coarse()).unwrap();
    let (nodes, w, _) = p.all_nodes();
    let s: f64 = w.iter().sum();
    assert!((s - 4.0 * PI * R * R).abs() < 1e-9);
    assert!(nodes.iter().all(|x| (norm(*x) - R).abs() < 1e-12 * R));
    assert_eq!(p.shared_nodes(), 0);
    // z^2 integrates to 4 pi R^4 / 3
    let z2: f64 = nodes.iter().zip(&w).map(|(x, w)| w * x[2] * x[2]).sum();
    assert!((z2 - 4.0 * PI * R.powi(4) / 3.0).abs() < 1e-9);
}

#[test]
fn scale_matched_partitions() {
    let mu = 1.5;
    let ns: Vec<usize> = (0..3).map(|j| detectors_for_scale(R, j, mu).unwrap()).collect();
    for w in ns.windows(2) {
        let f = w[1] as f64 / w[0] as f64;
        assert!((3.5..=4.5).contains(&f), "{ns:?}");
    }
    let p = partition_for_scale(R, 1, mu, coarse()).unwrap();
    assert!(p.max_diameter() <= mu / 2.0);
    assert!(max_diameter(R, p.len() - 1).unwrap() > mu / 2.0);
    assert_eq!(detectors_for_scale(R, 0, 100.0).unwrap(), 2);
    assert!(matches!(detectors_for_scale(R, 30, 1.0), Err(PatError::Infeasible(_))));
}

#[test]
fn merging_doubles_probability() {
    let p = equal_area_partition(R, 12, coarse()).unwrap();
    let q = p.merged(3, 4).unwrap();
    let nu = sampling_distribution(&p);
    let nq = sampling_distribution(&q);
    assert_eq!(nq.len(), 11);
    assert!((nq[3] - 2.0 * nu[3]).abs() < 1e-12);
    assert!((nq[0] - nu[0]).abs() < 1e-15);
    assert!((nq[10] - nu[11]).abs() < 1e-15);
    q.validate().unwrap();
    assert!((nq.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn sampling_degenerate_and_deterministic() {
    let mut nu = vec![0.0; 5];
    nu[0] = 1.0;
    assert!(sample_detectors(&nu, 50, 3).unwrap().iter().all(|&i| i == 0));
    let u = vec![0.25; 4];
    assert_eq!(sample_detectors(&u, 100, 9).unwrap(), sample_detectors(&u, 100, 9).unwrap());
    assert_ne!(sample_detectors(&u, 100, 9).unwrap(), sample_detectors(&u, 100, 10).unwrap());
}

#[test]
fn uniform_sampling_passes_chi_square() {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let n = 20;
    let m = 100_000;
    let nu = vec![1.0 / n as f64; n];
    let draws = sample_detectors(&nu, m, 2024).unwrap();
    let mut counts = vec![0usize; n];
    for d in draws {
        counts[d] += 1;
    }
    let e = m as f64 / n as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let p = 1.0 - ChiSquared::new((n - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 1e-3, "chi2 = {chi2}, p = {p}");
    let sigma = (e * (1.0 - 1.0 / n as f64)).sqrt();
    assert!(counts.iter().all(|&c| (c as f64 - e).abs() <= 4.0 * sigma));
}

#[test]
fn exp_map_is_isometric_at_the_origin() {
    let p = [0.0, 0.6, 0.8];
    let v = [1.0, 0.0, 0.0];
    let w = [0.0, 0.8, -0.6];
    for t in [1e-2, 1e-3, 1e-4] {
        let a = exp_map(p, scale(v, t));
        let b = exp_map(p, scale(w, t));
        let ratio = dist(a, b) / (t * dist(v, w));
        assert!((ratio - 1.0).abs() < t, "{ratio}");
        assert!((norm(a) - 1.0).abs() < 1e-14);
    }
}

#[test]
fn disk_cap_area_matches_taylor() {
    let (_, delta) = delta_for_mu(0.5).unwrap();
    for t in [1.0, 0.5, 0.25] {
        let img = exp_map_cap([0.0, 0.0, 1.0], t, &PlanarRegion::Disk { radius: delta }, delta).unwrap();
        let tr = t * delta;
        let ratio = img.area / img.planar_area;
        assert!((ratio - 1.0).abs() <= tr * tr / 12.0 + 1e-12, "{ratio}");
        assert!((img.diameter - 2.0 * tr.sin()).abs() < 1e-12);
    }
}

#[test]
fn inflation_stays_below_bound() {
    for mu in [0.05, 0.2, 0.5, 1.0] {
        let (mu0, delta) = delta_for_mu(mu).unwrap();
        assert!(inflation_factor(mu0) <= 1.0 + mu + 1e-12);
        assert!(delta <= mu0 && delta < 1.0);
        let r = 0.95 * delta;
        let shapes = [
            PlanarRegion::Disk { radius: r },
            PlanarRegion::Polygon(vec![[-r, 0.0], [0.0, -0.5 * r], [0.6 * r, 0.0], [0.0, 0.7 * r]]),
            PlanarRegion::Polygon(vec![[-0.7 * r, -0.7 * r], [0.7 * r, -0.7 * r], [0.7 * r, 0.7 * r], [-0.7 * r, 0.7 * r]]),
        ];
        for s in &shapes {
            for t in [1.0, 0.3] {
                let img = exp_map_cap([0.6, 0.0, 0.8], t, s, delta).unwrap();
                assert!(img.inflation <= 1.0 + mu, "mu={mu}: {}", img.inflation);
                assert!(img.distortion.0 >= 1.0 / (1.0 + mu) && img.distortion.1 <= 1.0 + mu);
            }
        }
    }
    let (_, delta) = delta_for_mu(0.1).unwrap();
    let big = PlanarRegion::Disk { radius: 1.5 * delta };
    assert!(exp_map_cap([0.0, 0.0, 1.0], 0.5, &big, delta).is_err());
}

#[test]
fn polygon_area_matches_disk_limit() {
    // a fine regular polygon approaches the disk cap area
    let r = 0.3;
    let k = 720;
    let v: Vec<[f64; 2]> = (0..k)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / k as f64;
            [r * a.cos(), r * a.sin()]
        })
        .collect();
    let img = exp_map_cap([1.0, 0.0, 0.0], 1.0, &PlanarRegion::Polygon(v), 0.5).unwrap();
    let want = 2.0 * PI * (1.0 - r.cos());
    assert!((img.area - want).abs() < 1e-4 * want, "{} vs {want}", img.area);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn partitions_cover_and_certify(n in 2usize..300) {
        let p = equal_area_partition(R, n, QuadSpec { spacing: 0.5, min_nodes: 4 }).unwrap();
        prop_assert!((p.total_area() - 4.0 * PI * R * R).abs() < 1e-4 * 4.0 * PI * R * R);
        prop_assert!(p.c_u <= 1.0 + 1e-9);
        prop_assert!(p.validate().is_ok());
        let nu = sampling_distribution(&p);
        prop_assert!((nu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn located_detector_owns_its_nodes(n in 2usize..120, k in 0usize..1000) {
        let p = equal_area_partition(R, n, QuadSpec { spacing: 0.5, min_nodes: 4 }).unwrap();
        let d = &p.detectors[k % n];
        let (x, _) = d.quad_nodes[k % d.quad_nodes.len()];
        prop_assert_eq!(p.locate(x), Some(d.id));
    }
}
