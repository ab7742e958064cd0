use proptest::prelude::*;
use spatspec_core::dft::{points_direct, points_gridding, DftMethod};
use spatspec_core::estimator::{
    coherence_and_delay, estimate_from_transforms, multitaper_estimate, periodogram, EstimateConfig, TaperedTransforms,
};
use spatspec_core::fourier::{
    tapered_dft_field, tapered_dft_points, GriddedField, PointPattern, Process, SpatialDataset, TaperedDft,
};
use spatspec_core::geometry::{
    alias_intersection, alias_set, lattice_points, nyquist_box, AliasStructure, BBox, Region, SamplingScheme,
    WavenumberGrid,
};
use spatspec_core::linalg::Selection;
use spatspec_core::models::{MaternSpec, ModelConfig, TableOptions};
use spatspec_core::tapers::{compute_tapers, GridNodes, TaperFamily, TaperOptions};
use spatspec_core::estimator::Spectrum;
use spatspec_core::{Complex64, Point};
use std::sync::OnceLock;

fn family() -> &'static TaperFamily {
    static F: OnceLock<TaperFamily> = OnceLock::new();
    F.get_or_init(|| {
        let bb = BBox::new(2, [0.0, 0.0], [30.0, 20.0]).unwrap();
        let r = Region::from_fn(bb, [1.0, 1.0], |c| c[0] < 22.0 || c[1] > 8.0).unwrap();
        compute_tapers(&r, 0.15, TaperOptions { selection: Selection::Count(4), ..Default::default() }).unwrap()
    })
}

fn symmetric_grid() -> WavenumberGrid {
    WavenumberGrid::centered(2, [0.021, 0.017], [9, 8]).unwrap()
}

fn on_lattice(x: f64, g: f64) -> bool {
    let t = x / g;
    (t - t.round()).abs() < 1e-9 * t.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn intersection_matches_brute_force(na in 1u32..=12, nb in 1u32..=12, c in 0.5f64..3.0, dim in 1usize..=2) {
        let (da, db) = (c * na as f64, c * nb as f64);
        let a = SamplingScheme::grid(dim, [da, db], [0.0, 0.0]).unwrap();
        let b = SamplingScheme::grid(dim, [db, da], [0.0, 0.0]).unwrap();
        let common = alias_intersection(&a, &b, dim);
        let radius = 2.0;
        let ga = AliasStructure::of(&a, dim);
        let gb = AliasStructure::of(&b, dim);
        let mut brute: Vec<Point> = lattice_points(&ga.generators, dim, radius)
            .into_iter()
            .map(|z| ga.point(z))
            .filter(|p| (0..dim).all(|j| on_lattice(p[j], gb.generators[j])))
            .collect();
        let mut fast: Vec<Point> = lattice_points(&common.generators, dim, radius)
            .into_iter()
            .map(|z| common.point(z))
            .collect();
        let key = |p: &Point| ((p[0] * 1e6).round() as i64, (p[1] * 1e6).round() as i64);
        brute.sort_by_key(key);
        fast.sort_by_key(key);
        prop_assert_eq!(brute.len(), fast.len());
        for (x, y) in brute.iter().zip(&fast) {
            prop_assert!((x[0] - y[0]).abs() < 1e-9 && (x[1] - y[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn alias_phases_form_a_group(dx in 0.5f64..20.0, dy in 0.5f64..20.0, sx in -5.0f64..5.0, sy in -5.0f64..5.0) {
        let g = SamplingScheme::grid(2, [dx, dy], [sx, sy]).unwrap();
        let set = alias_set(&g, 2, 3.0 / dx.min(dy));
        let a = AliasStructure::of(&g, 2);
        prop_assert_eq!(a.phase(&[0.0, 0.0]), Complex64::new(1.0, 0.0));
        for (p1, w1) in set.iter().take(12) {
            for (p2, w2) in set.iter().rev().take(12) {
                let w = a.phase(&[p1[0] + p2[0], p1[1] + p2[1]]);
                prop_assert!((w - w1 * w2).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn nyquist_volume(dx in 0.1f64..30.0, dy in 0.1f64..30.0) {
        let g = SamplingScheme::grid(2, [dx, dy], [0.0, 0.0]).unwrap();
        let k = nyquist_box(&g).unwrap();
        prop_assert!((k.volume() * dx * dy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn centred_grids_are_symmetric(sx in 1e-3f64..0.1, sy in 1e-3f64..0.1, nx in 1usize..12, ny in 1usize..12) {
        let g = WavenumberGrid::centered(2, [sx, sy], [nx, ny]).unwrap();
        prop_assert!(g.is_symmetric());
        for i in 0..g.len() {
            let j = g.negation_index(i).unwrap();
            let (a, b) = (g.point(i), g.point(j));
            prop_assert_eq!(a[0], -b[0]);
            prop_assert_eq!(a[1], -b[1]);
        }
    }

    #[test]
    fn gridding_matches_direct(seed in 0u64..1000, n in 1usize..80) {
        let pts: Vec<Point> = (0..n)
            .map(|i| {
                let t = (seed as f64 + 1.0) * (i as f64 + 0.5);
                [(t * 0.618).fract() * 50.0, (t * 0.414).fract() * 30.0]
            })
            .collect();
        let w: Vec<f64> = (0..n).map(|i| ((i as f64) * 1.7 + seed as f64).sin()).collect();
        let kg = WavenumberGrid::regular(2, [0.01, -0.02], [0.013, 0.011], [17, 13]).unwrap();
        let d = points_direct(&pts, &[&w], &kg).unwrap();
        let f = points_gridding(&pts, &[&w], &kg).unwrap();
        let scale: f64 = w.iter().map(|x| x.abs()).sum();
        for (a, b) in d[0].iter().zip(&f[0]) {
            prop_assert!((a - b).norm() <= 1e-9 * scale);
        }
    }

    #[test]
    fn field_transform_symmetry_and_linearity(seed in 0u64..10_000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let fam = family();
        let g = SamplingScheme::grid(2, [2.0, 3.0], [0.5, 1.0]).unwrap();
        let st = fam.sample_all(&g).unwrap();
        let n = st[0].nodes.len();
        let y1: Vec<f64> = (0..n).map(|i| ((i as u64 * 7919 + seed) as f64 * 0.37).sin()).collect();
        let y2: Vec<f64> = (0..n).map(|i| ((i as u64 * 104729 + seed) as f64 * 0.11).cos()).collect();
        let kg = symmetric_grid();
        let j = |v: Vec<f64>| {
            let f = GriddedField::new(&g, fam.region(), v).unwrap();
            tapered_dft_field(&f, &st, &kg, 0.0, DftMethod::Auto).unwrap()
        };
        let j1 = j(y1.clone());
        let j2 = j(y2.clone());
        let jc = j(y1.iter().zip(&y2).map(|(p, q)| a * p + b * q).collect());
        for m in 0..st.len() {
            let scale = j1[m].values.iter().chain(&j2[m].values).map(|z| z.norm()).fold(1.0, f64::max);
            for i in 0..kg.len() {
                let ni = kg.negation_index(i).unwrap();
                prop_assert!((j1[m].values[ni] - j1[m].values[i].conj()).norm() <= 1e-12 * scale);
                let lin = j1[m].values[i] * a + j2[m].values[i] * b;
                prop_assert!((jc[m].values[i] - lin).norm() <= 1e-12 * scale * (1.0 + a.abs() + b.abs()));
            }
        }
    }

    #[test]
    fn point_transform_symmetry_and_mean_shift(seed in 0u64..10_000, n in 0usize..40, lam in 0.0f64..0.5, dl in -0.2f64..0.2) {
        let fam = family();
        let region = fam.region();
        let pts: Vec<Point> = (0..n)
            .map(|i| {
                let t = (seed as f64 + 1.0) * (i as f64 + 0.5);
                [(t * 0.618).fract() * 30.0, (t * 0.414).fract() * 20.0]
            })
            .filter(|x| region.contains(x))
            .collect();
        let pat = PointPattern::unmarked(pts);
        let kg = symmetric_grid();
        let tf = fam.transfer_functions(&kg).unwrap();
        let j = tapered_dft_points(&pat, fam, &kg, lam, Some(&tf), DftMethod::Auto).unwrap();
        let js = tapered_dft_points(&pat, fam, &kg, lam + dl, Some(&tf), DftMethod::Auto).unwrap();
        for m in 0..fam.len() {
            let scale = j[m].values.iter().map(|z| z.norm()).fold(1.0, f64::max);
            for i in 0..kg.len() {
                let ni = kg.negation_index(i).unwrap();
                prop_assert!((j[m].values[ni] - j[m].values[i].conj()).norm() <= 1e-12 * scale);
                let dj = (js[m].values[i] - j[m].values[i]).norm();
                prop_assert!(dj <= dl.abs() * tf[m].values[i].norm() * (1.0 + 1e-12) + 1e-15);
            }
        }
    }

    #[test]
    fn periodogram_swap_conjugates(re1 in -5.0f64..5.0, im1 in -5.0f64..5.0, re2 in -5.0f64..5.0, im2 in -5.0f64..5.0) {
        let grid = WavenumberGrid::centered(1, [0.1, 0.0], [1, 1]).unwrap();
        let mk = |z| TaperedDft { grid: grid.clone(), values: vec![z], taper_index: 2, process_index: 0, lambda_hat: 0.0 };
        let (a, b) = (mk(Complex64::new(re1, im1)), mk(Complex64::new(re2, im2)));
        let ab = periodogram(&a, &b, false).unwrap()[0];
        let ba = periodogram(&b, &a, false).unwrap()[0];
        prop_assert_eq!(ab, ba.conj());
        let aa = periodogram(&a, &a, false).unwrap()[0];
        prop_assert!(aa.im == 0.0 && aa.re >= 0.0);
    }

    #[test]
    fn estimates_are_hermitian_psd(seed in 0u64..10_000, p in 1usize..4, m in 1usize..5) {
        let c = |i: usize| {
            let t = (seed as f64 + 3.0) * (i as f64 + 1.3);
            Complex64::new((t * 0.7).sin(), (t * 0.3).cos())
        };
        let grid = WavenumberGrid::centered(1, [0.1, 0.0], [3, 1]).unwrap();
        let dfts = (0..p)
            .map(|a| {
                (0..m)
                    .map(|s| TaperedDft {
                        grid: grid.clone(),
                        values: (0..3).map(|i| c(a * 100 + s * 10 + i)).collect(),
                        taper_index: s,
                        process_index: a,
                        lambda_hat: 0.0,
                    })
                    .collect()
            })
            .collect();
        let t = TaperedTransforms { kgrid: grid, dfts, lambda_hat: vec![0.0; p] };
        let e = estimate_from_transforms(&t, m, vec![], 0.1, false).unwrap();
        prop_assert!(e.hermitian_error() <= 1e-12);
        prop_assert!(e.min_eigen_ratio() >= -1e-10);
        let coh = coherence_and_delay(&e, None);
        for (r, th) in coh.r.iter().zip(&coh.theta) {
            if r.is_finite() {
                prop_assert!((0.0..=1.0).contains(r));
                prop_assert!(*th > -std::f64::consts::PI && *th <= std::f64::consts::PI);
            }
        }
        for i in 0..3 {
            for a in 0..p {
                for b in 0..p {
                    let (x, y) = (coh.theta(i, a, b), coh.theta(i, b, a));
                    if x.is_finite() && x.abs() < std::f64::consts::PI {
                        prop_assert!((x + y).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn true_spectra_are_valid(kx in -0.3f64..0.3, ky in -0.3f64..0.3, which in 0usize..5) {
        static T: OnceLock<Vec<spatspec_core::models::TrueSpectrum>> = OnceLock::new();
        let all = T.get_or_init(|| {
            let m = MaternSpec::new(1.0, 30.0, 2.5).unwrap();
            let g = SamplingScheme::grid(2, [5.0, 5.0], [0.0, 0.0]).unwrap();
            let g2 = SamplingScheme::grid(2, [10.0, 15.0], [0.0, 3.0]).unwrap();
            let table = TableOptions { kmax: 0.5, nk: 257, r_step: 0.5 };
            [
                ModelConfig::Poisson { lambda: 0.02 },
                ModelConfig::ShiftedPair { lambda: 0.02, tau: [10.5, 15.0] },
                ModelConfig::MarkedPoisson { lambda: 0.02, mark_mean: 1.5, mark_sd: 0.4 },
                ModelConfig::Lgcp { mu: -4.0, matern: m, grid: g, refine: 5 },
                ModelConfig::Colocation { matern: m, alpha: [0.8, 0.5], grids: [g, g2] },
            ]
            .iter()
            .map(|c| c.true_spectrum(2, table))
            .collect()
        });
        let t = &all[which];
        let (k, nk) = ([kx, ky], [-kx, -ky]);
        for a in 0..t.p {
            prop_assert!(t.entry(a, a).value(&k).re >= 0.0);
            prop_assert_eq!(t.entry(a, a).density(&k).im, 0.0);
            for b in 0..t.p {
                let x = t.entry(a, b).value(&nk);
                let y = t.entry(a, b).value(&k).conj();
                prop_assert!((x - y).norm() <= 1e-12 * x.norm().max(1e-300));
                let z = t.entry(b, a).value(&k);
                prop_assert!((z - y).norm() <= 1e-12 * z.norm().max(1e-300));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn mixed_dataset_estimates_are_structurally_valid(seed in 0u64..10_000) {
        let fam = family();
        let region = fam.region().clone();
        let g = SamplingScheme::grid(2, [3.0, 2.0], [1.0, 0.5]).unwrap();
        let n = GridNodes::new(&g, &region).unwrap().len();
        let values: Vec<f64> = (0..n).map(|i| ((i as u64 + seed) as f64 * 0.77).sin() + 2.0).collect();
        let field = GriddedField::new(&g, &region, values).unwrap();
        let pts: Vec<Point> = (0..30)
            .map(|i| {
                let t = (seed as f64 + 1.0) * (i as f64 + 0.5);
                [(t * 0.618).fract() * 30.0, (t * 0.414).fract() * 20.0]
            })
            .filter(|x| region.contains(x))
            .collect();
        let marks = (0..pts.len()).map(|i| 1.0 + (i as f64 * 0.3).cos()).collect();
        let data = SpatialDataset::new(
            region,
            vec![
                Process::Points(PointPattern::unmarked(pts.clone())),
                Process::Points(PointPattern::new(pts, Some(marks)).unwrap()),
                Process::Field(field),
            ],
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        let e = multitaper_estimate(&data, fam, &symmetric_grid(), &EstimateConfig::default()).unwrap();
        let scale = e.fhat.iter().map(|z| z.norm()).fold(1.0, f64::max);
        prop_assert!(e.hermitian_error() <= 1e-12 * scale);
        prop_assert!(e.min_eigen_ratio() >= -1e-10);
        prop_assert!(e.conjugate_symmetry_error().unwrap() <= 1e-12 * scale);
    }

    #[test]
    fn sampled_transfer_is_alias_periodic(kx in -0.2f64..0.2, ky in -0.2f64..0.2, zx in -6i64..6, zy in -6i64..6) {
        let fam = family();
        let g = SamplingScheme::grid(2, [2.0, 3.0], [0.5, 1.0]).unwrap();
        let st = fam.sample(0, &g).unwrap();
        let a = AliasStructure::of(&g, 2);
        let psi = a.point([zx, zy]);
        let kg = WavenumberGrid::scattered(2, vec![[kx, ky], [kx + psi[0], ky + psi[1]]]).unwrap();
        let h = st.transfer_function(&kg).unwrap().values;
        let scale = h[0].norm().max(1e-3);
        prop_assert!((h[1] - h[0] * a.phase(&psi)).norm() <= 1e-12 * scale.max(1.0));
    }
}

#[test]
fn flat_spectrum_helper_has_no_density() {
    let w = spatspec_core::estimator::white_spectrum(2.0);
    assert_eq!(w.density(&[0.1, 0.2]), Complex64::new(0.0, 0.0));
    assert_eq!(w.white(), 2.0);
}
