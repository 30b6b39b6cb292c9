use dce_core::cavity::{coupling_coefficient, CavityGeometry, Dimensionality, ModeIndex};
use dce_core::msa::{build_msa_matrix, cluster_of};
use dce_core::resonance::{build_coupling_cluster, DriveFrequency, SearchBounds};
use num_complex::Complex64;
use proptest::prelude::*;

fn mode3() -> impl Strategy<Value = ModeIndex> {
    (1u32..40, 1u32..6, 1u32..6).prop_map(|(x, y, z)| ModeIndex::new(x, y, z))
}

fn has(ev: &[Complex64], z: Complex64, tol: f64) -> bool {
    ev.iter().any(|w| (w - z).norm() <= tol)
}

fn check_quadruples(ev: &[Complex64]) -> Result<(), TestCaseError> {
    let scale = ev.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tol = 1e-9 * scale;
    for &z in ev {
        prop_assert!(has(ev, -z, tol), "−λ missing for {} in {:?}", z, ev);
        prop_assert!(has(ev, z.conj(), tol), "λ* missing for {} in {:?}", z, ev);
    }
    let sum: f64 = ev.iter().map(|z| z.re).sum();
    prop_assert!(sum.abs() <= tol);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn coupling_antisymmetry_and_selection(k in mode3(), j in mode3()) {
        let g = coupling_coefficient(k, j);
        prop_assert_eq!(g, -coupling_coefficient(j, k));
        if k.transverse() != j.transverse() || k.nx == j.nx {
            prop_assert_eq!(g, 0.0);
        } else {
            let (kx, jx) = (k.nx as f64, j.nx as f64);
            let sign = if (k.nx + j.nx) % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!((g - sign * 2.0 * kx * jx / (jx * jx - kx * kx)).abs() <= 1e-15 * g.abs().max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn singleton_spectra_are_symmetric(kx in 1u32..12, ky in 1u32..12, kz in 1u32..12, alpha in -20.0f64..20.0) {
        let g = CavityGeometry::cube();
        let k = ModeIndex::new(kx, ky, kz);
        let d = DriveFrequency::twice_mode(&g, k).unwrap();
        let sys = build_msa_matrix(&cluster_of(&g, &d, &[k]).unwrap(), alpha).unwrap();
        check_quadruples(&sys.eigenvalues())?;
    }

    #[test]
    fn sum_pair_spectra_are_symmetric(sx in 1u32..15, dx in 1u32..15, ty in 1u32..6, tz in 1u32..6) {
        let g = CavityGeometry::new(1.0, 0.8, 1.3, Dimensionality::Three).unwrap();
        let (s, p) = (ModeIndex::new(sx, ty, tz), ModeIndex::new(sx + dx, ty, tz));
        let d = DriveFrequency::mode_sum(&g, s, p).unwrap();
        let sys = build_msa_matrix(&cluster_of(&g, &d, &[s, p]).unwrap(), 0.0).unwrap();
        check_quadruples(&sys.eigenvalues())?;
        for tau in [0.0, 0.25, 0.5, 1.0] {
            let sol = sys.evolve(tau).unwrap();
            let scale = 1.0 + sol.photon_numbers().iter().sum::<f64>();
            prop_assert!(sol.unitarity_defect() <= 1e-10 * scale);
        }
    }

    #[test]
    fn tuned_pair_spectra_are_symmetric(kx in 1u32..5, step in 1u32..6, ky in 1u32..5) {
        let jx = 3 * kx + 2 * step;
        let ry2 = (jx * jx - 9 * kx * kx) as f64 / (8 * ky * ky) as f64;
        let g = CavityGeometry::new(1.0, 1.0 / ry2.sqrt(), 1.0, Dimensionality::Two).unwrap();
        let (k, j) = (ModeIndex::planar(kx, ky), ModeIndex::planar(jx, ky));
        let d = DriveFrequency::twice_mode(&g, k).unwrap();
        let c = cluster_of(&g, &d, &[k, j]).unwrap();
        prop_assume!(c.couplings.len() == 1);
        let sys = build_msa_matrix(&c, 0.0).unwrap();
        check_quadruples(&sys.eigenvalues())?;
        for tau in [0.0, 0.3, 0.9] {
            let sol = sys.evolve(tau).unwrap();
            let scale = 1.0 + sol.photon_numbers().iter().sum::<f64>();
            prop_assert!(sol.unitarity_defect() <= 1e-10 * scale);
        }
    }

    #[test]
    fn singleton_unitarity_over_grid(kx in 1u32..8, ky in 1u32..8, kz in 1u32..8) {
        let g = CavityGeometry::cube();
        let k = ModeIndex::new(kx, ky, kz);
        let d = DriveFrequency::twice_mode(&g, k).unwrap();
        let sys = build_msa_matrix(&cluster_of(&g, &d, &[k]).unwrap(), 0.0).unwrap();
        for sol in sys.evolve_many(&[0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]).unwrap() {
            let scale = 1.0 + sol.photons_at(0);
            prop_assert!(sol.unitarity_defect() <= 1e-10 * scale);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cluster_discovery_is_scale_invariant(
        p in 1i64..6, q in 1i64..6, kx in 1u32..6, ky in 1u32..6, kz in 1u32..6, s in 0.05f64..20.0,
    ) {
        use num_bigint::BigInt;
        use num_rational::BigRational;
        let ry2 = BigRational::new(BigInt::from(p), BigInt::from(q));
        let rz2 = BigRational::new(BigInt::from(q), BigInt::from(p + q));
        let g = CavityGeometry::from_ratios(Dimensionality::Three, ry2, rz2).unwrap();
        let gs = g.scaled(s).unwrap();
        let k = ModeIndex::new(kx, ky, kz);
        let bounds = SearchBounds { max_x_index: 200, ..SearchBounds::default() };
        let a = build_coupling_cluster(&g, &DriveFrequency::twice_mode(&g, k).unwrap(), &[k], bounds);
        let b = build_coupling_cluster(&gs, &DriveFrequency::twice_mode(&gs, k).unwrap(), &[k], bounds);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.modes(), b.modes());
                let ka: Vec<_> = a.couplings.iter().map(|c| (c.first, c.second, c.kind)).collect();
                let kb: Vec<_> = b.couplings.iter().map(|c| (c.first, c.second, c.kind)).collect();
                prop_assert_eq!(ka, kb);
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "scaling changed the outcome: {:?} vs {:?}", a.is_ok(), b.is_ok()),
        }
    }
}
