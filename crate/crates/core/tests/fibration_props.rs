use kahler_lab::exec::Exec;
use kahler_lab::fibration::{self, BaseGrid, FamilyDescriptor, Patch, Regime, RelativeModel, TauMap};
use num_complex::Complex64;
use proptest::prelude::*;

/// Affine τ with `τ(center) = tau_c`; Im τ stays positive across the stencil.
fn family(center: [f64; 2], tau_c: [f64; 2], slope: [f64; 2], n: usize) -> FamilyDescriptor {
    let s = Complex64::new(center[0], center[1]);
    let k = Complex64::new(slope[0], slope[1]);
    let t0 = Complex64::new(tau_c[0], tau_c[1]) - k * s;
    let grid = BaseGrid { center, spacing: 0.05, half_count: 2 };
    FamilyDescriptor::torus(TauMap::Affine { tau0: [t0.re, t0.im], slope }, grid, n)
}

fn c2(lo: f64, hi: f64) -> impl Strategy<Value = [f64; 2]> {
    (lo..hi, lo..hi).prop_map(|(a, b)| [a, b])
}

fn at(g: &FamilyDescriptor) -> Complex64 {
    Complex64::new(g.base_grid.center[0], g.base_grid.center[1])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wp_is_nonnegative_and_estimators_agree(
        center in c2(-1.0, 1.0),
        re in -0.5f64..0.5,
        im in 0.8f64..3.0,
        slope in c2(-1.0, 1.0),
    ) {
        prop_assume!(slope[0].hypot(slope[1]) > 0.05);
        let fam = family(center, [re, im], slope, 8);
        let ks = fibration::wp_via_ks_norm(&fam, at(&fam)).unwrap().wp_density;
        let fi = fibration::wp_fiber_integral(&fam, at(&fam)).unwrap().wp_density;
        prop_assert!(ks >= -1e-10 && fi >= -1e-10);
        prop_assert!((ks - fi).abs() <= 0.05 * ks, "{} vs {}", ks, fi);
    }

    #[test]
    fn integer_shifts_of_tau_are_invisible(
        center in c2(-1.0, 1.0),
        im in 0.8f64..3.0,
        slope in c2(-1.0, 1.0),
        shift in -3i32..=3,
    ) {
        let a = family(center, [0.2, im], slope, 8);
        let b = family(center, [0.2 + shift as f64, im], slope, 8);
        for f in [fibration::wp_via_ks_norm, fibration::wp_fiber_integral] {
            let (x, y) = (f(&a, at(&a)).unwrap().wp_density, f(&b, at(&b)).unwrap().wp_density);
            prop_assert!((x - y).abs() <= 1e-8);
        }
    }

    #[test]
    fn foliation_rank_is_full_exactly_where_wp_vanishes(
        height in 0.8f64..2.0,
        amplitude in 0.5f64..4.0,
        edge in -0.3f64..0.3,
    ) {
        let grid = BaseGrid { center: [0.0, 1.0], spacing: 0.1, half_count: 3 };
        let fam = FamilyDescriptor { tau: Some(TauMap::Mixed { height, amplitude, edge }), ..FamilyDescriptor::sphere(grid, 8) };
        let fam = FamilyDescriptor { kind: fibration::FamilyKind::TorusFamily, ..fam };
        let rep = fibration::foliation_report(&fam, Exec::Sequential).unwrap();
        for e in &rep.entries {
            let s = Complex64::new(e.base_point[0], e.base_point[1]);
            let wp = fibration::wp_fiber_integral(&fam, s).unwrap().wp_density;
            prop_assert!(e.rank <= rep.fiber_dimension);
            // Edges grazing the stencil put |c| at the threshold itself; skip that band.
            if (1e-9..1e-7).contains(&e.horizontal_sup) {
                continue;
            }
            prop_assert_eq!(wp.abs() <= 1e-8, e.rank == rep.fiber_dimension, "s = {:?}, wp = {}", s, wp);
        }
    }

    #[test]
    fn isotrivial_families_match_the_product(re in -0.5f64..0.5, im in 0.8f64..2.0, y in 2.0f64..3.0) {
        let model = RelativeModel::Product { tau0: [re, im] };
        let grid = BaseGrid { center: [0.0, y], spacing: 0.05, half_count: 4 };
        let fam = model.family(grid, 8);
        let s = Complex64::new(0.0, y);
        prop_assert!(fibration::wp_via_ks_norm(&fam, s).unwrap().wp_density.abs() <= 1e-10);
        let rep = fibration::foliation_report(&fam, Exec::Sequential).unwrap();
        prop_assert!(rep.entries.iter().all(|e| e.rank == rep.fiber_dimension));
        let patch = Patch { z_center: [0.3, 0.4], s_center: [0.0, y], half_width: 0.05, points: 3, step: 0.05 };
        let (t, b) = (model.total().unwrap(), model.base());
        let from_family = |s: Complex64| Ok(fibration::wp_fiber_integral(&fam, s)?.wp_density);
        let zero = |_: Complex64| Ok(0.0);
        let r1 = fibration::relative_ke_residual(&*t, &*b, &from_family, &[], &patch, Regime::GeneralType, Exec::Sequential).unwrap();
        let r0 = fibration::relative_ke_residual(&*t, &*b, &zero, &[], &patch, Regime::GeneralType, Exec::Sequential).unwrap();
        prop_assert_eq!(r1.residual.to_bits(), r0.residual.to_bits());
        prop_assert!(r0.residual <= 1e-6);
    }
}

#[test]
fn parallel_and_sequential_fields_agree() {
    let fam = family([0.0, 1.0], [0.1, 1.2], [0.3, 0.8], 8);
    let a = fibration::wp_field(&fam, Exec::Sequential).unwrap();
    let b = fibration::wp_field(&fam, Exec::Parallel).unwrap();
    assert_eq!(a, b);
}
