use kahler_lab::kstability::{self, AffinePiece, ToricTestConfiguration, Weight};
use kahler_lab::polytope::LatticePolytope;
use kahler_lab::rational::{frac, int, Rational};
use num_traits::Zero;
use proptest::prelude::*;

fn points() -> impl Strategy<Value = Vec<Vec<i64>>> {
    prop::collection::vec(prop::collection::vec(-3i64..=3, 2), 3..6)
}

fn grad() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(-4i64..=4, 2)
}

fn df(p: &LatticePolytope, pieces: Vec<AffinePiece>) -> Rational {
    let tc = ToricTestConfiguration::new(p.clone(), Weight { affine_pieces: pieces }).unwrap();
    kstability::donaldson_futaki(&tc).unwrap().futaki
}

fn affine(g: &[i64], c: Rational) -> AffinePiece {
    AffinePiece::new(g.iter().map(|&x| int(x)).collect(), c)
}

/// `∫_P f` for affine `f` by a fan of triangles, each contributing area times `f(centroid)`.
fn integral(p: &LatticePolytope, f: &AffinePiece) -> Rational {
    let v = p.vertices();
    let (cx, cy) = (
        v.iter().map(|a| a[0] as f64).sum::<f64>() / v.len() as f64,
        v.iter().map(|a| a[1] as f64).sum::<f64>() / v.len() as f64,
    );
    let mut v: Vec<&Vec<i64>> = v.iter().collect();
    v.sort_by(|a, b| {
        let ta = (a[1] as f64 - cy).atan2(a[0] as f64 - cx);
        let tb = (b[1] as f64 - cy).atan2(b[0] as f64 - cx);
        ta.partial_cmp(&tb).unwrap()
    });
    let mut total = Rational::zero();
    for i in 1..v.len() - 1 {
        let (a, b, c) = (v[0], v[i], v[i + 1]);
        let area = frac((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]), 2);
        let centroid = [frac(a[0] + b[0] + c[0], 3), frac(a[1] + b[1] + c[1], 3)];
        total += area * f.eval(&centroid);
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn constant_shift_leaves_df_unchanged(pts in points(), g in grad(), num in -6i64..=6, den in 1i64..=5) {
        let Ok(p) = LatticePolytope::from_vertices(pts) else { return Ok(()) };
        let tc = ToricTestConfiguration::linear(p, &g).unwrap();
        let base = kstability::donaldson_futaki(&tc).unwrap().futaki;
        let moved = kstability::shifted(&tc, &frac(num, den));
        prop_assert_eq!(kstability::donaldson_futaki(&moved).unwrap().futaki, base);
    }

    #[test]
    fn df_is_linear_in_affine_weights(pts in points(), f in grad(), g in grad(), a in -3i64..=3, b in -3i64..=3) {
        let Ok(p) = LatticePolytope::from_vertices(pts) else { return Ok(()) };
        let combo: Vec<i64> = (0..2).map(|i| a * f[i] + b * g[i]).collect();
        let lhs = df(&p, vec![affine(&combo, frac(a - b, 2))]);
        let rhs = int(a) * df(&p, vec![affine(&f, Rational::zero())]) + int(b) * df(&p, vec![affine(&g, Rational::zero())]);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn unimodular_change_preserves_df(pts in points(), g in grad(), shear in -3i64..=3) {
        let Ok(p) = LatticePolytope::from_vertices(pts.clone()) else { return Ok(()) };
        // A = [[1, s], [0, 1]]; the weight f∘A⁻¹ has gradient A⁻ᵀ g = (g0, g1 - s g0).
        let image: Vec<Vec<i64>> = pts.iter().map(|v| vec![v[0] + shear * v[1], v[1]]).collect();
        let q = LatticePolytope::from_vertices(image).unwrap();
        let moved = [g[0], g[1] - shear * g[0]];
        prop_assert_eq!(df(&p, vec![affine(&g, int(1))]), df(&q, vec![affine(&moved, int(1))]));
    }

    #[test]
    fn central_symmetry_forces_zero(pts in points(), g in grad()) {
        let sym: Vec<Vec<i64>> = pts.iter().flat_map(|v| [v.clone(), vec![-v[0], -v[1]]]).collect();
        let Ok(p) = LatticePolytope::from_vertices(sym) else { return Ok(()) };
        prop_assert!(df(&p, vec![affine(&g, Rational::zero())]).is_zero());
    }

    #[test]
    fn leading_weight_coefficient_is_the_integral(pts in points(), g in grad(), c in -4i64..=4) {
        let Ok(p) = LatticePolytope::from_vertices(pts) else { return Ok(()) };
        let piece = affine(&g, int(c));
        let tc = ToricTestConfiguration::new(p.clone(), Weight { affine_pieces: vec![piece.clone()] }).unwrap();
        prop_assert_eq!(kstability::weight_coefficients(&tc).unwrap().b0, integral(&p, &piece));
    }
}
