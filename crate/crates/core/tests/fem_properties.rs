use proptest::prelude::*;
use savch::mesh::TriMesh;
use savch::FemOperators;

fn ops(n: usize) -> (TriMesh, FemOperators) {
    let mesh = TriMesh::unit_square(n).unwrap();
    let ops = FemOperators::assemble(&mesh).unwrap();
    (mesh, ops)
}

/// Consistent mass `|K|/12 [[2,1,1],[1,2,1],[1,1,2]]` applied as a quadratic form.
fn consistent_mass_sq(mesh: &TriMesh, v: &[f64]) -> f64 {
    let mut total = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let a = mesh.triangle_area(t);
        let [x, y, z] = tri.map(|i| v[i]);
        total += a / 12.0 * (2.0 * (x * x + y * y + z * z) + 2.0 * (x * y + y * z + z * x));
    }
    total
}

proptest! {
    #[test]
    fn measures_and_boundary_placement(n in 1usize..=24) {
        let (mesh, ops) = ops(n);
        let area: f64 = (0..mesh.triangles.len()).map(|t| mesh.triangle_area(t)).sum();
        prop_assert!((area - 1.0).abs() < 1e-13);
        prop_assert!((mesh.boundary_length() - 4.0).abs() < 1e-13);
        prop_assert!((ops.mass.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        prop_assert!((ops.boundary_mass.iter().sum::<f64>() - 4.0).abs() < 1e-13);
        for &i in &ops.trace_map {
            let [x, y] = mesh.vertices[i];
            prop_assert!(x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0);
        }
        prop_assert_eq!(ops.trace_map.len(), 4 * n);
    }

    #[test]
    fn quasiuniformity_is_bounded(n in 1usize..=32) {
        let (mesh, _) = ops(n);
        // right isosceles triangles: diameter over inscribed diameter is 1 + sqrt(2)
        prop_assert!((mesh.quasiuniformity_ratio() - (1.0 + 2f64.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn stiffness_symmetry(n in 1usize..=16) {
        let (_, ops) = ops(n);
        prop_assert_eq!(ops.stiffness.asymmetry(), 0.0);
        prop_assert_eq!(ops.surface_stiffness.asymmetry(), 0.0);
    }

    #[test]
    fn galerkin_exact_for_affine(
        n in 1usize..=12,
        a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0,
        b2 in -3.0f64..3.0, c2 in -3.0f64..3.0,
    ) {
        let (mesh, ops) = ops(n);
        let u: Vec<f64> = mesh.vertices.iter().map(|p| a + b * p[0] + c * p[1]).collect();
        let v: Vec<f64> = mesh.vertices.iter().map(|p| 1.0 + b2 * p[0] + c2 * p[1]).collect();
        // integral over the unit square of grad u . grad v
        let bulk = ops.stiffness.bilinear(&u, &v);
        prop_assert!((bulk - (b * b2 + c * c2)).abs() < 1e-12 * (1.0 + (b * b2 + c * c2).abs()));
        prop_assert!((ops.stiffness.quadratic_form(&u) - (b * b + c * c)).abs() < 1e-12 * (1.0 + b * b + c * c));
        // tangential derivative is b on horizontal sides and c on vertical ones
        let tu = ops.trace(&u);
        let surf = ops.surface_stiffness.quadratic_form(&tu);
        let exact = 2.0 * b * b + 2.0 * c * c;
        prop_assert!((surf - exact).abs() < 1e-12 * (1.0 + exact));
    }

    #[test]
    fn lumped_and_consistent_norms_equivalent(
        idx in 0usize..4,
        seed in proptest::collection::vec(-1.0f64..1.0, 289),
    ) {
        let n = [2, 4, 8, 16][idx];
        let (mesh, ops) = ops(n);
        let v = &seed[..ops.num_nodes()];
        let lumped = ops.norm_bulk(v);
        let consistent = consistent_mass_sq(&mesh, v).sqrt();
        prop_assume!(consistent > 1e-12);
        prop_assert!(0.5 * consistent <= lumped && lumped <= 2.0 * consistent,
            "n = {}: lumped {} consistent {}", n, lumped, consistent);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(5))]

    #[test]
    fn discrete_laplacian_represents_stiffness(
        psi in proptest::collection::vec(-2.0f64..2.0, 81),
        chi in proptest::collection::vec(-2.0f64..2.0, 81),
    ) {
        let (_, ops) = ops(8);
        let lap = ops.discrete_laplacian(&psi);
        let lhs = ops.inner_bulk(&lap, &chi);
        let rhs = -ops.stiffness.bilinear(&psi, &chi);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }
}

#[test]
fn lumped_masses_match_element_sums() {
    let (mesh, ops) = ops(5);
    let mut m = vec![0.0; mesh.num_nodes()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for &i in tri {
            m[i] += mesh.triangle_area(t) / 3.0;
        }
    }
    for (a, b) in m.iter().zip(&ops.mass) {
        assert!((a - b).abs() < 1e-15);
    }
    // corner nodes touch one or two triangles, edge nodes three, interior six
    let h2 = 1.0 / 50.0;
    assert!((ops.mass[0] - 2.0 * h2 / 3.0).abs() < 1e-15);
    assert!((ops.mass[5] - h2 / 3.0).abs() < 1e-15);
    assert!((ops.mass[7] - 6.0 * h2 / 3.0).abs() < 1e-15);
}
