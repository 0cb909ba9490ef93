use std::sync::{Arc, OnceLock};

use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;

use helm_open::fem::ComplexField;
use helm_open::functional::{FunctionalConfig, RadiationFunctional};
use helm_open::mesh::{build_mesh, nested_annuli, DomainSpec, MeshOptions, PointLocator, Shape, TriMesh};
use helm_open::refraction::RefractionModel;
use helm_open::special::bessel_jy_all;

fn small_mesh() -> &'static Arc<TriMesh> {
    static MESH: OnceLock<Arc<TriMesh>> = OnceLock::new();
    MESH.get_or_init(|| Arc::new(build_mesh(&DomainSpec::new(Shape::EllipseHole, 0.5, 1.5).unwrap(), 0.3).unwrap()))
}

fn field(seed: &[(f64, f64)], n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|i| {
            let (a, b) = seed[i % seed.len()];
            Complex64::new(a + 0.01 * i as f64, b)
        })
        .collect()
}

fn models() -> impl Strategy<Value = RefractionModel> {
    prop_oneof![
        (0.2f64..4.0).prop_map(RefractionModel::Constant),
        (0.0f64..1.99).prop_map(RefractionModel::AngularLinear),
        Just(RefractionModel::GaussianPair),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn refraction_stays_within_its_bounds(model in models(), r in 0.01f64..50.0, th in 0.0f64..std::f64::consts::TAU) {
        let n = model.eval([r * th.cos(), r * th.sin()]).unwrap();
        let (lo, hi) = model.bounds();
        prop_assert!(lo > 0.0);
        prop_assert!(n >= lo - 1e-12 && n <= hi + 1e-12, "{n} not in [{lo}, {hi}]");
    }

    #[test]
    fn functional_is_a_nonnegative_quadratic_form(
        seed in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..16),
        other in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..16),
        c in 0.1f64..3.0,
        weighted in any::<bool>(),
    ) {
        let mesh = small_mesh();
        let cfg = if weighted { FunctionalConfig::weighted() } else { FunctionalConfig::unweighted() };
        let f = RadiationFunctional::full(mesh.clone(), 1.0, RefractionModel::AngularLinear(0.3), cfg).unwrap();
        let n = mesh.vertex_count();
        let (u, v) = (field(&seed, n), field(&other, n));
        let ju = f.value(&u).unwrap();
        let jv = f.value(&v).unwrap();
        prop_assert!(ju >= 0.0);
        let scaled: Vec<_> = u.iter().map(|x| x * c).collect();
        assert_relative_eq!(f.value(&scaled).unwrap(), c * c * ju, max_relative = 1e-12);
        let plus: Vec<_> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
        let minus: Vec<_> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        assert_relative_eq!(
            f.value(&plus).unwrap() + f.value(&minus).unwrap(),
            2.0 * (ju + jv),
            max_relative = 1e-12
        );
    }

    #[test]
    fn bessel_three_term_recurrence(x in 0.05f64..150.0, n in 1usize..40) {
        let (j, y) = bessel_jy_all(n + 1, x).unwrap();
        let s = 2.0 * n as f64 / x;
        prop_assert!((j[n - 1] + j[n + 1] - s * j[n]).abs() <= 1e-11 * (1.0 + s * j[n].abs()));
        prop_assert!((y[n - 1] + y[n + 1] - s * y[n]).abs() <= 1e-10 * (1.0 + y[n + 1].abs()));
    }

    #[test]
    fn located_points_interpolate_linear_fields_exactly(r in 0.51f64..1.45, th in 0.0f64..std::f64::consts::TAU) {
        let mesh = small_mesh();
        let p = [r * th.cos(), 0.99 * r * th.sin()];
        prop_assume!(mesh.domain().unwrap().contains(p));
        let (t, b) = PointLocator::new(mesh).locate(p).expect("interior point is located");
        prop_assert!(b.iter().all(|&x| x >= -1e-9));
        let lin = |q: [f64; 2]| 2.0 * q[0] - 3.0 * q[1] + 0.5;
        let tri = mesh.triangles()[t];
        let interp: f64 = (0..3).map(|i| b[i] * lin(mesh.vertices()[tri[i]])).sum();
        assert_relative_eq!(interp, lin(p), epsilon = 1e-10);
    }
}

#[test]
fn nested_meshes_share_vertex_prefixes() {
    let meshes = nested_annuli(0.5, &[1.0, 2.0, 4.0], &MeshOptions::new(0.3)).unwrap();
    for w in meshes.windows(2) {
        let (small, big) = (&w[0], &w[1]);
        assert_eq!(small.vertices(), &big.vertices()[..small.vertex_count()]);
        small.check_topology().unwrap();
    }
    let u = ComplexField::from_fn(&meshes[2], |p| Complex64::new(p[0], p[1]));
    let restricted = u.restrict(meshes[0].vertex_count()).unwrap();
    let direct = ComplexField::from_fn(&meshes[0], |p| Complex64::new(p[0], p[1]));
    assert_eq!(restricted.max_abs_diff(&direct), 0.0);
}
