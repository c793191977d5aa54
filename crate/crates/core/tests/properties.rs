use nalgebra::DMatrix;
use proptest::prelude::*;
use thermoporo::assembly::{mass_matrix, stiffness_matrix};
use thermoporo::experiments::{ExperimentConfig, ExperimentId};
use thermoporo::hf::{State, Trajectory};
use thermoporo::io::{read_trajectory, write_trajectory};
use thermoporo::linalg::{factorize, sym_eig, TripletBuilder};
use thermoporo::mesh::{build_patterned_mesh, build_spaces, BcSpec, Field, MeshPattern};

fn pattern() -> impl Strategy<Value = MeshPattern> {
    prop_oneof![Just(MeshPattern::Diagonal), Just(MeshPattern::Crossed)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mesh_tiles_the_unit_square(n in 1usize..14, pat in pattern()) {
        let mesh = build_patterned_mesh(n, None, pat).unwrap();
        let total: f64 = (0..mesh.n_cells()).map(|c| mesh.cell_area(c)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!((0..mesh.n_cells()).all(|c| mesh.cell_area(c) > 0.0));
        prop_assert_eq!(mesh.boundary_vertices.len(), 4 * n);
    }

    #[test]
    fn scalar_forms_see_constants(n in 1usize..10, pat in pattern()) {
        // p is natural on the boundary, so every vertex carries a dof
        let mesh = build_patterned_mesh(n, None, pat).unwrap();
        let spaces = build_spaces(&mesh, BcSpec::clamped_insulated());
        let s = spaces.field(Field::Pressure);
        let ones = vec![1.0; s.n_free()];
        let m = mass_matrix(&mesh, s, s).unwrap();
        prop_assert!((m.bilinear(&ones, &ones) - 1.0).abs() < 1e-12);
        let k = stiffness_matrix(&mesh, s, s, |_| 1.0).unwrap();
        prop_assert!(k.mul_vec(&ones).iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn sparse_lu_solves_dominant_systems(
        (n, off, rhs) in (2usize..40).prop_flat_map(|n| (
            Just(n),
            prop::collection::vec(-1.0f64..1.0, 3 * n),
            prop::collection::vec(-1.0f64..1.0, n),
        ))
    ) {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 8.0);
            for (k, j) in [i + 1, i + 3, i + 7].into_iter().enumerate() {
                if j < n {
                    b.push(i, j, off[3 * i + k]);
                    b.push(j, i, off[3 * i + k]);
                }
            }
        }
        let a = b.build();
        let sol = factorize(&a).unwrap().solve(&rhs).unwrap();
        let res = a.mul_vec(&sol);
        let err = res.iter().zip(&rhs).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn eigendecomposition_reconstructs(
        (n, entries) in (1usize..12).prop_flat_map(|n| (Just(n), prop::collection::vec(-1.0f64..1.0, n * n)))
    ) {
        let r = DMatrix::from_vec(n, n, entries);
        let c = &r + r.transpose();
        let e = sym_eig(&c).unwrap();
        let back = &e.vectors * DMatrix::from_diagonal(&e.values.clone().into()) * e.vectors.transpose();
        prop_assert!((back - &c).amax() < 1e-11 * c.amax().max(1.0));
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn trajectory_files_roundtrip(sizes in (0usize..6, 0usize..6, 0usize..6), steps in 0usize..5, dt in 1e-6f64..1.0) {
        let states = (0..=steps)
            .map(|k| {
                let mut s = State::zeros(sizes, k as f64 * dt);
                for (i, v) in s.u.iter_mut().chain(&mut s.p).chain(&mut s.theta).enumerate() {
                    *v = (i as f64 + 1.0) * (k as f64 - 0.5) / 3.0;
                }
                s
            })
            .collect();
        let traj = Trajectory { states, dt };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        write_trajectory(&path, &traj).unwrap();
        let back = read_trajectory(&path).unwrap();
        prop_assert_eq!(back.dt, traj.dt);
        prop_assert_eq!(back.states, traj.states);
    }

    #[test]
    fn config_survives_toml(id in prop_oneof![
        Just(ExperimentId::Refinement),
        Just(ExperimentId::SameInterval),
        Just(ExperimentId::LongerInterval),
        Just(ExperimentId::LargerStep),
        Just(ExperimentId::Parametric),
        Just(ExperimentId::Custom),
    ], n in 1usize..64) {
        let cfg = ExperimentConfig { mesh_n: n, ..ExperimentConfig::defaults(id) };
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
