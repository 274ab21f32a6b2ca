//! Property tests for the structural invariants.

use proptest::prelude::*;

use pvl_core::field::{Field, SpatialField};
use pvl_core::grid::Grid;
use pvl_core::io::field_io;
use pvl_core::quad::{l2_inner_space, l2_norm_spacetime, project_box, time_weight};

fn small_grid() -> Grid {
    Grid::unit(1, 6, 4, 1.0).unwrap()
}

fn field_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_matches_timeweighted_slice_sum(vals in field_values(5 * 6)) {
        let g = small_grid();
        let f = Field::new(g, vals).unwrap();
        let norm = l2_norm_spacetime(&f, 2.0).unwrap();
        let mut acc = 0.0;
        for i in 0..=g.nt() {
            let s = f.slice(i);
            acc += time_weight(i, g.nt()) * g.dt() * l2_inner_space(&s, &s).unwrap();
        }
        let rel = (norm * norm - acc).abs() / acc.max(1e-30);
        prop_assert!(rel <= 1e-12, "relative defect {rel}");
    }

    #[test]
    fn projection_is_idempotent_and_clamps(vals in field_values(5 * 6)) {
        let g = small_grid();
        let u = Field::new(g, vals).unwrap();
        let ua = Field::constant(g, -1.0).unwrap();
        let ub = Field::constant(g, 1.0).unwrap();
        let p = project_box(&u, &ua, &ub).unwrap();
        prop_assert!(p.values().iter().all(|v| (-1.0..=1.0).contains(v)));
        let pp = project_box(&p, &ua, &ub).unwrap();
        prop_assert_eq!(p.values(), pp.values());
        // entries already inside are untouched
        for (orig, proj) in u.values().iter().zip(p.values()) {
            if (-1.0..=1.0).contains(orig) {
                prop_assert_eq!(orig, proj);
            }
        }
    }

    #[test]
    fn projection_is_nonexpansive(a in field_values(5 * 6), b in field_values(5 * 6)) {
        let g = small_grid();
        let ua = Field::constant(g, -1.0).unwrap();
        let ub = Field::constant(g, 1.0).unwrap();
        let fa = Field::new(g, a).unwrap();
        let fb = Field::new(g, b).unwrap();
        let pa = project_box(&fa, &ua, &ub).unwrap();
        let pb = project_box(&fb, &ua, &ub).unwrap();
        let d_before = l2_norm_spacetime(&fa.axpy(-1.0, &fb).unwrap(), 2.0).unwrap();
        let d_after = l2_norm_spacetime(&pa.axpy(-1.0, &pb).unwrap(), 2.0).unwrap();
        prop_assert!(d_after <= d_before + 1e-14);
    }

    #[test]
    fn binary_round_trip_is_bit_exact(vals in field_values(5 * 6)) {
        let g = small_grid();
        let f = Field::new(g, vals).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pvlf");
        field_io::save_field(&f, &path, field_io::FieldFormat::Binary).unwrap();
        let back = field_io::load_field_on(&path, &g).unwrap();
        prop_assert_eq!(f.values(), back.values());
    }

    #[test]
    fn csv_round_trip_is_exact(vals in field_values(5 * 6)) {
        let g = small_grid();
        let f = Field::new(g, vals).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        field_io::save_field(&f, &path, field_io::FieldFormat::Csv).unwrap();
        let back = field_io::load_field_on(&path, &g).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn spatial_round_trip_is_bit_exact(vals in field_values(6)) {
        let g = small_grid();
        let f = SpatialField::new(g, vals).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.pvlf");
        field_io::save_spatial_field(&f, &path).unwrap();
        let back = field_io::load_spatial_field_on(&path, &g).unwrap();
        prop_assert_eq!(f.values(), back.values());
    }
}
