use boin_core::{elimination_table, global_boundaries, local_boundaries, BoundaryFamily, BoundaryTable, DesignSpec};

const TARGETS: [f64; 6] = [0.15, 0.2, 0.25, 0.3, 0.35, 0.4];
const LAMBDA1: [f64; 6] = [0.118, 0.157, 0.197, 0.236, 0.276, 0.316];
const LAMBDA2: [f64; 6] = [0.179, 0.238, 0.298, 0.358, 0.419, 0.479];

#[test]
fn lambda_grid_matches_published_values() {
    for (i, &phi) in TARGETS.iter().enumerate() {
        let b = local_boundaries(&DesignSpec::with_target(phi), 0, 1).unwrap();
        // Two published lambda2 entries (phi = 0.3, 0.4) are truncated rather
        // than rounded, so they sit up to 0.00065 below the exact value.
        assert!((b.lambda1 - LAMBDA1[i]).abs() < 5e-4, "phi={phi} lambda1={}", b.lambda1);
        assert!((b.lambda2 - LAMBDA2[i]).abs() < 7e-4, "phi={phi} lambda2={}", b.lambda2);
    }
}

#[test]
fn lambda_grid_rounds_to_published_values_except_two_truncations() {
    let mut mismatches = Vec::new();
    for (i, &phi) in TARGETS.iter().enumerate() {
        let b = local_boundaries(&DesignSpec::with_target(phi), 0, 1).unwrap();
        for (got, want, name) in [(b.lambda1, LAMBDA1[i], "lambda1"), (b.lambda2, LAMBDA2[i], "lambda2")] {
            if format!("{got:.3}") != format!("{want:.3}") {
                mismatches.push((phi, name));
            }
        }
    }
    assert_eq!(mismatches, vec![(0.3, "lambda2"), (0.4, "lambda2")]);
}

const ESCALATE: [u32; 15] = [0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 2];
const DEESCALATE: [u32; 15] = [1, 2, 2, 2, 3, 3, 4, 4, 5, 5, 5, 6, 6, 7, 7];
const ELIMINATE: [Option<u32>; 15] = [
    None,
    None,
    Some(3),
    Some(3),
    Some(3),
    Some(4),
    Some(4),
    Some(4),
    Some(5),
    Some(5),
    Some(6),
    Some(6),
    Some(6),
    Some(7),
    Some(7),
];

#[test]
fn global_cutoffs_match_published_rows() {
    let spec = DesignSpec::with_target(0.25);
    for n in 1..=15u32 {
        let c = global_boundaries(&spec, 0, n).unwrap().cutoffs.unwrap();
        let i = n as usize - 1;
        assert_eq!(c.escalate_max, Some(ESCALATE[i]), "n={n}");
        assert_eq!(c.deescalate_min, Some(DEESCALATE[i]), "n={n}");
    }
}

#[test]
fn elimination_row_matches() {
    let spec = DesignSpec::with_target(0.25);
    assert_eq!(elimination_table(&spec, 15).unwrap(), ELIMINATE.to_vec());
}

#[test]
fn exported_table_carries_published_rows() {
    let spec = DesignSpec::with_target(0.25);
    let table = BoundaryTable::build(&spec, BoundaryFamily::Global, 0, 15).unwrap();
    for (i, row) in table.rows.iter().enumerate() {
        assert_eq!(row.n, i as u32 + 1);
        assert_eq!(row.escalate_if_m_le, Some(ESCALATE[i]));
        assert_eq!(row.deescalate_if_m_ge, Some(DEESCALATE[i]));
        assert_eq!(row.eliminate_if_m_ge, ELIMINATE[i]);
    }
}

#[test]
fn every_dose_shares_the_local_boundaries() {
    let spec = DesignSpec::with_target(0.25);
    let reference = local_boundaries(&spec, 0, 1).unwrap();
    for dose in 0..spec.num_doses {
        for n in [1, 3, 9, 36] {
            assert_eq!(local_boundaries(&spec, dose, n).unwrap(), reference);
        }
    }
}
