use atomcov::CMatrix;
use atomcov_py::{matrix_to_rows, rows_to_matrix};
use num_complex::Complex64;

#[test]
fn rows_roundtrip() {
    let a = CMatrix::from_fn(2, 3, |i, k| Complex64::new(i as f64, k as f64 - 1.0));
    let rows = matrix_to_rows(&a);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][2], Complex64::new(1.0, 1.0));
    assert_eq!(rows_to_matrix(&rows).unwrap(), a);
}

#[test]
fn ragged_or_empty_rows_are_rejected() {
    let z = Complex64::new(0.0, 0.0);
    assert!(rows_to_matrix(&[vec![z, z], vec![z]]).is_err());
    assert!(rows_to_matrix(&[]).is_err());
    assert!(rows_to_matrix(&[vec![]]).is_err());
}
