//! SVD-based least squares with explicit rank handling.
//!
//! Singular values below `RANK_TOL` relative to the largest are treated as
//! zero; instead of silently truncating, the solver reports which columns
//! participate in the near-null space so rank deficiencies surface as
//! actionable errors ("drop or merge these columns").

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Solved least-squares system with the pieces inference needs.
#[derive(Debug)]
pub(crate) struct Lstsq {
    /// Coefficient vector.
    pub beta: DVector<f64>,
    /// `(X'X)^{-1}`, reconstructed from the SVD.
    pub xtx_inv: DMatrix<f64>,
}

/// Solves `min ||y - X b||` by SVD, erroring on rank deficiency with the
/// offending columns named.
pub(crate) fn solve(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<Lstsq> {
    let n = x.nrows();
    let k = x.ncols();
    debug_assert_eq!(names.len(), k);
    if n <= k {
        return Err(Error::Estimation(format!(
            "need more observations than parameters: n = {n}, k = {k}"
        )));
    }

    let svd = x.clone().svd(true, true);
    let u = svd.u.as_ref().expect("computed");
    let v_t = svd.v_t.as_ref().expect("computed");
    let sigma = &svd.singular_values;

    let sigma_max = sigma.iter().cloned().fold(0.0f64, f64::max);
    if sigma_max == 0.0 {
        return Err(Error::RankDeficient {
            columns: names.to_vec(),
        });
    }
    let cutoff = RANK_TOL * sigma_max;

    // Columns loading heavily on any near-null singular vector.
    let mut offenders: Vec<String> = Vec::new();
    for i in 0..sigma.len() {
        if sigma[i] <= cutoff {
            let row = v_t.row(i);
            let max_load = row.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
            for (j, value) in row.iter().enumerate() {
                if value.abs() >= 0.3 * max_load && !offenders.contains(&names[j]) {
                    offenders.push(names[j].clone());
                }
            }
        }
    }
    if !offenders.is_empty() {
        offenders.sort();
        return Err(Error::RankDeficient { columns: offenders });
    }

    // beta = V S^{-1} U' y ; (X'X)^{-1} = V S^{-2} V'.
    let mut beta = DVector::zeros(k);
    let mut xtx_inv = DMatrix::zeros(k, k);
    for i in 0..sigma.len() {
        let s = sigma[i];
        let v_i = v_t.row(i).transpose();
        let u_i = u.column(i);
        let proj = u_i.dot(y) / s;
        beta += &v_i * proj;
        xtx_inv += &v_i * v_i.transpose() / (s * s);
    }

    Ok(Lstsq { beta, xtx_inv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn exact_line_is_recovered() {
        // y = 2x through the origin-free design [1, x].
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![2.0, 4.0, 6.0]);
        let fit = solve(&x, &y, &names(2)).unwrap();
        assert_relative_eq!(fit.beta[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(fit.beta[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn xtx_inverse_matches_direct_inverse() {
        let x = DMatrix::from_row_slice(
            5,
            2,
            &[1.0, 0.3, 1.0, -1.2, 1.0, 2.5, 1.0, 0.9, 1.0, -0.4],
        );
        let y = DVector::from_vec(vec![0.1, 0.4, -0.2, 1.0, 0.5]);
        let fit = solve(&x, &y, &names(2)).unwrap();
        let direct = (x.transpose() * &x).try_inverse().unwrap();
        assert_relative_eq!(fit.xtx_inv[(0, 0)], direct[(0, 0)], epsilon = 1e-10);
        assert_relative_eq!(fit.xtx_inv[(0, 1)], direct[(0, 1)], epsilon = 1e-10);
        assert_relative_eq!(fit.xtx_inv[(1, 1)], direct[(1, 1)], epsilon = 1e-10);
    }

    #[test]
    fn duplicated_column_is_reported_by_name() {
        let x = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 2.0, 2.0, 1.0, 3.0, 3.0, 1.0, 4.0, 4.0, 1.0, 5.0, 5.0],
        );
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let err = solve(
            &x,
            &y,
            &["const".to_string(), "a".to_string(), "a_copy".to_string()],
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('a') && msg.contains("a_copy"), "{msg}");
    }

    #[test]
    fn zero_column_is_rank_deficient() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let err = solve(&x, &y, &["const".to_string(), "dead".to_string()]).unwrap_err();
        assert!(err.to_string().contains("dead"));
    }

    #[test]
    fn underdetermined_system_is_rejected() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        assert!(solve(&x, &y, &names(2)).is_err());
    }
}
