//! Regression engine: OLS and just-identified 2SLS with cluster-robust
//! (CR1) inference, local-projection impulse responses, long-difference
//! estimation, and binned scatter summaries.
//!
//! Conventions, fixed across the crate:
//! * sandwich variance clusters scores by group with the CR1 small-sample
//!   factor `(G/(G-1)) * ((N-1)/(N-K))`; singleton clusters reproduce the
//!   HC1 heteroskedasticity-robust estimator;
//! * 2SLS standard errors use structural residuals `y - X b` evaluated at
//!   the observed endogenous variable, not its first-stage projection;
//! * 95% intervals are the normal approximation `b ± 1.96 se`;
//! * the first-stage F in the just-identified case is the squared
//!   instrument t-statistic, reported in both cluster-robust and classical
//!   flavors.

mod binscatter;
mod lp;
mod lstsq;

pub use binscatter::{binscatter, BinPoint, BinscatterResult};
pub use lp::{
    local_projection_irf, long_difference, FixedEffects, HorizonEstimate, IrfResult, LongRunRow,
    LongRunTable,
};
pub use lstsq::RANK_TOL;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Critical value for the normal-approximation 95% interval.
pub const Z_95: f64 = 1.96;

/// Numerical floor under which a first-stage t-statistic is treated as an
/// unidentified (weak-instrument) first stage.
pub const WEAK_T_FLOOR: f64 = 1e-6;

/// A fitted regression with cluster-robust and classical variance.
#[derive(Debug, Clone)]
pub struct RegressionResult {
    /// Column names in design order.
    pub names: Vec<String>,
    /// Coefficients in design order.
    pub beta: DVector<f64>,
    /// Cluster-robust (CR1) covariance of the coefficients.
    pub vcov: DMatrix<f64>,
    /// Classical homoskedastic covariance (`s^2 (X'X)^{-1}`).
    pub vcov_classical: DMatrix<f64>,
    /// Residuals in observation order.
    pub residuals: DVector<f64>,
    pub n_obs: usize,
    /// Effective parameter count, including absorbed fixed effects.
    pub n_params: usize,
    pub n_clusters: usize,
    /// Centered R²; for 2SLS second stages (structural residuals) this can
    /// fall below zero and is reported as computed.
    pub r_squared: f64,
}

impl RegressionResult {
    /// Cluster-robust standard error of coefficient `i`.
    pub fn se(&self, i: usize) -> f64 {
        self.vcov[(i, i)].max(0.0).sqrt()
    }

    /// Classical standard error of coefficient `i`.
    pub fn se_classical(&self, i: usize) -> f64 {
        self.vcov_classical[(i, i)].max(0.0).sqrt()
    }

    /// Cluster-robust t-statistic of coefficient `i` (0 when se is 0).
    pub fn t_stat(&self, i: usize) -> f64 {
        let se = self.se(i);
        if se == 0.0 {
            0.0
        } else {
            self.beta[i] / se
        }
    }

    /// Normal-approximation 95% interval for coefficient `i`.
    pub fn ci95(&self, i: usize) -> (f64, f64) {
        let se = self.se(i);
        (self.beta[i] - Z_95 * se, self.beta[i] + Z_95 * se)
    }
}

/// Cluster-robust (CR1) covariance from scores.
///
/// `bread` is `(X'X)^{-1}`; `k_eff` the effective parameter count used in
/// the degrees-of-freedom factor. Requires at least two distinct clusters
/// among the observations.
pub fn cluster_vcov(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    bread: &DMatrix<f64>,
    clusters: &[usize],
    k_eff: usize,
) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    let k = x.ncols();
    debug_assert_eq!(residuals.len(), n);
    debug_assert_eq!(clusters.len(), n);

    // Scores summed within cluster; clusters may be sparse indices.
    let max_label = clusters.iter().copied().max().unwrap_or(0);
    let mut sums: Vec<Option<DVector<f64>>> = vec![None; max_label + 1];
    for i in 0..n {
        let row = x.row(i).transpose() * residuals[i];
        match &mut sums[clusters[i]] {
            Some(acc) => *acc += row,
            slot => *slot = Some(row),
        }
    }
    let present: Vec<&DVector<f64>> = sums.iter().flatten().collect();
    let g = present.len();
    if g < 2 {
        return Err(Error::TooFewClusters { found: g });
    }
    if n <= k_eff {
        return Err(Error::Estimation(format!(
            "degrees of freedom exhausted: n = {n}, effective k = {k_eff}"
        )));
    }

    let mut meat = DMatrix::zeros(k, k);
    for s in present {
        meat += s * s.transpose();
    }
    let correction =
        (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n as f64 - k_eff as f64));
    let vcov = bread * meat * bread * correction;
    // Symmetrize away floating-point asymmetry.
    Ok((&vcov + vcov.transpose()) * 0.5)
}

fn centered_r_squared(y: &DVector<f64>, residuals: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let mean = y.sum() / n;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ssr: f64 = residuals.iter().map(|v| v * v).sum();
    if sst <= f64::EPSILON * n {
        // Degenerate constant outcome: a perfect fit by convention.
        return if ssr <= f64::EPSILON * n { 1.0 } else { 0.0 };
    }
    1.0 - ssr / sst
}

/// Ordinary least squares with CR1 cluster-robust inference.
///
/// `x` must already contain the intercept column if one is wanted;
/// `dof_absorbed` counts parameters absorbed outside the design (group
/// means swept out by a within transformation).
pub fn ols(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    names: &[String],
    clusters: &[usize],
    dof_absorbed: usize,
) -> Result<RegressionResult> {
    let n = x.nrows();
    if y.len() != n || clusters.len() != n {
        return Err(Error::Estimation(format!(
            "shape mismatch: X has {n} rows, y has {}, clusters has {}",
            y.len(),
            clusters.len()
        )));
    }
    let fit = lstsq::solve(x, y, names)?;
    let residuals = y - x * &fit.beta;
    let k_eff = x.ncols() + dof_absorbed;

    let sigma2 = residuals.dot(&residuals) / (n as f64 - k_eff as f64);
    let vcov_classical = &fit.xtx_inv * sigma2;
    let vcov = cluster_vcov(x, &residuals, &fit.xtx_inv, clusters, k_eff)?;
    let r_squared = centered_r_squared(y, &residuals);

    let n_clusters = {
        let mut seen = clusters.to_vec();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    };

    Ok(RegressionResult {
        names: names.to_vec(),
        beta: fit.beta,
        vcov,
        vcov_classical,
        residuals,
        n_obs: n,
        n_params: k_eff,
        n_clusters,
        r_squared,
    })
}

/// A fitted just-identified 2SLS regression.
#[derive(Debug, Clone)]
pub struct TslsResult {
    /// Structural equation fit; coefficient order matches `names` there
    /// (`const?`, endogenous, controls...). Variances use structural
    /// residuals with projected regressors.
    pub second_stage: RegressionResult,
    /// First stage: endogenous on (`const?`, instrument, controls...).
    pub first_stage: RegressionResult,
    /// Squared cluster-robust instrument t-statistic.
    pub first_stage_f: f64,
    /// Squared classical instrument t-statistic.
    pub first_stage_f_classical: f64,
    /// Index of the endogenous coefficient in the second stage.
    pub endog_index: usize,
}

impl TslsResult {
    /// `(coefficient, cluster-robust se)` of the endogenous regressor.
    pub fn endogenous(&self) -> (f64, f64) {
        (
            self.second_stage.beta[self.endog_index],
            self.second_stage.se(self.endog_index),
        )
    }
}

/// Just-identified two-stage least squares.
///
/// Design is `[const?, endogenous, controls...]`, instrumented by
/// `[const?, instrument, controls...]`. Standard errors are CR1-clustered
/// using structural residuals evaluated at the observed endogenous values.
/// Errors when the first-stage slope is numerically indistinguishable from
/// zero.
#[allow(clippy::too_many_arguments)]
pub fn tsls(
    y: &DVector<f64>,
    endogenous: &DVector<f64>,
    instrument: &DVector<f64>,
    controls: &DMatrix<f64>,
    control_names: &[String],
    clusters: &[usize],
    intercept: bool,
    dof_absorbed: usize,
) -> Result<TslsResult> {
    let n = y.len();
    if endogenous.len() != n
        || instrument.len() != n
        || controls.nrows() != n
        || clusters.len() != n
    {
        return Err(Error::Estimation("shape mismatch in 2SLS inputs".to_string()));
    }
    let p = controls.ncols();
    debug_assert_eq!(control_names.len(), p);

    let lead = usize::from(intercept);
    let k = lead + 1 + p;
    let mut z = DMatrix::zeros(n, k);
    let mut x = DMatrix::zeros(n, k);
    if intercept {
        z.column_mut(0).fill(1.0);
        x.column_mut(0).fill(1.0);
    }
    z.set_column(lead, instrument);
    x.set_column(lead, endogenous);
    for j in 0..p {
        z.column_mut(lead + 1 + j).copy_from(&controls.column(j));
        x.column_mut(lead + 1 + j).copy_from(&controls.column(j));
    }

    let mut z_names: Vec<String> = Vec::with_capacity(k);
    let mut x_names: Vec<String> = Vec::with_capacity(k);
    if intercept {
        z_names.push("const".to_string());
        x_names.push("const".to_string());
    }
    z_names.push("instrument".to_string());
    x_names.push("endogenous".to_string());
    for name in control_names {
        z_names.push(name.clone());
        x_names.push(name.clone());
    }

    // First stage and weak-instrument guard.
    let first_stage = ols(endogenous, &z, &z_names, clusters, dof_absorbed)?;
    let inst_idx = lead;
    let t_robust = first_stage.t_stat(inst_idx);
    if t_robust.abs() < WEAK_T_FLOOR {
        return Err(Error::WeakInstrument { t_stat: t_robust });
    }
    let first_stage_f = t_robust * t_robust;
    let t_classical = first_stage.beta[inst_idx] / first_stage.se_classical(inst_idx);
    let first_stage_f_classical = t_classical * t_classical;

    // Projected design for the structural coefficients.
    let fitted = &z * &first_stage.beta;
    let mut x_hat = x.clone();
    x_hat.set_column(lead, &fitted);

    let fit = lstsq::solve(&x_hat, y, &x_names)?;
    // Structural residuals at the OBSERVED endogenous values.
    let residuals = y - &x * &fit.beta;
    let k_eff = k + dof_absorbed;
    if n <= k_eff {
        return Err(Error::Estimation(format!(
            "degrees of freedom exhausted: n = {n}, effective k = {k_eff}"
        )));
    }

    let sigma2 = residuals.dot(&residuals) / (n as f64 - k_eff as f64);
    let vcov_classical = &fit.xtx_inv * sigma2;
    let vcov = cluster_vcov(&x_hat, &residuals, &fit.xtx_inv, clusters, k_eff)?;
    let r_squared = centered_r_squared(y, &residuals);

    let second_stage = RegressionResult {
        names: x_names,
        beta: fit.beta,
        vcov,
        vcov_classical,
        residuals,
        n_obs: n,
        n_params: k_eff,
        n_clusters: first_stage.n_clusters,
        r_squared,
    };

    Ok(TslsResult {
        second_stage,
        first_stage,
        first_stage_f,
        first_stage_f_classical,
        endog_index: lead,
    })
}

/// First-stage F of a just-identified fit: the squared instrument t-stat.
pub fn first_stage_f(first_stage: &RegressionResult, instrument_index: usize) -> f64 {
    let t = first_stage.t_stat(instrument_index);
    t * t
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn singleton_clusters(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn perfect_line_is_recovered_exactly() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![2.0, 4.0, 6.0]);
        let fit = ols(&y, &x, &names(&["const", "x"]), &singleton_clusters(3), 0).unwrap();
        assert_relative_eq!(fit.beta[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(fit.beta[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_outcome_gives_zero_slope_and_mean_intercept() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, 2.0, 1.0, 3.0, 1.0, 4.0]);
        let y = DVector::from_vec(vec![5.0, 5.0, 5.0, 5.0]);
        let fit = ols(&y, &x, &names(&["const", "x"]), &singleton_clusters(4), 0).unwrap();
        assert_relative_eq!(fit.beta[0], 5.0, epsilon = 1e-10);
        assert_relative_eq!(fit.beta[1], 0.0, epsilon = 1e-10);
    }

    /// Frozen oracle: solve the normal equations directly on a 5-point
    /// fixture and compare every coefficient.
    #[test]
    fn matches_normal_equations_oracle() {
        let x = DMatrix::from_row_slice(
            5,
            3,
            &[
                1.0, 0.5, -1.0, //
                1.0, 1.5, 0.3, //
                1.0, -0.7, 2.2, //
                1.0, 2.1, 0.9, //
                1.0, 0.2, -0.4,
            ],
        );
        let y = DVector::from_vec(vec![1.2, 2.8, -0.3, 4.1, 0.7]);
        let oracle = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * &y;
        let fit = ols(&y, &x, &names(&["const", "a", "b"]), &singleton_clusters(5), 0).unwrap();
        for i in 0..3 {
            assert_relative_eq!(fit.beta[i], oracle[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn collinear_design_errors_with_column_names() {
        let x = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 2.0, 4.0, 1.0, 3.0, 6.0, 1.0, 4.0, 8.0, 1.0, 5.0, 10.0],
        );
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let err = ols(&y, &x, &names(&["const", "x", "x2"]), &singleton_clusters(4), 0)
            .unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
    }

    /// Frozen oracle: two clusters of two observations, meat summed by hand.
    #[test]
    fn cluster_vcov_matches_hand_summed_two_cluster_oracle() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![0.1, 1.4, 1.8, 3.3]);
        let clusters = vec![0usize, 0, 1, 1];
        let fit = ols(&y, &x, &names(&["const", "x"]), &clusters, 0).unwrap();

        // Hand-built oracle.
        let bread = (x.transpose() * &x).try_inverse().unwrap();
        let e = &y - &x * &fit.beta;
        let s0 = x.row(0).transpose() * e[0] + x.row(1).transpose() * e[1];
        let s1 = x.row(2).transpose() * e[2] + x.row(3).transpose() * e[3];
        let meat = &s0 * s0.transpose() + &s1 * s1.transpose();
        let (g, n, k) = (2.0, 4.0, 2.0);
        let corr = (g / (g - 1.0)) * ((n - 1.0) / (n - k));
        let oracle = &bread * meat * &bread * corr;

        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(fit.vcov[(i, j)], oracle[(i, j)], epsilon = 1e-10);
            }
        }
    }

    /// Singleton clusters must reproduce HC1 exactly.
    #[test]
    fn singleton_clusters_reduce_to_hc1() {
        let x = DMatrix::from_row_slice(
            6,
            2,
            &[1.0, -1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0, 1.0, 4.5],
        );
        let y = DVector::from_vec(vec![0.2, 0.7, 2.3, 2.9, 4.8, 6.6]);
        let fit = ols(&y, &x, &names(&["const", "x"]), &singleton_clusters(6), 0).unwrap();

        // HC1: (n / (n-k)) * bread * sum(e_i^2 x_i x_i') * bread
        let bread = (x.transpose() * &x).try_inverse().unwrap();
        let e = &y - &x * &fit.beta;
        let mut meat = DMatrix::zeros(2, 2);
        for i in 0..6 {
            let xi = x.row(i).transpose();
            meat += &xi * xi.transpose() * e[i] * e[i];
        }
        let hc1 = &bread * meat * &bread * (6.0 / (6.0 - 2.0));
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(fit.vcov[(i, j)], hc1[(i, j)], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn single_cluster_is_rejected() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 2.1, 2.9]);
        let err = ols(&y, &x, &names(&["const", "x"]), &[0, 0, 0], 0).unwrap_err();
        assert!(matches!(err, Error::TooFewClusters { found: 1 }));
    }

    /// Under homoskedastic independent errors, clustered and classical
    /// standard errors should agree on average.
    #[test]
    fn clustered_se_tracks_classical_se_under_homoskedasticity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut ratio_sum = 0.0;
        let reps = 200;
        for _ in 0..reps {
            let n = 120;
            let mut x = DMatrix::zeros(n, 2);
            let mut y = DVector::zeros(n);
            let mut clusters = Vec::with_capacity(n);
            for i in 0..n {
                let xv: f64 = rng.sample(StandardNormal);
                let e: f64 = rng.sample(StandardNormal);
                x[(i, 0)] = 1.0;
                x[(i, 1)] = xv;
                y[i] = 1.0 + 2.0 * xv + e;
                clusters.push(i / 4); // 30 clusters of 4, iid errors
            }
            let fit = ols(&y, &x, &names(&["const", "x"]), &clusters, 0).unwrap();
            ratio_sum += fit.se(1) / fit.se_classical(1);
        }
        let mean_ratio = ratio_sum / reps as f64;
        assert!(
            (mean_ratio - 1.0).abs() < 0.15,
            "mean clustered/classical se ratio {mean_ratio}"
        );
    }

    fn tsls_fixture() -> (DVector<f64>, DVector<f64>, DVector<f64>, DMatrix<f64>) {
        // Six observations, one control; built so nothing is collinear.
        let y = DVector::from_vec(vec![1.1, 2.3, 2.9, 4.2, 4.8, 6.3]);
        let endog = DVector::from_vec(vec![0.4, 1.1, 1.6, 2.2, 2.7, 3.5]);
        let instr = DVector::from_vec(vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
        let control = DMatrix::from_column_slice(6, 1, &[0.2, -0.1, 0.4, 0.0, -0.3, 0.1]);
        (y, endog, instr, control)
    }

    /// With the instrument equal to the endogenous regressor, 2SLS must
    /// collapse to OLS, coefficients and clustered variance alike.
    #[test]
    fn identity_instrument_collapses_to_ols()  {
        let (y, endog, _, control) = tsls_fixture();
        let clusters = vec![0usize, 0, 1, 1, 2, 2];
        let fit = tsls(
            &y,
            &endog,
            &endog,
            &control,
            &names(&["z1"]),
            &clusters,
            true,
            0,
        )
        .unwrap();

        let mut x = DMatrix::zeros(6, 3);
        x.column_mut(0).fill(1.0);
        x.set_column(1, &endog);
        x.column_mut(2).copy_from(&control.column(0));
        let ols_fit = ols(&y, &x, &names(&["const", "endogenous", "z1"]), &clusters, 0).unwrap();

        for i in 0..3 {
            assert_relative_eq!(fit.second_stage.beta[i], ols_fit.beta[i], epsilon = 1e-10);
            for j in 0..3 {
                assert_relative_eq!(
                    fit.second_stage.vcov[(i, j)],
                    ols_fit.vcov[(i, j)],
                    epsilon = 1e-10
                );
            }
        }
    }

    /// Frozen oracle: run the two stages as separate OLS fits, then correct
    /// the residuals to use observed endogenous values.
    #[test]
    fn matches_sequential_ols_oracle_with_residual_correction() {
        let (y, endog, instr, control) = tsls_fixture();
        let clusters = singleton_clusters(6);
        let fit = tsls(
            &y,
            &endog,
            &instr,
            &control,
            &names(&["z1"]),
            &clusters,
            true,
            0,
        )
        .unwrap();

        // Oracle stage 1: endog on [1, instr, control].
        let mut z = DMatrix::zeros(6, 3);
        z.column_mut(0).fill(1.0);
        z.set_column(1, &instr);
        z.column_mut(2).copy_from(&control.column(0));
        let gamma = (z.transpose() * &z).try_inverse().unwrap() * z.transpose() * &endog;
        let fitted = &z * &gamma;

        // Oracle stage 2: y on [1, fitted, control].
        let mut xh = DMatrix::zeros(6, 3);
        xh.column_mut(0).fill(1.0);
        xh.set_column(1, &fitted);
        xh.column_mut(2).copy_from(&control.column(0));
        let bread = (xh.transpose() * &xh).try_inverse().unwrap();
        let beta = &bread * xh.transpose() * &y;
        for i in 0..3 {
            assert_relative_eq!(fit.second_stage.beta[i], beta[i], epsilon = 1e-8);
        }

        // Residual correction: e = y - X beta at OBSERVED endog.
        let mut x = xh.clone();
        x.set_column(1, &endog);
        let e = &y - &x * &beta;
        let mut meat = DMatrix::zeros(3, 3);
        for i in 0..6 {
            let s = xh.row(i).transpose() * e[i];
            meat += &s * s.transpose();
        }
        let (g, n, k) = (6.0, 6.0, 3.0);
        let corr = (g / (g - 1.0)) * ((n - 1.0) / (n - k));
        let oracle_vcov = &bread * meat * &bread * corr;
        for i in 0..3 {
            assert_relative_eq!(
                fit.second_stage.se(i),
                oracle_vcov[(i, i)].sqrt(),
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn orthogonal_instrument_is_a_weak_instrument_error() {
        // Instrument has exactly zero covariance with the endogenous
        // regressor by construction.
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let endog = DVector::from_vec(vec![1.0, -1.0, 1.0, -1.0]);
        let instr = DVector::from_vec(vec![1.0, 1.0, -1.0, -1.0]);
        let controls = DMatrix::zeros(4, 0);
        let err = tsls(
            &y,
            &endog,
            &instr,
            &controls,
            &[],
            &singleton_clusters(4),
            true,
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::WeakInstrument { .. }), "{err:?}");
    }

    /// In the just-identified case the first-stage F must equal the squared
    /// instrument t-stat by construction.
    #[test]
    fn first_stage_f_is_squared_t() {
        let (y, endog, instr, control) = tsls_fixture();
        let fit = tsls(
            &y,
            &endog,
            &instr,
            &control,
            &names(&["z1"]),
            &singleton_clusters(6),
            true,
            0,
        )
        .unwrap();
        let t = fit.first_stage.t_stat(1);
        assert_relative_eq!(fit.first_stage_f, t * t, epsilon = 1e-12);
        assert_relative_eq!(
            fit.first_stage_f,
            first_stage_f(&fit.first_stage, 1),
            epsilon = 1e-15
        );
    }

    /// A strong synthetic first stage should show a large F almost always,
    /// and a pure-noise instrument should average F near 1.
    #[test]
    fn first_stage_f_separates_strong_from_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let reps = 200;
        let mut strong_hits = 0;
        let mut noise_f_sum = 0.0;
        for _ in 0..reps {
            let n = 500;
            let mut endog = DVector::zeros(n);
            let mut strong = DVector::zeros(n);
            let mut noise = DVector::zeros(n);
            for i in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                let e: f64 = rng.sample(StandardNormal);
                let w: f64 = rng.sample(StandardNormal);
                strong[i] = z;
                endog[i] = 2.25 * z + e;
                noise[i] = w;
            }
            let clusters = singleton_clusters(n);

            let f_strong = {
                let mut zm = DMatrix::zeros(n, 2);
                zm.column_mut(0).fill(1.0);
                zm.set_column(1, &strong);
                let fs = ols(&endog, &zm, &names(&["const", "instrument"]), &clusters, 0).unwrap();
                first_stage_f(&fs, 1)
            };
            if f_strong > 100.0 {
                strong_hits += 1;
            }

            let f_noise = {
                let mut zm = DMatrix::zeros(n, 2);
                zm.column_mut(0).fill(1.0);
                zm.set_column(1, &noise);
                let fs = ols(&endog, &zm, &names(&["const", "instrument"]), &clusters, 0).unwrap();
                first_stage_f(&fs, 1)
            };
            noise_f_sum += f_noise;
        }
        assert!(
            strong_hits as f64 >= 0.95 * reps as f64,
            "strong first stage cleared F > 100 in only {strong_hits}/{reps} draws"
        );
        let mean_noise_f = noise_f_sum / reps as f64;
        assert!(
            mean_noise_f < 2.0,
            "noise instrument mean F was {mean_noise_f}, expected ~1"
        );
    }
}
