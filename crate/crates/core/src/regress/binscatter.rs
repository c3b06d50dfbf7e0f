//! Equal-count binned scatter of two variables, with the slope and
//! t-statistic of the underlying unbinned regression.
//!
//! Bins are quantile bins: observations sorted by `x`, boundary indices at
//! `floor(b * n / B)`, so bin counts differ by at most one. The reported
//! slope comes from the raw (unbinned) OLS of `y` on `x` with intercept,
//! with a heteroskedasticity-robust (HC1) t-statistic.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::ols;

/// One quantile bin's means.
#[derive(Debug, Clone, PartialEq)]
pub struct BinPoint {
    pub bin: usize,
    pub x_mean: f64,
    pub y_mean: f64,
    pub count: usize,
}

/// A binned scatter plus the underlying regression line.
#[derive(Debug, Clone, PartialEq)]
pub struct BinscatterResult {
    pub bins: Vec<BinPoint>,
    /// Slope of the unbinned OLS of `y` on `x`.
    pub slope: f64,
    /// HC1-robust t-statistic of the slope.
    pub t_stat: f64,
    /// Observation count of the underlying regression.
    pub n_obs: usize,
}

impl BinscatterResult {
    /// Renders `binscatter.csv`: one row per bin and a comment footer with
    /// the regression line (`# slope=…,t=…,n=…`).
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("bin,x_mean,y_mean,count\n");
        for b in &self.bins {
            out.push_str(&format!("{},{},{},{}\n", b.bin, b.x_mean, b.y_mean, b.count));
        }
        out.push_str(&format!(
            "# slope={},t={},n={}\n",
            self.slope, self.t_stat, self.n_obs
        ));
        out
    }
}

/// Bins `(x, y)` into `n_bins` equal-count quantile bins.
///
/// Requires `x.len() == y.len()` and `n_obs >= n_bins >= 2`. Ties in `x`
/// are broken by input order, which keeps the binning deterministic.
pub fn binscatter(x: &[f64], y: &[f64], n_bins: usize) -> Result<BinscatterResult> {
    if x.len() != y.len() {
        return Err(Error::Estimation(format!(
            "binscatter inputs differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n_bins < 2 {
        return Err(Error::Config(format!(
            "binscatter needs at least 2 bins, got {n_bins}"
        )));
    }
    if n < n_bins {
        return Err(Error::Estimation(format!(
            "binscatter needs at least as many observations as bins: {n} < {n_bins}"
        )));
    }
    for (i, (&xi, &yi)) in x.iter().zip(y).enumerate() {
        if !xi.is_finite() || !yi.is_finite() {
            return Err(Error::Estimation(format!(
                "binscatter input {i} is not finite (x = {xi}, y = {yi})"
            )));
        }
    }

    // Sort indices by x; stable sort keeps tie handling deterministic.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("finite values compare"));

    let boundary = |b: usize| b * n / n_bins;
    let mut bins = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        let (lo, hi) = (boundary(b), boundary(b + 1));
        let members = &order[lo..hi];
        let count = members.len();
        debug_assert!(count > 0, "quantile bins cannot be empty when n >= n_bins");
        let x_mean = members.iter().map(|&i| x[i]).sum::<f64>() / count as f64;
        let y_mean = members.iter().map(|&i| y[i]).sum::<f64>() / count as f64;
        bins.push(BinPoint {
            bin: b,
            x_mean,
            y_mean,
            count,
        });
    }

    // Underlying regression on the raw data, robust t via singleton
    // clusters (CR1 with singletons is exactly HC1).
    let mut design = DMatrix::zeros(n, 2);
    design.column_mut(0).fill(1.0);
    design.set_column(1, &DVector::from_column_slice(x));
    let yv = DVector::from_column_slice(y);
    let clusters: Vec<usize> = (0..n).collect();
    let names = vec!["const".to_string(), "x".to_string()];
    let fit = ols(&yv, &design, &names, &clusters, 0)?;

    Ok(BinscatterResult {
        bins,
        slope: fit.beta[1],
        t_stat: fit.t_stat(1),
        n_obs: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_line_gives_colinear_bins_and_slope_two() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let result = binscatter(&x, &y, 5).unwrap();
        assert_eq!(result.bins.len(), 5);
        assert_relative_eq!(result.slope, 2.0, epsilon = 1e-10);
        for b in &result.bins {
            assert_relative_eq!(b.y_mean, 2.0 * b.x_mean, epsilon = 1e-10);
            assert_eq!(b.count, 4);
        }
    }

    #[test]
    fn monotone_data_gives_monotone_bin_means() {
        let x: Vec<f64> = (0..37).map(|i| (i as f64).sqrt()).collect();
        let y: Vec<f64> = x.iter().map(|v| v.powi(3) + 1.0).collect();
        let result = binscatter(&x, &y, 7).unwrap();
        for pair in result.bins.windows(2) {
            assert!(pair[0].x_mean < pair[1].x_mean);
            assert!(pair[0].y_mean < pair[1].y_mean);
        }
        let total: usize = result.bins.iter().map(|b| b.count).sum();
        assert_eq!(total, 37);
    }

    #[test]
    fn too_few_observations_is_an_error() {
        let x = [1.0, 2.0, 3.0];
        let y = [1.0, 2.0, 3.0];
        let err = binscatter(&x, &y, 4).unwrap_err();
        assert!(err.to_string().contains("3 < 4"), "{err}");
    }

    #[test]
    fn csv_has_bin_rows_and_comment_footer() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let csv = binscatter(&x, &y, 2).unwrap().to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "bin,x_mean,y_mean,count");
        assert_eq!(lines.len(), 4);
        let footer = lines[3];
        assert!(footer.starts_with("# slope="), "{footer}");
        let slope: f64 = footer["# slope=".len()..]
            .split(",t=")
            .next()
            .unwrap()
            .parse()
            .unwrap();
        assert!((slope - 3.0).abs() < 1e-9, "{footer}");
        assert!(footer.contains(",t="), "{footer}");
        assert!(footer.ends_with(",n=10"), "{footer}");
    }

    #[test]
    fn robust_t_matches_hand_computed_hc1() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [0.1, 1.3, 1.9, 3.4, 3.8, 5.2];
        let result = binscatter(&x, &y, 3).unwrap();

        // Hand HC1 oracle.
        let n = 6.0;
        let xm = x.iter().sum::<f64>() / n;
        let ym = y.iter().sum::<f64>() / n;
        let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
        let slope: f64 = x
            .iter()
            .zip(&y)
            .map(|(&a, &b)| (a - xm) * (b - ym))
            .sum::<f64>()
            / sxx;
        let intercept = ym - slope * xm;
        let var: f64 = x
            .iter()
            .zip(&y)
            .map(|(&a, &b)| {
                let e = b - intercept - slope * a;
                ((a - xm) * e).powi(2)
            })
            .sum::<f64>()
            / (sxx * sxx)
            * (n / (n - 2.0));
        let t = slope / var.sqrt();

        assert_relative_eq!(result.slope, slope, epsilon = 1e-10);
        assert_relative_eq!(result.t_stat, t, epsilon = 1e-8);
    }
}
