//! Gravity trade block: productivity, unit costs, and bilateral trade
//! costs determine destination-level price indices, sourcing shares, and
//! supplier incomes.
//!
//! For each industry `k`, supplier `s`, destination `d`:
//!
//! ```text
//! lambda[s,d] = T[s] * (tau[s,d] * c[s])^(-theta) / Phi[d]
//! Phi[d]      = sum_s T[s] * (tau[s,d] * c[s])^(-theta)
//! Y[s]        = sum_d lambda[s,d] * X[d]
//! ```
//!
//! Suppliers are the home regions plus an aggregate outside block; all
//! expenditure is foreign, so supplier income is exports. The solver
//! checks the bookkeeping identities (shares sum to one per destination,
//! income equals expenditure) on every call — they are cheap relative to
//! the solve itself.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tolerance for `sum_s lambda[s,d] = 1` per `(destination, industry)`.
pub const SHARE_NORMALIZATION_TOL: f64 = 1e-9;
/// Relative tolerance for the income-equals-expenditure identity.
pub const ACCOUNTING_TOL: f64 = 1e-6;
/// Largest admissible `|theta * ln(tau * c)|` before `exp` over/underflows.
pub const MAX_POWER_EXPONENT: f64 = 700.0;

/// A parameterized world: suppliers x industries x destinations.
///
/// Per industry `k`: `productivity[k][s]`, `unit_cost[k][s]`,
/// `trade_cost[k][(s, d)]`, `expenditure[k][d]`, elasticity `theta[k]`.
/// The first `home_count` suppliers are home regions; any remaining rows
/// are outside blocks whose sales make up the world-export aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct GravityWorld {
    pub suppliers: Vec<String>,
    pub home_count: usize,
    pub industries: Vec<String>,
    pub destinations: Vec<String>,
    pub theta: Vec<f64>,
    pub productivity: Vec<DVector<f64>>,
    pub unit_cost: Vec<DVector<f64>>,
    pub trade_cost: Vec<DMatrix<f64>>,
    pub expenditure: Vec<DVector<f64>>,
}

impl GravityWorld {
    fn validate(&self) -> Result<()> {
        let s = self.suppliers.len();
        let k = self.industries.len();
        let d = self.destinations.len();
        if s == 0 || k == 0 || d == 0 {
            return Err(Error::Config(
                "gravity world needs at least one supplier, industry, and destination"
                    .to_string(),
            ));
        }
        if self.home_count > s {
            return Err(Error::Config(format!(
                "home_count {} exceeds supplier count {s}",
                self.home_count
            )));
        }
        let dims = [
            ("theta", self.theta.len(), k),
            ("productivity", self.productivity.len(), k),
            ("unit_cost", self.unit_cost.len(), k),
            ("trade_cost", self.trade_cost.len(), k),
            ("expenditure", self.expenditure.len(), k),
        ];
        for (name, got, want) in dims {
            if got != want {
                return Err(Error::Config(format!(
                    "{name} has {got} industry entries, expected {want}"
                )));
            }
        }
        for ki in 0..k {
            let industry = &self.industries[ki];
            if !(self.theta[ki] > 0.0 && self.theta[ki].is_finite()) {
                return Err(Error::Config(format!(
                    "trade elasticity for {industry} must be positive, got {}",
                    self.theta[ki]
                )));
            }
            if self.productivity[ki].len() != s
                || self.unit_cost[ki].len() != s
                || self.trade_cost[ki].nrows() != s
                || self.trade_cost[ki].ncols() != d
                || self.expenditure[ki].len() != d
            {
                return Err(Error::Config(format!(
                    "parameter shapes for {industry} do not match {s} suppliers x {d} destinations"
                )));
            }
            for si in 0..s {
                let t = self.productivity[ki][si];
                let c = self.unit_cost[ki][si];
                if !(t > 0.0 && t.is_finite()) || !(c > 0.0 && c.is_finite()) {
                    return Err(Error::Config(format!(
                        "productivity and unit cost must be positive and finite \
                         (supplier {}, industry {industry})",
                        self.suppliers[si]
                    )));
                }
                for di in 0..d {
                    let tau = self.trade_cost[ki][(si, di)];
                    if !(tau >= 1.0 && tau.is_finite()) {
                        return Err(Error::Config(format!(
                            "trade cost must be >= 1 and finite, got {tau} \
                             (supplier {}, destination {}, industry {industry})",
                            self.suppliers[si], self.destinations[di]
                        )));
                    }
                }
            }
            for di in 0..d {
                let x = self.expenditure[ki][di];
                if !(x > 0.0 && x.is_finite()) {
                    return Err(Error::Config(format!(
                        "expenditure must be positive and finite, got {x} \
                         (destination {}, industry {industry})",
                        self.destinations[di]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Solved equilibrium objects, all indexed like the world's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    /// Price index `Phi[k][d]`.
    pub price_index: Vec<DVector<f64>>,
    /// Sourcing shares `lambda[k][(s, d)]`.
    pub shares: Vec<DMatrix<f64>>,
    /// Supplier income `Y[k][s]`.
    pub income: Vec<DVector<f64>>,
    /// Income weights `mu[(s, k)] = Y[s,k] / sum_k Y[s,k]`.
    pub income_weights: DMatrix<f64>,
}

impl Equilibrium {
    /// Total income of supplier `s` across industries.
    pub fn total_income(&self, s: usize) -> f64 {
        self.income.iter().map(|y| y[s]).sum()
    }
}

/// The cost-power kernel `(tau[s,d] * c[s])^(-theta)` for one industry,
/// with an explicit overflow guard instead of silent inf/zero collapse.
pub fn power_matrix(world: &GravityWorld, k: usize) -> Result<DMatrix<f64>> {
    let s = world.suppliers.len();
    let d = world.destinations.len();
    let theta = world.theta[k];
    let mut out = DMatrix::zeros(s, d);
    for si in 0..s {
        let c = world.unit_cost[k][si];
        for di in 0..d {
            let tau = world.trade_cost[k][(si, di)];
            let exponent = -theta * (tau * c).ln();
            if exponent.abs() > MAX_POWER_EXPONENT {
                return Err(Error::Config(format!(
                    "power term overflows for industry {}: |theta * ln(tau*c)| = {:.1} \
                     (supplier {}, destination {}); rescale theta, trade costs, or unit costs",
                    world.industries[k],
                    exponent.abs(),
                    world.suppliers[si],
                    world.destinations[di]
                )));
            }
            out[(si, di)] = exponent.exp();
        }
    }
    Ok(out)
}

/// All industries' power kernels; cache these when only productivity or
/// expenditure move between periods.
pub fn power_matrices(world: &GravityWorld) -> Result<Vec<DMatrix<f64>>> {
    (0..world.industries.len())
        .map(|k| power_matrix(world, k))
        .collect()
}

/// Solves shares, price indices, incomes, and income weights.
pub fn solve_shares(world: &GravityWorld) -> Result<Equilibrium> {
    world.validate()?;
    let power = power_matrices(world)?;
    solve_with_power(world, &power)
}

/// Solve using precomputed power kernels (the per-period fast path when
/// trade and unit costs are static). Checks the same invariants.
pub fn solve_with_power(world: &GravityWorld, power: &[DMatrix<f64>]) -> Result<Equilibrium> {
    let s = world.suppliers.len();
    let k = world.industries.len();
    let d = world.destinations.len();
    if power.len() != k {
        return Err(Error::Invariant(format!(
            "power kernels for {} industries, expected {k}",
            power.len()
        )));
    }

    let mut price_index = Vec::with_capacity(k);
    let mut shares = Vec::with_capacity(k);
    let mut income = Vec::with_capacity(k);

    for ki in 0..k {
        let t = &world.productivity[ki];
        let p = &power[ki];
        let x = &world.expenditure[ki];

        let mut phi = DVector::zeros(d);
        for di in 0..d {
            let mut sum = 0.0;
            for si in 0..s {
                sum += t[si] * p[(si, di)];
            }
            if !(sum > 0.0 && sum.is_finite()) {
                return Err(Error::Estimation(format!(
                    "price index degenerate for industry {}, destination {}: {sum}",
                    world.industries[ki], world.destinations[di]
                )));
            }
            phi[di] = sum;
        }

        let mut lambda = DMatrix::zeros(s, d);
        let mut y = DVector::zeros(s);
        for si in 0..s {
            let mut inc = 0.0;
            for di in 0..d {
                let share = t[si] * p[(si, di)] / phi[di];
                lambda[(si, di)] = share;
                inc += share * x[di];
            }
            y[si] = inc;
        }

        // Shares must partition each destination's expenditure.
        for di in 0..d {
            let total: f64 = (0..s).map(|si| lambda[(si, di)]).sum();
            if (total - 1.0).abs() > SHARE_NORMALIZATION_TOL {
                return Err(Error::Invariant(format!(
                    "sourcing shares sum to {total} for destination {}, industry {} \
                     (expected 1 within {SHARE_NORMALIZATION_TOL:e})",
                    world.destinations[di], world.industries[ki]
                )));
            }
        }

        price_index.push(phi);
        shares.push(lambda);
        income.push(y);
    }

    // Income equals expenditure, summed over everything.
    let total_income: f64 = income.iter().map(|y| y.sum()).sum();
    let total_expenditure: f64 = world.expenditure.iter().map(|x| x.sum()).sum();
    if (total_income - total_expenditure).abs() > ACCOUNTING_TOL * total_expenditure {
        return Err(Error::Invariant(format!(
            "income {total_income} differs from expenditure {total_expenditure} \
             beyond {ACCOUNTING_TOL:e} relative"
        )));
    }

    // Income weights across industries per supplier.
    let mut income_weights = DMatrix::zeros(s, k);
    for si in 0..s {
        let total: f64 = income.iter().map(|y| y[si]).sum();
        if total <= 0.0 {
            return Err(Error::Invariant(format!(
                "supplier {} has non-positive total income {total}",
                world.suppliers[si]
            )));
        }
        for ki in 0..k {
            income_weights[(si, ki)] = income[ki][si] / total;
        }
        let wsum: f64 = (0..k).map(|ki| income_weights[(si, ki)]).sum();
        if (wsum - 1.0).abs() > SHARE_NORMALIZATION_TOL {
            return Err(Error::Invariant(format!(
                "income weights sum to {wsum} for supplier {}",
                world.suppliers[si]
            )));
        }
    }

    Ok(Equilibrium {
        price_index,
        shares,
        income,
        income_weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn uniform_world(suppliers: usize, destinations: usize) -> GravityWorld {
        GravityWorld {
            suppliers: (0..suppliers).map(|i| format!("s{i}")).collect(),
            home_count: suppliers,
            industries: vec!["k1".to_string()],
            destinations: (0..destinations).map(|i| format!("d{i}")).collect(),
            theta: vec![4.0],
            productivity: vec![DVector::from_element(suppliers, 1.0)],
            unit_cost: vec![DVector::from_element(suppliers, 1.0)],
            trade_cost: vec![DMatrix::from_element(suppliers, destinations, 1.0)],
            expenditure: vec![DVector::from_element(destinations, 1000.0)],
        }
    }

    #[test]
    fn symmetric_world_splits_shares_evenly() {
        let world = uniform_world(5, 3);
        let eq = solve_shares(&world).unwrap();
        for di in 0..3 {
            for si in 0..5 {
                assert_relative_eq!(eq.shares[0][(si, di)], 0.2, epsilon = 1e-12);
            }
        }
        // Five suppliers split 3 x 1000 of expenditure evenly.
        for si in 0..5 {
            assert_relative_eq!(eq.income[0][si], 600.0, epsilon = 1e-9);
        }
    }

    /// Hand case: two suppliers, T = (2, 1), all costs 1, theta = 1, one
    /// destination. Phi = 3, so shares are (2/3, 1/3).
    #[test]
    fn two_supplier_hand_case() {
        let mut world = uniform_world(2, 1);
        world.theta = vec![1.0];
        world.productivity = vec![DVector::from_vec(vec![2.0, 1.0])];
        let eq = solve_shares(&world).unwrap();
        assert_relative_eq!(eq.shares[0][(0, 0)], 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(eq.shares[0][(1, 0)], 1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(eq.income[0][0], 2000.0 / 3.0, epsilon = 1e-9);
    }

    /// Income is linear in expenditure: doubling every X doubles every Y
    /// bit-for-bit (multiplication by two is exact).
    #[test]
    fn doubling_expenditure_doubles_income_exactly() {
        let mut world = uniform_world(4, 3);
        // Break the symmetry so the test is not trivially uniform.
        world.productivity = vec![DVector::from_vec(vec![1.0, 2.0, 0.5, 1.5])];
        world.trade_cost = vec![DMatrix::from_fn(4, 3, |s, d| 1.0 + 0.1 * (s + d) as f64)];
        let base = solve_shares(&world).unwrap();
        world.expenditure = vec![&world.expenditure[0] * 2.0];
        let doubled = solve_shares(&world).unwrap();
        for si in 0..4 {
            assert_eq!(doubled.income[0][si], 2.0 * base.income[0][si]);
        }
    }

    #[test]
    fn income_weights_partition_each_supplier() {
        let mut world = uniform_world(3, 2);
        world.industries = vec!["k1".to_string(), "k2".to_string()];
        world.theta = vec![2.0, 5.0];
        world.productivity = vec![
            DVector::from_vec(vec![1.0, 2.0, 3.0]),
            DVector::from_vec(vec![2.0, 1.0, 0.5]),
        ];
        world.unit_cost = vec![
            DVector::from_element(3, 1.0),
            DVector::from_vec(vec![1.2, 0.9, 1.1]),
        ];
        world.trade_cost = vec![
            DMatrix::from_fn(3, 2, |s, d| 1.0 + 0.2 * (s * 2 + d) as f64),
            DMatrix::from_element(3, 2, 1.5),
        ];
        world.expenditure = vec![
            DVector::from_vec(vec![800.0, 1200.0]),
            DVector::from_vec(vec![500.0, 700.0]),
        ];
        let eq = solve_shares(&world).unwrap();
        for si in 0..3 {
            let sum: f64 = (0..2).map(|ki| eq.income_weights[(si, ki)]).sum();
            assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
        }
        let world_income: f64 = (0..3).map(|si| eq.total_income(si)).sum();
        assert_relative_eq!(world_income, 3200.0, max_relative = 1e-9);
    }

    #[test]
    fn overflow_guard_suggests_rescaling() {
        let mut world = uniform_world(2, 1);
        world.theta = vec![100.0];
        world.unit_cost = vec![DVector::from_element(2, 3000.0)];
        let err = solve_shares(&world).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("rescale"), "{msg}");
    }

    #[test]
    fn non_positive_productivity_is_rejected() {
        let mut world = uniform_world(2, 1);
        world.productivity = vec![DVector::from_vec(vec![1.0, 0.0])];
        let err = solve_shares(&world).unwrap_err();
        assert!(err.to_string().contains("positive"), "{err}");
    }

    #[test]
    fn trade_cost_below_one_is_rejected() {
        let mut world = uniform_world(2, 2);
        world.trade_cost = vec![DMatrix::from_element(2, 2, 0.9)];
        let err = solve_shares(&world).unwrap_err();
        assert!(err.to_string().contains(">= 1"), "{err}");
    }
}
