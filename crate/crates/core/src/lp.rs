//! Thin wrapper around the LP backend.
//!
//! Everything the crate needs from a solver: minimize a single variable
//! subject to sparse `a . x <= b` rows, all variables free unless listed as
//! non-negative. Keeping the surface this small makes the backend
//! swappable.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("LP is infeasible")]
    Infeasible,
    #[error("LP is unbounded")]
    Unbounded,
    #[error("LP solver failed: {0}")]
    Numerical(String),
    #[error("constraint references variable {var}, but there are only {num_vars}")]
    BadVariable { var: usize, num_vars: usize },
}

/// Minimizes `x[objective_var]` subject to the rows `coeffs . x <= rhs`.
/// Variables listed in `nonneg` get a `[0, inf)` bound, all others are
/// free. Returns the full assignment.
pub fn minimize_variable(
    num_vars: usize,
    objective_var: usize,
    nonneg: &[usize],
    rows: impl IntoIterator<Item = (Vec<(usize, f64)>, f64)>,
) -> Result<Vec<f64>, LpError> {
    if objective_var >= num_vars {
        return Err(LpError::BadVariable {
            var: objective_var,
            num_vars,
        });
    }
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let mut lower = vec![f64::NEG_INFINITY; num_vars];
    for v in nonneg {
        if *v >= num_vars {
            return Err(LpError::BadVariable {
                var: *v,
                num_vars,
            });
        }
        lower[*v] = 0.0;
    }
    let vars: Vec<_> = (0..num_vars)
        .map(|v| {
            let objective = if v == objective_var { 1.0 } else { 0.0 };
            problem.add_var(objective, (lower[v], f64::INFINITY))
        })
        .collect();
    for (coeffs, rhs) in rows {
        let mut translated = Vec::with_capacity(coeffs.len());
        for (v, c) in coeffs {
            if v >= num_vars {
                return Err(LpError::BadVariable { var: v, num_vars });
            }
            translated.push((vars[v], c));
        }
        problem.add_constraint(&translated, ComparisonOp::Le, rhs);
    }
    let solution = problem.solve().map_err(|e| match e {
        microlp::Error::Infeasible => LpError::Infeasible,
        microlp::Error::Unbounded => LpError::Unbounded,
        other => LpError::Numerical(other.to_string()),
    })?;
    Ok(vars.iter().map(|v| solution[*v]).collect())
}
