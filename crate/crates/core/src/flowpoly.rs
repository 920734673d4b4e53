//! The constraint polyhedron over unknown slopes, initial states and the
//! tube radius.
//!
//! For a series with pieces mapped to locations, requiring the candidate
//! trajectory to pass within `epsilon` of every sample at its stamp is a
//! conjunction of linear inequalities: the trajectory value at stamp `k` is
//! the initial state plus, per location, the accumulated dwell time times
//! that location's slope. [`build_flow_polyhedron`] emits those
//! inequalities for one series, [`intersect`] combines several series and
//! adds `epsilon >= 0`, and [`minimize_epsilon`] finds the point with the
//! smallest radius.

use std::fmt::Write as _;

use thiserror::Error;

use crate::lp;
use crate::timeseries::TimeSeries;

#[derive(Debug, Error)]
pub enum FlowPolyError {
    #[error("layout must have at least one location, dimension and series")]
    EmptyLayout,
    #[error("series has dimension {got}, layout expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("series index {index} out of range for {num_series} series")]
    SeriesIndexOutOfRange { index: usize, num_series: usize },
    #[error("got {got} labels for {expected} pieces")]
    LabelCountMismatch { got: usize, expected: usize },
    #[error("label {label} out of range for {lambda} locations")]
    LabelOutOfRange { label: usize, lambda: usize },
    #[error("cannot intersect zero polyhedra")]
    NoPolyhedra,
    #[error("polyhedra have different variable layouts: {left:?} vs {right:?}")]
    LayoutMismatch {
        left: VariableLayout,
        right: VariableLayout,
    },
    #[error("solution violates a constraint by {violation} (row {row})")]
    SolutionInfeasible { row: usize, violation: f64 },
    #[error("vector has length {got}, layout expects {expected}")]
    VectorLengthMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Lp(#[from] lp::LpError),
}

/// Tolerance with which a returned solution must satisfy every constraint.
pub const FEASIBILITY_TOL: f64 = 1e-7;

/// Maps the unknowns to indices of one flat variable vector.
///
/// Order: slopes of every location (location-major, coordinate-minor),
/// then initial states of every series, then `epsilon` last.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableLayout {
    /// Number of locations.
    pub lambda: usize,
    /// State dimension.
    pub dim: usize,
    /// Number of series sharing the polyhedron.
    pub num_series: usize,
}

impl VariableLayout {
    pub fn new(lambda: usize, dim: usize, num_series: usize) -> Result<Self, FlowPolyError> {
        if lambda == 0 || dim == 0 || num_series == 0 {
            return Err(FlowPolyError::EmptyLayout);
        }
        Ok(VariableLayout {
            lambda,
            dim,
            num_series,
        })
    }

    /// Index of coordinate `coord` of location `location`'s slope.
    pub fn slope_var(&self, location: usize, coord: usize) -> usize {
        debug_assert!(location < self.lambda && coord < self.dim);
        location * self.dim + coord
    }

    /// Index of coordinate `coord` of series `series`' initial state.
    pub fn init_var(&self, series: usize, coord: usize) -> usize {
        debug_assert!(series < self.num_series && coord < self.dim);
        self.lambda * self.dim + series * self.dim + coord
    }

    /// Index of the tube radius.
    pub fn eps_var(&self) -> usize {
        (self.lambda + self.num_series) * self.dim
    }

    /// Total number of variables: `lambda*n + r*n + 1`.
    pub fn num_vars(&self) -> usize {
        self.eps_var() + 1
    }

    /// Human-readable variable name used by the LP dump.
    pub fn var_name(&self, var: usize) -> String {
        let n = self.dim;
        if var == self.eps_var() {
            return "eps".to_string();
        }
        if var < self.lambda * n {
            let (loc, coord) = (var / n, var % n);
            return if n == 1 {
                format!("m{}", loc + 1)
            } else {
                format!("m{}_{}", loc + 1, coord + 1)
            };
        }
        let rest = var - self.lambda * n;
        let (series, coord) = (rest / n, rest % n);
        if n == 1 {
            format!("x0_{}", series + 1)
        } else {
            format!("x0_{}_{}", series + 1, coord + 1)
        }
    }
}

/// One inequality `sum of coeff * var <= rhs` with sparse coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearConstraint {
    /// Left-hand side evaluated at `point`.
    pub fn lhs(&self, point: &[f64]) -> f64 {
        self.coeffs.iter().map(|(v, c)| c * point[*v]).sum()
    }

    pub fn satisfied_by(&self, point: &[f64], tol: f64) -> bool {
        self.lhs(point) <= self.rhs + tol
    }
}

/// A conjunction of [`LinearConstraint`]s over one [`VariableLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPolyhedron {
    pub layout: VariableLayout,
    pub constraints: Vec<LinearConstraint>,
}

impl FlowPolyhedron {
    /// Renders every constraint as `c1*v1 + c2*v2 ... <= rhs`, one per line.
    pub fn render_lp(&self) -> String {
        let mut out = String::new();
        for c in &self.constraints {
            let mut first = true;
            for (var, coeff) in &c.coeffs {
                if !first {
                    out.push_str(" + ");
                }
                first = false;
                let _ = write!(out, "{coeff}*{}", self.layout.var_name(*var));
            }
            let _ = writeln!(out, " <= {}", c.rhs);
        }
        out
    }
}

/// The optimum returned by [`minimize_epsilon`], unpacked by layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPoint {
    /// Slope vector per location.
    pub slopes: Vec<Vec<f64>>,
    /// Initial state per series.
    pub initial_states: Vec<Vec<f64>>,
    /// Tube radius.
    pub epsilon: f64,
}

impl SolutionPoint {
    pub fn from_vector(layout: &VariableLayout, x: &[f64]) -> Result<Self, FlowPolyError> {
        if x.len() != layout.num_vars() {
            return Err(FlowPolyError::VectorLengthMismatch {
                got: x.len(),
                expected: layout.num_vars(),
            });
        }
        let slopes = (0..layout.lambda)
            .map(|l| (0..layout.dim).map(|c| x[layout.slope_var(l, c)]).collect())
            .collect();
        let initial_states = (0..layout.num_series)
            .map(|j| (0..layout.dim).map(|c| x[layout.init_var(j, c)]).collect())
            .collect();
        Ok(SolutionPoint {
            slopes,
            initial_states,
            epsilon: x[layout.eps_var()],
        })
    }

    pub fn to_vector(&self, layout: &VariableLayout) -> Result<Vec<f64>, FlowPolyError> {
        if self.slopes.len() != layout.lambda || self.initial_states.len() != layout.num_series {
            return Err(FlowPolyError::VectorLengthMismatch {
                got: self.slopes.len(),
                expected: layout.lambda,
            });
        }
        let mut x = vec![0.0; layout.num_vars()];
        for (l, slope) in self.slopes.iter().enumerate() {
            for (c, v) in slope.iter().enumerate() {
                x[layout.slope_var(l, c)] = *v;
            }
        }
        for (j, init) in self.initial_states.iter().enumerate() {
            for (c, v) in init.iter().enumerate() {
                x[layout.init_var(j, c)] = *v;
            }
        }
        x[layout.eps_var()] = self.epsilon;
        Ok(x)
    }
}

/// Emits the tube constraints of one series.
///
/// For every sample `k` and coordinate `c`, two rows encode
/// `|x0_c + sum over locations of dwell(l, k) * m_{l,c} - q_{k,c}| <= eps`,
/// where `dwell(l, k)` is the total duration of pieces `1..=k` mapped to
/// location `l`. Locations the series has not visited by stamp `k`
/// contribute no term, so each row has at most `lambda*n + n + 1` nonzeros.
pub fn build_flow_polyhedron(
    series: &TimeSeries,
    labels: &[usize],
    series_index: usize,
    layout: &VariableLayout,
) -> Result<FlowPolyhedron, FlowPolyError> {
    if series.dim() != layout.dim {
        return Err(FlowPolyError::DimensionMismatch {
            got: series.dim(),
            expected: layout.dim,
        });
    }
    if series_index >= layout.num_series {
        return Err(FlowPolyError::SeriesIndexOutOfRange {
            index: series_index,
            num_series: layout.num_series,
        });
    }
    if labels.len() != series.num_pieces() {
        return Err(FlowPolyError::LabelCountMismatch {
            got: labels.len(),
            expected: series.num_pieces(),
        });
    }
    for l in labels {
        if *l >= layout.lambda {
            return Err(FlowPolyError::LabelOutOfRange {
                label: *l,
                lambda: layout.lambda,
            });
        }
    }

    let n = layout.dim;
    let times = series.times();
    let mut dwell = vec![0.0f64; layout.lambda];
    let mut constraints = Vec::with_capacity(2 * n * (labels.len() + 1));
    for k in 0..=labels.len() {
        if k > 0 {
            dwell[labels[k - 1]] += times[k] - times[k - 1];
        }
        for c in 0..n {
            let mut coeffs = Vec::new();
            for (l, d) in dwell.iter().enumerate() {
                if *d > 0.0 {
                    coeffs.push((layout.slope_var(l, c), *d));
                }
            }
            coeffs.push((layout.init_var(series_index, c), 1.0));
            let q = series.point(k)[c];

            let mut upper = coeffs.clone();
            upper.push((layout.eps_var(), -1.0));
            constraints.push(LinearConstraint {
                coeffs: upper,
                rhs: q,
            });

            let mut lower: Vec<(usize, f64)> =
                coeffs.iter().map(|(v, co)| (*v, -co)).collect();
            lower.push((layout.eps_var(), -1.0));
            constraints.push(LinearConstraint {
                coeffs: lower,
                rhs: -q,
            });
        }
    }
    Ok(FlowPolyhedron {
        layout: *layout,
        constraints,
    })
}

/// Concatenates the constraints of several polyhedra over one layout and
/// appends the single `epsilon >= 0` row.
pub fn intersect(polys: &[FlowPolyhedron]) -> Result<FlowPolyhedron, FlowPolyError> {
    let first = polys.first().ok_or(FlowPolyError::NoPolyhedra)?;
    let layout = first.layout;
    let mut constraints = Vec::new();
    for p in polys {
        if p.layout != layout {
            return Err(FlowPolyError::LayoutMismatch {
                left: layout,
                right: p.layout,
            });
        }
        constraints.extend(p.constraints.iter().cloned());
    }
    constraints.push(LinearConstraint {
        coeffs: vec![(layout.eps_var(), -1.0)],
        rhs: 0.0,
    });
    Ok(FlowPolyhedron {
        layout,
        constraints,
    })
}

/// Finds the point of the polyhedron with minimal `epsilon`.
///
/// The solver additionally keeps `epsilon >= 0` as a variable bound, so a
/// polyhedron that has not been through [`intersect`] still yields a
/// bounded problem. The optimum is generally not unique in the initial
/// states (at the optimal radius each may have a whole feasible interval),
/// so each initial-state coordinate is recentered to the midpoint of its
/// interval at fixed slopes and radius; that makes the returned point
/// deterministic and independent of the solver's vertex choice. The result
/// is re-checked against every constraint at [`FEASIBILITY_TOL`].
pub fn minimize_epsilon(poly: &FlowPolyhedron) -> Result<SolutionPoint, FlowPolyError> {
    let layout = &poly.layout;
    let rows = poly
        .constraints
        .iter()
        .map(|c| (c.coeffs.clone(), c.rhs));
    let mut x =
        lp::minimize_variable(layout.num_vars(), layout.eps_var(), &[layout.eps_var()], rows)?;
    recenter_initial_states(poly, &mut x);
    for (row, c) in poly.constraints.iter().enumerate() {
        let violation = c.lhs(&x) - c.rhs;
        if violation > FEASIBILITY_TOL {
            return Err(FlowPolyError::SolutionInfeasible { row, violation });
        }
    }
    SolutionPoint::from_vector(layout, &x)
}

/// Moves every initial-state coordinate to the midpoint of the interval it
/// may occupy with all other variables held fixed. Each initial state
/// appears only in its own series' rows, so the moves are independent and
/// feasibility is preserved.
fn recenter_initial_states(poly: &FlowPolyhedron, x: &mut [f64]) {
    let layout = &poly.layout;
    let first_init = layout.lambda * layout.dim;
    let eps = layout.eps_var();
    for var in first_init..eps {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for c in &poly.constraints {
            let Some((_, coeff)) = c.coeffs.iter().find(|(v, _)| *v == var) else {
                continue;
            };
            // rest + coeff * x[var] <= rhs
            let rest = c.lhs(x) - coeff * x[var];
            let bound = (c.rhs - rest) / coeff;
            if *coeff > 0.0 {
                hi = hi.min(bound);
            } else {
                lo = lo.max(bound);
            }
        }
        if lo.is_finite() && hi.is_finite() && hi >= lo {
            x[var] = 0.5 * (lo + hi);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::TimeSeries;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn heating_traces() -> (TimeSeries, TimeSeries) {
        let s1 = TimeSeries::new(
            "a",
            vec![0.00, 0.76, 1.59, 2.32, 3.15, 3.79, 5.00],
            [68.91, 72.41, 75.00, 70.44, 66.90, 65.00, 71.81]
                .iter()
                .map(|v| vec![*v])
                .collect(),
        )
        .unwrap();
        let s2 = TimeSeries::new(
            "b",
            vec![0.0, 0.75, 1.61, 2.33, 3.16, 3.76, 5.00],
            [68.16, 71.85, 74.70, 70.22, 66.75, 65.00, 71.92]
                .iter()
                .map(|v| vec![*v])
                .collect(),
        )
        .unwrap();
        (s1, s2)
    }

    const TRACE_LABELS: [usize; 6] = [0, 0, 1, 1, 1, 0];

    #[test]
    fn layout_indices_form_a_bijection() {
        for (lambda, dim, r) in [(1, 1, 1), (2, 1, 2), (3, 4, 2), (5, 2, 7)] {
            let layout = VariableLayout::new(lambda, dim, r).unwrap();
            let mut seen = vec![false; layout.num_vars()];
            for l in 0..lambda {
                for c in 0..dim {
                    let v = layout.slope_var(l, c);
                    assert!(!seen[v]);
                    seen[v] = true;
                }
            }
            for j in 0..r {
                for c in 0..dim {
                    let v = layout.init_var(j, c);
                    assert!(!seen[v]);
                    seen[v] = true;
                }
            }
            assert!(!seen[layout.eps_var()]);
            seen[layout.eps_var()] = true;
            assert!(seen.iter().all(|s| *s));
            assert_eq!(layout.num_vars(), (lambda + r) * dim + 1);
        }
        assert!(VariableLayout::new(0, 1, 1).is_err());
    }

    #[test]
    fn single_series_polyhedron_matches_hand_derivation() {
        let (s1, _) = heating_traces();
        let layout = VariableLayout::new(2, 1, 2).unwrap();
        let poly = build_flow_polyhedron(&s1, &TRACE_LABELS, 0, &layout).unwrap();

        // 2 * n * (p + 1) rows over lambda*n + r*n + 1 variables
        assert_eq!(poly.constraints.len(), 14);
        assert_eq!(layout.num_vars(), 5);

        // first stamp: x0 - eps <= q0 and -x0 - eps <= -q0
        let c0 = &poly.constraints[0];
        assert_eq!(c0.coeffs.len(), 2);
        assert_eq!(c0.coeffs[0], (layout.init_var(0, 0), 1.0));
        assert_eq!(c0.coeffs[1], (layout.eps_var(), -1.0));
        assert_abs_diff_eq!(c0.rhs, 68.91);
        assert_abs_diff_eq!(poly.constraints[1].rhs, -68.91);

        // third stamp: only the first location has been visited, 1.59 long
        let c2 = &poly.constraints[4];
        assert_eq!(c2.coeffs[0].0, layout.slope_var(0, 0));
        assert_abs_diff_eq!(c2.coeffs[0].1, 1.59, epsilon = 1e-9);
        assert_abs_diff_eq!(c2.rhs, 75.00);

        // fourth stamp: second location enters with 0.73
        let c3 = &poly.constraints[6];
        assert_eq!(c3.coeffs.len(), 4);
        assert_abs_diff_eq!(c3.coeffs[0].1, 1.59, epsilon = 1e-9);
        assert_eq!(c3.coeffs[1].0, layout.slope_var(1, 0));
        assert_abs_diff_eq!(c3.coeffs[1].1, 0.73, epsilon = 1e-9);
        assert_abs_diff_eq!(c3.rhs, 70.44);

        // last stamp accumulates 2.80 in the first location, 2.20 in the second
        let c6 = &poly.constraints[12];
        assert_abs_diff_eq!(c6.coeffs[0].1, 2.80, epsilon = 1e-9);
        assert_abs_diff_eq!(c6.coeffs[1].1, 2.20, epsilon = 1e-9);
        assert_abs_diff_eq!(c6.rhs, 71.81);

        // the mirrored row negates data coefficients but not the eps term
        let c6n = &poly.constraints[13];
        assert_abs_diff_eq!(c6n.coeffs[0].1, -2.80, epsilon = 1e-9);
        assert_eq!(c6n.coeffs.last().unwrap(), &(layout.eps_var(), -1.0));
        assert_abs_diff_eq!(c6n.rhs, -71.81);
    }

    #[test]
    fn render_lp_writes_one_row_per_line() {
        let (s1, _) = heating_traces();
        let layout = VariableLayout::new(2, 1, 2).unwrap();
        let poly = build_flow_polyhedron(&s1, &TRACE_LABELS, 0, &layout).unwrap();
        let text = poly.render_lp();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 14);
        assert!(lines[0].starts_with("1*x0_1 + -1*eps <= 68.91"));
        assert!(lines.iter().all(|l| l.contains(" <= ")));
        // the last stamp's row mentions both slopes
        assert!(lines[12].contains("*m1 + ") && lines[12].contains("*m2 + "));
    }

    #[test]
    fn intersection_appends_one_radius_row() {
        let (s1, s2) = heating_traces();
        let layout = VariableLayout::new(2, 1, 2).unwrap();
        let p1 = build_flow_polyhedron(&s1, &TRACE_LABELS, 0, &layout).unwrap();
        let p2 = build_flow_polyhedron(&s2, &TRACE_LABELS, 1, &layout).unwrap();
        let both = intersect(&[p1.clone(), p2.clone()]).unwrap();
        assert_eq!(
            both.constraints.len(),
            p1.constraints.len() + p2.constraints.len() + 1
        );
        let last = both.constraints.last().unwrap();
        assert_eq!(last.coeffs, vec![(layout.eps_var(), -1.0)]);
        assert_eq!(last.rhs, 0.0);

        assert!(matches!(intersect(&[]), Err(FlowPolyError::NoPolyhedra)));
        let other_layout = VariableLayout::new(3, 1, 2).unwrap();
        let p3 = FlowPolyhedron {
            layout: other_layout,
            constraints: Vec::new(),
        };
        assert!(matches!(
            intersect(&[p1, p3]),
            Err(FlowPolyError::LayoutMismatch { .. })
        ));
    }

    #[test]
    fn build_validates_input() {
        let (s1, _) = heating_traces();
        let layout = VariableLayout::new(2, 1, 2).unwrap();
        assert!(matches!(
            build_flow_polyhedron(&s1, &[0, 0, 1], 0, &layout),
            Err(FlowPolyError::LabelCountMismatch { .. })
        ));
        assert!(matches!(
            build_flow_polyhedron(&s1, &[0, 0, 1, 1, 1, 2], 0, &layout),
            Err(FlowPolyError::LabelOutOfRange { label: 2, .. })
        ));
        assert!(matches!(
            build_flow_polyhedron(&s1, &TRACE_LABELS, 2, &layout),
            Err(FlowPolyError::SeriesIndexOutOfRange { .. })
        ));
        let wide = VariableLayout::new(2, 3, 2).unwrap();
        assert!(matches!(
            build_flow_polyhedron(&s1, &TRACE_LABELS, 0, &wide),
            Err(FlowPolyError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn tent_fit_has_radius_half() {
        let s = TimeSeries::new(
            "tent",
            vec![0.0, 1.0, 2.0],
            vec![vec![0.0], vec![1.0], vec![0.0]],
        )
        .unwrap();
        let layout = VariableLayout::new(1, 1, 1).unwrap();
        let poly = build_flow_polyhedron(&s, &[0, 0], 0, &layout).unwrap();
        let sol = minimize_epsilon(&intersect(&[poly]).unwrap()).unwrap();
        assert_abs_diff_eq!(sol.epsilon, 0.5, epsilon = 1e-7);
        assert_abs_diff_eq!(sol.slopes[0][0], 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(sol.initial_states[0][0], 0.5, epsilon = 1e-7);
    }

    #[test]
    fn heating_traces_reach_the_published_optimum() {
        let (s1, s2) = heating_traces();
        let layout = VariableLayout::new(2, 1, 2).unwrap();
        let p1 = build_flow_polyhedron(&s1, &TRACE_LABELS, 0, &layout).unwrap();
        let p2 = build_flow_polyhedron(&s2, &TRACE_LABELS, 1, &layout).unwrap();
        let poly = intersect(&[p1, p2]).unwrap();
        let sol = minimize_epsilon(&poly).unwrap();

        assert!(sol.epsilon >= 1.19 && sol.epsilon <= 1.29, "eps = {}", sol.epsilon);
        assert_abs_diff_eq!(sol.slopes[0][0], 4.31, epsilon = 0.05);
        assert_abs_diff_eq!(sol.slopes[1][0], -4.27, epsilon = 0.05);
        // The optimum of this program is a single vertex (five tight rows in
        // five variables), so the initial states are pinned by the data.
        assert_abs_diff_eq!(sol.initial_states[0][0], 67.9057, epsilon = 0.05);
        assert_abs_diff_eq!(sol.initial_states[1][0], 67.5566, epsilon = 0.05);

        // returned point satisfies every row
        let x = sol.to_vector(&layout).unwrap();
        for c in &poly.constraints {
            assert!(c.satisfied_by(&x, FEASIBILITY_TOL));
        }
    }

    #[test]
    fn unused_location_does_not_affect_the_radius() {
        let s = TimeSeries::new(
            "line",
            vec![0.0, 1.0, 2.0],
            vec![vec![0.0], vec![1.0], vec![0.0]],
        )
        .unwrap();
        let wide = VariableLayout::new(2, 1, 1).unwrap();
        let poly = build_flow_polyhedron(&s, &[0, 0], 0, &wide).unwrap();
        let sol = minimize_epsilon(&intersect(&[poly]).unwrap()).unwrap();
        assert_abs_diff_eq!(sol.epsilon, 0.5, epsilon = 1e-7);
    }

    #[test]
    fn coarse_grid_search_agrees_on_tiny_instances() {
        // one location, one series: exhaustive grid over slope and x0
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let times = vec![0.0, 0.4, 0.9];
            let points: Vec<Vec<f64>> =
                (0..3).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
            let s = TimeSeries::new("g", times, points).unwrap();
            let layout = VariableLayout::new(1, 1, 1).unwrap();
            let poly = build_flow_polyhedron(&s, &[0, 0], 0, &layout).unwrap();
            let sol = minimize_epsilon(&intersect(&[poly]).unwrap()).unwrap();

            let step = 0.01;
            let mut best = f64::INFINITY;
            let mut m = -5.0;
            while m <= 5.0 {
                let mut x0 = -2.0;
                while x0 <= 2.0 {
                    let mut dev = 0.0f64;
                    for (k, t) in s.times().iter().enumerate() {
                        dev = dev.max((x0 + m * t - s.point(k)[0]).abs());
                    }
                    best = best.min(dev);
                    x0 += step;
                }
                m += step;
            }
            assert!(
                (sol.epsilon - best).abs() <= step,
                "lp = {}, grid = {best}",
                sol.epsilon
            );
        }
    }

    #[test]
    fn removing_a_series_never_raises_the_radius() {
        let (s1, s2) = heating_traces();
        let both_layout = VariableLayout::new(2, 1, 2).unwrap();
        let p1 = build_flow_polyhedron(&s1, &TRACE_LABELS, 0, &both_layout).unwrap();
        let p2 = build_flow_polyhedron(&s2, &TRACE_LABELS, 1, &both_layout).unwrap();
        let eps_both = minimize_epsilon(&intersect(&[p1, p2]).unwrap())
            .unwrap()
            .epsilon;

        let single_layout = VariableLayout::new(2, 1, 1).unwrap();
        let p1_only = build_flow_polyhedron(&s1, &TRACE_LABELS, 0, &single_layout).unwrap();
        let eps_one = minimize_epsilon(&intersect(&[p1_only]).unwrap())
            .unwrap()
            .epsilon;
        assert!(eps_one <= eps_both + 1e-6);
    }

    #[test]
    fn splitting_a_location_never_raises_the_radius() {
        let (s1, _) = heating_traces();
        let coarse = VariableLayout::new(2, 1, 1).unwrap();
        let eps_coarse = minimize_epsilon(
            &intersect(&[
                build_flow_polyhedron(&s1, &TRACE_LABELS, 0, &coarse).unwrap()
            ])
            .unwrap(),
        )
        .unwrap()
        .epsilon;

        // split location 0 into 0 and 2 (last rising piece moves to 2)
        let refined_labels = [0usize, 0, 1, 1, 1, 2];
        let fine = VariableLayout::new(3, 1, 1).unwrap();
        let eps_fine = minimize_epsilon(
            &intersect(&[
                build_flow_polyhedron(&s1, &refined_labels, 0, &fine).unwrap()
            ])
            .unwrap(),
        )
        .unwrap()
        .epsilon;
        assert!(eps_fine <= eps_coarse + 1e-6);
    }

    fn shape_strategy() -> impl Strategy<Value = (usize, usize, usize, usize, Vec<usize>, TimeSeries)>
    {
        (1usize..5, 1usize..4, 1usize..4, 1usize..20).prop_flat_map(|(lambda, n, r, p)| {
            (
                proptest::collection::vec(0usize..lambda, p),
                proptest::collection::vec(0.05f64..1.0, p),
                proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, n), p + 1),
            )
                .prop_map(move |(labels, gaps, points)| {
                    let mut times = vec![0.0];
                    for g in &gaps {
                        times.push(times.last().unwrap() + g);
                    }
                    let s = TimeSeries::new("p", times, points).unwrap();
                    (lambda, n, r, p, labels, s)
                })
        })
    }

    proptest! {
        #[test]
        fn constraint_counts_follow_the_size_laws(
            (lambda, n, r, p, labels, s) in shape_strategy()
        ) {
            let layout = VariableLayout::new(lambda, n, r).unwrap();
            let poly = build_flow_polyhedron(&s, &labels, r - 1, &layout).unwrap();
            prop_assert_eq!(poly.constraints.len(), 2 * n * (p + 1));
            prop_assert_eq!(layout.num_vars(), lambda * n + r * n + 1);
            for c in &poly.constraints {
                prop_assert!(c.coeffs.len() <= lambda * n + n + 1);
                for (v, coeff) in &c.coeffs {
                    prop_assert!(*v < layout.num_vars());
                    prop_assert!(coeff.is_finite());
                }
                // eps appears exactly once, with coefficient -1
                let eps_terms: Vec<_> = c
                    .coeffs
                    .iter()
                    .filter(|(v, _)| *v == layout.eps_var())
                    .collect();
                prop_assert_eq!(eps_terms.len(), 1);
                prop_assert_eq!(eps_terms[0].1, -1.0);
            }
        }

        #[test]
        fn solutions_are_feasible_and_nonnegative(
            (lambda, n, r, _p, labels, s) in shape_strategy()
        ) {
            let layout = VariableLayout::new(lambda, n, r).unwrap();
            let poly = build_flow_polyhedron(&s, &labels, 0, &layout).unwrap();
            let combined = intersect(&[poly]).unwrap();
            let sol = minimize_epsilon(&combined).unwrap();
            prop_assert!(sol.epsilon >= -1e-12);
            let x = sol.to_vector(&layout).unwrap();
            for c in &combined.constraints {
                prop_assert!(c.satisfied_by(&x, FEASIBILITY_TOL));
            }
        }
    }
}
