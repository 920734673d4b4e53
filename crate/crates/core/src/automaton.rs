//! Hybrid-automaton model, induced executions, and the synthesis pipeline.
//!
//! A linear hybrid automaton here has a constant flow per location and
//! axis-aligned boxes for invariants and guards. [`synthesize`] ties the
//! crate together: it labels the pieces of every series
//! ([`crate::segmentation::assign_locations`]), solves for slopes, initial
//! states and the minimal tube radius
//! ([`crate::flowpoly::minimize_epsilon`]), induces one [`Execution`] per
//! series, hulls the automaton's boxes from the data, and re-checks its own
//! output before returning it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::flowpoly::{
    build_flow_polyhedron, intersect, minimize_epsilon, FlowPolyError, FlowPolyhedron,
    LinearConstraint, VariableLayout,
};
use crate::segmentation::{
    assign_locations, CostRow, PieceMapping, SegmentationConfig, SegmentationError,
};
use crate::timeseries::{PwlFunction, TimeSeries, TimeSeriesError};

#[derive(Debug, Error)]
pub enum AutomatonError {
    #[error("box needs at least one coordinate")]
    EmptyBox,
    #[error("interval {lo}..{hi} at coordinate {coord} is inverted")]
    BadInterval { coord: usize, lo: f64, hi: f64 },
    #[error("bound is not finite at coordinate {0}")]
    BoundNotFinite(usize),
    #[error("mixed dimensions: {left} vs {right}")]
    MixedDimensions { left: usize, right: usize },
    #[error("cannot hull zero points")]
    EmptyHull,
    #[error("negative bloat radius {0}")]
    NegativeBloat(f64),
    #[error("unknown location label {0}")]
    UnknownLocation(usize),
    #[error("location {0} has no flow")]
    MissingFlow(usize),
    #[error("location {0} has no invariant")]
    MissingInvariant(usize),
    #[error("edge ({0}, {1}) has no guard")]
    MissingGuard(usize, usize),
    #[error("guard of edge ({0}, {1}) misses an endpoint invariant")]
    GuardDisjoint(usize, usize),
    #[error("got {got} labels for {expected} pieces of series {id}")]
    LabelCountMismatch {
        id: String,
        got: usize,
        expected: usize,
    },
    #[error("label {label} out of range for {lambda} locations")]
    LabelOutOfRange { label: usize, lambda: usize },
    #[error("expected one label row per series: {got} rows for {expected} series")]
    SeriesCountMismatch { got: usize, expected: usize },
    #[error("execution needs at least one step")]
    EmptyExecution,
    #[error("execution has {locations} locations, {points} points and {dwells} dwells")]
    MalformedExecution {
        locations: usize,
        points: usize,
        dwells: usize,
    },
    #[error("dwell {dwell} at step {step} is negative or not finite")]
    BadDwell { step: usize, dwell: f64 },
    #[error("edge ({0}, {1}) has no witness point")]
    EmptyGuardHull(usize, usize),
    #[error("self-check failed for series {id}: {detail}")]
    SelfCheck { id: String, detail: String },
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
    #[error(transparent)]
    FlowPoly(#[from] FlowPolyError),
    #[error(transparent)]
    TimeSeries(#[from] TimeSeriesError),
}

/// An axis-aligned box: one closed interval per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl IntervalBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, AutomatonError> {
        if lo.len() != hi.len() {
            return Err(AutomatonError::MixedDimensions {
                left: lo.len(),
                right: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(AutomatonError::EmptyBox);
        }
        for (c, (a, b)) in lo.iter().zip(&hi).enumerate() {
            if !a.is_finite() || !b.is_finite() {
                return Err(AutomatonError::BoundNotFinite(c));
            }
            if a > b {
                return Err(AutomatonError::BadInterval {
                    coord: c,
                    lo: *a,
                    hi: *b,
                });
            }
        }
        Ok(IntervalBox { lo, hi })
    }

    /// Smallest box containing every given point.
    pub fn hull<'a>(points: impl IntoIterator<Item = &'a [f64]>) -> Result<Self, AutomatonError> {
        let mut iter = points.into_iter();
        let first = iter.next().ok_or(AutomatonError::EmptyHull)?;
        let mut lo = first.to_vec();
        let mut hi = first.to_vec();
        for p in iter {
            if p.len() != lo.len() {
                return Err(AutomatonError::MixedDimensions {
                    left: p.len(),
                    right: lo.len(),
                });
            }
            for c in 0..lo.len() {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        }
        IntervalBox::new(lo, hi)
    }

    /// The box widened by `radius` on every side.
    pub fn bloat(&self, radius: f64) -> Result<Self, AutomatonError> {
        if !radius.is_finite() || radius < 0.0 {
            return Err(AutomatonError::NegativeBloat(radius));
        }
        Ok(IntervalBox {
            lo: self.lo.iter().map(|a| a - radius).collect(),
            hi: self.hi.iter().map(|b| b + radius).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// Whether `point` lies inside the box widened by `tol` on every side.
    pub fn contains(&self, point: &[f64], tol: f64) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .enumerate()
                .all(|(c, x)| self.lo[c] - tol <= *x && *x <= self.hi[c] + tol)
    }

    pub fn intersects(&self, other: &IntervalBox) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|c| self.lo[c] <= other.hi[c] && other.lo[c] <= self.hi[c])
    }
}

/// Location labels plus the directed edges between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteStructure {
    /// Sorted, deduplicated.
    pub locations: Vec<usize>,
    /// Sorted, deduplicated ordered pairs; self-pairs are allowed.
    pub edges: Vec<(usize, usize)>,
}

impl DiscreteStructure {
    pub fn has_location(&self, location: usize) -> bool {
        self.locations.binary_search(&location).is_ok()
    }

    pub fn has_edge(&self, source: usize, target: usize) -> bool {
        self.edges.binary_search(&(source, target)).is_ok()
    }
}

/// One transition per consecutive piece pair of every series, self-pairs
/// included, on the locations the mapping actually uses.
pub fn induce_discrete_structure(mapping: &PieceMapping) -> DiscreteStructure {
    let mut locations = BTreeSet::new();
    let mut edges = BTreeSet::new();
    for labels in &mapping.labels {
        locations.extend(labels.iter().copied());
        for w in labels.windows(2) {
            edges.insert((w[0], w[1]));
        }
    }
    DiscreteStructure {
        locations: locations.into_iter().collect(),
        edges: edges.into_iter().collect(),
    }
}

/// A linear hybrid automaton: constant flow, invariant box and guard boxes
/// over a [`DiscreteStructure`].
#[derive(Debug, Clone, PartialEq)]
pub struct Lha {
    pub dim: usize,
    pub structure: DiscreteStructure,
    /// Slope vector per location.
    pub flows: BTreeMap<usize, Vec<f64>>,
    pub invariants: BTreeMap<usize, IntervalBox>,
    pub guards: BTreeMap<(usize, usize), IntervalBox>,
}

impl Lha {
    pub fn flow(&self, location: usize) -> Result<&[f64], AutomatonError> {
        self.flows
            .get(&location)
            .map(Vec::as_slice)
            .ok_or(AutomatonError::MissingFlow(location))
    }

    pub fn invariant(&self, location: usize) -> Result<&IntervalBox, AutomatonError> {
        self.invariants
            .get(&location)
            .ok_or(AutomatonError::MissingInvariant(location))
    }

    pub fn guard(&self, source: usize, target: usize) -> Result<&IntervalBox, AutomatonError> {
        self.guards
            .get(&(source, target))
            .ok_or(AutomatonError::MissingGuard(source, target))
    }

    /// Checks that flows, invariants and guards cover the structure with
    /// consistent dimensions and that every guard meets both endpoint
    /// invariants.
    pub fn validate(&self) -> Result<(), AutomatonError> {
        for l in &self.structure.locations {
            let flow = self.flow(*l)?;
            if flow.len() != self.dim {
                return Err(AutomatonError::MixedDimensions {
                    left: flow.len(),
                    right: self.dim,
                });
            }
            let inv = self.invariant(*l)?;
            if inv.dim() != self.dim {
                return Err(AutomatonError::MixedDimensions {
                    left: inv.dim(),
                    right: self.dim,
                });
            }
        }
        for (source, target) in &self.structure.edges {
            if !self.structure.has_location(*source) {
                return Err(AutomatonError::UnknownLocation(*source));
            }
            if !self.structure.has_location(*target) {
                return Err(AutomatonError::UnknownLocation(*target));
            }
            let guard = self.guard(*source, *target)?;
            if guard.dim() != self.dim {
                return Err(AutomatonError::MixedDimensions {
                    left: guard.dim(),
                    right: self.dim,
                });
            }
            if !guard.intersects(self.invariant(*source)?)
                || !guard.intersects(self.invariant(*target)?)
            {
                return Err(AutomatonError::GuardDisjoint(*source, *target));
            }
        }
        Ok(())
    }
}

/// One run of an automaton: where it was, from which state, for how long.
///
/// Jumps keep the continuous state, so the end point of a step is the
/// start point of the next; `points` holds the `steps + 1` states
/// including the final one.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    start_time: f64,
    locations: Vec<usize>,
    points: Vec<Vec<f64>>,
    dwells: Vec<f64>,
}

impl Execution {
    pub fn new(
        start_time: f64,
        locations: Vec<usize>,
        points: Vec<Vec<f64>>,
        dwells: Vec<f64>,
    ) -> Result<Self, AutomatonError> {
        if locations.is_empty() {
            return Err(AutomatonError::EmptyExecution);
        }
        if points.len() != locations.len() + 1 || dwells.len() != locations.len() {
            return Err(AutomatonError::MalformedExecution {
                locations: locations.len(),
                points: points.len(),
                dwells: dwells.len(),
            });
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(AutomatonError::EmptyBox);
        }
        for p in &points {
            if p.len() != dim {
                return Err(AutomatonError::MixedDimensions {
                    left: p.len(),
                    right: dim,
                });
            }
        }
        for (k, d) in dwells.iter().enumerate() {
            if !d.is_finite() || *d < 0.0 {
                return Err(AutomatonError::BadDwell { step: k, dwell: *d });
            }
        }
        Ok(Execution {
            start_time,
            locations,
            points,
            dwells,
        })
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + self.dwells.iter().sum::<f64>()
    }

    pub fn num_steps(&self) -> usize {
        self.locations.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn locations(&self) -> &[usize] {
        &self.locations
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn dwells(&self) -> &[f64] {
        &self.dwells
    }

    /// Jump times: the cumulative dwell sums, starting at `start_time`.
    pub fn times(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dwells.len() + 1);
        let mut t = self.start_time;
        out.push(t);
        for d in &self.dwells {
            t += d;
            out.push(t);
        }
        out
    }

    /// Projection to the continuous component.
    ///
    /// Needs strictly positive dwells; a zero-dwell step has no extent in
    /// time and cannot be represented as a function graph.
    pub fn projection(&self) -> Result<PwlFunction, TimeSeriesError> {
        PwlFunction::through_points(&self.times(), &self.points)
    }

    /// Collapses runs of consecutive steps that share a location into one
    /// step each, summing dwells. The continuous path is unchanged when
    /// the merged steps follow one constant flow.
    pub fn merge_consecutive(&self) -> Execution {
        let mut locations = vec![self.locations[0]];
        let mut points = vec![self.points[0].clone()];
        let mut dwells = vec![self.dwells[0]];
        for k in 1..self.locations.len() {
            if self.locations[k] == *locations.last().unwrap() {
                *dwells.last_mut().unwrap() += self.dwells[k];
            } else {
                locations.push(self.locations[k]);
                points.push(self.points[k].clone());
                dwells.push(self.dwells[k]);
            }
        }
        points.push(self.points.last().unwrap().clone());
        Execution {
            start_time: self.start_time,
            locations,
            points,
            dwells,
        }
    }
}

/// The execution that starts at `x0` when the series starts and follows
/// `slopes[labels[k]]` over the k-th piece.
pub fn induce_execution(
    s: &TimeSeries,
    labels: &[usize],
    slopes: &[Vec<f64>],
    x0: &[f64],
) -> Result<Execution, AutomatonError> {
    if labels.len() != s.num_pieces() {
        return Err(AutomatonError::LabelCountMismatch {
            id: s.id().to_string(),
            got: labels.len(),
            expected: s.num_pieces(),
        });
    }
    if x0.len() != s.dim() {
        return Err(AutomatonError::MixedDimensions {
            left: x0.len(),
            right: s.dim(),
        });
    }
    let mut points = Vec::with_capacity(labels.len() + 1);
    points.push(x0.to_vec());
    let dwells = s.piece_durations();
    for (k, label) in labels.iter().enumerate() {
        let slope = slopes.get(*label).ok_or(AutomatonError::LabelOutOfRange {
            label: *label,
            lambda: slopes.len(),
        })?;
        if slope.len() != s.dim() {
            return Err(AutomatonError::MixedDimensions {
                left: slope.len(),
                right: s.dim(),
            });
        }
        let prev = points.last().unwrap();
        let next = prev
            .iter()
            .zip(slope)
            .map(|(x, m)| x + dwells[k] * m)
            .collect();
        points.push(next);
    }
    Execution::new(s.start_time(), labels.to_vec(), points, dwells)
}

/// Hulls the automaton's boxes from the data points.
///
/// A data point is associated with a location when its preceding or its
/// succeeding piece carries that label; the location's invariant is the
/// hull of its associated points, bloated by `epsilon`. The guard of an
/// edge is the bloated hull of the interior points where that label change
/// happens.
pub fn build_lha(
    series: &[TimeSeries],
    mapping: &PieceMapping,
    slopes: &[Vec<f64>],
    epsilon: f64,
) -> Result<Lha, AutomatonError> {
    if mapping.labels.len() != series.len() {
        return Err(AutomatonError::SeriesCountMismatch {
            got: mapping.labels.len(),
            expected: series.len(),
        });
    }
    let dim = series.first().map(|s| s.dim()).ok_or(AutomatonError::EmptyHull)?;
    for (s, labels) in series.iter().zip(&mapping.labels) {
        if s.dim() != dim {
            return Err(AutomatonError::MixedDimensions {
                left: s.dim(),
                right: dim,
            });
        }
        if labels.len() != s.num_pieces() {
            return Err(AutomatonError::LabelCountMismatch {
                id: s.id().to_string(),
                got: labels.len(),
                expected: s.num_pieces(),
            });
        }
        for l in labels {
            if *l >= slopes.len() {
                return Err(AutomatonError::LabelOutOfRange {
                    label: *l,
                    lambda: slopes.len(),
                });
            }
        }
    }
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(AutomatonError::NegativeBloat(epsilon));
    }

    let structure = induce_discrete_structure(mapping);
    let mut invariant_points: BTreeMap<usize, Vec<&[f64]>> = BTreeMap::new();
    let mut guard_points: BTreeMap<(usize, usize), Vec<&[f64]>> = BTreeMap::new();
    for (s, labels) in series.iter().zip(&mapping.labels) {
        for (k, q) in s.points().iter().enumerate() {
            // Piece k runs from point k to point k+1.
            if k < labels.len() {
                invariant_points.entry(labels[k]).or_default().push(q);
            }
            if k > 0 {
                invariant_points.entry(labels[k - 1]).or_default().push(q);
                if k < labels.len() {
                    guard_points
                        .entry((labels[k - 1], labels[k]))
                        .or_default()
                        .push(q);
                }
            }
        }
    }

    let mut flows = BTreeMap::new();
    let mut invariants = BTreeMap::new();
    for l in &structure.locations {
        let slope = &slopes[*l];
        if slope.len() != dim {
            return Err(AutomatonError::MixedDimensions {
                left: slope.len(),
                right: dim,
            });
        }
        flows.insert(*l, slope.clone());
        let points = &invariant_points[l];
        invariants.insert(*l, IntervalBox::hull(points.iter().copied())?.bloat(epsilon)?);
    }
    let mut guards = BTreeMap::new();
    for edge in &structure.edges {
        let points = guard_points
            .get(edge)
            .ok_or(AutomatonError::EmptyGuardHull(edge.0, edge.1))?;
        guards.insert(*edge, IntervalBox::hull(points.iter().copied())?.bloat(epsilon)?);
    }

    let lha = Lha {
        dim,
        structure,
        flows,
        invariants,
        guards,
    };
    lha.validate()?;
    Ok(lha)
}

/// Outcome of [`check_epsilon_capture`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaptureReport {
    pub ok: bool,
    /// Largest infinity-norm deviation over the series' stamps.
    pub max_deviation: f64,
    /// Stamp at which the largest deviation occurs.
    pub worst_time: f64,
}

/// Whether the execution's continuous path stays within `epsilon + tol` of
/// the series at every stamp.
pub fn check_epsilon_capture(
    exec: &Execution,
    s: &TimeSeries,
    epsilon: f64,
    tol: f64,
) -> Result<CaptureReport, AutomatonError> {
    let f = exec.projection()?;
    if f.dim() != s.dim() {
        return Err(AutomatonError::MixedDimensions {
            left: f.dim(),
            right: s.dim(),
        });
    }
    let mut max_deviation = f64::NEG_INFINITY;
    let mut worst_time = s.start_time();
    for (t, p) in s.times().iter().zip(s.points()) {
        let v = f.evaluate(*t)?;
        let dev = v
            .iter()
            .zip(p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if dev > max_deviation {
            max_deviation = dev;
            worst_time = *t;
        }
    }
    Ok(CaptureReport {
        ok: max_deviation <= epsilon + tol,
        max_deviation,
        worst_time,
    })
}

/// One way an execution disagrees with an automaton.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    /// A step's displacement is not its dwell times the location's flow.
    Flow { step: usize, deviation: f64 },
    /// A step endpoint leaves the location's invariant.
    Invariant { step: usize, location: usize },
    /// A jump state lies outside the edge's guard.
    Guard {
        jump: usize,
        source: usize,
        target: usize,
    },
    /// A jump between locations that the structure does not connect.
    Edge {
        jump: usize,
        source: usize,
        target: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Flow { step, deviation } => {
                write!(f, "step {step} deviates from its flow by {deviation}")
            }
            Violation::Invariant { step, location } => {
                write!(f, "step {step} leaves the invariant of location {location}")
            }
            Violation::Guard {
                jump,
                source,
                target,
            } => write!(f, "jump {jump} is outside the guard of ({source}, {target})"),
            Violation::Edge {
                jump,
                source,
                target,
            } => write!(f, "jump {jump} uses the missing edge ({source}, {target})"),
        }
    }
}

/// Outcome of [`validate_execution`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

/// Checks an execution against an automaton: each step's displacement is
/// dwell times flow (within `tol`), both step endpoints lie in the
/// invariant, every jump state lies in its edge's guard, and every jump
/// follows an existing edge. Boxes are widened by `tol` for the
/// containment checks. Flows are constant and boxes convex, so checking
/// the step endpoints covers the whole dwell.
pub fn validate_execution(
    lha: &Lha,
    exec: &Execution,
    tol: f64,
) -> Result<ValidationReport, AutomatonError> {
    if exec.dim() != lha.dim {
        return Err(AutomatonError::MixedDimensions {
            left: exec.dim(),
            right: lha.dim,
        });
    }
    for l in exec.locations() {
        if !lha.structure.has_location(*l) {
            return Err(AutomatonError::UnknownLocation(*l));
        }
    }
    let mut violations = Vec::new();
    for (k, location) in exec.locations().iter().enumerate() {
        let flow = lha.flow(*location)?;
        let entry = &exec.points()[k];
        let exit = &exec.points()[k + 1];
        let deviation = (0..lha.dim)
            .map(|c| (exit[c] - entry[c] - exec.dwells()[k] * flow[c]).abs())
            .fold(0.0, f64::max);
        if deviation > tol {
            violations.push(Violation::Flow { step: k, deviation });
        }
        let inv = lha.invariant(*location)?;
        if !inv.contains(entry, tol) || !inv.contains(exit, tol) {
            violations.push(Violation::Invariant {
                step: k,
                location: *location,
            });
        }
    }
    for jump in 1..exec.num_steps() {
        let source = exec.locations()[jump - 1];
        let target = exec.locations()[jump];
        if !lha.structure.has_edge(source, target) {
            violations.push(Violation::Edge {
                jump,
                source,
                target,
            });
            continue;
        }
        if !lha.guard(source, target)?.contains(&exec.points()[jump], tol) {
            violations.push(Violation::Guard {
                jump,
                source,
                target,
            });
        }
    }
    Ok(ValidationReport {
        ok: violations.is_empty(),
        violations,
    })
}

/// The execution of `lha` closest to `s` in worst-case deviation, with
/// the smallest deviation it achieves.
///
/// Each piece of `s` is assigned the location whose flow is nearest to
/// the piece's slope (Euclidean); with the flows fixed by that mapping,
/// only the initial state remains free, and the tube-radius program
/// restricted to this one series finds its best value. The deviation is
/// exact for that assignment, but the assignment itself is a per-piece
/// decode: when two locations fit a piece almost equally well, a
/// different assignment can admit a smaller deviation. The returned
/// execution need not respect invariants or guards; callers judge that
/// separately with [`validate_execution`].
pub fn closest_execution(lha: &Lha, s: &TimeSeries) -> Result<(f64, Execution), AutomatonError> {
    if s.dim() != lha.dim {
        return Err(AutomatonError::MixedDimensions {
            left: s.dim(),
            right: lha.dim,
        });
    }
    let locs = &lha.structure.locations;
    let n = lha.dim;
    let distance2 =
        |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum() };
    let labels: Vec<usize> = s
        .piece_slopes()
        .iter()
        .map(|slope| {
            *locs
                .iter()
                .min_by(|a, b| {
                    distance2(slope, &lha.flows[a]).total_cmp(&distance2(slope, &lha.flows[b]))
                })
                .expect("a validated automaton has locations")
        })
        .collect();
    let index_labels: Vec<usize> = labels
        .iter()
        .map(|l| locs.binary_search(l).expect("label comes from locs"))
        .collect();

    // the one-series polyhedron, with the slope block replaced by the
    // model's flows so only the initial state and the radius remain
    let layout = VariableLayout {
        lambda: locs.len(),
        dim: n,
        num_series: 1,
    };
    let poly = build_flow_polyhedron(s, &index_labels, 0, &layout)?;
    let cut = locs.len() * n;
    let flow_flat: Vec<f64> = locs.iter().flat_map(|l| lha.flows[l].clone()).collect();
    let constraints = poly
        .constraints
        .iter()
        .map(|c| {
            let mut rhs = c.rhs;
            let mut coeffs = Vec::new();
            for &(var, a) in &c.coeffs {
                if var < cut {
                    rhs -= a * flow_flat[var];
                } else {
                    coeffs.push((var - cut, a));
                }
            }
            LinearConstraint { coeffs, rhs }
        })
        .collect();
    let reduced = FlowPolyhedron {
        layout: VariableLayout {
            lambda: 0,
            dim: n,
            num_series: 1,
        },
        constraints,
    };
    let solution = minimize_epsilon(&intersect(&[reduced])?)?;

    let mut by_label = vec![vec![0.0; n]; locs.last().unwrap() + 1];
    for l in locs {
        by_label[*l].clone_from(&lha.flows[l]);
    }
    let exec = induce_execution(s, &labels, &by_label, &solution.initial_states[0])?;
    Ok((solution.epsilon, exec))
}

/// Knobs for [`synthesize`].
#[derive(Debug, Clone, Default)]
pub struct SynthesisOptions {
    /// Fixed number of locations; `None` picks it from the cost table.
    pub num_locations: Option<usize>,
    pub segmentation: SegmentationConfig,
    /// Collapse consecutive same-location steps of the returned
    /// executions.
    pub merge_dwells: bool,
}


/// Tolerance for the post-synthesis capture and validity self-check.
pub const SELF_CHECK_TOL: f64 = 1e-6;

/// Wall-clock milliseconds per pipeline phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseTimings {
    pub segmentation_ms: f64,
    pub polyhedron_ms: f64,
    pub lp_ms: f64,
    pub model_ms: f64,
    pub total_ms: f64,
}

/// What happened during one synthesis run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub num_series: usize,
    pub dim: usize,
    pub num_locations: usize,
    /// What the caller asked for, when fixed explicitly.
    pub requested_locations: Option<usize>,
    pub epsilon: f64,
    /// Slope vector per location.
    pub slopes: Vec<Vec<f64>>,
    /// Initial state per series.
    pub initial_states: Vec<Vec<f64>>,
    /// Cluster-count selection table when the count was chosen
    /// automatically.
    pub cost_table: Option<Vec<CostRow>>,
    pub num_constraints: usize,
    pub num_variables: usize,
    pub timings: PhaseTimings,
    pub warnings: Vec<String>,
}

/// Everything [`synthesize`] returns.
#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub lha: Lha,
    pub epsilon: f64,
    /// One induced execution per input series.
    pub executions: Vec<Execution>,
    pub mapping: PieceMapping,
    pub report: RunReport,
}

/// End-to-end synthesis: label pieces, minimize the tube radius, hull the
/// automaton, induce executions, and verify the result before returning.
///
/// The self-check runs [`check_epsilon_capture`] and
/// [`validate_execution`] on every induced execution with
/// [`SELF_CHECK_TOL`]; a failure is reported as
/// [`AutomatonError::SelfCheck`] rather than returned as a result.
pub fn synthesize(
    series: &[TimeSeries],
    options: &SynthesisOptions,
) -> Result<SynthesisResult, AutomatonError> {
    let t_start = Instant::now();
    let assignment = assign_locations(series, options.num_locations, &options.segmentation)?;
    let segmentation_ms = t_start.elapsed().as_secs_f64() * 1e3;

    let mapping = assignment.mapping;
    let dim = series[0].dim();
    let layout = VariableLayout::new(mapping.lambda, dim, series.len())?;
    let t_poly = Instant::now();
    let mut polyhedra = Vec::with_capacity(series.len());
    for (j, s) in series.iter().enumerate() {
        polyhedra.push(build_flow_polyhedron(s, &mapping.labels[j], j, &layout)?);
    }
    let polyhedron = intersect(&polyhedra)?;
    let polyhedron_ms = t_poly.elapsed().as_secs_f64() * 1e3;

    let t_lp = Instant::now();
    let solution = minimize_epsilon(&polyhedron)?;
    let lp_ms = t_lp.elapsed().as_secs_f64() * 1e3;

    let t_model = Instant::now();
    let lha = build_lha(series, &mapping, &solution.slopes, solution.epsilon)?;
    let mut executions = Vec::with_capacity(series.len());
    for (j, s) in series.iter().enumerate() {
        let exec = induce_execution(
            s,
            &mapping.labels[j],
            &solution.slopes,
            &solution.initial_states[j],
        )?;
        executions.push(if options.merge_dwells {
            exec.merge_consecutive()
        } else {
            exec
        });
    }
    let model_ms = t_model.elapsed().as_secs_f64() * 1e3;

    for (s, exec) in series.iter().zip(&executions) {
        let capture = check_epsilon_capture(exec, s, solution.epsilon, SELF_CHECK_TOL)?;
        if !capture.ok {
            return Err(AutomatonError::SelfCheck {
                id: s.id().to_string(),
                detail: format!(
                    "deviation {} exceeds the radius {}",
                    capture.max_deviation, solution.epsilon
                ),
            });
        }
        let validity = validate_execution(&lha, exec, SELF_CHECK_TOL)?;
        if !validity.ok {
            let detail = validity
                .violations
                .iter()
                .map(Violation::to_string)
                .collect::<Vec<_>>()
                .join("; ");
            return Err(AutomatonError::SelfCheck {
                id: s.id().to_string(),
                detail,
            });
        }
    }

    let mut warnings = Vec::new();
    if let Some(requested) = assignment.requested_lambda {
        if requested > mapping.lambda {
            warnings.push(format!(
                "{} locations requested, only {} distinct slopes available",
                requested, mapping.lambda
            ));
        }
    }
    let unused = mapping.unused_labels();
    if !unused.is_empty() {
        warnings.push(format!(
            "{} of {} locations carry no piece",
            unused.len(),
            mapping.lambda
        ));
    }

    let report = RunReport {
        num_series: series.len(),
        dim,
        num_locations: mapping.lambda,
        requested_locations: assignment.requested_lambda,
        epsilon: solution.epsilon,
        slopes: solution.slopes.clone(),
        initial_states: solution.initial_states.clone(),
        cost_table: assignment.cost_table,
        num_constraints: polyhedron.constraints.len(),
        num_variables: layout.num_vars(),
        timings: PhaseTimings {
            segmentation_ms,
            polyhedron_ms,
            lp_ms,
            model_ms,
            total_ms: t_start.elapsed().as_secs_f64() * 1e3,
        },
        warnings,
    };

    Ok(SynthesisResult {
        lha,
        epsilon: solution.epsilon,
        executions,
        mapping,
        report,
    })
}
