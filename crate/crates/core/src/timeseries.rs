//! Sampled trajectories and the piecewise-linear functions they induce.
//!
//! A [`TimeSeries`] is a strictly increasing sequence of time stamps with an
//! n-dimensional value at each stamp. Connecting consecutive samples yields
//! a piecewise-linear function ([`PwlFunction`]); the slopes of those pieces
//! drive the clustering phase, and the sup-norm [`distance`] between a
//! candidate trajectory and a series defines the tube radius the synthesizer
//! minimizes.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TimeSeriesError {
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("time series `{id}` needs at least two samples, got {got}")]
    TooFewSamples { id: String, got: usize },
    #[error("time series `{id}` has no value columns")]
    ZeroDimension { id: String },
    #[error("time series `{id}`: sample {index} has {got} values, expected {expected}")]
    RaggedSample {
        id: String,
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error(
        "time series `{id}`: time stamps must increase strictly \
         (t[{index}] = {t} after t[{prev_index}] = {prev})"
    )]
    TimeNotIncreasing {
        id: String,
        index: usize,
        t: f64,
        prev_index: usize,
        prev: f64,
    },
    #[error("time series `{id}`: sample {index} contains a non-finite value")]
    NonFinite { id: String, index: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("t = {t} lies outside the domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    #[error("simplification tolerance must be non-negative, got {0}")]
    BadTolerance(f64),
}

/// Slack used when deciding whether a query time still belongs to a domain,
/// so stamps that differ from a breakpoint by float noise are not rejected.
const DOMAIN_SLACK: f64 = 1e-9;

/// A sampled trajectory: strictly increasing time stamps, one point per stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    id: String,
    times: Vec<f64>,
    points: Vec<Vec<f64>>,
}

impl TimeSeries {
    /// Validates and wraps raw samples. Requires at least two samples,
    /// strictly increasing finite stamps, and points of one common
    /// dimension with finite entries.
    pub fn new(
        id: impl Into<String>,
        times: Vec<f64>,
        points: Vec<Vec<f64>>,
    ) -> Result<Self, TimeSeriesError> {
        let id = id.into();
        if times.len() != points.len() {
            return Err(TimeSeriesError::RaggedSample {
                id,
                index: times.len().min(points.len()),
                got: points.len(),
                expected: times.len(),
            });
        }
        if times.len() < 2 {
            return Err(TimeSeriesError::TooFewSamples {
                id,
                got: times.len(),
            });
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(TimeSeriesError::ZeroDimension { id });
        }
        for (k, (t, p)) in times.iter().zip(&points).enumerate() {
            if p.len() != dim {
                return Err(TimeSeriesError::RaggedSample {
                    id,
                    index: k,
                    got: p.len(),
                    expected: dim,
                });
            }
            if !t.is_finite() || p.iter().any(|v| !v.is_finite()) {
                return Err(TimeSeriesError::NonFinite { id, index: k });
            }
            if k > 0 && times[k] <= times[k - 1] {
                return Err(TimeSeriesError::TimeNotIncreasing {
                    id,
                    index: k,
                    t: times[k],
                    prev_index: k - 1,
                    prev: times[k - 1],
                });
            }
        }
        Ok(TimeSeries { id, times, points })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k]
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn num_samples(&self) -> usize {
        self.times.len()
    }

    /// Number of linear pieces between consecutive samples.
    pub fn num_pieces(&self) -> usize {
        self.times.len() - 1
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Duration of each piece, `t[j+1] - t[j]`.
    pub fn piece_durations(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Per-piece slope vectors `(p[j+1] - p[j]) / (t[j+1] - t[j])`.
    pub fn piece_slopes(&self) -> Vec<Vec<f64>> {
        (0..self.num_pieces())
            .map(|j| {
                let dt = self.times[j + 1] - self.times[j];
                self.points[j + 1]
                    .iter()
                    .zip(&self.points[j])
                    .map(|(b, a)| (b - a) / dt)
                    .collect()
            })
            .collect()
    }

    /// The piecewise-linear interpolant through the samples.
    pub fn induced_pwl(&self) -> PwlFunction {
        PwlFunction {
            breakpoints: self.times.clone(),
            values: self.points.clone(),
            slopes: self.piece_slopes(),
        }
    }

    /// Same samples under a new name.
    pub fn with_id(&self, id: impl Into<String>) -> TimeSeries {
        TimeSeries {
            id: id.into(),
            times: self.times.clone(),
            points: self.points.clone(),
        }
    }
}

/// A continuous piecewise-linear function on a closed time interval.
///
/// Stored as breakpoints with the exact value at every breakpoint plus the
/// slope of each piece, so evaluation at a breakpoint reproduces the stored
/// value without accumulation error.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlFunction {
    breakpoints: Vec<f64>,
    values: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
}

impl PwlFunction {
    /// Builds the function that starts at `x0` at time `start_time` and
    /// follows `slope` for `duration` on each piece, in order.
    pub fn from_pieces(
        start_time: f64,
        x0: &[f64],
        pieces: &[(f64, Vec<f64>)],
    ) -> Result<Self, TimeSeriesError> {
        let dim = x0.len();
        if dim == 0 {
            return Err(TimeSeriesError::ZeroDimension {
                id: "<pwl>".into(),
            });
        }
        let mut breakpoints = vec![start_time];
        let mut values = vec![x0.to_vec()];
        let mut slopes = Vec::with_capacity(pieces.len());
        for (k, (duration, slope)) in pieces.iter().enumerate() {
            if slope.len() != dim {
                return Err(TimeSeriesError::DimensionMismatch {
                    left: slope.len(),
                    right: dim,
                });
            }
            if !duration.is_finite() || *duration <= 0.0 {
                return Err(TimeSeriesError::TimeNotIncreasing {
                    id: "<pwl>".into(),
                    index: k + 1,
                    t: breakpoints[k] + duration,
                    prev_index: k,
                    prev: breakpoints[k],
                });
            }
            let prev = values.last().unwrap();
            let next: Vec<f64> = prev
                .iter()
                .zip(slope)
                .map(|(v, m)| v + duration * m)
                .collect();
            breakpoints.push(breakpoints.last().unwrap() + duration);
            values.push(next);
            slopes.push(slope.clone());
        }
        if breakpoints.len() < 2 {
            return Err(TimeSeriesError::TooFewSamples {
                id: "<pwl>".into(),
                got: breakpoints.len(),
            });
        }
        Ok(PwlFunction {
            breakpoints,
            values,
            slopes,
        })
    }

    /// The piecewise-linear interpolant through `values` at `times`.
    pub fn through_points(times: &[f64], values: &[Vec<f64>]) -> Result<Self, TimeSeriesError> {
        Ok(TimeSeries::new("<pwl>", times.to_vec(), values.to_vec())?.induced_pwl())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn slopes(&self) -> &[Vec<f64>] {
        &self.slopes
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn start_time(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// Evaluates the function at `t`. Times within `1e-9` outside the domain
    /// are clamped; anything farther is an error.
    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>, TimeSeriesError> {
        let lo = self.start_time();
        let hi = self.end_time();
        if t < lo - DOMAIN_SLACK || t > hi + DOMAIN_SLACK {
            return Err(TimeSeriesError::OutOfDomain { t, lo, hi });
        }
        let t = t.clamp(lo, hi);
        // Index of the piece containing t; breakpoints get their stored value.
        let idx = match self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&t).unwrap())
        {
            Ok(exact) => return Ok(self.values[exact].clone()),
            Err(ins) => ins - 1,
        };
        let dt = t - self.breakpoints[idx];
        Ok(self.values[idx]
            .iter()
            .zip(&self.slopes[idx])
            .map(|(v, m)| v + dt * m)
            .collect())
    }
}

/// Sup-norm distance between a trajectory and a series: the maximum over the
/// series' stamps of the infinity norm of `f(t) - s(t)`.
///
/// Every stamp of `s` must lie in the domain of `f`.
pub fn distance(f: &PwlFunction, s: &TimeSeries) -> Result<f64, TimeSeriesError> {
    if f.dim() != s.dim() {
        return Err(TimeSeriesError::DimensionMismatch {
            left: f.dim(),
            right: s.dim(),
        });
    }
    let mut worst = 0.0f64;
    for (t, p) in s.times().iter().zip(s.points()) {
        let v = f.evaluate(*t)?;
        for (a, b) in v.iter().zip(p) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// Ramer-Douglas-Peucker simplification.
///
/// Time is treated as an extra coordinate and every coordinate (time
/// included) is affinely normalized to `[0, 1]` over the series' bounding
/// box before distances are measured, so the tolerance is scale-free. A
/// constant coordinate contributes nothing. The first and last samples are
/// always kept; an interior sample survives when its Euclidean distance to
/// the chord of its segment exceeds `tol`.
pub fn simplify_rdp(s: &TimeSeries, tol: f64) -> Result<TimeSeries, TimeSeriesError> {
    if !tol.is_finite() || tol < 0.0 {
        return Err(TimeSeriesError::BadTolerance(tol));
    }
    let n = s.dim();
    // Normalized, time-augmented copies of the samples.
    let mut lo = vec![f64::INFINITY; n + 1];
    let mut hi = vec![f64::NEG_INFINITY; n + 1];
    let augmented: Vec<Vec<f64>> = s
        .times()
        .iter()
        .zip(s.points())
        .map(|(t, p)| {
            let mut a = Vec::with_capacity(n + 1);
            a.push(*t);
            a.extend_from_slice(p);
            a
        })
        .collect();
    for a in &augmented {
        for (c, v) in a.iter().enumerate() {
            lo[c] = lo[c].min(*v);
            hi[c] = hi[c].max(*v);
        }
    }
    let scale: Vec<f64> = lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| if h > l { 1.0 / (h - l) } else { 0.0 })
        .collect();
    let normalized: Vec<Vec<f64>> = augmented
        .iter()
        .map(|a| {
            a.iter()
                .enumerate()
                .map(|(c, v)| (v - lo[c]) * scale[c])
                .collect()
        })
        .collect();

    let keep = rdp_keep(&normalized, tol);
    let times: Vec<f64> = s
        .times()
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(t, _)| *t)
        .collect();
    let points: Vec<Vec<f64>> = s
        .points()
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(p, _)| p.clone())
        .collect();
    TimeSeries::new(s.id(), times, points)
}

/// Recursive split: keep the interior point farthest from the current chord
/// whenever that distance exceeds `tol`, then recurse on both halves.
fn rdp_keep(points: &[Vec<f64>], tol: f64) -> Vec<bool> {
    let mut keep = vec![false; points.len()];
    keep[0] = true;
    *keep.last_mut().unwrap() = true;
    let mut stack = vec![(0usize, points.len() - 1)];
    while let Some((a, b)) = stack.pop() {
        if b - a < 2 {
            continue;
        }
        let mut best = a + 1;
        let mut best_d = -1.0f64;
        for i in a + 1..b {
            let d = point_segment_distance(&points[i], &points[a], &points[b]);
            if d > best_d {
                best_d = d;
                best = i;
            }
        }
        if best_d > tol {
            keep[best] = true;
            stack.push((a, best));
            stack.push((best, b));
        }
    }
    keep
}

/// Euclidean distance from `p` to the segment `[a, b]`.
fn point_segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut ab2 = 0.0;
    let mut ap_ab = 0.0;
    for c in 0..p.len() {
        let d = b[c] - a[c];
        ab2 += d * d;
        ap_ab += (p[c] - a[c]) * d;
    }
    let s = if ab2 > 0.0 {
        (ap_ab / ab2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut dist2 = 0.0;
    for c in 0..p.len() {
        let proj = a[c] + s * (b[c] - a[c]);
        let d = p[c] - proj;
        dist2 += d * d;
    }
    dist2.sqrt()
}

/// Parses series from a CSV file. See [`parse_time_series_str`] for the
/// format; the file stem names the series.
pub fn parse_time_series(path: &Path) -> Result<Vec<TimeSeries>, TimeSeriesError> {
    let content = std::fs::read_to_string(path).map_err(|source| TimeSeriesError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    parse_time_series_str(&name, &content)
}

/// Parses one or more series from CSV text.
///
/// Each block starts with a header `t,x1,...,xn` and holds one decimal row
/// per sample; blank lines separate blocks. A single block is named `name`,
/// multiple blocks `name#1`, `name#2`, ... Errors carry 1-based line
/// numbers.
pub fn parse_time_series_str(
    name: &str,
    content: &str,
) -> Result<Vec<TimeSeries>, TimeSeriesError> {
    let parse_err = |line: usize, message: String| TimeSeriesError::Parse {
        file: name.to_string(),
        line,
        message,
    };

    // Split into blocks of (line_number, line) separated by blank lines.
    let mut blocks: Vec<Vec<(usize, &str)>> = Vec::new();
    let mut current: Vec<(usize, &str)> = Vec::new();
    for (i, raw) in content.lines().enumerate() {
        if raw.trim().is_empty() {
            if !current.is_empty() {
                blocks.push(std::mem::take(&mut current));
            }
        } else {
            current.push((i + 1, raw));
        }
    }
    if !current.is_empty() {
        blocks.push(current);
    }
    if blocks.is_empty() {
        return Err(parse_err(1, "no data found".into()));
    }

    let many = blocks.len() > 1;
    let mut out = Vec::with_capacity(blocks.len());
    for (b, block) in blocks.iter().enumerate() {
        let (header_line, header) = block[0];
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 2 || cols[0] != "t" {
            return Err(parse_err(
                header_line,
                format!("expected header `t,x1,...,xn`, got `{header}`"),
            ));
        }
        let dim = cols.len() - 1;
        let mut times = Vec::with_capacity(block.len() - 1);
        let mut points = Vec::with_capacity(block.len() - 1);
        for (line, raw) in &block[1..] {
            let cells: Vec<&str> = raw.split(',').map(str::trim).collect();
            if cells.len() != dim + 1 {
                return Err(parse_err(
                    *line,
                    format!("expected {} columns, got {}", dim + 1, cells.len()),
                ));
            }
            let mut row = Vec::with_capacity(dim + 1);
            for cell in &cells {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| parse_err(*line, format!("`{cell}` is not a number")))?;
                if !v.is_finite() {
                    return Err(parse_err(*line, format!("`{cell}` is not finite")));
                }
                row.push(v);
            }
            let t = row[0];
            if let Some(prev) = times.last() {
                if t <= *prev {
                    return Err(parse_err(
                        *line,
                        format!("time stamps must increase strictly ({t} after {prev})"),
                    ));
                }
            }
            times.push(t);
            points.push(row[1..].to_vec());
        }
        if times.len() < 2 {
            return Err(parse_err(
                header_line,
                format!("a series needs at least two samples, got {}", times.len()),
            ));
        }
        let id = if many {
            format!("{name}#{}", b + 1)
        } else {
            name.to_string()
        };
        out.push(TimeSeries::new(id, times, points)?);
    }
    Ok(out)
}

/// Renders series in the CSV format accepted by [`parse_time_series_str`]:
/// header `t,x1,...,xn`, one row per sample, blank line between series.
/// Floats use the shortest representation that round-trips.
pub fn render_csv(series: &[TimeSeries]) -> String {
    let mut out = String::new();
    for (i, s) in series.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push('t');
        for c in 1..=s.dim() {
            let _ = write!(out, ",x{c}");
        }
        out.push('\n');
        for (t, p) in s.times().iter().zip(s.points()) {
            let _ = write!(out, "{t}");
            for v in p {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
    }
    out
}

/// Writes series to a CSV file; see [`render_csv`].
pub fn write_csv(series: &[TimeSeries], path: &Path) -> Result<(), TimeSeriesError> {
    std::fs::write(path, render_csv(series)).map_err(|source| TimeSeriesError::Io {
        path: path.display().to_string(),
        source,
    })
}
