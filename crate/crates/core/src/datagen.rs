//! Benchmark generation: simulate hybrid models with known dynamics and
//! sample the trajectories as [`TimeSeries`].
//!
//! Models are products of independent one-dimensional components, each a
//! small automaton whose modes follow `x' = a*x + b`. The flow inside a
//! mode is evaluated in closed form; switching times are located by
//! bisection. [`thermostat_family`] builds the scalable heating benchmark,
//! and [`simulate_lha`] plays back a synthesized automaton for qualitative
//! checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::automaton::{AutomatonError, Lha};
use crate::timeseries::{TimeSeries, TimeSeriesError};

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("model has no components")]
    NoComponents,
    #[error("component {0} has no modes")]
    NoModes(usize),
    #[error("component {component}, mode {mode}: bad dynamics or invariant")]
    BadMode { component: usize, mode: usize },
    #[error("component {component}: initial mode {mode} does not exist")]
    BadInitialMode { component: usize, mode: usize },
    #[error("component {component}: initial value {value} is outside the initial invariant")]
    InitialOutsideInvariant { component: usize, value: f64 },
    #[error("component {component}, switch {switch}: bad mode index or guard")]
    BadSwitch { component: usize, switch: usize },
    #[error("component {component}, switch {switch}: guard misses the source invariant")]
    GuardOutsideInvariant { component: usize, switch: usize },
    #[error("duration must be positive and finite, got {0}")]
    BadDuration(f64),
    #[error("need at least two sample stamps, got {0}")]
    TooFewStamps(usize),
    #[error("sample stamp {t} outside [0, {duration}]")]
    StampOutOfRange { t: f64, duration: f64 },
    #[error("sample stamps must be strictly increasing")]
    StampsNotIncreasing,
    #[error("simulation deadlocked at t = {time} in state {state:?}")]
    Deadlock {
        time: f64,
        state: Vec<f64>,
        /// Samples taken before the deadlock; absent when fewer than two
        /// stamps fit.
        partial: Option<TimeSeries>,
    },
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error(transparent)]
    TimeSeries(#[from] TimeSeriesError),
}

/// One mode of a one-dimensional component: `x' = a*x + b` while
/// `x` stays in `[invariant_lo, invariant_hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMode {
    pub a: f64,
    pub b: f64,
    pub invariant_lo: f64,
    pub invariant_hi: f64,
}

/// A mode change, possible while `x` is inside the guard band.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSwitch {
    pub from: usize,
    pub to: usize,
    pub guard_lo: f64,
    pub guard_hi: f64,
}

/// A one-dimensional hybrid automaton driving one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridComponent {
    pub modes: Vec<AffineMode>,
    pub switches: Vec<ModeSwitch>,
    pub initial_mode: usize,
    pub initial_value: f64,
}

/// Independent components running in parallel; coordinate `c` of the
/// product state is component `c`'s value.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineHybridModel {
    pub components: Vec<HybridComponent>,
}

impl AffineHybridModel {
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.components.is_empty() {
            return Err(DatagenError::NoComponents);
        }
        for (c, comp) in self.components.iter().enumerate() {
            if comp.modes.is_empty() {
                return Err(DatagenError::NoModes(c));
            }
            for (m, mode) in comp.modes.iter().enumerate() {
                let finite = mode.a.is_finite()
                    && mode.b.is_finite()
                    && mode.invariant_lo.is_finite()
                    && mode.invariant_hi.is_finite();
                if !finite || mode.invariant_lo > mode.invariant_hi {
                    return Err(DatagenError::BadMode {
                        component: c,
                        mode: m,
                    });
                }
            }
            if comp.initial_mode >= comp.modes.len() {
                return Err(DatagenError::BadInitialMode {
                    component: c,
                    mode: comp.initial_mode,
                });
            }
            let init = &comp.modes[comp.initial_mode];
            if comp.initial_value < init.invariant_lo || comp.initial_value > init.invariant_hi {
                return Err(DatagenError::InitialOutsideInvariant {
                    component: c,
                    value: comp.initial_value,
                });
            }
            for (s, sw) in comp.switches.iter().enumerate() {
                if sw.from >= comp.modes.len()
                    || sw.to >= comp.modes.len()
                    || !sw.guard_lo.is_finite()
                    || !sw.guard_hi.is_finite()
                    || sw.guard_lo > sw.guard_hi
                {
                    return Err(DatagenError::BadSwitch {
                        component: c,
                        switch: s,
                    });
                }
                let src = &comp.modes[sw.from];
                if sw.guard_hi < src.invariant_lo || sw.guard_lo > src.invariant_hi {
                    return Err(DatagenError::GuardOutsideInvariant {
                        component: c,
                        switch: s,
                    });
                }
            }
        }
        Ok(())
    }
}

/// How [`simulate`] turns a trajectory into samples.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplingSpec {
    /// Use exactly these stamps; must be strictly increasing within
    /// `[0, duration]`.
    Explicit(Vec<f64>),
    /// `count` evenly spaced stamps over `[0, duration]`, both endpoints
    /// included.
    Uniform { count: usize },
    /// Both endpoints, every switch time, and `fill_count` extra seeded
    /// stamps.
    SwitchPoints { fill_count: usize },
}

/// A mode change that happened during a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchEvent {
    pub component: usize,
    pub time: f64,
    pub from: usize,
    pub to: usize,
    /// The coordinate's value at the jump.
    pub value: f64,
}

/// Absolute time tolerance of the bisection that locates crossings.
const EVENT_TOL: f64 = 1e-9;

/// Value of `x' = a*x + b` started at `x0`, `dt` later.
fn affine_value(a: f64, b: f64, x0: f64, dt: f64) -> f64 {
    if a == 0.0 {
        x0 + b * dt
    } else {
        let equilibrium = -b / a;
        equilibrium + (x0 - equilibrium) * (a * dt).exp()
    }
}

/// Earliest `t` in `[t0, t1]` with the trajectory at `level`, to
/// [`EVENT_TOL`]; `None` when the level is not reached. The dynamics are
/// monotone in time, so a sign check on the ends is conclusive.
fn hit_time(a: f64, b: f64, x0: f64, t0: f64, t1: f64, level: f64) -> Option<f64> {
    let at = |t: f64| affine_value(a, b, x0, t - t0);
    let d0 = at(t0) - level;
    if d0 == 0.0 {
        return Some(t0);
    }
    let d1 = at(t1) - level;
    if d0.signum() == d1.signum() && d1 != 0.0 {
        return None;
    }
    let (mut lo, mut hi) = (t0, t1);
    while hi - lo > EVENT_TOL {
        let mid = 0.5 * (lo + hi);
        if (at(mid) - level).signum() == d0.signum() && at(mid) != level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// One dwell of a component's trajectory.
#[derive(Debug, Clone)]
struct Dwell {
    start: f64,
    mode: usize,
    value: f64,
}

/// A component's full simulated trajectory: dwells plus where it stopped.
#[derive(Debug, Clone)]
struct ComponentRun {
    dwells: Vec<Dwell>,
    /// Time the trajectory is defined up to.
    end: f64,
    /// Set when the invariant boundary was reached with no enabled switch.
    deadlock: Option<f64>,
    events: Vec<SwitchEvent>,
}

impl ComponentRun {
    fn value_at(&self, comp: &HybridComponent, t: f64) -> f64 {
        let idx = match self
            .dwells
            .binary_search_by(|d| d.start.partial_cmp(&t).unwrap())
        {
            Ok(exact) => exact,
            Err(ins) => ins - 1,
        };
        let d = &self.dwells[idx];
        let mode = &comp.modes[d.mode];
        affine_value(mode.a, mode.b, d.value, t - d.start)
    }
}

fn simulate_component(
    component_index: usize,
    comp: &HybridComponent,
    duration: f64,
    rng: &mut ChaCha8Rng,
) -> ComponentRun {
    let mut run = ComponentRun {
        dwells: vec![Dwell {
            start: 0.0,
            mode: comp.initial_mode,
            value: comp.initial_value,
        }],
        end: duration,
        deadlock: None,
        events: Vec::new(),
    };
    loop {
        if run.dwells.len() > 100_000 {
            // livelock guard: a model can cascade zero-time switches
            let t = run.dwells.last().unwrap().start;
            run.end = t;
            run.deadlock = Some(t);
            return run;
        }
        let here = run.dwells.last().unwrap().clone();
        let mode = &comp.modes[here.mode];
        let at = |t: f64| affine_value(mode.a, mode.b, here.value, t - here.start);
        // Time the invariant boundary stops this dwell, if it does. The
        // derivative's sign never flips inside a mode, so only the
        // boundary in the direction of travel matters.
        let deriv = mode.a * here.value + mode.b;
        let exit = if deriv > 0.0 {
            if here.value >= mode.invariant_hi {
                here.start
            } else {
                hit_time(
                    mode.a,
                    mode.b,
                    here.value,
                    here.start,
                    duration,
                    mode.invariant_hi,
                )
                .unwrap_or(f64::INFINITY)
            }
        } else if deriv < 0.0 {
            if here.value <= mode.invariant_lo {
                here.start
            } else {
                hit_time(
                    mode.a,
                    mode.b,
                    here.value,
                    here.start,
                    duration,
                    mode.invariant_lo,
                )
                .unwrap_or(f64::INFINITY)
            }
        } else {
            f64::INFINITY
        };
        let horizon = exit.min(duration);

        // Window [enable, leave] of each switch within the horizon.
        let mut windows: Vec<(usize, f64, f64)> = Vec::new();
        for (s, sw) in comp.switches.iter().enumerate() {
            if sw.from != here.mode {
                continue;
            }
            let x_now = here.value;
            let enable = if x_now >= sw.guard_lo && x_now <= sw.guard_hi {
                Some(here.start)
            } else if x_now < sw.guard_lo {
                hit_time(mode.a, mode.b, x_now, here.start, horizon, sw.guard_lo)
            } else {
                hit_time(mode.a, mode.b, x_now, here.start, horizon, sw.guard_hi)
            };
            let Some(enable) = enable else { continue };
            if enable > horizon {
                continue;
            }
            // The far end of the band, in the direction of travel, caps
            // the window; staying inside the band leaves it open.
            let leave = [sw.guard_lo, sw.guard_hi]
                .iter()
                .filter_map(|lvl| hit_time(mode.a, mode.b, at(enable), enable, horizon, *lvl))
                .filter(|t| *t > enable)
                .fold(horizon, f64::min);
            windows.push((s, enable, leave));
        }

        if windows.is_empty() {
            if exit <= duration {
                // boundary reached, nothing can fire
                run.end = exit;
                run.deadlock = Some(exit);
            }
            return run;
        }

        // One switch fires: chosen uniformly among the reachable ones, at
        // a time drawn uniformly from its window.
        let (s, enable, leave) = windows[rng.random_range(0..windows.len())];
        let sw = &comp.switches[s];
        let tau = enable + rng.random::<f64>() * (leave - enable);
        let value = at(tau);
        run.events.push(SwitchEvent {
            component: component_index,
            time: tau,
            from: sw.from,
            to: sw.to,
            value,
        });
        run.dwells.push(Dwell {
            start: tau,
            mode: sw.to,
            value,
        });
        if tau >= duration {
            return run;
        }
    }
}

/// Simulates the product model and samples it per `sampling`.
///
/// Deterministic for a fixed seed. When a component reaches its invariant
/// boundary with no switch enabled, the run is cut at that time and
/// reported as [`DatagenError::Deadlock`], carrying the samples collected
/// up to the cut.
pub fn simulate(
    model: &AffineHybridModel,
    duration: f64,
    seed: u64,
    sampling: &SamplingSpec,
) -> Result<TimeSeries, DatagenError> {
    let (series, _) = simulate_traced(model, duration, seed, sampling)?;
    Ok(series)
}

/// [`simulate`] plus the list of mode changes that occurred.
pub fn simulate_traced(
    model: &AffineHybridModel,
    duration: f64,
    seed: u64,
    sampling: &SamplingSpec,
) -> Result<(TimeSeries, Vec<SwitchEvent>), DatagenError> {
    model.validate()?;
    if !duration.is_finite() || duration <= 0.0 {
        return Err(DatagenError::BadDuration(duration));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let runs: Vec<ComponentRun> = model
        .components
        .iter()
        .enumerate()
        .map(|(c, comp)| simulate_component(c, comp, duration, &mut rng))
        .collect();

    let mut stamps = match sampling {
        SamplingSpec::Explicit(ts) => {
            if ts.len() < 2 {
                return Err(DatagenError::TooFewStamps(ts.len()));
            }
            for (k, t) in ts.iter().enumerate() {
                if !t.is_finite() || *t < 0.0 || *t > duration {
                    return Err(DatagenError::StampOutOfRange { t: *t, duration });
                }
                if k > 0 && *t <= ts[k - 1] {
                    return Err(DatagenError::StampsNotIncreasing);
                }
            }
            ts.clone()
        }
        SamplingSpec::Uniform { count } => {
            if *count < 2 {
                return Err(DatagenError::TooFewStamps(*count));
            }
            (0..*count)
                .map(|k| duration * k as f64 / (*count as f64 - 1.0))
                .collect()
        }
        SamplingSpec::SwitchPoints { fill_count } => {
            let mut ts = vec![0.0, duration];
            for run in &runs {
                ts.extend(run.events.iter().map(|e| e.time));
            }
            for _ in 0..*fill_count {
                ts.push(rng.random::<f64>() * duration);
            }
            ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            if ts.len() < 2 {
                return Err(DatagenError::TooFewStamps(ts.len()));
            }
            ts
        }
    };

    let cut = runs
        .iter()
        .filter_map(|r| r.deadlock)
        .fold(f64::INFINITY, f64::min);
    let sample = |t: f64| -> Vec<f64> {
        model
            .components
            .iter()
            .zip(&runs)
            .map(|(comp, run)| run.value_at(comp, t))
            .collect()
    };
    if cut.is_finite() {
        stamps.retain(|t| *t <= cut);
        let partial = if stamps.len() >= 2 {
            let points = stamps.iter().map(|t| sample(*t)).collect();
            Some(TimeSeries::new(format!("sim{seed}"), stamps, points)?)
        } else {
            None
        };
        return Err(DatagenError::Deadlock {
            time: cut,
            state: sample(cut),
            partial,
        });
    }

    let points = stamps.iter().map(|t| sample(*t)).collect();
    let mut events: Vec<SwitchEvent> = runs.into_iter().flat_map(|r| r.events).collect();
    events.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
    Ok((
        TimeSeries::new(format!("sim{seed}"), stamps, points)?,
        events,
    ))
}

/// `n` independent heater coordinates. Each one heats towards 80 with
/// `x' = -0.5x + 40` until it must switch in the band `[74.5, 75]`, then
/// cools towards 60 with `x' = -0.5x + 30` until the band `[65, 65.5]`
/// sends it back. All coordinates start heating at 68.
pub fn thermostat_family(n: usize) -> AffineHybridModel {
    let component = HybridComponent {
        modes: vec![
            AffineMode {
                a: -0.5,
                b: 40.0,
                invariant_lo: 0.0,
                invariant_hi: 75.0,
            },
            AffineMode {
                a: -0.5,
                b: 30.0,
                invariant_lo: 65.0,
                invariant_hi: 200.0,
            },
        ],
        switches: vec![
            ModeSwitch {
                from: 0,
                to: 1,
                guard_lo: 74.5,
                guard_hi: 75.0,
            },
            ModeSwitch {
                from: 1,
                to: 0,
                guard_lo: 65.0,
                guard_hi: 65.5,
            },
        ],
        initial_mode: 0,
        initial_value: 68.0,
    };
    AffineHybridModel {
        components: vec![component; n],
    }
}

/// Number of integration steps [`simulate_lha`] takes over its duration.
const LHA_STEPS: usize = 1000;

/// Chance per step to take an enabled transition before it is forced.
const LHA_SWITCH_PROBABILITY: f64 = 0.05;

/// Plays back a synthesized automaton with its constant flows.
///
/// Starts uniformly inside the invariant of the lowest-numbered location
/// and integrates with a fixed step of `duration / 1000`. At every step an
/// enabled transition fires with probability 0.05; a step that would leave
/// the invariant forces one. If none is enabled at that point the series
/// is truncated there. One sample per step; deterministic per seed.
pub fn simulate_lha(lha: &Lha, duration: f64, seed: u64) -> Result<TimeSeries, DatagenError> {
    if !duration.is_finite() || duration <= 0.0 {
        return Err(DatagenError::BadDuration(duration));
    }
    lha.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut location = *lha
        .structure
        .locations
        .first()
        .ok_or(AutomatonError::UnknownLocation(0))?;
    let start_box = lha.invariant(location)?;
    let mut state: Vec<f64> = (0..lha.dim)
        .map(|c| {
            let (lo, hi) = (start_box.lo()[c], start_box.hi()[c]);
            if lo == hi {
                lo
            } else {
                lo + rng.random::<f64>() * (hi - lo)
            }
        })
        .collect();

    let step = duration / LHA_STEPS as f64;
    let mut times = vec![0.0];
    let mut points = vec![state.clone()];
    for k in 1..=LHA_STEPS {
        let enabled: Vec<usize> = lha
            .structure
            .edges
            .iter()
            .enumerate()
            .filter(|(_, (from, to))| {
                *from == location
                    && lha.guards[&(*from, *to)].contains(&state, 0.0)
                    && lha.invariants[to].contains(&state, 0.0)
            })
            .map(|(idx, _)| idx)
            .collect();
        let advance = |loc: usize| -> Result<Vec<f64>, DatagenError> {
            let flow = lha.flow(loc)?;
            Ok(state.iter().zip(flow).map(|(x, m)| x + step * m).collect())
        };
        let mut next = advance(location)?;
        let forced = !lha.invariant(location)?.contains(&next, 0.0);
        if !enabled.is_empty() && (forced || rng.random::<f64>() < LHA_SWITCH_PROBABILITY) {
            // jumps keep the continuous state and take no time; the rest
            // of the step follows the new location's flow
            let pick = enabled[rng.random_range(0..enabled.len())];
            location = lha.structure.edges[pick].1;
            next = advance(location)?;
            if !lha.invariant(location)?.contains(&next, 0.0) {
                break;
            }
        } else if forced {
            break;
        }
        state = next;
        times.push(k as f64 * step);
        points.push(state.clone());
    }
    Ok(TimeSeries::new(format!("lha{seed}"), times, points)?)
}
