//! Explicit integration of vector fields.
//!
//! The default method is the Dormand-Prince 5(4) pair with its quartic
//! dense output; a fixed-step classical RK4 with cubic Hermite
//! interpolation is kept for cross-checks. Auxiliary quadratures
//! ([`Channel`]) are appended to the state and integrated by the same
//! stepper, so they share its error control.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A first-order system `y' = F(t, y)`.
pub trait VectorField {
    fn dim(&self) -> usize;

    fn component_names(&self) -> &[&'static str];

    fn eval(&self, t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()>;

    /// Integrand of an auxiliary quadrature channel at `(t, y)`.
    fn channel_rate(&self, channel: Channel, _t: f64, _y: &[f64]) -> Result<f64> {
        Err(Error::MissingChannel(channel.name()))
    }
}

/// Auxiliary quadratures carried along with the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    /// `T = \int dt / (gamma rho^2)`.
    #[serde(rename = "accum_T")]
    AccumT,
    /// `t(tau) = \int gamma dtau`.
    #[serde(rename = "accum_t_of_tau")]
    TimeOfTau,
    /// `theta = \int J / (gamma rho^2) dt`.
    #[serde(rename = "theta")]
    Theta,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::AccumT => "accum_T",
            Channel::TimeOfTau => "accum_t_of_tau",
            Channel::Theta => "theta",
        }
    }

    /// Column label used in CSV output.
    pub fn column(self) -> &'static str {
        match self {
            Channel::AccumT => "T",
            Channel::TimeOfTau => "t_of_tau",
            Channel::Theta => "theta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Rk45,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step; also the step of the fixed RK4 method.
    pub max_step: f64,
    pub t_end: f64,
    pub sample_dt: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Rk45,
            rtol: 1e-10,
            atol: 1e-12,
            max_step: f64::INFINITY,
            t_end: 10.0,
            sample_dt: 0.1,
            max_steps: 5_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_span(t_end: f64, sample_dt: f64) -> Self {
        IntegratorConfig {
            t_end,
            sample_dt,
            ..Default::default()
        }
    }

    pub fn validate(&self, t0: f64) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidParameter(what));
        if !(self.rtol > 0.0) || !(self.atol > 0.0) {
            return bad(format!(
                "rtol and atol must be positive ({}, {})",
                self.rtol, self.atol
            ));
        }
        if !(self.sample_dt > 0.0 && self.sample_dt.is_finite()) {
            return bad(format!("sample_dt must be positive, got {}", self.sample_dt));
        }
        if !(self.t_end > t0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must exceed t0 = {t0}", self.t_end));
        }
        if !(self.max_step > 0.0) {
            return bad(format!("max_step must be positive, got {}", self.max_step));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Rising,
    Falling,
    Either,
}

/// Zero crossings of one state component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventSpec {
    pub component: usize,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub t: f64,
    pub component: String,
    pub direction: Direction,
}

/// Where the trajectory is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Sampling {
    /// Uniform grid of the independent variable with `cfg.sample_dt`.
    #[default]
    Uniform,
    /// Uniform grid of a monotone channel (starting at 0).
    ChannelGrid { channel: Channel, spacing: f64 },
}

#[derive(Debug, Clone, Default)]
pub struct Probes {
    pub channels: Vec<Channel>,
    pub events: Vec<EventSpec>,
    pub sampling: Sampling,
}

impl Probes {
    pub fn none() -> Self {
        Probes::default()
    }

    pub fn channels(channels: &[Channel]) -> Self {
        Probes {
            channels: channels.to_vec(),
            ..Default::default()
        }
    }

    pub fn with_event(mut self, component: usize, direction: Direction) -> Self {
        self.events.push(EventSpec { component, direction });
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub names: Vec<String>,
    pub t: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub channels: Vec<(Channel, Vec<f64>)>,
    pub events: Vec<EventRecord>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn channel(&self, channel: Channel) -> Option<&[f64]> {
        self.channels
            .iter()
            .find(|(c, _)| *c == channel)
            .map(|(_, v)| v.as_slice())
    }

    pub fn component_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Samples of one state component.
    pub fn component(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.component_index(name)?;
        Some(self.states.iter().map(|s| s[i]).collect())
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        self.states.last().map(|s| s.as_slice())
    }

    fn push(&mut self, t: f64, aug: &[f64], n: usize) {
        self.t.push(t);
        self.states.push(aug[..n].to_vec());
        for (i, (_, vals)) in self.channels.iter_mut().enumerate() {
            vals.push(aug[n + i]);
        }
    }
}

/// A run that stopped early. `partial` holds every sample produced before
/// the failure.
#[derive(Debug, Clone)]
pub struct IntegrationError {
    pub t: f64,
    pub error: Error,
    pub partial: Trajectory,
}

impl fmt::Display for IntegrationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "integration failed at t = {}: {}", self.t, self.error)
    }
}

impl std::error::Error for IntegrationError {}

impl From<IntegrationError> for Error {
    fn from(e: IntegrationError) -> Self {
        Error::Integration {
            t: e.t,
            source: Box::new(e.error),
        }
    }
}

struct Augmented<'a, F: ?Sized> {
    field: &'a F,
    channels: &'a [Channel],
    n: usize,
}

impl<F: VectorField + ?Sized> Augmented<'_, F> {
    fn dim(&self) -> usize {
        self.n + self.channels.len()
    }

    fn eval(&self, t: f64, y: &[f64], dydt: &mut [f64], stats: &mut StepStats) -> Result<()> {
        stats.rhs_evals += 1;
        let n = self.n;
        self.field.eval(t, &y[..n], &mut dydt[..n])?;
        for (i, ch) in self.channels.iter().enumerate() {
            dydt[n + i] = self.field.channel_rate(*ch, t, &y[..n])?;
        }
        if dydt.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite derivative at t = {t}"
            )));
        }
        Ok(())
    }
}

/// Continuous extension over one accepted step `[t_old, t_old + h]`.
enum Dense {
    Dopri {
        t_old: f64,
        h: f64,
        r: [Vec<f64>; 5],
    },
    Hermite {
        t_old: f64,
        h: f64,
        y0: Vec<f64>,
        y1: Vec<f64>,
        f0: Vec<f64>,
        f1: Vec<f64>,
    },
}

impl Dense {
    fn span(&self) -> (f64, f64) {
        match self {
            Dense::Dopri { t_old, h, .. } | Dense::Hermite { t_old, h, .. } => (*t_old, *h),
        }
    }

    fn component(&self, theta: f64, i: usize) -> f64 {
        match self {
            Dense::Dopri { r, .. } => {
                let th1 = 1.0 - theta;
                r[0][i] + theta * (r[1][i] + th1 * (r[2][i] + theta * (r[3][i] + th1 * r[4][i])))
            }
            Dense::Hermite {
                h, y0, y1, f0, f1, ..
            } => {
                let d = y1[i] - y0[i];
                (1.0 - theta) * y0[i]
                    + theta * y1[i]
                    + theta
                        * (theta - 1.0)
                        * ((1.0 - 2.0 * theta) * d + (theta - 1.0) * h * f0[i] + theta * h * f1[i])
            }
        }
    }

    fn state(&self, theta: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.component(theta, i);
        }
    }
}

/// Output grid of the independent variable.
struct UniformGrid {
    t0: f64,
    dt: f64,
    t_end: f64,
    n_regular: usize,
    extra_end: bool,
    next: usize,
}

impl UniformGrid {
    fn new(t0: f64, dt: f64, t_end: f64) -> Self {
        let n_regular = ((t_end - t0) / dt + 1e-9).floor() as usize;
        let extra_end = t0 + n_regular as f64 * dt < t_end - 1e-9 * dt;
        UniformGrid {
            t0,
            dt,
            t_end,
            n_regular,
            extra_end,
            next: 1,
        }
    }

    fn peek(&self) -> Option<f64> {
        if self.next <= self.n_regular {
            Some((self.t0 + self.next as f64 * self.dt).min(self.t_end))
        } else if self.next == self.n_regular + 1 && self.extra_end {
            Some(self.t_end)
        } else {
            None
        }
    }
}

struct Recorder {
    traj: Trajectory,
    n: usize,
    grid: Option<UniformGrid>,
    channel_grid: Option<(usize, f64, u64)>,
    events: Vec<EventSpec>,
    scratch: Vec<f64>,
}

impl Recorder {
    fn process_step(&mut self, dense: &Dense, y_old: &[f64], y_new: &[f64], t_new: f64) {
        let (t_old, h) = dense.span();
        self.detect_events(dense, y_old, y_new, t_new);
        if let Some(grid) = self.grid.as_mut() {
            while let Some(tg) = grid.peek() {
                if tg > t_new {
                    break;
                }
                grid.next += 1;
                if tg == t_new {
                    self.traj.push(t_new, y_new, self.n);
                } else {
                    dense.state((tg - t_old) / h, &mut self.scratch);
                    self.traj.push(tg, &self.scratch, self.n);
                }
            }
        }
        if let Some((ci, spacing, next)) = self.channel_grid.as_mut() {
            let (c_old, c_new) = (y_old[*ci], y_new[*ci]);
            loop {
                let target = *next as f64 * *spacing;
                if !(target <= c_new) {
                    break;
                }
                *next += 1;
                if target < c_old {
                    continue;
                }
                let theta = if target == c_new {
                    1.0
                } else {
                    invert_monotone(|th| dense.component(th, *ci), target)
                };
                if theta == 1.0 {
                    self.traj.push(t_new, y_new, self.n);
                } else {
                    dense.state(theta, &mut self.scratch);
                    self.traj.push(t_old + theta * h, &self.scratch, self.n);
                }
            }
        }
    }

    fn detect_events(&mut self, dense: &Dense, y_old: &[f64], y_new: &[f64], t_new: f64) {
        let (t_old, h) = dense.span();
        let mut found = Vec::new();
        for ev in &self.events {
            let (a, b) = (y_old[ev.component], y_new[ev.component]);
            let dir = if a < 0.0 && b >= 0.0 {
                Direction::Rising
            } else if a > 0.0 && b <= 0.0 {
                Direction::Falling
            } else {
                continue;
            };
            if ev.direction != Direction::Either && ev.direction != dir {
                continue;
            }
            let t_event = if b == 0.0 {
                t_new
            } else {
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                let sign_lo = a.signum();
                let mut iters = 0;
                while (hi - lo) * h > 1e-12 && iters < 200 {
                    let mid = 0.5 * (lo + hi);
                    let v = dense.component(mid, ev.component);
                    if v.signum() == sign_lo && v != 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    iters += 1;
                }
                t_old + 0.5 * (lo + hi) * h
            };
            found.push(EventRecord {
                t: t_event,
                component: self.traj.names[ev.component].clone(),
                direction: dir,
            });
        }
        found.sort_by(|a, b| a.t.total_cmp(&b.t));
        self.traj.events.extend(found);
    }
}

/// Solve `g(theta) = target` on `[0, 1]` for a function increasing across
/// the interval.
fn invert_monotone(g: impl Fn(f64) -> f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    0.5 * (lo + hi)
}

// Dormand-Prince 5(4) coefficients.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Integrate `field` from `(t0, y0)` to `cfg.t_end`.
pub fn integrate<F: VectorField + ?Sized>(
    field: &F,
    t0: f64,
    y0: &[f64],
    cfg: &IntegratorConfig,
    probes: &Probes,
) -> std::result::Result<Trajectory, IntegrationError> {
    let n = field.dim();
    let names: Vec<String> = field.component_names().iter().map(|s| s.to_string()).collect();
    let empty = Trajectory {
        names,
        channels: probes.channels.iter().map(|c| (*c, Vec::new())).collect(),
        ..Default::default()
    };
    let fail = |t: f64, error: Error, partial: Trajectory| IntegrationError { t, error, partial };

    if y0.len() != n {
        let e = Error::InvalidParameter(format!("initial state has {} components, expected {n}", y0.len()));
        return Err(fail(t0, e, empty));
    }
    if let Err(e) = cfg.validate(t0) {
        return Err(fail(t0, e, empty));
    }
    for ev in &probes.events {
        if ev.component >= n {
            let e = Error::InvalidParameter(format!("event component {} out of range", ev.component));
            return Err(fail(t0, e, empty));
        }
    }
    let channel_grid = match probes.sampling {
        Sampling::Uniform => None,
        Sampling::ChannelGrid { channel, spacing } => {
            match probes.channels.iter().position(|c| *c == channel) {
                Some(i) if spacing > 0.0 => Some((n + i, spacing, 1u64)),
                _ => {
                    return Err(fail(t0, Error::MissingChannel(channel.name()), empty));
                }
            }
        }
    };

    let aug = Augmented {
        field,
        channels: &probes.channels,
        n,
    };
    let mut y = vec![0.0; aug.dim()];
    y[..n].copy_from_slice(y0);

    let mut rec = Recorder {
        traj: empty,
        n,
        grid: channel_grid
            .is_none()
            .then(|| UniformGrid::new(t0, cfg.sample_dt, cfg.t_end)),
        channel_grid,
        events: probes.events.clone(),
        scratch: vec![0.0; aug.dim()],
    };
    let mut stats = StepStats::default();
    let mut k1 = vec![0.0; aug.dim()];
    if let Err(e) = aug.eval(t0, &y, &mut k1, &mut stats) {
        return Err(fail(t0, e, rec.traj));
    }
    rec.traj.push(t0, &y, n);

    let outcome = match cfg.method {
        Method::Rk45 => run_dopri(&aug, t0, y, k1, cfg, &mut rec, &mut stats),
        Method::Rk4 => run_rk4(&aug, t0, y, k1, cfg, &mut rec, &mut stats),
    };
    rec.traj.stats = stats;
    match outcome {
        Ok(()) => Ok(rec.traj),
        Err((t, e)) => Err(fail(t, e, rec.traj)),
    }
}

/// Zero crossings of `component` in the given direction over the span of
/// `cfg`.
pub fn find_events<F: VectorField + ?Sized>(
    field: &F,
    t0: f64,
    y0: &[f64],
    cfg: &IntegratorConfig,
    component: usize,
    direction: Direction,
) -> Result<Vec<EventRecord>> {
    let probes = Probes::none().with_event(component, direction);
    Ok(integrate(field, t0, y0, cfg, &probes)?.events)
}

fn weighted_norm_rms(v: &[f64], y: &[f64], cfg: &IntegratorConfig) -> f64 {
    let s: f64 = v
        .iter()
        .zip(y)
        .map(|(vi, yi)| {
            let sk = cfg.atol + cfg.rtol * yi.abs();
            (vi / sk).powi(2)
        })
        .sum();
    (s / v.len() as f64).sqrt()
}

fn initial_step<F: VectorField + ?Sized>(
    aug: &Augmented<'_, F>,
    t: f64,
    y: &[f64],
    f0: &[f64],
    cfg: &IntegratorConfig,
    stats: &mut StepStats,
) -> f64 {
    let span = cfg.t_end - t;
    let hmax = cfg.max_step.min(span);
    let dnf = weighted_norm_rms(f0, y, cfg);
    let dny = weighted_norm_rms(y, y, cfg);
    let mut h = if dnf <= 1e-5 || dny <= 1e-5 {
        1e-6
    } else {
        0.01 * dny / dnf
    };
    h = h.min(hmax);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h * b).collect();
    let mut f1 = vec![0.0; y.len()];
    if aug.eval(t + h, &y1, &mut f1, stats).is_err() {
        return h;
    }
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let der2 = weighted_norm_rms(&diff, y, cfg) / h;
    let der12 = der2.max(dnf);
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    (100.0 * h).min(h1).min(hmax)
}

fn run_dopri<F: VectorField + ?Sized>(
    aug: &Augmented<'_, F>,
    t0: f64,
    mut y: Vec<f64>,
    mut k1: Vec<f64>,
    cfg: &IntegratorConfig,
    rec: &mut Recorder,
    stats: &mut StepStats,
) -> std::result::Result<(), (f64, Error)> {
    let dim = y.len();
    let t_end = cfg.t_end;
    let mut t = t0;
    let mut h = initial_step(aug, t, &y, &k1, cfg, stats);
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
    );
    let mut ys = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut last_stage_error: Option<(f64, Error)> = None;
    let mut rejected_last = false;
    let mut steps = 0usize;

    while t < t_end {
        if steps >= cfg.max_steps {
            return Err((
                t,
                Error::MaxStepsExceeded {
                    t,
                    max_steps: cfg.max_steps,
                },
            ));
        }
        steps += 1;
        h = h.min(cfg.max_step);
        let mut last = false;
        if t + h >= t_end || t + 1.01 * h >= t_end {
            h = t_end - t;
            last = true;
        }
        let h_min = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < h_min {
            return Err(last_stage_error.unwrap_or((t, Error::StepSizeUnderflow { t, h })));
        }

        let stage = |ts: f64, ys: &[f64], k: &mut [f64], stats: &mut StepStats| {
            aug.eval(ts, ys, k, stats).map_err(|e| (ts, e))
        };
        let stages = (|| {
            for i in 0..dim {
                ys[i] = y[i] + h * A21 * k1[i];
            }
            stage(t + C2 * h, &ys, &mut k2, stats)?;
            for i in 0..dim {
                ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            stage(t + C3 * h, &ys, &mut k3, stats)?;
            for i in 0..dim {
                ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            stage(t + C4 * h, &ys, &mut k4, stats)?;
            for i in 0..dim {
                ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            stage(t + C5 * h, &ys, &mut k5, stats)?;
            for i in 0..dim {
                ys[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            stage(t + h, &ys, &mut k6, stats)?;
            for i in 0..dim {
                y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            stage(t + h, &y_new, &mut k7, stats)
        })();
        if let Err(fail) = stages {
            last_stage_error = Some(fail);
            stats.rejected += 1;
            h *= 0.25;
            rejected_last = true;
            continue;
        }

        let mut err = 0.0f64;
        for i in 0..dim {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sk = cfg.atol + cfg.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max(e.abs() / sk);
        }
        if !err.is_finite() {
            stats.rejected += 1;
            h *= FAC_MIN;
            rejected_last = true;
            continue;
        }

        if err <= 1.0 {
            stats.accepted += 1;
            last_stage_error = None;
            let t_new = if last { t_end } else { t + h };
            let mut r: [Vec<f64>; 5] = Default::default();
            r[0] = y.clone();
            r[1] = (0..dim).map(|i| y_new[i] - y[i]).collect();
            r[2] = (0..dim).map(|i| h * k1[i] - r[1][i]).collect();
            r[3] = (0..dim).map(|i| r[1][i] - h * k7[i] - r[2][i]).collect();
            r[4] = (0..dim)
                .map(|i| h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]))
                .collect();
            let dense = Dense::Dopri { t_old: t, h, r };
            rec.process_step(&dense, &y, &y_new, t_new);

            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            let mut fac = (SAFETY * err.max(1e-10).powf(-0.2)).clamp(FAC_MIN, FAC_MAX);
            if rejected_last {
                fac = fac.min(1.0);
            }
            h *= fac;
            rejected_last = false;
        } else {
            stats.rejected += 1;
            h *= (SAFETY * err.powf(-0.2)).max(FAC_MIN);
            rejected_last = true;
        }
    }
    Ok(())
}

fn run_rk4<F: VectorField + ?Sized>(
    aug: &Augmented<'_, F>,
    t0: f64,
    mut y: Vec<f64>,
    mut k1: Vec<f64>,
    cfg: &IntegratorConfig,
    rec: &mut Recorder,
    stats: &mut StepStats,
) -> std::result::Result<(), (f64, Error)> {
    let dim = y.len();
    let h_nominal = if cfg.max_step.is_finite() {
        cfg.max_step
    } else {
        cfg.sample_dt
    };
    let n_steps = ((cfg.t_end - t0) / h_nominal - 1e-9).ceil().max(1.0) as usize;
    if n_steps > cfg.max_steps {
        return Err((
            t0,
            Error::MaxStepsExceeded {
                t: t0,
                max_steps: cfg.max_steps,
            },
        ));
    }
    let (mut k2, mut k3, mut k4, mut f_new) =
        (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let mut ys = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut t = t0;
    for step in 1..=n_steps {
        let t_new = if step == n_steps {
            cfg.t_end
        } else {
            t0 + step as f64 * h_nominal
        };
        let h = t_new - t;
        let mut stage = |ts: f64, ys: &[f64], k: &mut [f64]| aug.eval(ts, ys, k, stats).map_err(|e| (ts, e));
        for i in 0..dim {
            ys[i] = y[i] + 0.5 * h * k1[i];
        }
        stage(t + 0.5 * h, &ys, &mut k2)?;
        for i in 0..dim {
            ys[i] = y[i] + 0.5 * h * k2[i];
        }
        stage(t + 0.5 * h, &ys, &mut k3)?;
        for i in 0..dim {
            ys[i] = y[i] + h * k3[i];
        }
        stage(t + h, &ys, &mut k4)?;
        for i in 0..dim {
            y_new[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        stage(t_new, &y_new, &mut f_new)?;
        stats.accepted += 1;
        let dense = Dense::Hermite {
            t_old: t,
            h,
            y0: y.clone(),
            y1: y_new.clone(),
            f0: k1.clone(),
            f1: f_new.clone(),
        };
        rec.process_step(&dense, &y, &y_new, t_new);
        t = t_new;
        std::mem::swap(&mut y, &mut y_new);
        std::mem::swap(&mut k1, &mut f_new);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `x'' = -x`.
    struct Harmonic;

    impl VectorField for Harmonic {
        fn dim(&self) -> usize {
            2
        }
        fn component_names(&self) -> &[&'static str] {
            &["x", "v"]
        }
        fn eval(&self, _t: f64, y: &[f64], d: &mut [f64]) -> Result<()> {
            d[0] = y[1];
            d[1] = -y[0];
            Ok(())
        }
    }

    /// `x' = 1`, failing once `x` passes 1.
    struct Wall;

    impl VectorField for Wall {
        fn dim(&self) -> usize {
            1
        }
        fn component_names(&self) -> &[&'static str] {
            &["x"]
        }
        fn eval(&self, _t: f64, y: &[f64], d: &mut [f64]) -> Result<()> {
            if y[0] > 1.0 {
                return Err(Error::Superluminal { beta_sq: y[0] });
            }
            d[0] = 1.0;
            Ok(())
        }
        fn channel_rate(&self, channel: Channel, _t: f64, y: &[f64]) -> Result<f64> {
            match channel {
                Channel::TimeOfTau => Ok(1.0 + y[0] * y[0]),
                _ => Err(Error::MissingChannel(channel.name())),
            }
        }
    }

    #[test]
    fn harmonic_full_period() {
        let cfg = IntegratorConfig::with_span(2.0 * std::f64::consts::PI, 0.1);
        let traj = integrate(&Harmonic, 0.0, &[1.0, 0.0], &cfg, &Probes::none()).unwrap();
        let last = traj.last_state().unwrap();
        assert!((last[0] - 1.0).abs() < 1e-8);
        assert!(last[1].abs() < 1e-8);
        assert_eq!(*traj.t.last().unwrap(), cfg.t_end);
        for (t, s) in traj.t.iter().zip(&traj.states) {
            assert!((s[0] - t.cos()).abs() < 1e-8, "dense output at t = {t}");
        }
        assert!(traj.t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn uniform_grid_samples() {
        let cfg = IntegratorConfig::with_span(1.0, 0.25);
        let traj = integrate(&Harmonic, 0.0, &[1.0, 0.0], &cfg, &Probes::none()).unwrap();
        assert_eq!(traj.t, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let cfg = IntegratorConfig::with_span(1.1, 0.25);
        let traj = integrate(&Harmonic, 0.0, &[1.0, 0.0], &cfg, &Probes::none()).unwrap();
        assert_eq!(traj.t, vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.1]);
    }

    #[test]
    fn rk4_agrees_with_adaptive() {
        let mut cfg = IntegratorConfig::with_span(10.0, 0.5);
        let a = integrate(&Harmonic, 0.0, &[1.0, 0.0], &cfg, &Probes::none()).unwrap();
        cfg.method = Method::Rk4;
        cfg.max_step = 0.01;
        let b = integrate(&Harmonic, 0.0, &[1.0, 0.0], &cfg, &Probes::none()).unwrap();
        assert_eq!(a.t, b.t);
        for (sa, sb) in a.states.iter().zip(&b.states) {
            assert!((sa[0] - sb[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn self_convergence() {
        let mut cfg = IntegratorConfig::with_span(20.0, 1.0);
        cfg.rtol = 1e-8;
        cfg.atol = 1e-10;
        let coarse = integrate(&Harmonic, 0.0, &[1.0, 0.0], &cfg, &Probes::none()).unwrap();
        cfg.rtol /= 100.0;
        cfg.atol /= 100.0;
        let fine = integrate(&Harmonic, 0.0, &[1.0, 0.0], &cfg, &Probes::none()).unwrap();
        let (a, b) = (coarse.last_state().unwrap(), fine.last_state().unwrap());
        for i in 0..2 {
            assert!((a[i] - b[i]).abs() < 10.0 * 1e-8);
        }
    }

    #[test]
    fn deterministic() {
        let cfg = IntegratorConfig::with_span(30.0, 0.3);
        let probes = Probes::none().with_event(1, Direction::Either);
        let a = integrate(&Harmonic, 0.0, &[1.0, 0.0], &cfg, &probes).unwrap();
        let b = integrate(&Harmonic, 0.0, &[1.0, 0.0], &cfg, &probes).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn falling_crossings_are_one_period_apart() {
        let cfg = IntegratorConfig::with_span(20.0, 0.5);
        let ev = find_events(&Harmonic, 0.0, &[1.0, 0.0], &cfg, 1, Direction::Falling).unwrap();
        assert_eq!(ev.len(), 3);
        let tau = 2.0 * std::f64::consts::PI;
        for (k, e) in ev.iter().enumerate() {
            assert!((e.t - (k + 1) as f64 * tau).abs() < 1e-9);
            assert_eq!(e.direction, Direction::Falling);
            assert_eq!(e.component, "v");
        }
        let rising = find_events(&Harmonic, 0.0, &[1.0, 0.0], &cfg, 1, Direction::Rising).unwrap();
        assert!((rising[0].t - std::f64::consts::PI).abs() < 1e-9);
        let none = find_events(
            &Harmonic,
            0.0,
            &[3.0, 0.0],
            &IntegratorConfig::with_span(1.0, 0.1),
            0,
            Direction::Either,
        )
        .unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn failure_returns_partial_trajectory() {
        let cfg = IntegratorConfig::with_span(5.0, 0.1);
        let err = integrate(&Wall, 0.0, &[0.0], &cfg, &Probes::none()).unwrap_err();
        assert!(matches!(err.error, Error::Superluminal { .. }));
        assert!((err.t - 1.0).abs() < 1e-6, "t = {}", err.t);
        assert!(err.partial.len() >= 10);
        assert!(*err.partial.t.last().unwrap() <= 1.0);
    }

    #[test]
    fn channel_integrated_with_state() {
        let cfg = IntegratorConfig::with_span(0.9, 0.3);
        let traj = integrate(&Wall, 0.0, &[0.0], &cfg, &Probes::channels(&[Channel::TimeOfTau])).unwrap();
        let ch = traj.channel(Channel::TimeOfTau).unwrap();
        assert_eq!(ch[0], 0.0);
        for (t, v) in traj.t.iter().zip(ch) {
            assert!((v - (t + t.powi(3) / 3.0)).abs() < 1e-10);
        }
        assert!(integrate(&Wall, 0.0, &[0.0], &cfg, &Probes::channels(&[Channel::AccumT])).is_err());
    }

    #[test]
    fn channel_grid_sampling() {
        let cfg = IntegratorConfig::with_span(0.9, 0.3);
        let probes = Probes {
            channels: vec![Channel::TimeOfTau],
            sampling: Sampling::ChannelGrid {
                channel: Channel::TimeOfTau,
                spacing: 0.1,
            },
            ..Default::default()
        };
        let traj = integrate(&Wall, 0.0, &[0.0], &cfg, &probes).unwrap();
        let ch = traj.channel(Channel::TimeOfTau).unwrap();
        let end = 0.9 + 0.9f64.powi(3) / 3.0;
        assert_eq!(ch.len(), (end / 0.1).floor() as usize + 1);
        for (k, v) in ch.iter().enumerate() {
            assert!((v - k as f64 * 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = IntegratorConfig::with_span(1.0, 0.1);
        cfg.rtol = 0.0;
        assert!(integrate(&Harmonic, 0.0, &[1.0, 0.0], &cfg, &Probes::none()).is_err());
        let cfg = IntegratorConfig::with_span(-1.0, 0.1);
        assert!(integrate(&Harmonic, 0.0, &[1.0, 0.0], &cfg, &Probes::none()).is_err());
        let cfg = IntegratorConfig::with_span(1.0, 0.1);
        assert!(integrate(&Harmonic, 0.0, &[1.0], &cfg, &Probes::none()).is_err());
    }
}
