//! Adaptive Dormand–Prince 5(4) integration of the model, piecewise-constant
//! `gamma(t)` schedules, and Poincaré-section limit-cycle detection.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{in_domain, rhs_reduced_raw, ModelParams, State, DEFAULT_DOMAIN_TOL};
use crate::{Error, Result};

/// Negative undershoots larger than this are an integration failure rather
/// than a rounding artefact.
const CLAMP_TOL: f64 = 1e-6;

/// Controls for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    /// Relative tolerance, > 0.
    pub rtol: f64,
    /// Absolute tolerance, >= 0.
    pub atol: f64,
    /// Optional cap on the step size; use ~1.0 when dense samples matter.
    pub max_step: Option<f64>,
    /// Hard cap on accepted + rejected steps.
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, max_step: None, max_steps: 20_000_000 }
    }
}

impl IntegrateOptions {
    fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.rtol.is_finite()) {
            return Err(Error::InvalidInput(format!("rtol must be positive, got {}", self.rtol)));
        }
        if !(self.atol >= 0.0 && self.atol.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "atol must be non-negative, got {}",
                self.atol
            )));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "max_step must be positive, got {h}"
                )));
            }
        }
        Ok(())
    }
}

/// Orientation of the time variable for cycle detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeDirection {
    Forward,
    /// Integrates the negated vector field; attracting sets of the reversed
    /// flow are repelling sets (unstable cycles) of the original one.
    Backward,
}

/// Sampled solution of an initial-value problem. One sample per accepted
/// integrator step, endpoints included.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub states: Vec<State>,
    /// Whether any component was clamped up to zero after an undershoot.
    pub clamped: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn last_state(&self) -> &State {
        self.states.last().expect("trajectory is never empty")
    }

    /// Linear interpolation between the bracketing samples. Accurate when
    /// the integration used a small `max_step`.
    pub fn sample(&self, t: f64) -> Result<State> {
        let (t0, t1) = (*self.t.first().unwrap(), *self.t.last().unwrap());
        if !(t0..=t1).contains(&t) {
            return Err(Error::OutOfRange(format!("t = {t} outside [{t0}, {t1}]")));
        }
        let k = self.t.partition_point(|&x| x < t).min(self.t.len() - 1).max(1);
        let (ta, tb) = (self.t[k - 1], self.t[k]);
        let (a, b) = (self.states[k - 1], self.states[k]);
        let w = if tb > ta { (t - ta) / (tb - ta) } else { 0.0 };
        Ok(State::new(
            a.s + w * (b.s - a.s),
            a.i + w * (b.i - a.i),
            a.r + w * (b.r - a.r),
        ))
    }

    /// CSV with header `t,S,I,R`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,S,I,R\n");
        for (t, s) in self.t.iter().zip(&self.states) {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_sig(*t, 17),
                fmt_sig(s.s, 17),
                fmt_sig(s.i, 17),
                fmt_sig(s.r, 17)
            );
        }
        out
    }
}

/// Scientific notation with `sig` significant digits; 17 round-trips f64.
pub(crate) fn fmt_sig(v: f64, sig: usize) -> String {
    format!("{:.*e}", sig - 1, v)
}

/// A piecewise-constant cautiousness schedule: `gamma(t) = segments[k].gamma`
/// on `[t_start_k, t_start_{k+1})`, final segment ending at `t_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaSchedule {
    pub segments: Vec<ScheduleSegment>,
    pub t_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSegment {
    pub t_start: f64,
    pub gamma: f64,
}

impl GammaSchedule {
    pub fn new(segments: Vec<(f64, f64)>, t_end: f64) -> Result<Self> {
        let s = Self {
            segments: segments
                .into_iter()
                .map(|(t_start, gamma)| ScheduleSegment { t_start, gamma })
                .collect(),
            t_end,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidInput("schedule has no segments".into()));
        }
        for w in self.segments.windows(2) {
            if !(w[1].t_start > w[0].t_start) {
                return Err(Error::InvalidInput(format!(
                    "segment starts must be strictly increasing: {} then {}",
                    w[0].t_start, w[1].t_start
                )));
            }
        }
        for seg in &self.segments {
            if !seg.t_start.is_finite() {
                return Err(Error::InvalidInput("non-finite segment start".into()));
            }
            if !(0.0..=1.0).contains(&seg.gamma) {
                return Err(Error::InvalidInput(format!(
                    "gamma must be in [0,1], got {} at t = {}",
                    seg.gamma, seg.t_start
                )));
            }
        }
        if !(self.t_end > self.segments.last().unwrap().t_start) {
            return Err(Error::InvalidInput(format!(
                "t_end = {} does not exceed the last segment start",
                self.t_end
            )));
        }
        Ok(())
    }

    pub fn t_start(&self) -> f64 {
        self.segments[0].t_start
    }

    /// CSV with header `t_start,gamma`; the footer row carries `t_end` and
    /// an empty gamma field.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_start,gamma\n");
        for seg in &self.segments {
            let _ = writeln!(out, "{},{}", fmt_sig(seg.t_start, 17), fmt_sig(seg.gamma, 17));
        }
        let _ = writeln!(out, "{},", fmt_sig(self.t_end, 17));
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty schedule file".into()))?;
        if header.trim() != "t_start,gamma" {
            return Err(Error::Parse(format!("expected header 't_start,gamma', got '{header}'")));
        }
        let mut segments = Vec::new();
        let mut t_end = None;
        for line in lines {
            if t_end.is_some() {
                return Err(Error::Parse("rows after the t_end footer".into()));
            }
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("malformed row '{line}'")))?;
            let t: f64 = a
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad number '{a}'")))?;
            if b.trim().is_empty() {
                t_end = Some(t);
            } else {
                let g: f64 =
                    b.trim().parse().map_err(|_| Error::Parse(format!("bad number '{b}'")))?;
                segments.push(ScheduleSegment { t_start: t, gamma: g });
            }
        }
        let t_end = t_end.ok_or_else(|| Error::Parse("missing t_end footer row".into()))?;
        let s = Self { segments, t_end };
        s.validate()?;
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("schedule JSON: {e}")))?;
        s.validate()?;
        Ok(s)
    }
}

// --- Dormand–Prince 5(4) core ---------------------------------------------

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
/// 5th-minus-4th-order weights for the embedded error estimate.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

type Y = [f64; 3];

pub(crate) struct StepRec {
    pub t0: f64,
    pub y0: Y,
    pub f0: Y,
    pub t1: f64,
    pub y1: Y,
    pub f1: Y,
}

pub(crate) enum StepControl {
    Continue,
    Stop,
}

fn axpy(y: &Y, h: f64, ks: &[Y], ws: &[f64]) -> Y {
    let mut out = *y;
    for (k, w) in ks.iter().zip(ws) {
        if *w != 0.0 {
            for d in 0..3 {
                out[d] += h * w * k[d];
            }
        }
    }
    out
}

fn err_norm(err: &Y, y0: &Y, y1: &Y, rtol: f64, atol: f64) -> f64 {
    let mut acc = 0.0;
    for d in 0..3 {
        let sc = atol + rtol * y0[d].abs().max(y1[d].abs());
        let e = err[d] / sc;
        acc += e * e;
    }
    (acc / 3.0).sqrt()
}

fn initial_step<F: Fn(f64, &Y) -> Y>(
    f: &F,
    t0: f64,
    y0: &Y,
    f0: &Y,
    span: f64,
    opts: &IntegrateOptions,
) -> f64 {
    let sc = |y: &Y, v: &Y| -> f64 {
        let mut acc = 0.0;
        for d in 0..3 {
            let s = opts.atol + opts.rtol * y[d].abs();
            acc += (v[d] / s) * (v[d] / s);
        }
        (acc / 3.0).sqrt()
    };
    let d0 = sc(y0, y0);
    let d1 = sc(y0, f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);
    let y1 = axpy(y0, h0, &[*f0], &[1.0]);
    let f1 = f(t0 + h0, &y1);
    let diff = [f1[0] - f0[0], f1[1] - f0[1], f1[2] - f0[2]];
    let d2 = sc(y0, &diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    let mut h = (100.0 * h0).min(h1).min(span);
    if let Some(m) = opts.max_step {
        h = h.min(m);
    }
    h
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end > t0`, invoking `cb` once
/// per accepted step. On return: final time, final state, clamped flag.
pub(crate) fn dopri5<F, Cb>(
    f: F,
    t0: f64,
    t_end: f64,
    y_init: Y,
    opts: &IntegrateOptions,
    mut cb: Cb,
) -> Result<(f64, Y, bool)>
where
    F: Fn(f64, &Y) -> Y,
    Cb: FnMut(&StepRec) -> StepControl,
{
    opts.validate()?;
    if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::InvalidInput(format!("bad time span [{t0}, {t_end}]")));
    }
    let span = t_end - t0;
    let h_min = 1e-14 * span.max(t0.abs()).max(1.0);
    let mut t = t0;
    let mut y = y_init;
    let mut k1 = f(t, &y);
    let mut h = initial_step(&f, t, &y, &k1, span, opts);
    let mut err_old: f64 = 1e-4;
    let mut clamped = false;
    let mut rejected = false;

    for _ in 0..opts.max_steps {
        if t >= t_end {
            return Ok((t, y, clamped));
        }
        h = h.min(t_end - t);
        if let Some(m) = opts.max_step {
            h = h.min(m);
        }
        if h < h_min {
            return Err(Error::Stiffness(format!(
                "step size underflow at t = {t} (h = {h:.3e})"
            )));
        }

        let mut ks = [[0.0; 3]; 7];
        ks[0] = k1;
        for s in 0..6 {
            let ys = axpy(&y, h, &ks[..=s], &A[s][..=s]);
            ks[s + 1] = f(t + C[s] * h, &ys);
        }
        // 5th-order solution is the stage-7 argument (FSAL)
        let y1 = axpy(&y, h, &ks[..6], &A[5]);
        let mut err = [0.0; 3];
        for d in 0..3 {
            for s in 0..7 {
                err[d] += E[s] * ks[s][d];
            }
            err[d] *= h;
        }
        if !y1.iter().all(|v| v.is_finite()) {
            h *= 0.25;
            rejected = true;
            continue;
        }
        let en = err_norm(&err, &y, &y1, opts.rtol, opts.atol);

        if en <= 1.0 {
            // PI step controller (Hairer–Wanner)
            let fac = 0.9 * en.max(1e-10).powf(-0.7 / 5.0) * err_old.max(1e-10).powf(0.4 / 5.0);
            let fac = fac.clamp(0.2, if rejected { 1.0 } else { 5.0 });
            err_old = en.max(1e-10);
            rejected = false;

            let mut y_acc = y1;
            for v in y_acc.iter_mut() {
                if *v < 0.0 {
                    if *v < -CLAMP_TOL {
                        return Err(Error::DomainEscape(format!(
                            "component fell to {v:.3e} at t = {}",
                            t + h
                        )));
                    }
                    *v = 0.0;
                    clamped = true;
                }
            }
            let f1 = if y_acc == y1 { ks[6] } else { f(t + h, &y_acc) };
            let rec = StepRec { t0: t, y0: y, f0: k1, t1: t + h, y1: y_acc, f1 };
            t += h;
            y = y_acc;
            k1 = f1;
            h *= fac;
            if let StepControl::Stop = cb(&rec) {
                return Ok((t, y, clamped));
            }
        } else {
            let fac = (0.9 * en.powf(-0.2)).clamp(0.2, 1.0);
            h *= fac;
            rejected = true;
        }
    }
    Err(Error::Stiffness(format!("step budget exhausted at t = {t}")))
}

/// Cubic Hermite interpolation over one accepted step.
pub(crate) fn hermite(rec: &StepRec, t: f64) -> Y {
    let h = rec.t1 - rec.t0;
    let x = (t - rec.t0) / h;
    let h00 = (1.0 + 2.0 * x) * (1.0 - x) * (1.0 - x);
    let h10 = x * (1.0 - x) * (1.0 - x);
    let h01 = x * x * (3.0 - 2.0 * x);
    let h11 = x * x * (x - 1.0);
    let mut out = [0.0; 3];
    for d in 0..3 {
        out[d] =
            h00 * rec.y0[d] + h10 * h * rec.f0[d] + h01 * rec.y1[d] + h11 * h * rec.f1[d];
    }
    out
}

fn rhs3(p: &ModelParams, y: &Y) -> Y {
    let (ds, di) = rhs_reduced_raw(p, y[0], y[1]);
    let rec = p.alpha * y[1] / (1.0 + p.rho * y[1]);
    [ds, di, -p.mu * y[2] + rec]
}

/// Integrates the full three-compartment system over `[t0, t_end]`.
///
/// The initial state must lie in the invariant domain. One sample is
/// recorded per accepted step.
pub fn integrate(
    p: &ModelParams,
    y0: &State,
    t0: f64,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if !y0.is_finite() || !in_domain(p, y0, DEFAULT_DOMAIN_TOL) {
        return Err(Error::InvalidInput(format!(
            "initial state ({}, {}, {}) outside the invariant domain",
            y0.s, y0.i, y0.r
        )));
    }
    let mut t = vec![t0];
    let mut states = vec![*y0];
    let cap = p.population_cap();
    let mut escape: Option<Error> = None;
    let res = dopri5(
        |_, y| rhs3(p, y),
        t0,
        t_end,
        [y0.s, y0.i, y0.r],
        opts,
        |rec| {
            let n = rec.y1[0] + rec.y1[1] + rec.y1[2];
            if n > cap * (1.0 + 1e-6) + DEFAULT_DOMAIN_TOL {
                escape = Some(Error::DomainEscape(format!(
                    "population {n} exceeds lambda/mu = {cap} at t = {}",
                    rec.t1
                )));
                return StepControl::Stop;
            }
            t.push(rec.t1);
            states.push(State::new(rec.y1[0], rec.y1[1], rec.y1[2]));
            StepControl::Continue
        },
    );
    if let Some(e) = escape {
        return Err(e);
    }
    let (_, _, clamped) = res?;
    Ok(Trajectory { t, states, clamped })
}

/// Integrates under a piecewise-constant `gamma(t)` schedule, restarting the
/// integrator at each discontinuity. Boundary samples are not duplicated.
pub fn integrate_schedule(
    p: &ModelParams,
    y0: &State,
    schedule: &GammaSchedule,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    schedule.validate()?;
    let mut t_all = Vec::new();
    let mut s_all = Vec::new();
    let mut clamped = false;
    let mut state = *y0;
    for (k, seg) in schedule.segments.iter().enumerate() {
        let t1 = schedule
            .segments
            .get(k + 1)
            .map(|s| s.t_start)
            .unwrap_or(schedule.t_end);
        let pk = p.with_gamma(seg.gamma)?;
        let traj = integrate(&pk, &state, seg.t_start, t1, opts)?;
        clamped |= traj.clamped;
        state = *traj.last_state();
        let skip = usize::from(k > 0); // boundary sample already recorded
        t_all.extend_from_slice(&traj.t[skip..]);
        s_all.extend_from_slice(&traj.states[skip..]);
    }
    Ok(Trajectory { t: t_all, states: s_all, clamped })
}

/// Tuning knobs for [`detect_limit_cycle`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleOptions {
    /// Give up if no cycle is confirmed within this much (possibly reversed)
    /// time.
    pub max_time: f64,
    /// Section crossings discarded before convergence checks start.
    pub burn_in: usize,
    /// Relative tolerance on successive section returns.
    pub return_tol: f64,
    /// Minimum |I_return - I_equilibrium| for a valid cycle; rejects
    /// convergence onto a focus.
    pub min_amplitude: f64,
    /// `I` below this means the orbit escaped toward the disease-free state.
    pub escape_i: f64,
}

impl Default for CycleOptions {
    fn default() -> Self {
        Self {
            max_time: 2e5,
            burn_in: 10,
            return_tol: 1e-8,
            min_amplitude: 0.1,
            escape_i: 1e-3,
        }
    }
}

/// A confirmed periodic orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitCycle {
    /// Cycle period (positive regardless of detection direction).
    pub period: f64,
    pub max_i: f64,
    pub min_i: f64,
    /// Susceptible coordinate of the Poincaré section (the interior
    /// equilibrium's `S`).
    pub section_s: f64,
    /// Converged return value of `I` on the section with `dS/dt > 0`.
    pub section_i: f64,
    /// `I` at the section crossing with `dS/dt < 0` (upper branch).
    pub upper_i: f64,
    /// True when detected in forward time (orbitally stable).
    pub stable: bool,
    /// Section crossings consumed before convergence.
    pub crossings: usize,
}

/// Detects a limit cycle of the reduced system by Poincaré-section returns.
///
/// The section is `{S = S(e1), dS/dt > 0}` where `e1` is the largest-`I`
/// endemic equilibrium. `Backward` integrates the negated field, converging
/// onto orbitally unstable cycles. Crossing times are resolved by cubic
/// Hermite interpolation and bisection to `1e-12` in time.
pub fn detect_limit_cycle(
    p: &ModelParams,
    start: (f64, f64),
    direction: TimeDirection,
    opts: &IntegrateOptions,
    copts: &CycleOptions,
) -> Result<LimitCycle> {
    let eq = crate::analysis::endemic_equilibria(p)?;
    let e1 = eq
        .last()
        .ok_or_else(|| Error::Detection("no interior equilibrium to anchor the section".into()))?;
    let (s_sec, i_eq) = (e1.s, e1.i);
    if !(start.0.is_finite() && start.1.is_finite()) || start.0 < 0.0 || start.1 < 0.0 {
        return Err(Error::InvalidInput(format!("bad start point ({}, {})", start.0, start.1)));
    }

    let sign = match direction {
        TimeDirection::Forward => 1.0,
        TimeDirection::Backward => -1.0,
    };
    // R is slaved and irrelevant to the planar cycle; freezing it avoids
    // spurious negativity in reversed time.
    let field = |_: f64, y: &Y| {
        let (ds, di) = rhs_reduced_raw(p, y[0], y[1]);
        [sign * ds, sign * di, 0.0]
    };

    struct Detect {
        crossings: usize,
        last_up: Option<(f64, f64)>, // (t, I) at dS>0 crossings
        upper_i: f64,
        loop_max: f64,
        loop_min: f64,
        done_max: f64,
        done_min: f64,
        result: Option<(f64, f64)>, // (period, section I)
        error: Option<Error>,
    }
    let mut st = Detect {
        crossings: 0,
        last_up: None,
        upper_i: f64::NAN,
        loop_max: start.1,
        loop_min: start.1,
        done_max: f64::NAN,
        done_min: f64::NAN,
        result: None,
        error: None,
    };
    let copts = *copts;

    let (_, _, _) = dopri5(
        field,
        0.0,
        copts.max_time,
        [start.0, start.1, 0.0],
        opts,
        |rec| {
            if rec.y1[1] < copts.escape_i {
                st.error = Some(Error::Detection(
                    "orbit escaped toward the disease-free equilibrium".into(),
                ));
                return StepControl::Stop;
            }
            if rec.y1[0].max(rec.y1[1]) > 1e8 {
                st.error = Some(Error::Detection("orbit diverged".into()));
                return StepControl::Stop;
            }
            st.loop_max = st.loop_max.max(rec.y1[1]);
            st.loop_min = st.loop_min.min(rec.y1[1]);
            let g0 = rec.y0[0] - s_sec;
            let g1 = rec.y1[0] - s_sec;
            if g0 == 0.0 || g0 * g1 >= 0.0 {
                return StepControl::Continue;
            }
            // bisect the Hermite interpolant for the crossing time
            let (mut ta, mut tb) = (rec.t0, rec.t1);
            for _ in 0..200 {
                if tb - ta <= 1e-12 * tb.abs().max(1.0) {
                    break;
                }
                let tm = 0.5 * (ta + tb);
                let gm = hermite(rec, tm)[0] - s_sec;
                if (gm > 0.0) == (g1 > 0.0) {
                    tb = tm;
                } else {
                    ta = tm;
                }
            }
            let tc = 0.5 * (ta + tb);
            let yc = hermite(rec, tc);
            if g1 < 0.0 {
                // dS/dt < 0 here: upper branch of the loop
                st.upper_i = yc[1];
                return StepControl::Continue;
            }
            st.crossings += 1;
            if st.crossings > copts.burn_in {
                if let Some((tp, ip)) = st.last_up {
                    if (yc[1] - ip).abs() <= copts.return_tol * yc[1].abs().max(1.0) {
                        if (yc[1] - i_eq).abs() <= copts.min_amplitude {
                            st.error = Some(Error::Detection(
                                "section returns converged onto the equilibrium (no cycle)"
                                    .into(),
                            ));
                            return StepControl::Stop;
                        }
                        st.done_max = st.loop_max;
                        st.done_min = st.loop_min;
                        st.result = Some((tc - tp, yc[1]));
                        return StepControl::Stop;
                    }
                }
                st.last_up = Some((tc, yc[1]));
            }
            st.done_max = st.loop_max;
            st.done_min = st.loop_min;
            st.loop_max = yc[1];
            st.loop_min = yc[1];
            StepControl::Continue
        },
    )?;

    if let Some(e) = st.error {
        return Err(e);
    }
    match st.result {
        Some((period, section_i)) => Ok(LimitCycle {
            period,
            max_i: st.done_max,
            min_i: st.done_min,
            section_s: s_sec,
            section_i,
            upper_i: st.upper_i,
            stable: matches!(direction, TimeDirection::Forward),
            crossings: st.crossings,
        }),
        None => Err(Error::Detection(format!(
            "no limit cycle confirmed within t = {} ({} section crossings)",
            copts.max_time, st.crossings
        ))),
    }
}
