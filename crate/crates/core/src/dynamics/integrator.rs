//! Fourth-order Runge-Kutta propagation of the variational parameters.

use alloc::boxed::Box;
use num_traits::Float;

use super::eom::assemble_with_tables;
use super::metric::metric_solve;
use super::{solve_tangent, DynamicsError, Regularization, SolverReport, TangentVector};
use crate::overlap::build_overlap_tables;
use crate::ansatz::{distance, MultiD2State};
use crate::model::ModelSpec;
use crate::observables::{self, ObservableRecord};

/// Which linear system is factorized for the tangent vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TangentMethod {
    /// Tikhonov-filtered eigendecomposition of the Hermitian metric.
    #[default]
    Metric,
    /// SVD of the real system over real and imaginary parts.
    RealSvd(Regularization),
}

/// How the tangent system is solved at every stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Relative scale `λ / λ_max` below which the regularization acts.
    pub rcond: f64,
    pub method: TangentMethod,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            rcond: 1e-8,
            method: TangentMethod::Metric,
        }
    }
}

/// Step-size policy of [`propagate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepControl {
    /// Constant `dt`; a step that breaks the norm tolerance is redone once
    /// as two half steps.
    Fixed,
    /// Step doubling: every step of size `h` is compared with two steps of
    /// size `h/2`, and `h` adapts so that the state-space distance between
    /// the two per unit time stays below `tolerance`. Steps never exceed
    /// `max_dt` nor fall below `min_dt`.
    Adaptive {
        tolerance: f64,
        min_dt: f64,
        max_dt: f64,
    },
}

/// Integration knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsSettings {
    /// Time step in `1/ω0`. Under adaptive control this is the initial step
    /// and the sampling grid unit.
    pub dt: f64,
    pub solver: SolverSettings,
    pub step_control: StepControl,
    /// Emit an observable sample every this many steps of `dt`.
    pub sample_every: usize,
    /// Largest accepted `|⟨D|D⟩ − ⟨D|D⟩(0)| / ⟨D|D⟩(0)`.
    pub norm_tolerance: f64,
    /// Hand the state to [`TrajectorySink::checkpoint`] every this many
    /// samples; 0 disables periodic checkpoints.
    pub checkpoint_every: usize,
}

impl Default for DynamicsSettings {
    fn default() -> Self {
        Self {
            dt: 2.5e-3,
            solver: SolverSettings::default(),
            step_control: StepControl::Fixed,
            sample_every: 40,
            norm_tolerance: 1e-3,
            checkpoint_every: 0,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), DynamicsError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(DynamicsError::Setting { name, value })
    }
}

impl DynamicsSettings {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        positive("dt", self.dt)?;
        if !(self.solver.rcond > 0.0 && self.solver.rcond < 1.0) {
            return Err(DynamicsError::Setting {
                name: "rcond",
                value: self.solver.rcond,
            });
        }
        if self.sample_every == 0 {
            return Err(DynamicsError::Setting {
                name: "sample_every",
                value: 0.0,
            });
        }
        positive("norm_tolerance", self.norm_tolerance)?;
        if let StepControl::Adaptive {
            tolerance,
            min_dt,
            max_dt,
        } = self.step_control
        {
            positive("step_tolerance", tolerance)?;
            positive("min_dt", min_dt)?;
            positive("max_dt", max_dt)?;
            if min_dt > max_dt {
                return Err(DynamicsError::Setting {
                    name: "min_dt",
                    value: min_dt,
                });
            }
        }
        Ok(())
    }
}

/// Receives samples (and optionally checkpoints) along a trajectory.
pub trait TrajectorySink {
    fn record(&mut self, record: &ObservableRecord);

    fn checkpoint(&mut self, _state: &MultiD2State, _sample: usize) {}
}

impl<F: FnMut(&ObservableRecord)> TrajectorySink for F {
    fn record(&mut self, record: &ObservableRecord) {
        self(record)
    }
}

/// Tangent vector at the state's own time stamp.
pub fn time_derivative(
    state: &MultiD2State,
    model: &ModelSpec,
    solver: SolverSettings,
) -> Result<(TangentVector, SolverReport), DynamicsError> {
    if state.bath_modes() != model.bath_modes() {
        return Err(DynamicsError::Shape {
            state: state.bath_modes(),
            model: model.bath_modes(),
        });
    }
    let tables = build_overlap_tables(state).with_bath(state, &model.bath);
    let system = assemble_with_tables(state, model, state.time, &tables);
    match solver.method {
        TangentMethod::Metric => metric_solve(state, &tables, &system, solver.rcond),
        TangentMethod::RealSvd(regularization) => solve_tangent(&system, solver.rcond, regularization),
    }
}

fn rk4_from(
    state: &MultiD2State,
    k1: &TangentVector,
    r1: SolverReport,
    model: &ModelSpec,
    dt: f64,
    solver: SolverSettings,
) -> Result<(MultiD2State, SolverReport), DynamicsError> {
    let half = 0.5 * dt;
    let (k2, r2) = time_derivative(&k1.advance(state, half, half), model, solver)?;
    let (k3, r3) = time_derivative(&k2.advance(state, half, half), model, solver)?;
    let (k4, r4) = time_derivative(&k3.advance(state, dt, dt), model, solver)?;
    let mut next = state.clone();
    let w = dt / 6.0;
    for (i, p) in next.params_mut().iter_mut().enumerate() {
        *p += (k1.values()[i] + 2.0 * k2.values()[i] + 2.0 * k3.values()[i] + k4.values()[i]) * w;
    }
    next.time = state.time + dt;
    Ok((next, r1.worst(r2).worst(r3).worst(r4)))
}

/// One classic RK4 step of size `dt` starting at `state.time`.
pub fn rk4_step(
    state: &MultiD2State,
    model: &ModelSpec,
    dt: f64,
    solver: SolverSettings,
) -> Result<(MultiD2State, SolverReport), DynamicsError> {
    positive("dt", dt)?;
    let (k1, r1) = time_derivative(state, model, solver)?;
    rk4_from(state, &k1, r1, model, dt, solver)
}

/// Statistics of a finished (or aborted) trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationSummary {
    /// Accepted steps.
    pub steps: usize,
    /// Fixed control: steps redone as two half steps after a norm violation.
    /// Adaptive control: steps rejected by the error test.
    pub rejected_steps: usize,
    pub samples: usize,
    pub max_residual: f64,
    pub min_rank: usize,
    pub mean_rank: f64,
    pub max_condition: f64,
    pub dimension: usize,
    pub max_norm_drift: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Tangent solves performed, including those of rejected steps.
    pub solves: usize,
}

impl PropagationSummary {
    fn new() -> Self {
        Self {
            steps: 0,
            rejected_steps: 0,
            samples: 0,
            max_residual: 0.0,
            min_rank: usize::MAX,
            mean_rank: 0.0,
            max_condition: 0.0,
            dimension: 0,
            max_norm_drift: 0.0,
            min_step: f64::INFINITY,
            max_step: 0.0,
            solves: 0,
        }
    }

    fn absorb(&mut self, report: &SolverReport, step: f64, drift: f64) {
        let n = self.steps as f64;
        self.max_residual = self.max_residual.max(report.residual);
        self.min_rank = self.min_rank.min(report.rank);
        self.mean_rank = (self.mean_rank * n + report.rank as f64) / (n + 1.0);
        self.max_condition = self.max_condition.max(report.condition);
        self.dimension = report.dimension;
        self.min_step = self.min_step.min(step);
        self.max_step = self.max_step.max(step);
        self.max_norm_drift = self.max_norm_drift.max(drift);
        self.steps += 1;
    }

    fn finish(mut self) -> Self {
        if self.min_rank == usize::MAX {
            self.min_rank = 0;
        }
        if self.min_step == f64::INFINITY {
            self.min_step = 0.0;
        }
        self
    }
}

/// A trajectory that stopped early, with the last accepted state.
#[derive(Debug, Clone)]
pub struct PropagationFailure {
    pub error: DynamicsError,
    pub last_state: Box<MultiD2State>,
    pub summary: PropagationSummary,
}

fn drift(state: &MultiD2State, reference: f64) -> f64 {
    (state.norm() - reference).abs() / reference
}

/// Fixed-step advance by exactly `dt`, with the one-time halving retry.
fn fixed_advance(
    current: &MultiD2State,
    model: &ModelSpec,
    dt: f64,
    t_target: f64,
    settings: &DynamicsSettings,
    reference: f64,
    summary: &mut PropagationSummary,
) -> Result<(MultiD2State, SolverReport, f64), DynamicsError> {
    let solver = settings.solver;
    summary.solves += 4;
    let (mut next, mut report) = rk4_step(current, model, dt, solver)?;
    let mut d = drift(&next, reference);
    if !(d <= settings.norm_tolerance) {
        summary.rejected_steps += 1;
        summary.solves += 8;
        let (mid, r1) = rk4_step(current, model, 0.5 * dt, solver)?;
        let (end, r2) = rk4_step(&mid, model, 0.5 * dt, solver)?;
        next = end;
        report = r1.worst(r2);
        d = drift(&next, reference);
    }
    next.time = t_target;
    if !(d <= settings.norm_tolerance) {
        return Err(DynamicsError::NormDrift {
            time: t_target,
            norm: next.norm(),
            reference,
            tolerance: settings.norm_tolerance,
        });
    }
    Ok((next, report, d))
}

/// One accepted step-doubling step of at most `limit`; returns the new
/// state, the step actually taken and the proposal for the next one.
#[allow(clippy::too_many_arguments)]
fn adaptive_advance(
    current: &MultiD2State,
    model: &ModelSpec,
    mut h: f64,
    limit: f64,
    settings: &DynamicsSettings,
    (tolerance, min_dt, max_dt): (f64, f64, f64),
    reference: f64,
    summary: &mut PropagationSummary,
) -> Result<(MultiD2State, SolverReport, f64, f64, f64), DynamicsError> {
    let solver = settings.solver;
    let (k1, r1) = time_derivative(current, model, solver)?;
    summary.solves += 1;
    loop {
        let clipped = h >= limit;
        let step = if clipped { limit } else { h };
        summary.solves += 10;
        let (full, rf) = rk4_from(current, &k1, r1, model, step, solver)?;
        let (mid, rm) = rk4_from(current, &k1, r1, model, 0.5 * step, solver)?;
        let (fine, rh) = rk4_step(&mid, model, 0.5 * step, solver)?;
        let error = distance(&full, &fine).map_err(|_| DynamicsError::Shape {
            state: full.bath_modes(),
            model: fine.bath_modes(),
        })? / 15.0;
        let rate = error / step;
        let d = drift(&fine, reference);
        let factor = if rate > 0.0 {
            (0.9 * Float::powf(tolerance / rate, 0.25)).clamp(0.25, 2.0)
        } else {
            2.0
        };
        if (rate <= tolerance && d <= settings.norm_tolerance) || step <= min_dt {
            if !(d <= settings.norm_tolerance) {
                return Err(DynamicsError::NormDrift {
                    time: fine.time,
                    norm: fine.norm(),
                    reference,
                    tolerance: settings.norm_tolerance,
                });
            }
            // A step shortened only to land on a sample keeps the old proposal.
            let proposal = if clipped && factor >= 1.0 { h } else { step * factor };
            let next_h = proposal.clamp(min_dt, max_dt);
            return Ok((fine, rf.worst(rm).worst(rh), step, next_h, d));
        }
        summary.rejected_steps += 1;
        h = (step * factor.min(0.5)).max(min_dt);
    }
}

/// Propagates `state` to `t_max` (measured from `state.time`), sampling at
/// `t0 + k · sample_every · dt` and at the final time.
///
/// Under fixed control a step whose norm drift exceeds the tolerance is
/// retried once as two half steps; if that also fails the trajectory is
/// aborted. Under adaptive control the error test decides step sizes and a
/// norm violation at the smallest step aborts.
pub fn propagate<S: TrajectorySink + ?Sized>(
    state: MultiD2State,
    model: &ModelSpec,
    t_max: f64,
    settings: &DynamicsSettings,
    sink: &mut S,
) -> Result<(MultiD2State, PropagationSummary), PropagationFailure> {
    let mut summary = PropagationSummary::new();
    let fail = |error: DynamicsError, state: &MultiD2State, summary: PropagationSummary| {
        PropagationFailure {
            error,
            last_state: Box::new(state.clone()),
            summary: summary.finish(),
        }
    };
    if let Err(e) = settings.validate() {
        return Err(fail(e, &state, summary));
    }
    if !(t_max >= 0.0) || !t_max.is_finite() {
        let error = DynamicsError::Setting {
            name: "t_max",
            value: t_max,
        };
        return Err(fail(error, &state, summary));
    }
    let emit = |s: &MultiD2State, sink: &mut S, summary: &mut PropagationSummary| {
        let record = observables::evaluate(s, model)?;
        sink.record(&record);
        summary.samples += 1;
        Ok::<_, DynamicsError>(())
    };
    if let Err(e) = emit(&state, sink, &mut summary) {
        return Err(fail(e, &state, summary));
    }
    let reference = state.norm();
    let t0 = state.time;
    let steps = Float::ceil(t_max / settings.dt - 1e-9).max(0.0) as usize;
    let t_end = t0 + t_max;
    let mut current = state;
    let mut h = settings.dt;
    let mut sample_index = 0;
    let mut step = 0;
    while step < steps {
        let next_step = (step + settings.sample_every).min(steps);
        let t_sample = if next_step == steps {
            t_end
        } else {
            t0 + next_step as f64 * settings.dt
        };
        match settings.step_control {
            StepControl::Fixed => {
                for s in step + 1..=next_step {
                    let t_target = if s == steps { t_end } else { t0 + s as f64 * settings.dt };
                    let dt = t_target - current.time;
                    match fixed_advance(&current, model, dt, t_target, settings, reference, &mut summary) {
                        Ok((next, report, d)) => {
                            summary.absorb(&report, dt, d);
                            current = next;
                        }
                        Err(e) => return Err(fail(e, &current, summary)),
                    }
                }
            }
            StepControl::Adaptive {
                tolerance,
                min_dt,
                max_dt,
            } => {
                while t_sample - current.time > 1e-12 * t_sample.abs().max(1.0) {
                    let limit = t_sample - current.time;
                    let bounds = (tolerance, min_dt, max_dt);
                    let attempt = adaptive_advance(
                        &current,
                        model,
                        h,
                        limit,
                        settings,
                        bounds,
                        reference,
                        &mut summary,
                    );
                    match attempt {
                        Ok((next, report, taken, proposal, d)) => {
                            summary.absorb(&report, taken, d);
                            current = next;
                            h = proposal;
                        }
                        Err(e) => return Err(fail(e, &current, summary)),
                    }
                }
                current.time = t_sample;
            }
        }
        step = next_step;
        sample_index += 1;
        if let Err(e) = emit(&current, sink, &mut summary) {
            return Err(fail(e, &current, summary));
        }
        if settings.checkpoint_every > 0 && sample_index % settings.checkpoint_every == 0 {
            sink.checkpoint(&current, sample_index);
        }
    }
    Ok((current, summary.finish()))
}
