//! Time integration of `i∂_t u = −(∇+iA)²u − |u|^α u` by symmetric operator
//! splitting, with conservation monitoring and blow-up detection.
//!
//! The operator identity `(∇+iA)² = Δ − bL_z − (b²/4)ρ²` splits the generator
//! into three directional pieces — each diagonal after a 1D Fourier transform
//! along one axis — plus a pointwise phase for the `ρ²` potential and the
//! nonlinearity (which leaves `|u|` invariant, making that substep exact too).
//! Every substep is a pointwise or diagonal unitary, so the discrete mass is
//! conserved to roundoff per step, independent of `dt`.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftDirection;

use crate::error::{Error, Result};
use crate::field_grid::{self, Field, Grid, Params};
use crate::functionals::{self, DiagnosticsRecord};

/// Which parts of the generator a step applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    /// The full equation.
    Full,
    /// Linear magnetic flow only (nonlinear phase off); used for convergence
    /// studies against the exactly-solvable linear problem.
    Linear,
}

/// Advances a state by one Strang-composed step of size `dt`.
///
/// The composition is `P(dt/2) S₁(dt/2) S₂(dt/2) S₃(dt) S₂(dt/2) S₁(dt/2)
/// P(dt/2)` where `P` is the pointwise potential/nonlinearity phase and `Sⱼ`
/// the directional propagators; the scheme is second order in `dt` and
/// time-reversible.
pub fn step(state: &Field, p: &Params, dt: f64) -> Field {
    step_mode(state, p, dt, StepMode::Full)
}

/// [`step`] with an explicit [`StepMode`].
pub fn step_mode(state: &Field, p: &Params, dt: f64, mode: StepMode) -> Field {
    let mut out = state.clone();
    step_in_place(&mut out, p, dt, mode);
    out
}

pub(crate) fn step_in_place(f: &mut Field, p: &Params, dt: f64, mode: StepMode) {
    assert!(dt > 0.0 && dt.is_finite(), "step size must be positive");
    let grid = f.grid().clone();
    let half = 0.5 * dt;
    let ph1 = directional_table(&grid, 0, 1, -p.b(), half);
    let ph2 = directional_table(&grid, 1, 0, p.b(), half);
    let ph3 = directional_table(&grid, 2, 0, 0.0, dt);

    pointwise_phase(f, &grid, p, half, mode);
    apply_directional(f, &grid, 0, &ph1);
    apply_directional(f, &grid, 1, &ph2);
    apply_directional(f, &grid, 2, &ph3);
    apply_directional(f, &grid, 1, &ph2);
    apply_directional(f, &grid, 0, &ph1);
    pointwise_phase(f, &grid, p, half, mode);
}

/// Phase table for the directional propagator along `axis`, whose symbol is
/// `exp(−iτ(k² + s·x_cross·k))` with `x_cross` running over the coordinates
/// of `cross_axis`. Row `r` of the table holds the phases for
/// `x_cross = coords(cross_axis)[r]`.
fn directional_table(
    grid: &Grid,
    axis: usize,
    cross_axis: usize,
    s: f64,
    tau: f64,
) -> Vec<Complex64> {
    let k = grid.wavenumbers(axis);
    let rows: &[f64] = if s == 0.0 {
        &[0.0]
    } else {
        grid.coords(cross_axis)
    };
    let mut table = Vec::with_capacity(rows.len() * k.len());
    for &x in rows {
        for &km in k {
            let theta = -tau * (km * km + s * x * km);
            table.push(Complex64::from_polar(1.0, theta));
        }
    }
    table
}

fn apply_directional(f: &mut Field, grid: &Grid, axis: usize, table: &[Complex64]) {
    let dims = grid.dims();
    let n = dims[axis];
    let n3 = dims[2];
    let single_row = table.len() == n;
    let fwd = field_grid::fft_plan(n, FftDirection::Forward);
    let inv = field_grid::fft_plan(n, FftDirection::Inverse);
    let inv_n = 1.0 / n as f64;
    field_grid::for_each_line(f.values_mut(), dims, axis, |line, buf| {
        // Axis 0 lines are indexed i₂·n₃+i₃ and couple to x₂; axis 1 lines
        // are indexed i₁·n₃+i₃ and couple to x₁; axis 2 has no coupling.
        let row = if single_row { 0 } else { line / n3 };
        let phases = &table[row * n..(row + 1) * n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fwd.get_inplace_scratch_len()];
        fwd.process_with_scratch(buf, &mut scratch);
        for (v, ph) in buf.iter_mut().zip(phases) {
            *v *= *ph;
        }
        scratch.resize(inv.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
        inv.process_with_scratch(buf, &mut scratch);
        for v in buf.iter_mut() {
            *v *= inv_n;
        }
    });
}

/// The merged pointwise substep: `u ← u·exp(iτ(|u|^α − (b²/4)ρ²))`. `|u|` is
/// constant during the substep, so the phase is exact, not merely split.
fn pointwise_phase(f: &mut Field, grid: &Grid, p: &Params, tau: f64, mode: StepMode) {
    let [_, n2, n3] = grid.dims();
    let x1 = grid.coords(0);
    let x2 = grid.coords(1);
    let alpha = p.alpha();
    let quarter_b_sq = 0.25 * p.b() * p.b();
    let nonlinear = mode == StepMode::Full;
    let alpha_is_two = (alpha - 2.0).abs() < 1e-12;
    f.values_mut()
        .par_chunks_mut(n3)
        .enumerate()
        .for_each(|(slab, chunk)| {
            let i1 = slab / n2;
            let i2 = slab % n2;
            let rho_sq = x1[i1] * x1[i1] + x2[i2] * x2[i2];
            let potential = -tau * quarter_b_sq * rho_sq;
            for v in chunk.iter_mut() {
                let theta = if !nonlinear {
                    potential
                } else if alpha_is_two {
                    tau * v.norm_sqr() + potential
                } else {
                    tau * v.norm_sqr().powf(0.5 * alpha) + potential
                };
                *v *= Complex64::from_polar(1.0, theta);
            }
        });
}

/// Run configuration for [`evolve`].
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct EvolveConfig {
    /// Base step size; with adaptation on, also the upper bound on `dt`.
    pub dt_initial: f64,
    pub t_final: f64,
    /// Shrink `dt` as `min(dt_initial, c·mass/‖∇u‖²)` with `c` calibrated so
    /// the initial step equals `dt_initial`.
    pub adapt: bool,
    /// Gradient-growth factor (relative to the initial state) that, together
    /// with the tail criterion, declares numerical blow-up.
    pub blowup_grad_ratio: f64,
    /// Spectral tail fraction beyond which the run cannot continue: combined
    /// with gradient growth it means blow-up, alone it means the grid lost
    /// the solution (aliasing, drift off the box).
    pub tail_fraction_max: f64,
    /// Diagnostics are recorded every this many steps (and at both ends).
    pub record_stride: usize,
}

impl EvolveConfig {
    pub fn new(dt_initial: f64, t_final: f64) -> Result<Self> {
        let cfg = EvolveConfig {
            dt_initial,
            t_final,
            adapt: true,
            blowup_grad_ratio: 40.0,
            tail_fraction_max: 1e-4,
            record_stride: 10,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_initial > 0.0 && self.dt_initial.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "dt_initial must be positive and finite, got {}",
                self.dt_initial
            )));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "t_final must be positive and finite, got {}",
                self.t_final
            )));
        }
        if !(self.blowup_grad_ratio > 1.0) {
            return Err(Error::InvalidParams(format!(
                "blowup_grad_ratio must exceed 1, got {}",
                self.blowup_grad_ratio
            )));
        }
        if !(self.tail_fraction_max > 0.0 && self.tail_fraction_max < 1.0) {
            return Err(Error::InvalidParams(format!(
                "tail_fraction_max must lie in (0,1), got {}",
                self.tail_fraction_max
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParams(
                "record_stride must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// How an [`evolve`] run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum EvolveStatus {
    /// Integrated to `t_final` without incident.
    ReachedTFinal,
    /// Gradient growth past the configured ratio *and* spectral tail past its
    /// threshold: the discrete solution is blowing up.
    NumericalBlowUp,
    /// The grid lost the solution (spectral tail or non-finite values)
    /// without the gradient growth that marks genuine blow-up.
    ResolutionLoss,
}

/// Result of an [`evolve`] run.
#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub status: EvolveStatus,
    /// Time actually reached.
    pub t_end: f64,
    /// Diagnostics at `t=0`, every `record_stride` steps, and at `t_end`;
    /// timestamps strictly increasing.
    pub series: Vec<DiagnosticsRecord>,
    /// The state at `t_end`. On [`EvolveStatus::ResolutionLoss`] it may
    /// contain non-finite values; the status is the flag.
    pub final_state: Field,
    /// Extrapolated singularity time from [`detect_blowup`], when the
    /// gradient-ratio threshold was crossed during the run.
    pub blowup_time_estimate: Option<f64>,
}

/// Integrates `u0` under the full equation until `t_final`, blow-up, or loss
/// of resolution. See [`evolve_with`] for a streaming-observer variant.
pub fn evolve(u0: &Field, p: &Params, cfg: &EvolveConfig) -> Result<EvolveOutcome> {
    evolve_with(u0, p, cfg, |_, _| {})
}

/// [`evolve`] invoking `on_record` at every recorded diagnostic with the
/// record and the state snapshot (for streaming CSV rows or checkpoints).
pub fn evolve_with<F>(
    u0: &Field,
    p: &Params,
    cfg: &EvolveConfig,
    mut on_record: F,
) -> Result<EvolveOutcome>
where
    F: FnMut(&DiagnosticsRecord, &Field),
{
    cfg.validate()?;
    if !u0.is_finite() {
        return Err(Error::NonFinite("initial state".into()));
    }

    let mut f = u0.clone();
    let mut t = 0.0;
    let mut series: Vec<DiagnosticsRecord> = Vec::new();

    let first = functionals::diagnostics(&f, p, t);
    let grad0 = first.grad_norm_sq;
    let mass0 = first.mass;
    on_record(&first, &f);
    series.push(first);

    // dt ∝ min(dt_initial, c·mass/‖∇u‖²), calibrated so dt(0) = dt_initial.
    let adapt_c = if cfg.adapt && grad0 > 0.0 && mass0 > 0.0 {
        Some(cfg.dt_initial * grad0 / mass0)
    } else {
        None
    };
    let mut grad_cur = grad0;
    let mut mass_cur = mass0;

    // Hard cap against stalls when adaptation drives dt toward zero; hitting
    // it means the run could not be resolved within budget.
    let max_steps: u64 = 20_000_000;
    let mut steps: u64 = 0;

    let status = loop {
        if t >= cfg.t_final * (1.0 - 1e-12) {
            break EvolveStatus::ReachedTFinal;
        }
        let mut dt = match adapt_c {
            Some(c) if grad_cur > 0.0 => cfg.dt_initial.min(c * mass_cur / grad_cur),
            _ => cfg.dt_initial,
        };
        dt = dt.min(cfg.t_final - t);
        if !(dt > 0.0) || dt < 1e-13 * cfg.t_final {
            break EvolveStatus::ResolutionLoss;
        }

        for _ in 0..cfg.record_stride {
            step_in_place(&mut f, p, dt, StepMode::Full);
            t += dt;
            steps += 1;
            if t >= cfg.t_final * (1.0 - 1e-12) {
                break;
            }
            let remaining = cfg.t_final - t;
            if remaining < dt {
                dt = remaining;
            }
        }
        if !f.is_finite() {
            break EvolveStatus::ResolutionLoss;
        }

        let rec = functionals::diagnostics(&f, p, t);
        grad_cur = rec.grad_norm_sq;
        mass_cur = rec.mass;
        if t > series.last().map_or(f64::NEG_INFINITY, |r| r.t) {
            on_record(&rec, &f);
            series.push(rec);
        }

        let tail = field_grid::spectral_tail_fraction(&f);
        if tail >= cfg.tail_fraction_max {
            if grad0 > 0.0 && grad_cur / grad0 >= cfg.blowup_grad_ratio {
                break EvolveStatus::NumericalBlowUp;
            }
            break EvolveStatus::ResolutionLoss;
        }
        if steps >= max_steps {
            break EvolveStatus::ResolutionLoss;
        }
    };

    let estimate = detect_blowup(&series, cfg);
    Ok(EvolveOutcome {
        status,
        t_end: t,
        series,
        final_state: f,
        blowup_time_estimate: estimate,
    })
}

/// Estimates the blow-up time from a diagnostics series by fitting
/// `‖∇u‖^{-2}` linearly in `t` over the trailing records once the gradient
/// ratio has crossed the configured threshold, and extrapolating to zero.
/// Returns `None` when the threshold was never crossed or the fit does not
/// decrease.
pub fn detect_blowup(series: &[DiagnosticsRecord], cfg: &EvolveConfig) -> Option<f64> {
    let grad0 = series.first()?.grad_norm_sq;
    if !(grad0 > 0.0) {
        return None;
    }
    let crossing = series
        .iter()
        .position(|r| r.grad_norm_sq / grad0 >= cfg.blowup_grad_ratio)?;
    // Fit on the singular regime only: the (up to) eight trailing records
    // from the crossing onward, needing at least two points.
    let lo = crossing.max(series.len().saturating_sub(8));
    let lo = lo.min(series.len().checked_sub(2)?);
    let pts: Vec<(f64, f64)> = series[lo..]
        .iter()
        .filter(|r| r.grad_norm_sq > 0.0)
        .map(|r| (r.t, 1.0 / r.grad_norm_sq))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (st, sy, stt, sty) = pts.iter().fold((0.0, 0.0, 0.0, 0.0), |acc, &(t, y)| {
        (acc.0 + t, acc.1 + y, acc.2 + t * t, acc.3 + t * y)
    });
    let denom = n * stt - st * st;
    if denom.abs() < f64::EPSILON * stt.max(1.0) {
        return None;
    }
    let slope = (n * sty - st * sy) / denom;
    let intercept = (sy - slope * st) / n;
    if slope >= 0.0 {
        return None;
    }
    Some(-intercept / slope)
}
